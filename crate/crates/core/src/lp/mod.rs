//! Linear programs: a small modelling layer, a dense revised simplex solver,
//! the facility-location and covering relaxations, and the decomposition and
//! splitting utilities shared by the rounding algorithms.

mod cip;
mod decompose;
mod simplex;
mod sufl;

use std::collections::HashMap;

pub use cip::{build_cip_lp, solve_cip_lp, CipLp, CipSolution};
pub use decompose::{
    decompose, split_stage_copies, split_to_saturation, CopyTable, DecomposedSolution, Piece,
    SaturatedSupport, Stage,
};
pub use simplex::{solve, LpSolution};
pub use sufl::{
    build_sufl_dual, build_sufl_primal, build_ufl_lp, check_complementary_slackness, solve_sufl,
    solve_sufl_dual, CostScale, DualSolution, FractionalSolution, SlacknessViolation,
    SolutionDocument, SuflDualLp, SuflLp, UflLp,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear program over named, bounded variables.
///
/// Variables default to `[0, inf)`. Constraint rows are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LinearProgram {
    pub fn new(direction: Direction) -> Self {
        LinearProgram {
            direction,
            objective: Vec::new(),
            rows: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            names: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Adds a variable with objective coefficient `cost`. Names must be unique.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::validation(name, "duplicate variable name"));
        }
        let id = self.objective.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.objective.push(cost);
        self.lower.push(0.0);
        self.upper.push(f64::INFINITY);
        Ok(id)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Ge => row.rhs - lhs,
                Sense::Le => lhs - row.rhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::validation(
                    self.name(j),
                    "objective coefficient is not finite",
                ));
            }
            if !self.lower[j].is_finite() {
                return Err(Error::validation(
                    self.name(j),
                    "lower bound must be finite",
                ));
            }
            if self.upper[j].is_nan() || self.upper[j] < self.lower[j] {
                return Err(Error::validation(self.name(j), "empty bound interval"));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::validation(
                    format!("row {r}"),
                    "right-hand side is not finite",
                ));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.num_vars() {
                    return Err(Error::validation(
                        format!("row {r}"),
                        format!("unknown variable {j}"),
                    ));
                }
                if !a.is_finite() {
                    return Err(Error::validation(
                        format!("row {r}"),
                        "coefficient is not finite",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut lp = LinearProgram::new(Direction::Minimize);
        lp.add_var("x", 1.0).unwrap();
        assert!(lp.add_var("x", 2.0).is_err());
        assert_eq!(lp.var("x"), Some(0));
    }

    #[test]
    fn non_finite_coefficients_rejected() {
        let mut lp = LinearProgram::new(Direction::Minimize);
        let x = lp.add_var("x", 1.0).unwrap();
        lp.add_row(vec![(x, f64::NAN)], Sense::Ge, 1.0);
        assert!(lp.validate().is_err());
    }
}
