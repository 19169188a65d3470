//! Dense revised simplex with Bland's anti-cycling rule.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations after each pivot, with a full refactorization every
//! [`REFACTOR_EVERY`] pivots. Pricing picks the lowest-index improving
//! column and the ratio test breaks ties by lowest basic index, so a given
//! program always follows the same pivot sequence.

use super::{Direction, LinearProgram, Sense};
use crate::error::{Error, Result};

type Row = (Vec<(usize, f64)>, Sense, f64);

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual value per constraint row, signed so that the objective
    /// equals `sum(rhs * dual)` plus bound terms.
    pub row_duals: Vec<f64>,
    /// `c_j - a_j^T dual` for each variable (in the program's own direction).
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    /// Largest product of a dual value and the slack it prices: row duals
    /// against row slacks and reduced costs against bound distances.
    pub fn complementary_slackness_residual(&self, lp: &LinearProgram) -> f64 {
        let mut worst = 0.0f64;
        for (row, y) in lp.rows.iter().zip(&self.row_duals) {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * self.x[j]).sum();
            worst = worst.max((y * (lhs - row.rhs)).abs());
        }
        for (j, rc) in self.reduced_costs.iter().enumerate() {
            let gap = (self.x[j] - lp.lower[j])
                .min(lp.upper[j] - self.x[j])
                .max(0.0);
            worst = worst.max((rc * gap).abs());
        }
        worst
    }
}

struct StandardForm {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    n_struct: usize,
    first_artificial: usize,
    /// +1 or -1 per row, the factor the original row was multiplied by.
    row_sign: Vec<f64>,
    /// Number of rows coming from the original program (the rest are bounds).
    n_orig_rows: usize,
    initial_basis: Vec<usize>,
}

fn to_standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.num_vars();
    let dir = match lp.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    // rows: original rows followed by finite upper bounds
    let mut rows: Vec<Row> = lp
        .rows
        .iter()
        .map(|r| {
            let shift: f64 = r.coeffs.iter().map(|&(j, a)| a * lp.lower[j]).sum();
            (r.coeffs.clone(), r.sense, r.rhs - shift)
        })
        .collect();
    let n_orig_rows = rows.len();
    for j in 0..n {
        if lp.upper[j].is_finite() {
            rows.push((vec![(j, 1.0)], Sense::Le, lp.upper[j] - lp.lower[j]));
        }
    }
    let m = rows.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = vec![0.0; m];
    let mut row_sign = vec![1.0; m];
    let mut slack_of_row: Vec<Option<(usize, f64)>> = vec![None; m];
    for (r, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[r] = sign;
        b[r] = sign * rhs;
        for &(j, a) in coeffs {
            if a != 0.0 {
                cols[j].push((r, sign * a));
            }
        }
        let slack = match sense {
            Sense::Le => Some(sign),
            Sense::Ge => Some(-sign),
            Sense::Eq => None,
        };
        if let Some(s) = slack {
            slack_of_row[r] = Some((cols.len(), s));
            cols.push(vec![(r, s)]);
        }
    }
    // merge duplicate row entries within a column
    for col in cols.iter_mut().take(n) {
        col.sort_by_key(|&(r, _)| r);
        col.dedup_by(|next, prev| {
            if next.0 == prev.0 {
                prev.1 += next.1;
                true
            } else {
                false
            }
        });
    }
    let first_artificial = cols.len();
    let mut initial_basis = vec![0; m];
    for r in 0..m {
        match slack_of_row[r] {
            Some((col, s)) if s > 0.0 => initial_basis[r] = col,
            _ => {
                initial_basis[r] = cols.len();
                cols.push(vec![(r, 1.0)]);
            }
        }
    }
    let mut cost = vec![0.0; cols.len()];
    for j in 0..n {
        cost[j] = dir * lp.objective[j];
    }
    StandardForm {
        m,
        cols,
        b,
        cost,
        n_struct: n,
        first_artificial,
        row_sign,
        n_orig_rows,
        initial_basis,
    }
}

struct Revised<'a> {
    sf: &'a StandardForm,
    basis: Vec<usize>,
    basic_pos: Vec<Option<usize>>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Revised<'a> {
    fn new(sf: &'a StandardForm) -> Result<Self> {
        let m = sf.m;
        let mut basic_pos = vec![None; sf.cols.len()];
        for (r, &j) in sf.initial_basis.iter().enumerate() {
            basic_pos[j] = Some(r);
        }
        let mut s = Revised {
            sf,
            basis: sf.initial_basis.clone(),
            basic_pos,
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            since_refactor: 0,
            iterations: 0,
        };
        s.refactor()?;
        Ok(s)
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<()> {
        let m = self.sf.m;
        let mut a = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.sf.cols[j] {
                a[r * m + pos] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = a[c * m + c].abs();
            for r in (c + 1)..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-14 {
                return Err(Error::Internal(
                    "singular basis during refactorization".into(),
                ));
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.xb[r] = row
                .iter()
                .zip(&self.sf.b)
                .map(|(x, y)| x * y)
                .sum::<f64>()
                .max(0.0);
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut pi = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (p, v) in pi.iter_mut().zip(row) {
                    *p += c * v;
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, cost: &[f64], pi: &[f64], j: usize) -> f64 {
        cost[j] - self.sf.cols[j].iter().map(|&(r, a)| pi[r] * a).sum::<f64>()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut u = vec![0.0; m];
        for &(k, a) in &self.sf.cols[j] {
            for (r, ur) in u.iter_mut().enumerate() {
                *ur += self.binv[r * m + k] * a;
            }
        }
        u
    }

    fn pivot(&mut self, p: usize, j: usize, u: &[f64]) -> Result<()> {
        let m = self.sf.m;
        let d = u[p];
        for k in 0..m {
            self.binv[p * m + k] /= d;
        }
        self.xb[p] /= d;
        let (xp, prow) = (self.xb[p], self.binv[p * m..(p + 1) * m].to_vec());
        for r in 0..m {
            if r == p || u[r] == 0.0 {
                continue;
            }
            let f = u[r];
            for k in 0..m {
                self.binv[r * m + k] -= f * prow[k];
            }
            self.xb[r] -= f * xp;
            if self.xb[r] < 0.0 && self.xb[r] > -FEAS_TOL {
                self.xb[r] = 0.0;
            }
        }
        let leaving = self.basis[p];
        self.basic_pos[leaving] = None;
        self.basic_pos[j] = Some(p);
        self.basis[p] = j;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn run(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<Outcome> {
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(Error::IterationLimit(self.iterations));
            }
            let pi = self.duals(cost);
            let entering = (0..self.sf.cols.len()).find(|&j| {
                self.basic_pos[j].is_none()
                    && allowed(j)
                    && self.reduced_cost(cost, &pi, j) < -OPT_TOL
            });
            let Some(j) = entering else {
                return Ok(Outcome::Optimal);
            };
            let u = self.column(j);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.sf.m {
                if u[r] > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / u[r];
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((p, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie {
                                Some((r, ratio))
                            } else if tie && self.basis[r] < self.basis[p] {
                                Some((r, best.min(ratio)))
                            } else {
                                Some((p, best))
                            }
                        }
                    };
                }
            }
            let Some((p, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(p, j, &u)?;
        }
    }
}

/// Solves a linear program to optimality.
///
/// Returns [`Error::Infeasible`] or [`Error::Unbounded`] for programs
/// without an optimum.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let sf = to_standard_form(lp);
    let m = sf.m;
    let mut s = Revised::new(&sf)?;

    // Phase I
    if sf.first_artificial < sf.cols.len() {
        let mut phase1 = vec![0.0; sf.cols.len()];
        for c in phase1.iter_mut().skip(sf.first_artificial) {
            *c = 1.0;
        }
        match s.run(&phase1, &|_| true)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(Error::Internal("phase I cannot be unbounded".into()))
            }
        }
        s.refactor()?;
        let infeas: f64 = (0..m)
            .filter(|&r| s.basis[r] >= sf.first_artificial)
            .map(|r| s.xb[r])
            .sum();
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if infeas > 1e-7 * scale {
            return Err(Error::Infeasible);
        }
        // drive zero-level artificials out of the basis where possible
        for p in 0..m {
            if s.basis[p] < sf.first_artificial {
                continue;
            }
            s.xb[p] = 0.0;
            let row: Vec<f64> = s.binv[p * m..(p + 1) * m].to_vec();
            let candidate = (0..sf.first_artificial).find(|&j| {
                s.basic_pos[j].is_none()
                    && sf.cols[j]
                        .iter()
                        .map(|&(r, a)| row[r] * a)
                        .sum::<f64>()
                        .abs()
                        > PIVOT_TOL
            });
            if let Some(j) = candidate {
                let u = s.column(j);
                s.pivot(p, j, &u)?;
            }
        }
    }

    // Phase II
    let first_art = sf.first_artificial;
    match s.run(&sf.cost, &|j| j < first_art)? {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Err(Error::Unbounded),
    }
    s.refactor()?;

    let mut xs = vec![0.0; sf.cols.len()];
    for (r, &j) in s.basis.iter().enumerate() {
        xs[j] = s.xb[r];
    }
    let x: Vec<f64> = (0..sf.n_struct).map(|j| lp.lower[j] + xs[j]).collect();
    let pi = s.duals(&sf.cost);
    let dir = match lp.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let row_duals: Vec<f64> = (0..sf.n_orig_rows)
        .map(|r| dir * pi[r] * sf.row_sign[r])
        .collect();
    let mut reduced_costs = lp.objective.clone();
    for (row, y) in lp.rows.iter().zip(&row_duals) {
        for &(j, a) in &row.coeffs {
            reduced_costs[j] -= a * y;
        }
    }
    Ok(LpSolution {
        objective: lp.evaluate(&x),
        x,
        row_duals,
        reduced_costs,
        iterations: s.iterations,
    })
}
