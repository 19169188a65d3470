//! Covering relaxation of a scenario-tree CIP.

use super::{solve, Direction, LinearProgram, Sense};
use crate::error::Result;
use crate::instances::ScenarioTreeCip;

/// The relaxation with `var[node][j]` mapping node variables to LP columns.
#[derive(Debug, Clone)]
pub struct CipLp {
    pub lp: LinearProgram,
    pub var: Vec<Vec<usize>>,
}

/// Fractional values `x[node][j]` and the expected cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CipSolution {
    pub x: Vec<Vec<f64>>,
    pub objective: f64,
}

pub fn build_cip_lp(tree: &ScenarioTreeCip) -> Result<CipLp> {
    let mut lp = LinearProgram::new(Direction::Minimize);
    let mut var = Vec::with_capacity(tree.nodes.len());
    for (n, node) in tree.nodes.iter().enumerate() {
        let pi = tree.path_probability(n);
        var.push(
            node.vars
                .iter()
                .enumerate()
                .map(|(j, v)| lp.add_var(format!("x[{n}][{j}]"), pi * v.cost))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    for (l, leaf) in tree.leaves().into_iter().enumerate() {
        let path = tree.path(leaf);
        for (i, &b) in tree.b_by_leaf[l].iter().enumerate() {
            if b <= 0.0 {
                continue;
            }
            let mut coeffs = Vec::new();
            for &n in &path {
                for (j, v) in tree.nodes[n].vars.iter().enumerate() {
                    if v.column[i] != 0.0 {
                        coeffs.push((var[n][j], v.column[i]));
                    }
                }
            }
            lp.add_row(coeffs, Sense::Ge, b);
        }
    }
    Ok(CipLp { lp, var })
}

pub fn solve_cip_lp(tree: &ScenarioTreeCip) -> Result<CipSolution> {
    let model = build_cip_lp(tree)?;
    let sol = solve(&model.lp)?;
    let x = model
        .var
        .iter()
        .map(|vs| {
            vs.iter()
                .map(|&k| if sol.x[k] < 1e-12 { 0.0 } else { sol.x[k] })
                .collect()
        })
        .collect();
    Ok(CipSolution {
        x,
        objective: sol.objective,
    })
}
