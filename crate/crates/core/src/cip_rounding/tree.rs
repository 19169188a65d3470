use rand::Rng;

use super::{round_scaled, DependentRounder};
use crate::error::{Error, Result};
use crate::instances::ScenarioTreeCip;
use crate::lp::CipSolution;

/// Integer values `y[node][j]` for every node of the tree. Only one
/// root-to-leaf path is realized, but rounding every node in one trial lets
/// a trial be evaluated on all leaves at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeRounding {
    pub y: Vec<Vec<u64>>,
}

/// Expected cost `sum_node pi(node) * c_node . y_node`.
pub fn tree_cost(tree: &ScenarioTreeCip, y: &TreeRounding) -> f64 {
    tree.nodes
        .iter()
        .enumerate()
        .map(|(n, node)| {
            tree.path_probability(n)
                * node
                    .vars
                    .iter()
                    .zip(&y.y[n])
                    .map(|(v, &k)| v.cost * k as f64)
                    .sum::<f64>()
        })
        .sum()
}

/// `(leaf index, row)` pairs whose constraint the rounding leaves unmet.
pub fn coverage_failures(tree: &ScenarioTreeCip, y: &TreeRounding) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (l, leaf) in tree.leaves().into_iter().enumerate() {
        let path = tree.path(leaf);
        for (i, &b) in tree.b_by_leaf[l].iter().enumerate() {
            let lhs: f64 = path
                .iter()
                .map(|&n| {
                    tree.nodes[n]
                        .vars
                        .iter()
                        .zip(&y.y[n])
                        .map(|(v, &k)| v.column[i] * k as f64)
                        .sum::<f64>()
                })
                .sum();
            if lhs < b - 1e-9 {
                out.push((l, i));
            }
        }
    }
    out
}

fn check_shape(tree: &ScenarioTreeCip, sol: &CipSolution) -> Result<()> {
    let ok = sol.x.len() == tree.nodes.len()
        && sol
            .x
            .iter()
            .zip(&tree.nodes)
            .all(|(xs, n)| xs.len() == n.vars.len());
    if ok {
        Ok(())
    } else {
        Err(Error::validation(
            "solution",
            "shape does not match the tree",
        ))
    }
}

/// Independent rounding of every node variable with scaling `lambda`.
/// Nodes are processed parent before child.
pub fn round_tree_independent<R: Rng + ?Sized>(
    tree: &ScenarioTreeCip,
    sol: &CipSolution,
    lambda: f64,
    rng: &mut R,
) -> Result<TreeRounding> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "lambda {lambda} must be at least 1"
        )));
    }
    check_shape(tree, sol)?;
    let y = sol
        .x
        .iter()
        .map(|xs| xs.iter().map(|&x| round_scaled(x, lambda, rng)).collect())
        .collect();
    Ok(TreeRounding { y })
}

/// Largest number of variables of one node with a nonzero entry in a row,
/// provided every column is 0/1 and identical across nodes.
pub fn tree_degree(tree: &ScenarioTreeCip) -> Result<usize> {
    let base = &tree.nodes[0].vars;
    for (n, node) in tree.nodes.iter().enumerate() {
        if node.vars.len() != base.len()
            || node
                .vars
                .iter()
                .zip(base)
                .any(|(v, w)| v.column != w.column)
        {
            return Err(Error::validation(
                format!("nodes[{n}]"),
                "dependent rounding needs the same columns at every node",
            ));
        }
    }
    if base
        .iter()
        .flat_map(|v| &v.column)
        .any(|&a| a != 0.0 && a != 1.0)
    {
        return Err(Error::validation(
            "column",
            "dependent rounding needs 0/1 columns",
        ));
    }
    Ok((0..tree.rows)
        .map(|i| base.iter().filter(|v| v.column[i] == 1.0).count())
        .max()
        .unwrap_or(0))
}

/// Dependent rounding on a tree: each variable keeps one rounder per node,
/// cloned from the parent's after the parent's value is fed, so every
/// root-to-leaf path sees the procedure run on its own stage sequence.
pub fn round_tree_dependent<R: Rng + ?Sized>(
    tree: &ScenarioTreeCip,
    sol: &CipSolution,
    rng: &mut R,
) -> Result<TreeRounding> {
    check_shape(tree, sol)?;
    let degree = tree_degree(tree)? as f64;
    let nv = tree.nodes[0].vars.len();
    let mut states: Vec<Vec<DependentRounder>> = Vec::with_capacity(tree.nodes.len());
    let mut y = Vec::with_capacity(tree.nodes.len());
    for (n, node) in tree.nodes.iter().enumerate() {
        let mut row = match node.parent {
            Some(p) => states[p].clone(),
            None => vec![DependentRounder::new(); nv],
        };
        let mut out = Vec::with_capacity(nv);
        for (j, r) in row.iter_mut().enumerate() {
            let z = (degree * sol.x[n][j]).min(1.0);
            out.push(u64::from(r.feed(z, rng)?));
        }
        states.push(row);
        y.push(out);
    }
    Ok(TreeRounding { y })
}
