//! Exact optima of small instances by enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{ScenarioTreeCip, SuflInstance};

pub const MAX_ORACLE_FACILITIES: usize = 12;
pub const MAX_ORACLE_SCENARIOS: usize = 8;
pub const MAX_ORACLE_VARIABLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimum: f64,
    /// Stage-I facilities (facility location only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub first_stage: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub second_stage: Vec<Vec<usize>>,
    /// Integer values per tree node (covering programs only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Vec<u64>>,
    /// Expected opening and connection parts (facility location only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facility_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection_cost: Option<f64>,
    /// Number of candidate solutions or search nodes visited.
    pub enumerated: u64,
}

fn members(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize)
        .filter(|&i| mask >> i & 1 == 1)
        .collect()
}

/// Minimizes stage-I cost plus the expected best recourse by enumerating
/// every stage-I set and, per scenario, every stage-II subset of the
/// remaining facilities (`3^F` pairs per scenario).
pub fn oracle_sufl(inst: &SuflInstance) -> Result<OracleResult> {
    let nf = inst.num_facilities();
    if nf > MAX_ORACLE_FACILITIES || inst.num_scenarios() > MAX_ORACLE_SCENARIOS {
        return Err(Error::TooLarge(format!(
            "oracle supports at most {MAX_ORACLE_FACILITIES} facilities and {MAX_ORACLE_SCENARIOS} scenarios"
        )));
    }
    let full = 1usize << nf;
    let first_cost: Vec<f64> = (0..full)
        .map(|m| {
            members(m)
                .iter()
                .map(|&i| inst.facilities[i].opening_first)
                .sum()
        })
        .collect();
    // per scenario: connection cost and stage-II opening cost of every mask
    let mut conn = Vec::with_capacity(inst.num_scenarios());
    let mut second_cost = Vec::with_capacity(inst.num_scenarios());
    for (a, sc) in inst.scenarios.iter().enumerate() {
        let nd = sc.clients.len();
        let mut nearest = vec![f64::INFINITY; full * nd];
        let mut cost = vec![if nd == 0 { 0.0 } else { f64::INFINITY }; full];
        let mut open = vec![0.0; full];
        for m in 1..full {
            let low = m.trailing_zeros() as usize;
            let rest = m & (m - 1);
            open[m] = open[rest] + inst.facilities[low].opening_second[a];
            let mut total = 0.0;
            for (k, &j) in sc.clients.iter().enumerate() {
                let d = nearest[rest * nd + k].min(inst.dist(low, j));
                nearest[m * nd + k] = d;
                total += inst.clients[j].demand * d;
            }
            cost[m] = total;
        }
        conn.push(cost);
        second_cost.push(open);
    }
    let mut best = (f64::INFINITY, 0usize, Vec::new());
    let mut enumerated = 0u64;
    for s in 0..full {
        let mut total = first_cost[s];
        let mut choice = Vec::with_capacity(inst.num_scenarios());
        for (a, sc) in inst.scenarios.iter().enumerate() {
            let comp = (full - 1) & !s;
            let mut t = comp;
            let mut local = (f64::INFINITY, 0usize);
            loop {
                enumerated += 1;
                let v = second_cost[a][t] + conn[a][s | t];
                if v < local.0 || (v == local.0 && t < local.1) {
                    local = (v, t);
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & comp;
            }
            total += sc.prob * local.0;
            choice.push(local.1);
        }
        if total < best.0 {
            best = (total, s, choice);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Infeasible);
    }
    let (optimum, s, choice) = best;
    let facility_cost = first_cost[s]
        + inst
            .scenarios
            .iter()
            .enumerate()
            .map(|(a, sc)| sc.prob * second_cost[a][choice[a]])
            .sum::<f64>();
    Ok(OracleResult {
        optimum,
        first_stage: members(s),
        second_stage: choice.iter().map(|&t| members(t)).collect(),
        values: Vec::new(),
        facility_cost: Some(facility_cost),
        connection_cost: Some(optimum - facility_cost),
        enumerated,
    })
}

struct CipSearch<'a> {
    tree: &'a ScenarioTreeCip,
    /// `(node, j)` in storage order.
    vars: Vec<(usize, usize)>,
    weight: Vec<f64>,
    cap: Vec<u64>,
    /// `(leaf path as var ids, row, b)` for rows with `b > 0`.
    rows: Vec<(Vec<usize>, usize, f64)>,
    values: Vec<u64>,
    best: f64,
    best_values: Vec<u64>,
    visited: u64,
}

impl CipSearch<'_> {
    fn coeff(&self, v: usize, row: usize) -> f64 {
        let (n, j) = self.vars[v];
        self.tree.nodes[n].vars[j].column[row]
    }

    /// Lower bound on the cost still needed once variables `< next` are
    /// fixed: each unmet row alone must be covered at the cheapest
    /// cost-per-unit among its free variables. `None` if some row cannot be met.
    fn remaining_bound(&self, next: usize) -> Option<f64> {
        let mut bound = 0.0f64;
        for (path, row, b) in &self.rows {
            let mut have = 0.0;
            let mut reach = 0.0;
            let mut rate = f64::INFINITY;
            for &v in path {
                let a = self.coeff(v, *row);
                if a <= 0.0 {
                    continue;
                }
                if v < next {
                    have += a * self.values[v] as f64;
                } else {
                    reach += a * self.cap[v] as f64;
                    rate = rate.min(self.weight[v] / a);
                }
            }
            let deficit = b - have;
            if deficit > 1e-9 {
                if reach < deficit - 1e-9 {
                    return None;
                }
                bound = bound.max(deficit * rate);
            }
        }
        Some(bound)
    }

    fn dfs(&mut self, next: usize, cost: f64) {
        self.visited += 1;
        let Some(rest) = self.remaining_bound(next) else {
            return;
        };
        if cost + rest >= self.best - 1e-12 {
            return;
        }
        if next == self.vars.len() {
            self.best = cost;
            self.best_values = self.values.clone();
            return;
        }
        for k in 0..=self.cap[next] {
            self.values[next] = k;
            self.dfs(next + 1, cost + self.weight[next] * k as f64);
        }
        self.values[next] = 0;
    }
}

/// Exact expected-cost optimum of a covering tree by depth-first branch and
/// bound over integer values, each capped at the largest value any row
/// could use.
pub fn oracle_cip(tree: &ScenarioTreeCip) -> Result<OracleResult> {
    let total = tree.num_variables();
    if total > MAX_ORACLE_VARIABLES {
        return Err(Error::TooLarge(format!(
            "oracle supports at most {MAX_ORACLE_VARIABLES} variables, got {total}"
        )));
    }
    let mut vars = Vec::new();
    let mut ids = vec![Vec::new(); tree.nodes.len()];
    for (n, node) in tree.nodes.iter().enumerate() {
        for j in 0..node.vars.len() {
            ids[n].push(vars.len());
            vars.push((n, j));
        }
    }
    let weight: Vec<f64> = vars
        .iter()
        .map(|&(n, j)| tree.path_probability(n) * tree.nodes[n].vars[j].cost)
        .collect();
    let b_max: Vec<f64> = (0..tree.rows)
        .map(|i| tree.b_by_leaf.iter().map(|b| b[i]).fold(0.0, f64::max))
        .collect();
    let cap: Vec<u64> = vars
        .iter()
        .map(|&(n, j)| {
            let col = &tree.nodes[n].vars[j].column;
            (0..tree.rows)
                .filter(|&i| col[i] > 0.0 && b_max[i] > 0.0)
                .map(|i| (b_max[i] / col[i] - 1e-9).ceil().max(0.0) as u64)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut rows = Vec::new();
    for (l, leaf) in tree.leaves().into_iter().enumerate() {
        let path: Vec<usize> = tree
            .path(leaf)
            .iter()
            .flat_map(|&n| ids[n].clone())
            .collect();
        for (i, &b) in tree.b_by_leaf[l].iter().enumerate() {
            if b > 0.0 {
                rows.push((path.clone(), i, b));
            }
        }
    }
    let mut search = CipSearch {
        tree,
        values: vec![0; vars.len()],
        best_values: cap.clone(),
        best: f64::INFINITY,
        vars,
        weight,
        cap,
        rows,
        visited: 0,
    };
    search.dfs(0, 0.0);
    if !search.best.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut values: Vec<Vec<u64>> = tree.nodes.iter().map(|n| vec![0; n.vars.len()]).collect();
    for (v, &(n, j)) in search.vars.iter().enumerate() {
        values[n][j] = search.best_values[v];
    }
    Ok(OracleResult {
        optimum: search.best,
        first_stage: Vec::new(),
        second_stage: Vec::new(),
        values,
        facility_cost: None,
        connection_cost: None,
        enumerated: search.visited,
    })
}
