//! Problem instances: two-stage stochastic facility location and
//! scenario-tree covering integer programs.
//!
//! Both kinds are immutable once validated and can be shared freely across
//! rounding trials.

mod generate;
mod json;
mod metric;

pub use generate::{generate, generate_cip_tree, generate_sufl, GeneratorConfig, InstanceKind};
pub use json::{from_json_str, load_instance, to_json_string};
pub use metric::{validate_metric, MetricViolation, Point};

use crate::error::{Error, Result};

/// Tolerance used for probability sums.
pub const PROB_TOL: f64 = 1e-9;
/// Slack allowed in triangle-inequality checks.
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Facility {
    pub id: String,
    /// Stage-I opening cost `f^I`.
    pub opening_first: f64,
    /// Stage-II opening cost `f^A`, one entry per scenario.
    pub opening_second: Vec<f64>,
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Client {
    pub id: String,
    pub demand: f64,
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub prob: f64,
    /// Sorted, duplicate-free client indices.
    pub clients: Vec<usize>,
}

/// Two-stage stochastic uncapacitated facility location.
#[derive(Debug, Clone, PartialEq)]
pub struct SuflInstance {
    pub facilities: Vec<Facility>,
    pub clients: Vec<Client>,
    /// `distances[i][j]`: facility `i` to client `j`.
    pub distances: Vec<Vec<f64>>,
    pub scenarios: Vec<Scenario>,
    /// Optional full distance matrix over facilities followed by clients.
    pub metric: Option<Vec<Vec<f64>>>,
}

impl SuflInstance {
    pub fn num_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    #[inline]
    pub fn dist(&self, facility: usize, client: usize) -> f64 {
        self.distances[facility][client]
    }

    /// Structural and metric validation. Scenarios with zero probability
    /// must already have been removed (see [`SuflInstance::drop_null_scenarios`]).
    pub fn validate(&self) -> Result<()> {
        let nf = self.num_facilities();
        let nd = self.num_clients();
        let m = self.num_scenarios();
        if nf == 0 {
            return Err(Error::validation(
                "facilities",
                "at least one facility required",
            ));
        }
        if nd == 0 {
            return Err(Error::validation("clients", "at least one client required"));
        }
        if m == 0 {
            return Err(Error::validation(
                "scenarios",
                "at least one scenario required",
            ));
        }
        for (i, f) in self.facilities.iter().enumerate() {
            check_cost(&format!("facilities[{i}].f1"), f.opening_first)?;
            if f.opening_second.len() != m {
                return Err(Error::validation(
                    format!("facilities[{i}].f2_by_scenario"),
                    format!("expected {m} entries, found {}", f.opening_second.len()),
                ));
            }
            for (a, &c) in f.opening_second.iter().enumerate() {
                check_cost(&format!("facilities[{i}].f2_by_scenario[{a}]"), c)?;
            }
        }
        for (j, c) in self.clients.iter().enumerate() {
            check_cost(&format!("clients[{j}].demand"), c.demand)?;
        }
        if self.distances.len() != nf {
            return Err(Error::validation(
                "distances",
                format!("expected {nf} rows, found {}", self.distances.len()),
            ));
        }
        for (i, row) in self.distances.iter().enumerate() {
            if row.len() != nd {
                return Err(Error::validation(
                    format!("distances[{i}]"),
                    format!("expected {nd} columns, found {}", row.len()),
                ));
            }
            for (j, &d) in row.iter().enumerate() {
                check_cost(&format!("distances[{i}][{j}]"), d)?;
            }
        }
        let mut total = 0.0;
        for (a, s) in self.scenarios.iter().enumerate() {
            if !(s.prob.is_finite() && s.prob >= 0.0) {
                return Err(Error::validation(
                    format!("scenarios[{a}].prob"),
                    "probabilities must be finite and nonnegative",
                ));
            }
            total += s.prob;
            if s.clients.is_empty() {
                return Err(Error::validation(
                    format!("scenarios[{a}].clients"),
                    "scenario client set must be nonempty",
                ));
            }
            if s.clients.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(
                    format!("scenarios[{a}].clients"),
                    "client indices must be sorted and distinct",
                ));
            }
            if let Some(&bad) = s.clients.iter().find(|&&j| j >= nd) {
                return Err(Error::validation(
                    format!("scenarios[{a}].clients"),
                    format!("client index {bad} out of range"),
                ));
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::validation(
                "scenarios.prob",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        if let Some(metric) = &self.metric {
            let n = nf + nd;
            if metric.len() != n || metric.iter().any(|r| r.len() != n) {
                return Err(Error::validation(
                    "metric",
                    format!("expected a {n}x{n} matrix"),
                ));
            }
            for i in 0..nf {
                for j in 0..nd {
                    if (metric[i][nf + j] - self.distances[i][j]).abs() > METRIC_TOL
                        || (metric[nf + j][i] - self.distances[i][j]).abs() > METRIC_TOL
                    {
                        return Err(Error::validation(
                            format!("metric[{i}][{}]", nf + j),
                            "disagrees with the facility-client distance",
                        ));
                    }
                }
            }
        }
        let violations = validate_metric(self);
        if let Some(v) = violations.first() {
            return Err(Error::validation(
                "distances",
                format!(
                    "triangle inequality violated ({} violations), e.g. {v}",
                    violations.len()
                ),
            ));
        }
        Ok(())
    }

    /// Removes scenarios with `p_A = 0` along with their stage-II costs.
    /// Returns the indices that were dropped.
    pub fn drop_null_scenarios(&mut self) -> Vec<usize> {
        let dropped: Vec<usize> = (0..self.scenarios.len())
            .filter(|&a| self.scenarios[a].prob == 0.0)
            .collect();
        if dropped.is_empty() {
            return dropped;
        }
        for &a in dropped.iter().rev() {
            log::warn!("dropping scenario {a}: zero probability");
            self.scenarios.remove(a);
            for f in &mut self.facilities {
                if a < f.opening_second.len() {
                    f.opening_second.remove(a);
                }
            }
        }
        dropped
    }
}

fn check_cost(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::validation(field, "value must be finite"));
    }
    if value < 0.0 {
        return Err(Error::validation(field, format!("negative cost {value}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CipVar {
    pub cost: f64,
    /// Column of the covering matrix, one entry per row, each in `[0, 1]`.
    pub column: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Transition probability from the parent (1 at the root).
    pub prob: f64,
    pub vars: Vec<CipVar>,
}

/// k-stage covering integer program over a scenario tree.
///
/// Nodes are stored parent-before-child. Leaves are the nodes at depth
/// `stages - 1`, taken in storage order; `b_by_leaf[l]` is the right-hand
/// side revealed at leaf `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTreeCip {
    pub stages: usize,
    pub rows: usize,
    pub b_by_leaf: Vec<Vec<f64>>,
    pub nodes: Vec<TreeNode>,
}

impl ScenarioTreeCip {
    pub fn depth(&self, node: usize) -> usize {
        let mut d = 0;
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            d += 1;
            cur = p;
        }
        d
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&c| self.nodes[c].parent == Some(node))
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| self.depth(n) + 1 == self.stages)
            .collect()
    }

    /// Root-to-node path, root first.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Product of transition probabilities from the root.
    pub fn path_probability(&self, node: usize) -> f64 {
        self.path(node)
            .iter()
            .map(|&n| self.nodes[n].prob)
            .product()
    }

    /// `B = min { b_i : b_i >= 1 }` over all leaves, if any such row exists.
    pub fn min_large_rhs(&self) -> Option<f64> {
        self.b_by_leaf
            .iter()
            .flatten()
            .copied()
            .filter(|&b| b >= 1.0)
            .fold(None, |acc: Option<f64>, b| {
                Some(acc.map_or(b, |a| a.min(b)))
            })
    }

    pub fn num_variables(&self) -> usize {
        self.nodes.iter().map(|n| n.vars.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::validation("stages", "at least one stage required"));
        }
        if self.nodes.is_empty() {
            return Err(Error::validation("nodes", "tree has no nodes"));
        }
        if self.nodes[0].parent.is_some() {
            return Err(Error::validation(
                "nodes[0].parent",
                "first node must be the root",
            ));
        }
        for (n, node) in self.nodes.iter().enumerate().skip(1) {
            match node.parent {
                None => {
                    return Err(Error::validation(
                        format!("nodes[{n}].parent"),
                        "only the first node may be a root",
                    ))
                }
                Some(p) if p >= n => {
                    return Err(Error::validation(
                        format!("nodes[{n}].parent"),
                        "parents must precede their children",
                    ))
                }
                _ => {}
            }
        }
        for (n, node) in self.nodes.iter().enumerate() {
            if !(node.prob.is_finite() && (0.0..=1.0).contains(&node.prob)) {
                return Err(Error::validation(
                    format!("nodes[{n}].prob"),
                    "transition probabilities must lie in [0, 1]",
                ));
            }
            if self.depth(n) >= self.stages {
                return Err(Error::validation(
                    format!("nodes[{n}]"),
                    format!("node deeper than {} stages", self.stages),
                ));
            }
            for (j, v) in node.vars.iter().enumerate() {
                check_cost(&format!("nodes[{n}].vars[{j}].cost"), v.cost)?;
                if v.column.len() != self.rows {
                    return Err(Error::validation(
                        format!("nodes[{n}].vars[{j}].column"),
                        format!("expected {} entries, found {}", self.rows, v.column.len()),
                    ));
                }
                if v.column.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
                    return Err(Error::validation(
                        format!("nodes[{n}].vars[{j}].column"),
                        "matrix entries must lie in [0, 1]",
                    ));
                }
            }
        }
        for n in 0..self.nodes.len() {
            let children = self.children(n);
            let depth = self.depth(n);
            if depth + 1 < self.stages {
                if children.is_empty() {
                    return Err(Error::validation(
                        format!("nodes[{n}]"),
                        "internal node above the last stage has no children",
                    ));
                }
                let total: f64 = children.iter().map(|&c| self.nodes[c].prob).sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::validation(
                        format!("nodes[{n}]"),
                        format!("child probabilities sum to {total}, expected 1"),
                    ));
                }
            }
        }
        if (self.nodes[0].prob - 1.0).abs() > PROB_TOL {
            return Err(Error::validation(
                "nodes[0].prob",
                "root probability must be 1",
            ));
        }
        let leaves = self.leaves();
        if leaves.len() != self.b_by_leaf.len() {
            return Err(Error::validation(
                "b_by_leaf",
                format!(
                    "expected {} leaf vectors, found {}",
                    leaves.len(),
                    self.b_by_leaf.len()
                ),
            ));
        }
        for (l, b) in self.b_by_leaf.iter().enumerate() {
            if b.len() != self.rows {
                return Err(Error::validation(
                    format!("b_by_leaf[{l}]"),
                    format!("expected {} entries, found {}", self.rows, b.len()),
                ));
            }
            for (i, &v) in b.iter().enumerate() {
                check_cost(&format!("b_by_leaf[{l}][{i}]"), v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Sufl(SuflInstance),
    CipTree(ScenarioTreeCip),
}

impl Instance {
    pub fn as_sufl(&self) -> Option<&SuflInstance> {
        match self {
            Instance::Sufl(s) => Some(s),
            Instance::CipTree(_) => None,
        }
    }

    pub fn as_cip(&self) -> Option<&ScenarioTreeCip> {
        match self {
            Instance::CipTree(t) => Some(t),
            Instance::Sufl(_) => None,
        }
    }
}

/// The two-client instance showing that a scenario's dual budget can exceed
/// its primal value. `epsilon` is the stage-I cost of the second facility.
pub fn dual_budget_example(epsilon: f64) -> SuflInstance {
    let facility = |id: &str, f1: f64| Facility {
        id: id.to_string(),
        opening_first: f1,
        opening_second: vec![4.0, 4.0],
        position: None,
    };
    let client = |id: &str| Client {
        id: id.to_string(),
        demand: 1.0,
        position: None,
    };
    SuflInstance {
        facilities: vec![facility("f1", 2.0), facility("f2", epsilon)],
        clients: vec![client("c1"), client("c2")],
        distances: vec![vec![1.0, 1.0], vec![3.0, 1.0]],
        scenarios: vec![
            Scenario {
                prob: 0.5,
                clients: vec![0],
            },
            Scenario {
                prob: 0.5,
                clients: vec![1],
            },
        ],
        metric: None,
    }
}
