//! Seeded random instance generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    CipVar, Client, Facility, Instance, Scenario, ScenarioTreeCip, SuflInstance, TreeNode,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    Sufl,
    VertexCover,
    SetCover,
    GeneralCip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub kind: InstanceKind,
    pub facilities: usize,
    pub clients: usize,
    pub scenarios: usize,
    pub stages: usize,
    /// Children per internal tree node.
    pub arity: usize,
    /// Elements for set cover, rows for general CIPs (vertex cover derives rows from edges).
    pub rows: usize,
    /// Vertices, sets, or variables per tree node.
    pub columns: usize,
    pub opening_cost: (f64, f64),
    pub variable_cost: (f64, f64),
    pub distance_scale: f64,
    /// Multiplier range applied to stage-I costs to obtain later-stage costs.
    pub inflation: (f64, f64),
    /// Points in the unit square with Euclidean distances.
    pub geometric: bool,
    pub edge_probability: f64,
    pub set_density: f64,
    /// Smallest right-hand side among rows with `b_i >= 1` (general CIPs).
    pub b_target: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            kind: InstanceKind::Sufl,
            facilities: 4,
            clients: 6,
            scenarios: 3,
            stages: 2,
            arity: 2,
            rows: 5,
            columns: 6,
            opening_cost: (1.0, 4.0),
            variable_cost: (1.0, 3.0),
            distance_scale: 1.0,
            inflation: (1.0, 4.0),
            geometric: true,
            edge_probability: 0.3,
            set_density: 0.3,
            b_target: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("facilities", self.facilities),
            ("clients", self.clients),
            ("scenarios", self.scenarios),
            ("stages", self.stages),
            ("arity", self.arity),
            ("rows", self.rows),
            ("columns", self.columns),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::validation(name, "size must be at least 1"));
            }
        }
        let ranges = [
            ("opening_cost", self.opening_cost),
            ("variable_cost", self.variable_cost),
            ("inflation", self.inflation),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::validation(
                    name,
                    format!("invalid range [{lo}, {hi}]"),
                ));
            }
        }
        if !(self.distance_scale.is_finite() && self.distance_scale >= 0.0) {
            return Err(Error::validation(
                "distance_scale",
                "must be finite and nonnegative",
            ));
        }
        for (name, p) in [
            ("edge_probability", self.edge_probability),
            ("set_density", self.set_density),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(name, "must lie in [0, 1]"));
            }
        }
        if self.kind == InstanceKind::VertexCover && self.columns < 2 {
            return Err(Error::validation(
                "columns",
                "vertex cover needs at least two vertices",
            ));
        }
        if self.kind == InstanceKind::GeneralCip
            && !(self.b_target >= 1.0 && self.b_target.is_finite())
        {
            return Err(Error::validation("b_target", "must be at least 1"));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn normalized_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    // push the rounding residue into the last entry
    let head: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - head;
    p
}

pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    Ok(match config.kind {
        InstanceKind::Sufl => Instance::Sufl(generate_sufl(config)?),
        _ => Instance::CipTree(generate_cip_tree(config)?),
    })
}

/// Deterministic function of the config (and in particular of its seed).
pub fn generate_sufl(config: &GeneratorConfig) -> Result<SuflInstance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nf = config.facilities;
    let nd = config.clients;
    let m = config.scenarios;

    let mut facilities = Vec::with_capacity(nf);
    for i in 0..nf {
        let f1 = uniform(&mut rng, config.opening_cost);
        let f2 = (0..m)
            .map(|_| f1 * uniform(&mut rng, config.inflation))
            .collect();
        facilities.push(Facility {
            id: format!("f{i}"),
            opening_first: f1,
            opening_second: f2,
            position: None,
        });
    }
    let mut clients: Vec<Client> = (0..nd)
        .map(|j| Client {
            id: format!("c{j}"),
            demand: 1.0,
            position: None,
        })
        .collect();

    let distances = if config.geometric {
        let mut point = || [rng.random::<f64>(), rng.random::<f64>()];
        for f in facilities.iter_mut() {
            f.position = Some(point());
        }
        for c in clients.iter_mut() {
            c.position = Some(point());
        }
        facilities
            .iter()
            .map(|f| {
                let p = f.position.unwrap();
                clients
                    .iter()
                    .map(|c| {
                        let q = c.position.unwrap();
                        config.distance_scale
                            * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                    })
                    .collect()
            })
            .collect()
    } else {
        // every value in [s, 2s] satisfies the bipartite triangle inequality
        let s = config.distance_scale;
        (0..nf)
            .map(|_| (0..nd).map(|_| uniform(&mut rng, (s, 2.0 * s))).collect())
            .collect()
    };

    let probs = normalized_weights(&mut rng, m);
    let scenarios = probs
        .into_iter()
        .map(|prob| {
            let clients = loop {
                let set: Vec<usize> = (0..nd).filter(|_| rng.random_bool(0.5)).collect();
                if !set.is_empty() {
                    break set;
                }
            };
            Scenario { prob, clients }
        })
        .collect();

    let inst = SuflInstance {
        facilities,
        clients,
        distances,
        scenarios,
        metric: None,
    };
    inst.validate()?;
    Ok(inst)
}

/// Scenario tree with `stages` levels and `arity` children per internal node.
/// Leaves are the deepest nodes in storage (breadth-first) order.
pub fn generate_cip_tree(config: &GeneratorConfig) -> Result<ScenarioTreeCip> {
    config.validate()?;
    if config.kind == InstanceKind::Sufl {
        return Err(Error::validation("kind", "not a covering-program kind"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nvars = config.columns;

    // Stage-invariant columns for the combinatorial kinds.
    let (rows, shared_columns): (usize, Option<Vec<Vec<f64>>>) = match config.kind {
        InstanceKind::VertexCover => {
            let mut edges = Vec::new();
            for u in 0..nvars {
                for v in (u + 1)..nvars {
                    if rng.random_bool(config.edge_probability) {
                        edges.push((u, v));
                    }
                }
            }
            if edges.is_empty() {
                edges.push((0, 1));
            }
            let mut cols = vec![vec![0.0; edges.len()]; nvars];
            for (e, &(u, v)) in edges.iter().enumerate() {
                cols[u][e] = 1.0;
                cols[v][e] = 1.0;
            }
            (edges.len(), Some(cols))
        }
        InstanceKind::SetCover => {
            let n = config.rows;
            let mut cols = vec![vec![0.0; n]; nvars];
            for col in cols.iter_mut() {
                for entry in col.iter_mut() {
                    if rng.random_bool(config.set_density) {
                        *entry = 1.0;
                    }
                }
            }
            for i in 0..n {
                if cols.iter().all(|c| c[i] == 0.0) {
                    let s = rng.random_range(0..nvars);
                    cols[s][i] = 1.0;
                }
            }
            (n, Some(cols))
        }
        InstanceKind::GeneralCip => (config.rows, None),
        InstanceKind::Sufl => unreachable!(),
    };

    let base_costs: Vec<f64> = (0..nvars)
        .map(|_| uniform(&mut rng, config.variable_cost))
        .collect();

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut depth_of: Vec<usize> = Vec::new();
    let mut frontier = vec![0usize];
    nodes.push(TreeNode {
        parent: None,
        prob: 1.0,
        vars: Vec::new(),
    });
    depth_of.push(0);
    for depth in 1..config.stages {
        let mut next = Vec::new();
        for &parent in &frontier {
            let probs = normalized_weights(&mut rng, config.arity);
            for prob in probs {
                next.push(nodes.len());
                nodes.push(TreeNode {
                    parent: Some(parent),
                    prob,
                    vars: Vec::new(),
                });
                depth_of.push(depth);
            }
        }
        frontier = next;
    }

    for (n, node) in nodes.iter_mut().enumerate() {
        node.vars = (0..nvars)
            .map(|j| {
                let cost = if depth_of[n] == 0 {
                    base_costs[j]
                } else {
                    base_costs[j] * uniform(&mut rng, config.inflation)
                };
                let column = match &shared_columns {
                    Some(cols) => cols[j].clone(),
                    None => (0..rows).map(|_| rng.random::<f64>()).collect(),
                };
                CipVar { cost, column }
            })
            .collect();
    }
    if shared_columns.is_none() {
        let max = nodes
            .iter()
            .flat_map(|n| n.vars.iter().flat_map(|v| v.column.iter()))
            .fold(0.0f64, |a, &b| a.max(b));
        if max > 0.0 {
            for v in nodes.iter_mut().flat_map(|n| n.vars.iter_mut()) {
                for a in v.column.iter_mut() {
                    *a = (*a / max).min(1.0);
                }
            }
        }
    }

    let leaves = frontier;
    let b_by_leaf: Vec<Vec<f64>> = match config.kind {
        InstanceKind::VertexCover => leaves
            .iter()
            .map(|_| loop {
                let b: Vec<f64> = (0..rows)
                    .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                    .collect();
                if b.iter().any(|&x| x > 0.0) {
                    break b;
                }
            })
            .collect(),
        InstanceKind::SetCover => leaves.iter().map(|_| vec![1.0; rows]).collect(),
        InstanceKind::GeneralCip => {
            let bt = config.b_target;
            let mut b: Vec<Vec<f64>> = leaves
                .iter()
                .map(|_| {
                    (0..rows)
                        .map(|_| bt + rng.random_range(0..3) as f64)
                        .collect()
                })
                .collect();
            let min = b.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            if min > bt {
                b[0][0] = bt;
            }
            b
        }
        InstanceKind::Sufl => unreachable!(),
    };

    let tree = ScenarioTreeCip {
        stages: config.stages,
        rows,
        b_by_leaf,
        nodes,
    };
    tree.validate()?;
    Ok(tree)
}
