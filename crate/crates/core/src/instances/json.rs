//! JSON document format for instances.
//!
//! Numbers may be given either as JSON numbers or as decimal strings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    CipVar, Client, Facility, Instance, Scenario, ScenarioTreeCip, SuflInstance, TreeNode,
};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    Number(f64),
    Text(String),
}

impl Num {
    fn value(&self, field: &str) -> Result<f64> {
        match self {
            Num::Number(v) => Ok(*v),
            Num::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{field}`: `{s}` is not a decimal number"))),
        }
    }
}

fn nums(v: &[Num], field: &str) -> Result<Vec<f64>> {
    v.iter().map(|n| n.value(field)).collect()
}

fn matrix(v: &[Vec<Num>], field: &str) -> Result<Vec<Vec<f64>>> {
    v.iter().map(|r| nums(r, field)).collect()
}

fn id_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFacility {
    id: Value,
    f1: Num,
    f2_by_scenario: Vec<Num>,
    #[serde(default)]
    pos: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClient {
    id: Value,
    #[serde(default)]
    demand: Option<Num>,
    #[serde(default)]
    pos: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    prob: Num,
    clients: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSufl {
    facilities: Vec<RawFacility>,
    clients: Vec<RawClient>,
    distances: Vec<Vec<Num>>,
    scenarios: Vec<RawScenario>,
    #[serde(default)]
    metric: Option<Vec<Vec<Num>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVar {
    cost: Num,
    column: Vec<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    parent: Option<usize>,
    prob: Num,
    vars: Vec<RawVar>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    stages: usize,
    rows: usize,
    b_by_leaf: Vec<Vec<Num>>,
    nodes: Vec<RawNode>,
}

#[derive(Deserialize)]
#[serde(tag = "kind")]
enum RawInstance {
    #[serde(rename = "sufl")]
    Sufl(RawSufl),
    #[serde(rename = "cip-tree")]
    CipTree(RawTree),
}

impl RawSufl {
    fn convert(self) -> Result<SuflInstance> {
        let facilities = self
            .facilities
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                Ok(Facility {
                    id: id_string(&f.id),
                    opening_first: f.f1.value(&format!("facilities[{i}].f1"))?,
                    opening_second: nums(
                        &f.f2_by_scenario,
                        &format!("facilities[{i}].f2_by_scenario"),
                    )?,
                    position: f.pos,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let clients = self
            .clients
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                Ok(Client {
                    id: id_string(&c.id),
                    demand: match &c.demand {
                        Some(d) => d.value(&format!("clients[{j}].demand"))?,
                        None => 1.0,
                    },
                    position: c.pos,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenarios = self
            .scenarios
            .into_iter()
            .enumerate()
            .map(|(a, s)| {
                let mut clients = s.clients;
                clients.sort_unstable();
                clients.dedup();
                Ok(Scenario {
                    prob: s.prob.value(&format!("scenarios[{a}].prob"))?,
                    clients,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SuflInstance {
            facilities,
            clients,
            distances: matrix(&self.distances, "distances")?,
            scenarios,
            metric: self
                .metric
                .as_deref()
                .map(|m| matrix(m, "metric"))
                .transpose()?,
        })
    }
}

impl RawTree {
    fn convert(self) -> Result<ScenarioTreeCip> {
        let nodes = self
            .nodes
            .into_iter()
            .enumerate()
            .map(|(n, node)| {
                let vars = node
                    .vars
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        Ok(CipVar {
                            cost: v.cost.value(&format!("nodes[{n}].vars[{j}].cost"))?,
                            column: nums(&v.column, &format!("nodes[{n}].vars[{j}].column"))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TreeNode {
                    parent: node.parent,
                    prob: node.prob.value(&format!("nodes[{n}].prob"))?,
                    vars,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScenarioTreeCip {
            stages: self.stages,
            rows: self.rows,
            b_by_leaf: matrix(&self.b_by_leaf, "b_by_leaf")?,
            nodes,
        })
    }
}

/// Parses and validates an instance document. Zero-probability scenarios
/// are dropped with a warning before validation.
pub fn from_json_str(text: &str) -> Result<Instance> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match raw {
        RawInstance::Sufl(raw) => {
            let mut inst = raw.convert()?;
            let m = inst.scenarios.len();
            if inst.facilities.iter().all(|f| f.opening_second.len() == m) {
                inst.drop_null_scenarios();
            }
            inst.validate()?;
            Ok(Instance::Sufl(inst))
        }
        RawInstance::CipTree(raw) => {
            let tree = raw.convert()?;
            tree.validate()?;
            Ok(Instance::CipTree(tree))
        }
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

#[derive(Serialize)]
struct OutFacility<'a> {
    id: &'a str,
    f1: f64,
    f2_by_scenario: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    pos: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct OutClient<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "is_unit")]
    demand: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pos: Option<[f64; 2]>,
}

fn is_unit(d: &f64) -> bool {
    *d == 1.0
}

#[derive(Serialize)]
struct OutScenario<'a> {
    prob: f64,
    clients: &'a [usize],
}

#[derive(Serialize)]
struct OutSufl<'a> {
    kind: &'static str,
    facilities: Vec<OutFacility<'a>>,
    clients: Vec<OutClient<'a>>,
    distances: &'a [Vec<f64>],
    scenarios: Vec<OutScenario<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<&'a [Vec<f64>]>,
}

#[derive(Serialize)]
struct OutVar<'a> {
    cost: f64,
    column: &'a [f64],
}

#[derive(Serialize)]
struct OutNode<'a> {
    parent: Option<usize>,
    prob: f64,
    vars: Vec<OutVar<'a>>,
}

#[derive(Serialize)]
struct OutTree<'a> {
    kind: &'static str,
    stages: usize,
    rows: usize,
    b_by_leaf: &'a [Vec<f64>],
    nodes: Vec<OutNode<'a>>,
}

/// Serializes an instance to its JSON document (pretty-printed).
pub fn to_json_string(instance: &Instance) -> String {
    let result = match instance {
        Instance::Sufl(s) => serde_json::to_string_pretty(&OutSufl {
            kind: "sufl",
            facilities: s
                .facilities
                .iter()
                .map(|f| OutFacility {
                    id: &f.id,
                    f1: f.opening_first,
                    f2_by_scenario: &f.opening_second,
                    pos: f.position,
                })
                .collect(),
            clients: s
                .clients
                .iter()
                .map(|c| OutClient {
                    id: &c.id,
                    demand: c.demand,
                    pos: c.position,
                })
                .collect(),
            distances: &s.distances,
            scenarios: s
                .scenarios
                .iter()
                .map(|sc| OutScenario {
                    prob: sc.prob,
                    clients: &sc.clients,
                })
                .collect(),
            metric: s.metric.as_deref(),
        }),
        Instance::CipTree(t) => serde_json::to_string_pretty(&OutTree {
            kind: "cip-tree",
            stages: t.stages,
            rows: t.rows,
            b_by_leaf: &t.b_by_leaf,
            nodes: t
                .nodes
                .iter()
                .map(|n| OutNode {
                    parent: n.parent,
                    prob: n.prob,
                    vars: n
                        .vars
                        .iter()
                        .map(|v| OutVar {
                            cost: v.cost,
                            column: &v.column,
                        })
                        .collect(),
                })
                .collect(),
        }),
    };
    result.expect("instance serialization cannot fail")
}
