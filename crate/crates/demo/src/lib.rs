//! Browser bindings: the threshold ratio curve, exact dependent-rounding
//! tables and per-scenario rounding of a generated geometric instance.
//! Every entry point returns a JSON string.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use stochround::cip_rounding::exact_distribution;
use stochround::harness::{evaluate, Algorithm, EvalConfig};
use stochround::instances::{generate_sufl, GeneratorConfig, Instance};
use stochround::sufl::{
    connection_factor, equalizing_gamma, evaluate_ratio, stretch_bound, CopyCosting,
    PerScenarioRounding,
};
use stochround::Result;

/// `(alpha, facility factor, connection factor, max)` on an even grid of
/// `steps` points in `[0.05, 0.5]`.
pub fn ratio_curve(steps: usize) -> Result<Value> {
    let steps = steps.clamp(2, 1000);
    let mut points = Vec::with_capacity(steps);
    for k in 0..steps {
        let alpha = (0.05 + 0.45 * k as f64 / (steps - 1) as f64).min(0.5);
        let (f, c, m) = evaluate_ratio(alpha)?;
        points.push(json!({ "alpha": alpha, "facility": f, "connection": c, "max": m }));
    }
    let best = points
        .iter()
        .min_by(|a, b| {
            a["max"]
                .as_f64()
                .unwrap()
                .total_cmp(&b["max"].as_f64().unwrap())
        })
        .cloned();
    Ok(json!({ "points": points, "best": best }))
}

/// Exact output distribution for comma- or space-separated inputs.
pub fn dependent_table(input: &str) -> Result<Value> {
    let z = input
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| stochround::Error::Parse(format!("`{s}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let d = exact_distribution(&z)?;
    let outcomes: Vec<Value> = d
        .outcomes
        .iter()
        .map(|&(mask, p)| {
            let chosen: Vec<usize> = (0..z.len()).filter(|&i| mask & (1 << i) != 0).collect();
            json!({ "chosen": chosen, "probability": p })
        })
        .collect();
    let marginals: Vec<Value> = (0..z.len())
        .map(|i| json!({ "z": z[i], "marginal": d.marginal(i) }))
        .collect();
    Ok(json!({
        "inputs": z,
        "sum": z.iter().sum::<f64>(),
        "outcomes": outcomes,
        "marginals": marginals,
        "all_zero": d.probability(0),
    }))
}

/// Generates a geometric instance, evaluates per-scenario rounding and
/// returns one sampled solution for drawing.
pub fn per_scenario(
    seed: u64,
    facilities: usize,
    clients: usize,
    scenarios: usize,
    gamma: f64,
    trials: usize,
) -> Result<Value> {
    let inst = generate_sufl(&GeneratorConfig {
        seed,
        facilities: facilities.clamp(1, 12),
        clients: clients.clamp(1, 30),
        scenarios: scenarios.clamp(1, 6),
        opening_cost: (0.2, 1.5),
        geometric: true,
        ..GeneratorConfig::default()
    })?;
    let cfg = EvalConfig {
        algorithm: Algorithm::PerScenario {
            gamma,
            strict: false,
        },
        trials: trials.clamp(100, 20_000),
        seed,
        oracle: false,
        threads: None,
    };
    let report = evaluate(&Instance::Sufl(inst.clone()), &cfg)?;
    let rounding = PerScenarioRounding::from_instance(&inst, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = rounding.sample(&inst, &mut rng);
    let scenarios: Vec<Value> = (0..inst.num_scenarios())
        .map(|a| {
            let stats = &report.scenarios[a];
            json!({
                "prob": inst.scenarios[a].prob,
                "clients": inst.scenarios[a].clients,
                "opened": sample.second_stage[a],
                "assignment": sample.assignment[a],
                "sample_cost": sample.scenario_cost(&inst, a, CopyCosting::Dedupe).total(),
                "mean": stats.cost.mean,
                "mean_per_copy": stats.cost_per_copy.mean,
                "value": stats.fractional_value,
            })
        })
        .collect();
    Ok(json!({
        "facilities": inst.facilities.iter().map(|f| f.position).collect::<Vec<_>>(),
        "clients": inst.clients.iter().map(|c| c.position).collect::<Vec<_>>(),
        "first_stage": sample.first_stage,
        "scenarios": scenarios,
        "lp": report.lp.as_ref().map(|l| l.value),
        "mean": report.overall.mean,
        "max_stretch": rounding.max_stretch(&inst, &sample),
        "gamma": gamma,
        "connection_factor": connection_factor(gamma),
        "stretch_bound": stretch_bound(gamma),
        "equalizing_gamma": equalizing_gamma(),
        "passed": report.passed(),
        "bounds": report.bounds.iter().map(|b| json!({
            "name": b.name, "observed": b.observed, "bound": b.bound, "satisfied": b.satisfied,
        })).collect::<Vec<_>>(),
        "checks": report.checks.iter().map(|c| json!({
            "name": c.name, "violations": c.violations,
        })).collect::<Vec<_>>(),
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = ratioCurve)]
pub fn ratio_curve_js(steps: usize) -> std::result::Result<String, JsError> {
    to_js(ratio_curve(steps))
}

#[wasm_bindgen(js_name = dependentTable)]
pub fn dependent_table_js(input: &str) -> std::result::Result<String, JsError> {
    to_js(dependent_table(input))
}

#[wasm_bindgen(js_name = perScenario)]
pub fn per_scenario_js(
    seed: u32,
    facilities: usize,
    clients: usize,
    scenarios: usize,
    gamma: f64,
    trials: usize,
) -> std::result::Result<String, JsError> {
    to_js(per_scenario(
        u64::from(seed),
        facilities,
        clients,
        scenarios,
        gamma,
        trials,
    ))
}
