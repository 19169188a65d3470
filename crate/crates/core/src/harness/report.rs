use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Algorithm, OracleResult, Summary};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSummary {
    pub value: f64,
    /// `F*`, expected fractional facility cost.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub facility_cost: Option<f64>,
    /// `C*`, expected fractional connection cost.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub connection_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dual_value: Option<f64>,
    /// `2.4061 F(x) + 1.2707 C(x)` at the optimum of the cost-scaled LP.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scaled_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub index: usize,
    pub prob: f64,
    /// Cost with one payment per facility and stage.
    pub cost: Summary,
    /// Cost paying every opened copy.
    pub cost_per_copy: Summary,
    pub connection: Summary,
    /// `Val_A` of the fractional solution.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fractional_value: Option<f64>,
    /// `C_A` of the fractional solution.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fractional_connection: Option<f64>,
    /// `V_A` of the dual solution.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dual_budget: Option<f64>,
}

/// A guarantee on an expectation, checked as `observed <= bound + margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundLine {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    /// Three standard errors of the observed mean.
    pub margin: f64,
    pub satisfied: bool,
}

impl BoundLine {
    pub fn new(name: impl Into<String>, observed: f64, bound: f64, margin: f64) -> Self {
        let margin = if margin.is_finite() { margin } else { 0.0 };
        BoundLine {
            name: name.into(),
            observed,
            bound,
            margin,
            satisfied: observed <= bound + margin + 1e-9 * (1.0 + bound.abs()),
        }
    }
}

/// A deterministic property that must hold in every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub violations: u64,
    pub satisfied: bool,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, violations: u64) -> Self {
        CheckLine {
            name: name.into(),
            violations,
            satisfied: violations == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub algorithm: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lp: Option<LpSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleResult>,
    pub overall: Summary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub overall_per_copy: Option<Summary>,
    /// Cost after moving every client to its closest open facility.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reassigned: Option<Summary>,
    /// Cost over covering trials only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conditional: Option<Summary>,
    /// Cost after re-running failed trials until they cover.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retried: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coverage_failures: Option<u64>,
    pub scenarios: Vec<ScenarioStats>,
    pub bounds: Vec<BoundLine>,
    pub checks: Vec<CheckLine>,
    pub notes: Vec<String>,
}

impl TrialReport {
    pub fn new(algorithm: &Algorithm, seed: u64, trials: usize) -> Self {
        TrialReport {
            schema_version: SCHEMA_VERSION,
            algorithm: algorithm.id().to_string(),
            parameters: algorithm.parameters(),
            seed,
            trials,
            lp: None,
            oracle: None,
            overall: Summary::of(&[]),
            overall_per_copy: None,
            reassigned: None,
            conditional: None,
            retried: None,
            coverage_failures: None,
            scenarios: Vec::new(),
            bounds: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Every bound and check is satisfied.
    pub fn passed(&self) -> bool {
        self.bounds.iter().all(|b| b.satisfied) && self.checks.iter().all(|c| c.satisfied)
    }

    pub fn from_json(text: &str) -> Result<TrialReport> {
        let report: TrialReport =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {}", report.schema_version),
            ));
        }
        Ok(report)
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn render_text(r: &TrialReport) -> String {
    let mut out = String::new();
    let params: Vec<String> = r
        .parameters
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(
        out,
        "algorithm {} [{}] seed {} trials {}",
        r.algorithm,
        params.join(", "),
        r.seed,
        r.trials
    );
    if let Some(lp) = &r.lp {
        let _ = write!(out, "LP value {:.6}", lp.value);
        if let (Some(f), Some(c)) = (lp.facility_cost, lp.connection_cost) {
            let _ = write!(out, " (F* {f:.6}, C* {c:.6})");
        }
        if let Some(d) = lp.dual_value {
            let _ = write!(out, " dual {d:.6}");
        }
        if let Some(s) = lp.scaled_value {
            let _ = write!(out, " scaled {s:.6}");
        }
        out.push('\n');
    }
    if let Some(o) = &r.oracle {
        let _ = writeln!(
            out,
            "oracle optimum {:.6} ({} candidates)",
            o.optimum, o.enumerated
        );
    }
    let s = &r.overall;
    let _ = writeln!(
        out,
        "mean cost {:.6} se {:.3e} 99% CI [{:.6}, {:.6}]",
        s.mean, s.std_error, s.ci99[0], s.ci99[1]
    );
    if let Some(p) = &r.overall_per_copy {
        let _ = writeln!(
            out,
            "mean cost paying every copy {:.6} se {:.3e}",
            p.mean, p.std_error
        );
    }
    if let Some(p) = &r.reassigned {
        let _ = writeln!(out, "mean cost after closest reassignment {:.6}", p.mean);
    }
    if let Some(f) = r.coverage_failures {
        let _ = writeln!(out, "coverage failures {f} of {}", r.trials);
    }
    if let Some(c) = &r.conditional {
        let _ = writeln!(out, "mean cost over covering trials {:.6}", c.mean);
    }
    if let Some(c) = &r.retried {
        let _ = writeln!(
            out,
            "mean cost with retries {:.6} ({} trials)",
            c.mean, c.count
        );
    }
    for sc in &r.scenarios {
        let _ = write!(
            out,
            "scenario {} p={:.4} mean {:.6} se {:.3e} CI [{:.6}, {:.6}]",
            sc.index, sc.prob, sc.cost.mean, sc.cost.std_error, sc.cost.ci99[0], sc.cost.ci99[1]
        );
        if let Some(v) = sc.fractional_value {
            let _ = write!(out, " Val_A {v:.6}");
        }
        if let Some(v) = sc.dual_budget {
            let _ = write!(out, " V_A {v:.6}");
        }
        out.push('\n');
    }
    for b in &r.bounds {
        let _ = writeln!(
            out,
            "[{}] {}: {:.6} <= {:.6} + {:.3e}",
            mark(b.satisfied),
            b.name,
            b.observed,
            b.bound,
            b.margin
        );
    }
    for c in &r.checks {
        let _ = writeln!(
            out,
            "[{}] {}: {} violations",
            mark(c.satisfied),
            c.name,
            c.violations
        );
    }
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(out, "overall {}", mark(r.passed()));
    out
}

/// Pretty JSON with the struct's field order.
pub fn render_json(r: &TrialReport) -> String {
    serde_json::to_string_pretty(r).expect("reports contain only serializable data")
}

/// One row per report, sorted by mean cost.
pub fn render_comparison(reports: &[TrialReport]) -> String {
    let mut rows: Vec<&TrialReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.overall.mean.total_cmp(&b.overall.mean));
    let mut out = format!(
        "{:<14} {:>12} {:>12} {:>10} {:>6}\n",
        "algorithm", "mean", "std err", "/ LP", "pass"
    );
    for r in rows {
        let ratio =
            r.lp.as_ref()
                .map_or(f64::NAN, |lp| r.overall.mean / lp.value);
        let _ = writeln!(
            out,
            "{:<14} {:>12.6} {:>12.3e} {:>10.4} {:>6}",
            r.algorithm,
            r.overall.mean,
            r.overall.std_error,
            ratio,
            mark(r.passed())
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: Algorithm, mean: f64) -> TrialReport {
        let mut r = TrialReport::new(&id, 7, 100);
        r.overall = Summary::of(&[mean; 4]);
        r.bounds.push(BoundLine::new("b", mean, 10.0, 0.0));
        r
    }

    #[test]
    fn json_round_trip() {
        let mut r = report(Algorithm::PrimalDual { alpha: 0.25 }, 3.0);
        r.checks.push(CheckLine::new("c", 0));
        r.notes.push("n".into());
        let back = TrialReport::from_json(&render_json(&r)).unwrap();
        assert_eq!(back, r);
        assert_eq!(render_json(&back), render_json(&r));
    }

    #[test]
    fn rejects_other_schema() {
        let r = report(Algorithm::Alg2, 1.0);
        let text = render_json(&r).replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(TrialReport::from_json(&text).is_err());
    }

    #[test]
    fn failing_bound_fails_report() {
        let mut r = report(Algorithm::Alg2, 1.0);
        assert!(r.passed());
        r.bounds.push(BoundLine::new("tight", 2.0, 1.0, 0.5));
        assert!(!r.passed());
        assert!(render_text(&r).contains("[FAIL] tight"));
    }

    #[test]
    fn comparison_sorted_by_mean() {
        let rows = [
            report(Algorithm::Alg2, 5.0),
            report(Algorithm::LpRounding, 2.0),
            report(Algorithm::Alg1, 3.0),
        ];
        let table = render_comparison(&rows);
        let order: Vec<&str> = table
            .lines()
            .skip(1)
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert_eq!(order, ["lp", "alg1", "alg2"]);
    }
}
