//! Monte Carlo evaluation of the rounding algorithms against their
//! guarantees, with exact oracles for small instances.

mod oracle;
mod report;
mod stats;

pub use oracle::{
    oracle_cip, oracle_sufl, OracleResult, MAX_ORACLE_FACILITIES, MAX_ORACLE_SCENARIOS,
    MAX_ORACLE_VARIABLES,
};
pub use report::{
    render_comparison, render_json, render_text, BoundLine, CheckLine, LpSummary, ScenarioStats,
    TrialReport, SCHEMA_VERSION,
};
pub use stats::{Summary, Z99};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cip_rounding::{
    choose_lambda, coverage_failures, round_tree_dependent, round_tree_independent, tree_cost,
    tree_degree, LambdaConfig, LambdaKind, TreeRounding,
};
use crate::error::{Error, Result};
use crate::instances::{Instance, ScenarioTreeCip, SuflInstance};
use crate::lp::{
    solve_cip_lp, solve_sufl, CipSolution, CostScale, DualSolution, FractionalSolution,
};
use crate::sufl::{
    connection_factor, equalizing_gamma, evaluate_ratio, stretch_bound, BestOfTwo,
    ClusteredRounding, CopyCosting, PerScenarioRounding, PrimalDual, RoundedSolution, ALG3_COIN,
    STRICT_GAMMA,
};

pub const MIN_TRIALS: usize = 100;
/// Attempts per trial for independent covering rounding before giving up.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Threshold rounding with the greedy bifactor subroutine.
    PrimalDual {
        alpha: f64,
    },
    /// Clustered rounding of the unscaled relaxation.
    LpRounding,
    /// Clustered rounding of the cost-scaled relaxation.
    Alg1,
    /// Threshold rounding with `alpha = 0.37`.
    Alg2,
    /// Best of the two above, or a biased coin between them.
    Alg3 {
        coin: bool,
    },
    PerScenario {
        gamma: f64,
        strict: bool,
    },
    CipIndependent {
        lambda: Option<f64>,
    },
    CipDependent,
}

impl Algorithm {
    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::PrimalDual { .. } => "pd",
            Algorithm::LpRounding => "lp",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 { .. } => "alg3",
            Algorithm::PerScenario { .. } => "per-scenario",
            Algorithm::CipIndependent { .. } => "independent",
            Algorithm::CipDependent => "dependent",
        }
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match *self {
            Algorithm::PrimalDual { alpha } => {
                p.insert("alpha".into(), alpha);
            }
            Algorithm::Alg2 => {
                p.insert("alpha".into(), 0.37);
            }
            Algorithm::Alg3 { coin } => {
                p.insert("coin".into(), if coin { ALG3_COIN } else { 0.0 });
            }
            Algorithm::PerScenario { gamma, strict } => {
                p.insert("gamma".into(), gamma);
                p.insert("strict".into(), f64::from(u8::from(strict)));
            }
            Algorithm::CipIndependent { lambda: Some(l) } => {
                p.insert("lambda".into(), l);
            }
            _ => {}
        }
        p
    }

    pub fn is_sufl(&self) -> bool {
        !matches!(
            self,
            Algorithm::CipIndependent { .. } | Algorithm::CipDependent
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub seed: u64,
    pub oracle: bool,
    /// Worker threads; `None` reads `STOCHROUND_THREADS` or uses all cores.
    pub threads: Option<usize>,
}

impl EvalConfig {
    pub fn new(algorithm: Algorithm, trials: usize, seed: u64) -> Self {
        EvalConfig {
            algorithm,
            trials,
            seed,
            oracle: false,
            threads: None,
        }
    }
}

/// Independent stream `trial` of the master seed.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs `f` over `0..trials`, in parallel when available; results come back
/// in trial order.
fn run_trials<T, F>(trials: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let threads = threads.or_else(|| {
            std::env::var("STOCHROUND_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
                .filter(|&n: &usize| n > 0)
        });
        let work = || {
            (0..trials)
                .into_par_iter()
                .map(&f)
                .collect::<Result<Vec<T>>>()
        };
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?
                .install(work),
            None => work(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        (0..trials).map(f).collect()
    }
}

#[derive(Debug, Clone, Default)]
struct TrialRecord {
    cost: f64,
    per_copy: f64,
    scenario: Vec<f64>,
    scenario_per_copy: Vec<f64>,
    scenario_connection: Vec<f64>,
    /// Deterministic-check violations in this trial.
    violations: u64,
    reassigned: Option<f64>,
    covered: bool,
    /// Cost after retrying until covered (independent covering rounding).
    retried: Option<f64>,
    attempts: usize,
}

fn sufl_record(inst: &SuflInstance, sol: &RoundedSolution, violations: u64) -> Result<TrialRecord> {
    if !sol.is_feasible(inst) {
        return Err(Error::Internal(
            "rounding left a client without an open facility".into(),
        ));
    }
    let mut rec = TrialRecord {
        covered: true,
        violations,
        attempts: 1,
        ..TrialRecord::default()
    };
    for a in 0..inst.num_scenarios() {
        let d = sol.scenario_cost(inst, a, CopyCosting::Dedupe);
        let p = sol.scenario_cost(inst, a, CopyCosting::PerCopy);
        rec.scenario.push(d.total());
        rec.scenario_per_copy.push(p.total());
        rec.scenario_connection.push(d.connection);
    }
    let probs = inst.scenarios.iter().map(|s| s.prob);
    rec.cost = probs.clone().zip(&rec.scenario).map(|(p, c)| p * c).sum();
    rec.per_copy = probs.zip(&rec.scenario_per_copy).map(|(p, c)| p * c).sum();
    Ok(rec)
}

fn column<F: Fn(&TrialRecord) -> f64>(records: &[TrialRecord], f: F) -> Vec<f64> {
    records.iter().map(f).collect()
}

fn bound(name: impl Into<String>, observed: &Summary, rhs: f64) -> BoundLine {
    BoundLine::new(name, observed.mean, rhs, 3.0 * observed.std_error)
}

/// Evaluates one algorithm on one instance over `trials` seeded trials.
pub fn evaluate(instance: &Instance, cfg: &EvalConfig) -> Result<TrialReport> {
    if cfg.trials < MIN_TRIALS {
        return Err(Error::OutOfRange(format!(
            "at least {MIN_TRIALS} trials are required"
        )));
    }
    match (instance, cfg.algorithm.is_sufl()) {
        (Instance::Sufl(inst), true) => evaluate_sufl(inst, cfg),
        (Instance::CipTree(tree), false) => evaluate_cip(tree, cfg),
        _ => Err(Error::UnknownAlgorithm(format!(
            "{} does not apply to this instance kind",
            cfg.algorithm.id()
        ))),
    }
}

enum SuflPrepared {
    Threshold(PrimalDual),
    Clustered(ClusteredRounding),
    Best(BestOfTwo),
    Filtered(PerScenarioRounding),
}

fn evaluate_sufl(inst: &SuflInstance, cfg: &EvalConfig) -> Result<TrialReport> {
    let (frac, dual) = solve_sufl(inst, CostScale::UNIT)?;
    let lp_value = frac.objective(inst);
    let f_star = frac.expected_facility_cost(inst);
    let c_star = frac.expected_connection_cost(inst);
    let mut report = TrialReport::new(&cfg.algorithm, cfg.seed, cfg.trials);
    report.lp = Some(LpSummary {
        value: lp_value,
        facility_cost: Some(f_star),
        connection_cost: Some(c_star),
        dual_value: Some(dual.objective(inst)),
        scaled_value: None,
    });
    let prepared = match cfg.algorithm {
        Algorithm::PrimalDual { alpha } => SuflPrepared::Threshold(PrimalDual::new(&frac, alpha)?),
        Algorithm::Alg2 => SuflPrepared::Threshold(PrimalDual::new(&frac, 0.37)?),
        Algorithm::LpRounding => SuflPrepared::Clustered(ClusteredRounding::new(inst, &frac)?),
        Algorithm::Alg1 => {
            SuflPrepared::Clustered(ClusteredRounding::from_instance(inst, CostScale::BIFACTOR)?)
        }
        Algorithm::Alg3 { coin } => SuflPrepared::Best(BestOfTwo::new(inst, coin)?),
        Algorithm::PerScenario { gamma, strict } => {
            let gamma = if strict { STRICT_GAMMA } else { gamma };
            SuflPrepared::Filtered(PerScenarioRounding::new(inst, &frac, gamma)?)
        }
        _ => unreachable!("covering algorithms are dispatched elsewhere"),
    };
    let records = run_trials(cfg.trials, cfg.threads, |t| {
        let mut rng = trial_rng(cfg.seed, t);
        match &prepared {
            SuflPrepared::Threshold(pd) => {
                let sol = pd.run(inst, &mut rng)?;
                let mut rec = sufl_record(inst, &sol, 0)?;
                let mut closer = sol.clone();
                closer.reassign_closest(inst);
                rec.reassigned = Some(closer.expected_cost(inst, CopyCosting::Dedupe));
                Ok(rec)
            }
            SuflPrepared::Clustered(r) => {
                let sol = r.sample(inst, &mut rng);
                sufl_record(inst, &sol, r.three_hop_violations(inst, &sol) as u64)
            }
            SuflPrepared::Best(b) => {
                let sol = b.sample(inst, &mut rng)?;
                sufl_record(inst, &sol, 0)
            }
            SuflPrepared::Filtered(r) => {
                let sol = r.sample(inst, &mut rng);
                sufl_record(inst, &sol, r.stretch_violations(inst, &sol) as u64)
            }
        }
    })?;
    fill_common(
        &mut report,
        &records,
        inst.scenarios.iter().map(|s| s.prob).collect(),
    );
    let overall = report.overall;
    let per_copy = report.overall_per_copy.expect("set for facility location");
    for (a, s) in report.scenarios.iter_mut().enumerate() {
        s.fractional_value = Some(frac.value(inst, a));
        s.fractional_connection = Some(frac.connection_cost(inst, a));
        if !matches!(prepared, SuflPrepared::Filtered(_)) {
            s.dual_budget = Some(dual.budget(inst, a));
        }
    }
    let violations: u64 = records.iter().map(|r| r.violations).sum();
    match &prepared {
        SuflPrepared::Threshold(pd) => {
            let alpha = pd.threshold.alpha();
            let (ff, cf, m) = evaluate_ratio(alpha)?;
            report.bounds.push(bound(
                format!("mean <= {m:.5} * LP"),
                &overall,
                m * lp_value,
            ));
            report.bounds.push(bound(
                format!("mean <= {ff:.5} * F* + {cf:.5} * C*"),
                &overall,
                ff * f_star + cf * c_star,
            ));
            let closer = Summary::of(&column(&records, |r| r.reassigned.unwrap_or(r.cost)));
            report.reassigned = Some(closer);
        }
        SuflPrepared::Clustered(r) => {
            if cfg.algorithm == Algorithm::Alg1 {
                let (k, c) = (CostScale::BIFACTOR.facility, CostScale::BIFACTOR.connection);
                let scaled = k * r.fractional.expected_facility_cost(inst)
                    + c * r.fractional.expected_connection_cost(inst);
                if let Some(lp) = report.lp.as_mut() {
                    lp.scaled_value = Some(scaled);
                }
                report.bounds.push(bound(
                    "mean <= 2.4061 * F(x) + 1.2707 * C(x) of the scaled optimum",
                    &overall,
                    scaled,
                ));
            } else {
                lemma_two_lines(&mut report, inst, &frac, &dual, &records);
                let e2 = (-2.0f64).exp();
                report.bounds.push(bound(
                    "per-copy mean <= 2.4061 * F* + 1.2707 * C*",
                    &per_copy,
                    (2.0 + 3.0 * e2) * f_star + (1.0 + 2.0 * e2) * c_star,
                ));
            }
            report.checks.push(CheckLine::new(
                "three-hop fallback (dist <= 3R)",
                violations,
            ));
        }
        SuflPrepared::Best(b) => {
            report
                .bounds
                .push(bound("mean <= 2.2975 * LP", &overall, 2.2975 * lp_value));
            if b.coin {
                report
                    .notes
                    .push(format!("coin variant with p = {ALG3_COIN}"));
            }
        }
        SuflPrepared::Filtered(r) => {
            let g = r.gamma;
            for (a, s) in report.scenarios.iter().enumerate() {
                let val = frac.value(inst, a);
                report.bounds.push(bound(
                    format!("scenario {a}: per-copy mean <= {g} * Val_A"),
                    &s.cost_per_copy,
                    g * val,
                ));
            }
            report.checks.push(CheckLine::new(
                format!("radius audit d <= {:.4} * C_(j,A)", g / (g - 2.0)),
                r.audit_failures.len() as u64,
            ));
            report.checks.push(CheckLine::new(
                format!("stretch <= {:.4}", stretch_bound(g)),
                violations,
            ));
            let cf = connection_factor(g);
            if r.gamma == STRICT_GAMMA {
                for (a, s) in report.scenarios.iter().enumerate() {
                    let ca = frac.connection_cost(inst, a);
                    report.bounds.push(bound(
                        format!("scenario {a}: mean connection <= {cf:.4} * C_A"),
                        &s.connection,
                        cf * ca,
                    ));
                }
                if violations > 0 {
                    return Err(Error::Internal(format!(
                        "strict mode: {violations} connections exceed {STRICT_GAMMA} times their fractional cost"
                    )));
                }
            }
            report.notes.push(format!(
                "gamma = {g}, connection factor = {cf:.6}, stretch bound = {:.6}",
                stretch_bound(g)
            ));
            let root = equalizing_gamma();
            report.notes.push(format!(
                "connection factor equals gamma at {root:.6}; default gamma is 2.4957"
            ));
        }
    }
    if cfg.oracle {
        let o = oracle_sufl(inst)?;
        let worst_gap = records
            .iter()
            .map(|r| o.optimum - r.cost)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut bad = u64::from(lp_value > o.optimum + 1e-6);
        bad += records.iter().filter(|r| r.cost < o.optimum - 1e-6).count() as u64;
        report
            .checks
            .push(CheckLine::new("sandwich LP <= OPT <= every trial", bad));
        report
            .notes
            .push(format!("largest OPT - trial cost: {worst_gap:.3e}"));
        if cfg.algorithm == Algorithm::Alg1 {
            let (fo, co) = (
                o.facility_cost.unwrap_or(0.0),
                o.connection_cost.unwrap_or(0.0),
            );
            report.bounds.push(bound(
                "mean <= 2.4061 * F_opt + 1.2707 * C_opt",
                &overall,
                2.4061 * fo + 1.2707 * co,
            ));
        }
        report.oracle = Some(o);
    }
    Ok(report)
}

fn lemma_two_lines(
    report: &mut TrialReport,
    inst: &SuflInstance,
    frac: &FractionalSolution,
    dual: &DualSolution,
    records: &[TrialRecord],
) {
    let e2 = (-2.0f64).exp();
    for a in 0..inst.num_scenarios() {
        let rhs = 3.0 * e2 * dual.budget(inst, a)
            + (1.0 - e2) * frac.connection_cost(inst, a)
            + 2.0 * frac.facility_cost(inst, a);
        let s = Summary::of(&column(records, |r| r.scenario_per_copy[a]));
        report.bounds.push(bound(
            format!("scenario {a}: per-copy mean <= 3e^-2 V_A + (1 - e^-2) C_A + 2 F_A"),
            &s,
            rhs,
        ));
    }
}

fn fill_common(report: &mut TrialReport, records: &[TrialRecord], probs: Vec<f64>) {
    report.overall = Summary::of(&column(records, |r| r.cost));
    report.overall_per_copy = Some(Summary::of(&column(records, |r| r.per_copy)));
    report.scenarios = probs
        .iter()
        .enumerate()
        .map(|(a, &prob)| ScenarioStats {
            index: a,
            prob,
            cost: Summary::of(&column(records, |r| r.scenario[a])),
            cost_per_copy: Summary::of(&column(records, |r| {
                r.scenario_per_copy.get(a).copied().unwrap_or(r.scenario[a])
            })),
            connection: Summary::of(&column(records, |r| {
                r.scenario_connection.get(a).copied().unwrap_or(f64::NAN)
            })),
            fractional_value: None,
            fractional_connection: None,
            dual_budget: None,
        })
        .collect();
}

fn leaf_costs(tree: &ScenarioTreeCip, y: &TreeRounding) -> Vec<f64> {
    tree.leaves()
        .into_iter()
        .map(|leaf| {
            tree.path(leaf)
                .iter()
                .map(|&n| {
                    tree.nodes[n]
                        .vars
                        .iter()
                        .zip(&y.y[n])
                        .map(|(v, &k)| v.cost * k as f64)
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Scaling factor used when `--lambda auto`: set cover when every row
/// needs one unit and all entries are 0/1, the Chernoff calibration otherwise.
pub fn auto_lambda(tree: &ScenarioTreeCip) -> Result<(f64, LambdaConfig)> {
    let n = tree
        .b_by_leaf
        .iter()
        .flatten()
        .filter(|&&b| b > 0.0)
        .count()
        .max(1);
    let zero_one = tree
        .nodes
        .iter()
        .flat_map(|n| &n.vars)
        .flat_map(|v| &v.column)
        .all(|&a| a == 0.0 || a == 1.0);
    let unit = tree
        .b_by_leaf
        .iter()
        .flatten()
        .all(|&b| b == 0.0 || b == 1.0);
    let cfg = if zero_one && unit {
        LambdaConfig::set_cover(n)
    } else {
        LambdaConfig::general(n, tree.min_large_rhs().unwrap_or(1.0))
    };
    Ok((choose_lambda(&cfg)?, cfg))
}

fn evaluate_cip(tree: &ScenarioTreeCip, cfg: &EvalConfig) -> Result<TrialReport> {
    let sol: CipSolution = solve_cip_lp(tree)?;
    let mut report = TrialReport::new(&cfg.algorithm, cfg.seed, cfg.trials);
    report.lp = Some(LpSummary {
        value: sol.objective,
        facility_cost: None,
        connection_cost: None,
        dual_value: None,
        scaled_value: None,
    });
    let leaves = tree.leaves();
    let probs: Vec<f64> = leaves.iter().map(|&l| tree.path_probability(l)).collect();
    let record = |y: &TreeRounding| TrialRecord {
        cost: tree_cost(tree, y),
        scenario: leaf_costs(tree, y),
        covered: coverage_failures(tree, y).is_empty(),
        attempts: 1,
        ..TrialRecord::default()
    };
    let (records, factor, budget) = match cfg.algorithm {
        Algorithm::CipIndependent { lambda } => {
            let (lambda, lcfg) = match lambda {
                Some(l) => (l, None),
                None => {
                    let (l, c) = auto_lambda(tree)?;
                    (l, Some(c))
                }
            };
            let records = run_trials(cfg.trials, cfg.threads, |t| {
                let mut rng = trial_rng(cfg.seed, t);
                let y = round_tree_independent(tree, &sol, lambda, &mut rng)?;
                let mut rec = record(&y);
                let mut last = y;
                while !coverage_failures(tree, &last).is_empty() && rec.attempts < MAX_ATTEMPTS {
                    last = round_tree_independent(tree, &sol, lambda, &mut rng)?;
                    rec.attempts += 1;
                }
                rec.retried = coverage_failures(tree, &last)
                    .is_empty()
                    .then(|| tree_cost(tree, &last));
                Ok(rec)
            })?;
            report.notes.push(format!("lambda = {lambda:.6}"));
            let budget = lcfg.map(|c| match c.kind {
                LambdaKind::SetCover => c.n as f64 * (-lambda).exp(),
                LambdaKind::General => c.n as f64 * c.row_failure(),
            });
            if let Some(c) = lcfg {
                report.notes.push(format!(
                    "lambda chosen automatically ({:?}, n = {}, B = {}); the Chernoff constant is a calibration choice",
                    c.kind, c.n, c.b_min
                ));
            }
            (records, lambda, budget)
        }
        Algorithm::CipDependent => {
            let b = tree_degree(tree)?;
            let records = run_trials(cfg.trials, cfg.threads, |t| {
                let mut rng = trial_rng(cfg.seed, t);
                let y = round_tree_dependent(tree, &sol, &mut rng)?;
                Ok(record(&y))
            })?;
            report.notes.push(format!("degree b = {b}"));
            (records, b as f64, None)
        }
        _ => unreachable!("facility-location algorithms are dispatched elsewhere"),
    };
    report.overall = Summary::of(&column(&records, |r| r.cost));
    report.scenarios = probs
        .iter()
        .enumerate()
        .map(|(l, &prob)| ScenarioStats {
            index: l,
            prob,
            cost: Summary::of(&column(&records, |r| r.scenario[l])),
            cost_per_copy: Summary::of(&column(&records, |r| r.scenario[l])),
            connection: Summary::of(&[]),
            fractional_value: None,
            fractional_connection: None,
            dual_budget: None,
        })
        .collect();
    let failures = records.iter().filter(|r| !r.covered).count() as u64;
    report.coverage_failures = Some(failures);
    let covered: Vec<f64> = records
        .iter()
        .filter(|r| r.covered)
        .map(|r| r.cost)
        .collect();
    report.conditional = Some(Summary::of(&covered));
    report.bounds.push(bound(
        format!("mean <= {factor:.4} * LP"),
        &report.overall,
        factor * sol.objective,
    ));
    match (cfg.algorithm.clone(), budget) {
        (Algorithm::CipDependent, _) => {
            report
                .checks
                .push(CheckLine::new("every row covered", failures));
        }
        (_, Some(budget)) => {
            let rate = Summary::of(&column(&records, |r| f64::from(u8::from(!r.covered))));
            report.bounds.push(bound(
                "coverage failure rate <= failure budget",
                &rate,
                budget.min(1.0),
            ));
            let retried =
                Summary::of(&records.iter().filter_map(|r| r.retried).collect::<Vec<_>>());
            report.retried = Some(retried);
        }
        _ => {
            let retried =
                Summary::of(&records.iter().filter_map(|r| r.retried).collect::<Vec<_>>());
            report.retried = Some(retried);
        }
    }
    if cfg.oracle {
        let o = oracle_cip(tree)?;
        let mut bad = u64::from(sol.objective > o.optimum + 1e-6);
        bad += records
            .iter()
            .filter(|r| r.covered && r.cost < o.optimum - 1e-6)
            .count() as u64;
        report.checks.push(CheckLine::new(
            "sandwich LP <= OPT <= every covering trial",
            bad,
        ));
        report.oracle = Some(o);
    }
    Ok(report)
}
