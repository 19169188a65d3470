//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stochround::cip_rounding::{
    choose_lambda, coverage_failures, exact_distribution, round_tree_independent, tree_cost,
    LambdaConfig,
};
use stochround::harness::{evaluate, Algorithm, EvalConfig, TrialReport};
use stochround::instances::{
    dual_budget_example, generate, generate_sufl, GeneratorConfig, Instance, InstanceKind,
    SuflInstance,
};
use stochround::jms::{jms_solve, UflSubinstance};
use stochround::lp::{
    build_ufl_lp, check_complementary_slackness, solve_cip_lp, solve_sufl, CostScale,
};
use stochround::sufl::{evaluate_ratio, stretch_bound, ThresholdDistribution, ALG3_COIN};

const TRIALS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Twenty seeded instances with at most 6 facilities, 8 clients and 4 scenarios.
fn suite() -> Vec<SuflInstance> {
    (0..20u64)
        .map(|seed| {
            generate_sufl(&GeneratorConfig {
                seed: 1000 + seed,
                facilities: 3 + (seed as usize % 4),
                clients: 4 + (seed as usize % 5),
                scenarios: 1 + (seed as usize % 4),
                opening_cost: (0.2, 2.0),
                geometric: seed % 5 != 4,
                ..GeneratorConfig::default()
            })
            .unwrap()
        })
        .collect()
}

fn run(
    inst: &SuflInstance,
    algorithm: Algorithm,
    trials: usize,
    seed: u64,
    oracle: bool,
) -> TrialReport {
    let mut cfg = EvalConfig::new(algorithm, trials, seed);
    cfg.oracle = oracle;
    evaluate(&Instance::Sufl(inst.clone()), &cfg).unwrap()
}

fn margin(s: &stochround::harness::Summary) -> f64 {
    3.0 * s.std_error
}

fn criterion_1() -> Outcome {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let mut vectors = 0usize;
    let mut bad = Vec::new();
    for k in 1..=4u32 {
        for code in 0..11usize.pow(k) {
            let mut c = code;
            let z: Vec<f64> = (0..k)
                .map(|_| {
                    let v = grid[c % 11];
                    c /= 11;
                    v
                })
                .collect();
            vectors += 1;
            let d = exact_distribution(&z).unwrap();
            let p2 = (0..z.len()).all(|i| d.marginal(i) <= z[i] + 1e-12);
            let p3 = z.iter().sum::<f64>() < 1.0 || d.probability(0) == 0.0;
            let one = d
                .outcomes
                .iter()
                .all(|(m, p)| *p == 0.0 || m.count_ones() <= 1);
            if !(p2 && p3 && one) {
                bad.push(z);
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{vectors} grid vectors, {} violating P2/P3/at-most-one",
            bad.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut uncovered = 0u64;
    let mut worst = f64::NEG_INFINITY;
    let mut failed = 0;
    for seed in 0..20 {
        let tree = generate(&GeneratorConfig {
            seed,
            kind: InstanceKind::VertexCover,
            stages: 3,
            columns: 10,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let r = evaluate(
            &tree,
            &EvalConfig::new(Algorithm::CipDependent, TRIALS, seed),
        )
        .unwrap();
        uncovered += r.coverage_failures.unwrap_or(u64::MAX);
        let lp = r.lp.as_ref().unwrap().value;
        let slack = r.overall.mean - (2.0 * lp + margin(&r.overall));
        worst = worst.max(slack);
        if slack > 0.0 {
            failed += 1;
        }
    }
    outcome(
        uncovered == 0 && failed == 0,
        format!(
            "20 trees x {TRIALS} trials: {uncovered} uncovering trials, {failed} means above 2*LP + 3se (max excess {worst:.4})"
        ),
    )
}

fn criterion_3() -> Outcome {
    let n = 50;
    let lambda = choose_lambda(&LambdaConfig::set_cover(n)).unwrap();
    let expected = (n as f64).ln() + 66f64.ln().ln();
    let tree = generate(&GeneratorConfig {
        seed: 3,
        kind: InstanceKind::SetCover,
        stages: 1,
        rows: n,
        columns: 20,
        set_density: 0.1,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let tree = tree.as_cip().unwrap();
    let sol = solve_cip_lp(tree).unwrap();
    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut uncovered = 0usize;
    let mut covered_costs = Vec::new();
    for _ in 0..trials {
        let y = round_tree_independent(tree, &sol, lambda, &mut rng).unwrap();
        let f = coverage_failures(tree, &y).len();
        uncovered += f;
        if f == 0 {
            covered_costs.push(tree_cost(tree, &y));
        }
    }
    let rate = uncovered as f64 / trials as f64;
    let budget = (-lambda).exp() * n as f64 * 1.5;
    let cond = covered_costs.iter().sum::<f64>() / covered_costs.len() as f64;
    let cap = 1.1 * lambda * sol.objective;
    outcome(
        (lambda - expected).abs() < 1e-9 && rate <= budget && cond <= cap,
        format!(
            "lambda {lambda:.4}; uncovered elements per trial {rate:.4} <= {budget:.4}; conditional mean {cond:.4} <= {cap:.4}"
        ),
    )
}

fn brute_force_ufl(sub: &UflSubinstance) -> f64 {
    let nf = sub.num_facilities();
    (1u32..(1 << nf))
        .map(|mask| {
            let open: Vec<usize> = (0..nf).filter(|i| mask & (1 << i) != 0).collect();
            open.iter().map(|&i| sub.opening[i]).sum::<f64>()
                + (0..sub.num_clients())
                    .map(|j| {
                        sub.demand[j]
                            * open
                                .iter()
                                .map(|&i| sub.distance[i][j])
                                .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut above_bifactor, mut below_opt) = (0, 0);
    for _ in 0..200 {
        let nf = rng.random_range(1..=8);
        let nc = rng.random_range(1..=12);
        let pts = |rng: &mut ChaCha8Rng, n: usize| -> Vec<(f64, f64)> {
            (0..n).map(|_| (rng.random(), rng.random())).collect()
        };
        let (fac, cli) = (pts(&mut rng, nf), pts(&mut rng, nc));
        let sub = UflSubinstance {
            opening: (0..nf).map(|_| rng.random_range(0.05..2.0)).collect(),
            demand: vec![1.0; nc],
            distance: fac
                .iter()
                .map(|f| {
                    cli.iter()
                        .map(|c| ((f.0 - c.0).powi(2) + (f.1 - c.1).powi(2)).sqrt())
                        .collect()
                })
                .collect(),
        };
        let cost = jms_solve(&sub).unwrap().cost();
        let (f, c) = build_ufl_lp(&sub).unwrap().solve_breakdown(&sub).unwrap();
        if cost > 1.11 * f + 1.78 * c + 1e-6 {
            above_bifactor += 1;
        }
        if cost < brute_force_ufl(&sub) - 1e-9 {
            below_opt += 1;
        }
    }
    outcome(
        above_bifactor == 0 && below_opt == 0,
        format!("200 instances: {above_bifactor} above 1.11 F* + 1.78 C* + 1e-6, {below_opt} below the optimum"),
    )
}

fn integrate_inverse(alpha: f64) -> f64 {
    // composite Simpson on [alpha, 1 - alpha] with fine steps
    let w = alpha / (1.0 - alpha);
    let density = (1.0 - w) / (1.0 - 2.0 * alpha);
    let (a, b) = (alpha, 1.0 - alpha);
    let n = 200_000;
    let h = (b - a) / n as f64;
    let mut s = 1.0 / a + 1.0 / b;
    for k in 1..n {
        let x = a + k as f64 * h;
        s += if k % 2 == 1 { 4.0 } else { 2.0 } / x;
    }
    2.0 * w + density * s * h / 3.0
}

fn criterion_5(suite: &[SuflInstance]) -> Outcome {
    let mut failed = 0;
    let mut worst: f64 = 0.0;
    for (k, inst) in suite.iter().enumerate() {
        let r = run(
            inst,
            Algorithm::PrimalDual { alpha: 0.2485 },
            TRIALS,
            k as u64,
            false,
        );
        let lp = r.lp.as_ref().unwrap().value;
        worst = worst.max(r.overall.mean / lp);
        if r.overall.mean > 2.369 * lp + margin(&r.overall) {
            failed += 1;
        }
    }
    let mut max_err: f64 = 0.0;
    for k in 1..50 {
        let alpha = k as f64 / 100.0;
        let closed = ThresholdDistribution::new(alpha)
            .unwrap()
            .expected_inverse();
        max_err = max_err.max((closed - integrate_inverse(alpha)).abs());
    }
    let ratio = evaluate_ratio(0.2485).unwrap().2;
    outcome(
        failed == 0 && max_err <= 1e-9 && ratio < 2.369,
        format!(
            "{failed} of 20 means above 2.369 LP + 3se (max mean/LP {worst:.4}); closed form vs integration max error {max_err:.1e}"
        ),
    )
}

fn criterion_6(suite: &[SuflInstance]) -> Outcome {
    let e2 = (-2.0f64).exp();
    let (mut lemma, mut corollary, mut hops) = (0, 0, 0u64);
    for (k, inst) in suite.iter().enumerate() {
        let r = run(inst, Algorithm::LpRounding, TRIALS, k as u64, false);
        let (frac, dual) = solve_sufl(inst, CostScale::UNIT).unwrap();
        for (a, s) in r.scenarios.iter().enumerate() {
            let rhs = 3.0 * e2 * dual.budget(inst, a)
                + (1.0 - e2) * frac.connection_cost(inst, a)
                + 2.0 * frac.facility_cost(inst, a);
            if s.cost_per_copy.mean > rhs + margin(&s.cost_per_copy) + 1e-9 {
                lemma += 1;
            }
        }
        let lp = r.lp.as_ref().unwrap();
        let per_copy = r.overall_per_copy.unwrap();
        let rhs = 2.4061 * lp.facility_cost.unwrap() + 1.2707 * lp.connection_cost.unwrap();
        if per_copy.mean > rhs + margin(&per_copy) + 1e-9 {
            corollary += 1;
        }
        hops += r
            .checks
            .iter()
            .filter(|c| c.name.starts_with("three-hop"))
            .map(|c| c.violations)
            .sum::<u64>();
    }
    outcome(
        lemma == 0 && corollary == 0 && hops == 0,
        format!(
            "scenario bound failures {lemma}, overall 2.4061 F* + 1.2707 C* failures {corollary}, three-hop violations {hops}"
        ),
    )
}

fn criterion_7(suite: &[SuflInstance]) -> Outcome {
    let mut failed = 0;
    for (k, inst) in suite.iter().enumerate() {
        for coin in [false, true] {
            let r = run(inst, Algorithm::Alg3 { coin }, TRIALS, k as u64, false);
            let lp = r.lp.as_ref().unwrap().value;
            if r.overall.mean > 2.2975 * lp + margin(&r.overall) + 1e-9 {
                failed += 1;
            }
        }
    }
    let (f2, c2, _) = evaluate_ratio(0.37).unwrap();
    let p = ALG3_COIN;
    let mix_f = p * 2.4061 + (1.0 - p) * f2;
    let mix_c = p * 1.2707 + (1.0 - p) * c2;
    let round4 = |v: f64| (v * 1e4).round() / 1e4;
    let identity = round4(mix_f) <= 2.2975 && round4(mix_c) <= 2.2975;
    outcome(
        failed == 0 && identity,
        format!("{failed} of 40 runs above 2.2975 LP + 3se; mixture ({mix_f:.5}, {mix_c:.5})"),
    )
}

fn criterion_8(suite: &[SuflInstance]) -> Outcome {
    let gamma = 2.4957;
    let mut instances: Vec<SuflInstance> = suite.to_vec();
    instances.push(dual_budget_example(0.01));
    let (mut mean_fail, mut audit, mut stretch) = (0, 0u64, 0u64);
    let (mut strict_stretch, mut strict_conn) = (0u64, 0);
    for (k, inst) in instances.iter().enumerate() {
        let r = run(
            inst,
            Algorithm::PerScenario {
                gamma,
                strict: false,
            },
            TRIALS,
            k as u64,
            false,
        );
        for s in &r.scenarios {
            let val = s.fractional_value.unwrap();
            if s.cost_per_copy.mean > gamma * val + margin(&s.cost_per_copy) + 1e-9 {
                mean_fail += 1;
            }
        }
        for c in &r.checks {
            if c.name.starts_with("radius audit") {
                audit += c.violations;
            }
            if c.name.starts_with("stretch") {
                stretch += c.violations;
            }
        }
        let mut cfg = EvalConfig::new(
            Algorithm::PerScenario {
                gamma: 5.0,
                strict: true,
            },
            TRIALS,
            k as u64,
        );
        cfg.oracle = false;
        match evaluate(&Instance::Sufl(inst.clone()), &cfg) {
            Ok(r) => {
                for s in &r.scenarios {
                    let ca = s.fractional_connection.unwrap();
                    if s.connection.mean > 1.027 * ca + margin(&s.connection) + 1e-9 {
                        strict_conn += 1;
                    }
                }
            }
            Err(_) => strict_stretch += 1,
        }
    }
    let s = stretch_bound(gamma);
    outcome(
        mean_fail == 0 && audit == 0 && stretch == 0 && s <= 15.11 && strict_stretch == 0 && strict_conn == 0,
        format!(
            "21 instances: {mean_fail} scenario means above gamma Val_A + 3se, audit failures {audit}, stretch > {s:.3} in {stretch} client-trials; strict: {strict_stretch} runs with stretch > 5, {strict_conn} scenarios above 1.027 C_A + 3se"
        ),
    )
}

fn criterion_9(suite: &[SuflInstance]) -> Outcome {
    let (mut gap_fail, mut cs_fail) = (0, 0);
    for inst in suite {
        let (p, d) = solve_sufl(inst, CostScale::UNIT).unwrap();
        let (pv, dv) = (p.objective(inst), d.objective(inst));
        if (pv - dv).abs() > 1e-6 {
            gap_fail += 1;
        }
        if !check_complementary_slackness(inst, &p, &d).is_empty() {
            cs_fail += 1;
        }
    }
    let ex = dual_budget_example(0.01);
    let (p, d) = solve_sufl(&ex, CostScale::UNIT).unwrap();
    let value = p.objective(&ex);
    let (val1, v1) = (p.value(&ex, 0), d.budget(&ex, 0));
    let (val2, v2) = (p.value(&ex, 1), d.budget(&ex, 1));
    let primal_ok = (value - 3.0).abs() <= 1e-6;
    let budget_ok = v1 > val1 + 1e-9;
    outcome(
        gap_fail == 0 && cs_fail == 0 && primal_ok && budget_ok,
        format!(
            "duality gap failures {gap_fail}, slackness failures {cs_fail}; example optimum {value:.4} (expected 3), \
             V_A1 {v1:.4} vs Val_A1 {val1:.4}, V_A2 {v2:.4} vs Val_A2 {val2:.4}"
        ),
    )
}

fn criterion_10(suite: &[SuflInstance]) -> Outcome {
    let algorithms = [
        Algorithm::PrimalDual { alpha: 0.2485 },
        Algorithm::LpRounding,
        Algorithm::Alg1,
        Algorithm::Alg2,
        Algorithm::Alg3 { coin: false },
        Algorithm::Alg3 { coin: true },
        Algorithm::PerScenario {
            gamma: 2.4957,
            strict: false,
        },
    ];
    let (mut runs, mut bad) = (0, 0u64);
    let mut instances: Vec<SuflInstance> = suite.to_vec();
    instances.push(dual_budget_example(0.01));
    for (k, inst) in instances.iter().enumerate() {
        for alg in &algorithms {
            let r = run(inst, alg.clone(), 1000, k as u64, true);
            runs += 1;
            bad += r
                .checks
                .iter()
                .filter(|c| c.name.starts_with("sandwich"))
                .map(|c| c.violations)
                .sum::<u64>();
        }
    }
    for seed in 0..10 {
        let tree = generate(&GeneratorConfig {
            seed,
            kind: [
                InstanceKind::VertexCover,
                InstanceKind::SetCover,
                InstanceKind::GeneralCip,
            ][seed as usize % 3],
            stages: 2,
            columns: 4,
            rows: 4,
            ..GeneratorConfig::default()
        })
        .unwrap();
        for alg in [
            Algorithm::CipDependent,
            Algorithm::CipIndependent { lambda: None },
        ] {
            if alg == Algorithm::CipDependent && seed % 3 == 2 {
                continue;
            }
            let mut cfg = EvalConfig::new(alg, 1000, seed);
            cfg.oracle = true;
            let r = evaluate(&tree, &cfg).unwrap();
            runs += 1;
            bad += r
                .checks
                .iter()
                .filter(|c| c.name.starts_with("sandwich"))
                .map(|c| c.violations)
                .sum::<u64>();
        }
    }
    outcome(
        bad == 0,
        format!("{runs} oracle runs, {bad} sandwich violations"),
    )
}

type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let suite = suite();
    let criteria: Vec<Criterion> = vec![
        (
            "dependent rounding exactness on the grid",
            Duration::from_secs(10),
            Box::new(criterion_1),
        ),
        (
            "three-stage vertex cover",
            Duration::from_secs(60),
            Box::new(criterion_2),
        ),
        (
            "set cover independent rounding",
            Duration::from_secs(60),
            Box::new(criterion_3),
        ),
        (
            "greedy bifactor",
            Duration::from_secs(120),
            Box::new(criterion_4),
        ),
        (
            "threshold rounding, alpha 0.2485",
            Duration::from_secs(600),
            Box::new(|| criterion_5(&suite)),
        ),
        (
            "clustered rounding",
            Duration::from_secs(600),
            Box::new(|| criterion_6(&suite)),
        ),
        (
            "best of two",
            Duration::from_secs(600),
            Box::new(|| criterion_7(&suite)),
        ),
        (
            "per-scenario rounding",
            Duration::from_secs(600),
            Box::new(|| criterion_8(&suite)),
        ),
        (
            "LP infrastructure",
            Duration::from_secs(600),
            Box::new(|| criterion_9(&suite)),
        ),
        (
            "sandwich invariant",
            Duration::from_secs(600),
            Box::new(|| criterion_10(&suite)),
        ),
    ];
    let mut all = true;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *budget;
        all &= pass;
        println!(
            "criterion {:>2} {}: {} ({}; {:.1}s of {}s)",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
