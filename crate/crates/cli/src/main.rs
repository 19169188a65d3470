use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use stochround::harness::{
    evaluate, render_comparison, render_json, render_text, Algorithm, EvalConfig, TrialReport,
};
use stochround::instances::{
    generate, load_instance, to_json_string, GeneratorConfig, Instance, InstanceKind,
};
use stochround::lp::{solve_cip_lp, solve_sufl, solve_sufl_dual, CostScale, SolutionDocument};
use stochround::sufl::{DEFAULT_GAMMA, STRICT_GAMMA};

/// Exit status when every step ran but a guarantee line failed.
const EXIT_BOUND_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "stochround",
    version,
    about = "Rounding algorithms for stochastic covering and facility location"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance.
    Gen(GenArgs),
    /// Load and validate an instance file.
    Validate { file: PathBuf },
    /// Solve the LP relaxation and write the solution document.
    SolveLp {
        file: PathBuf,
        /// Include the dual solution.
        #[arg(long)]
        dual: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one rounding algorithm for a number of trials.
    #[command(subcommand)]
    Round(RoundCommand),
    /// Evaluate algorithms against their guarantees; exits 1 if any fails.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sufl,
    Vc,
    Sc,
    Cip,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    facilities: Option<usize>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    arity: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    columns: Option<usize>,
    /// Smallest large right-hand side for general covering programs.
    #[arg(long)]
    b_target: Option<f64>,
    /// Random distances instead of points in the unit square.
    #[arg(long)]
    non_geometric: bool,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Worker threads (defaults to STOCHROUND_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum RoundCommand {
    /// Multi-stage covering programs.
    Cip {
        file: PathBuf,
        #[arg(long, value_enum)]
        algo: CipAlgo,
        /// `auto` or a scaling factor of at least 1.
        #[arg(long, default_value = "auto")]
        lambda: String,
        #[command(flatten)]
        trials: TrialArgs,
    },
    /// Two-stage stochastic facility location.
    Sufl {
        file: PathBuf,
        #[arg(long, value_enum)]
        algo: SuflAlgo,
        #[arg(long, default_value_t = 0.2485)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        /// Per-scenario rounding with gamma 5 and per-trial stretch assertions.
        #[arg(long)]
        strict: bool,
        /// Best-of-two as a biased coin instead of the cheaper branch.
        #[arg(long)]
        coin: bool,
        #[command(flatten)]
        trials: TrialArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CipAlgo {
    Independent,
    Dependent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuflAlgo {
    Pd,
    Lp,
    Alg1,
    Alg2,
    Alg3,
    PerScenario,
}

#[derive(Args)]
struct EvaluateArgs {
    file: PathBuf,
    /// Comma-separated algorithm ids: pd, lp, alg1, alg2, alg3, alg3-coin,
    /// per-scenario, per-scenario-strict, independent, dependent.
    #[arg(long, value_delimiter = ',', required = true)]
    algo: Vec<String>,
    #[arg(long, default_value_t = 0.2485)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the exact oracle and the sandwich check.
    #[arg(long)]
    oracle: bool,
    /// Write the JSON report (an array when several algorithms run).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load(file: &Path) -> Result<Instance> {
    load_instance(file).with_context(|| format!("loading {}", file.display()))
}

fn gen(args: &GenArgs) -> Result<()> {
    let mut cfg = GeneratorConfig {
        seed: args.seed,
        kind: match args.kind {
            KindArg::Sufl => InstanceKind::Sufl,
            KindArg::Vc => InstanceKind::VertexCover,
            KindArg::Sc => InstanceKind::SetCover,
            KindArg::Cip => InstanceKind::GeneralCip,
        },
        geometric: !args.non_geometric,
        ..GeneratorConfig::default()
    };
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.facilities, args.facilities);
    set(&mut cfg.clients, args.clients);
    set(&mut cfg.scenarios, args.scenarios);
    set(&mut cfg.stages, args.stages);
    set(&mut cfg.arity, args.arity);
    set(&mut cfg.rows, args.rows);
    set(&mut cfg.columns, args.columns);
    if let Some(b) = args.b_target {
        cfg.b_target = b;
    }
    let inst = generate(&cfg)?;
    write_or_print(args.out.as_deref(), &to_json_string(&inst))
}

fn validate(file: &Path) -> Result<()> {
    match load(file)? {
        Instance::Sufl(s) => println!(
            "ok: facility location, {} facilities, {} clients, {} scenarios",
            s.num_facilities(),
            s.num_clients(),
            s.num_scenarios()
        ),
        Instance::CipTree(t) => println!(
            "ok: covering tree, {} stages, {} nodes, {} leaves, {} rows, {} variables",
            t.stages,
            t.nodes.len(),
            t.leaves().len(),
            t.rows,
            t.num_variables()
        ),
    }
    Ok(())
}

fn solve_lp(file: &Path, dual: bool, out: Option<&Path>) -> Result<()> {
    let text = match load(file)? {
        Instance::Sufl(inst) => {
            let (primal, duals) = if dual {
                let (p, d) = solve_sufl(&inst, CostScale::UNIT)?;
                // the separate dual solve checks strong duality independently
                let check = solve_sufl_dual(&inst)?;
                let (pv, dv) = (p.objective(&inst), check.objective(&inst));
                if (pv - dv).abs() > 1e-6 * (1.0 + pv.abs()) {
                    bail!("duality gap {} exceeds tolerance", (pv - dv).abs());
                }
                (p, Some(d))
            } else {
                (solve_sufl(&inst, CostScale::UNIT)?.0, None)
            };
            let doc = SolutionDocument {
                objective: primal.objective(&inst),
                primal,
                duals,
            };
            serde_json::to_string_pretty(&doc)?
        }
        Instance::CipTree(tree) => {
            if dual {
                log::warn!("--dual is only available for facility-location instances");
            }
            let sol = solve_cip_lp(&tree)?;
            serde_json::to_string_pretty(&json!({ "objective": sol.objective, "x": sol.x }))?
        }
    };
    write_or_print(out, &text)
}

fn sufl_algorithm(algo: SuflAlgo, alpha: f64, gamma: f64, strict: bool, coin: bool) -> Algorithm {
    match algo {
        SuflAlgo::Pd => Algorithm::PrimalDual { alpha },
        SuflAlgo::Lp => Algorithm::LpRounding,
        SuflAlgo::Alg1 => Algorithm::Alg1,
        SuflAlgo::Alg2 => Algorithm::Alg2,
        SuflAlgo::Alg3 => Algorithm::Alg3 { coin },
        SuflAlgo::PerScenario => Algorithm::PerScenario {
            gamma: if strict { STRICT_GAMMA } else { gamma },
            strict,
        },
    }
}

fn parse_algorithm(id: &str, args: &EvaluateArgs) -> Result<Algorithm> {
    Ok(match id {
        "pd" => Algorithm::PrimalDual { alpha: args.alpha },
        "lp" => Algorithm::LpRounding,
        "alg1" => Algorithm::Alg1,
        "alg2" => Algorithm::Alg2,
        "alg3" => Algorithm::Alg3 { coin: false },
        "alg3-coin" => Algorithm::Alg3 { coin: true },
        "per-scenario" => Algorithm::PerScenario {
            gamma: args.gamma,
            strict: false,
        },
        "per-scenario-strict" => Algorithm::PerScenario {
            gamma: STRICT_GAMMA,
            strict: true,
        },
        "independent" => Algorithm::CipIndependent {
            lambda: args.lambda,
        },
        "dependent" => Algorithm::CipDependent,
        other => return Err(stochround::Error::UnknownAlgorithm(other.to_string()).into()),
    })
}

fn run_round(file: &Path, algorithm: Algorithm, t: &TrialArgs) -> Result<()> {
    let inst = load(file)?;
    let cfg = EvalConfig {
        algorithm,
        trials: t.trials,
        seed: t.seed,
        oracle: false,
        threads: t.threads,
    };
    let report = evaluate(&inst, &cfg)?;
    print!("{}", render_text(&report));
    if let Some(path) = &t.report {
        fs::write(path, render_json(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn round(cmd: &RoundCommand) -> Result<()> {
    match cmd {
        RoundCommand::Cip {
            file,
            algo,
            lambda,
            trials,
        } => {
            let algorithm = match algo {
                CipAlgo::Dependent => Algorithm::CipDependent,
                CipAlgo::Independent => Algorithm::CipIndependent {
                    lambda: match lambda.as_str() {
                        "auto" => None,
                        v => Some(v.parse().with_context(|| format!("invalid lambda `{v}`"))?),
                    },
                },
            };
            run_round(file, algorithm, trials)
        }
        RoundCommand::Sufl {
            file,
            algo,
            alpha,
            gamma,
            strict,
            coin,
            trials,
        } => {
            if *strict && *algo != SuflAlgo::PerScenario {
                bail!("--strict applies to --algo per-scenario only");
            }
            run_round(
                file,
                sufl_algorithm(*algo, *alpha, *gamma, *strict, *coin),
                trials,
            )
        }
    }
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<bool> {
    let inst = load(&args.file)?;
    let mut reports: Vec<TrialReport> = Vec::new();
    for id in &args.algo {
        let cfg = EvalConfig {
            algorithm: parse_algorithm(id, args)?,
            trials: args.trials,
            seed: args.seed,
            oracle: args.oracle,
            threads: args.threads,
        };
        let report = evaluate(&inst, &cfg)?;
        print!("{}", render_text(&report));
        reports.push(report);
    }
    if reports.len() > 1 {
        print!("\n{}", render_comparison(&reports));
    }
    if let Some(path) = &args.out {
        let text = if reports.len() == 1 {
            render_json(&reports[0])
        } else {
            serde_json::to_string_pretty(&reports)?
        };
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(reports.iter().all(TrialReport::passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => gen(args).map(|_| true),
        Command::Validate { file } => validate(file).map(|_| true),
        Command::SolveLp { file, dual, out } => solve_lp(file, *dual, out.as_deref()).map(|_| true),
        Command::Round(cmd) => round(cmd).map(|_| true),
        Command::Evaluate(args) => evaluate_cmd(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_BOUND_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
