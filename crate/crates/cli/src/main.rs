use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tldmp::dmp::rollout;
use tldmp::export::{read_parameters, write_learning_curve, write_parameters};
use tldmp::formula::{Monitor, SmoothingParams};
use tldmp::scenarios::{learn, ScenarioSpec};
use tldmp::trace::Trace;

/// Learn movement primitives that satisfy weighted temporal-logic tasks.
#[derive(Parser)]
#[command(name = "tldmp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the scenario's primitive and write trajectory, learning
    /// curve, parameters and summary.
    Run(RunArgs),
    /// Evaluate a formula over a stored trajectory.
    Monitor(MonitorArgs),
    /// Integrate the scenario's primitive with given shape parameters.
    Rollout(RolloutArgs),
}

#[derive(Args)]
struct Smoothing {
    /// Sharpness of the smooth minimum.
    #[arg(long)]
    k1: Option<f64>,
    /// Sharpness of the smooth maximum.
    #[arg(long)]
    k2: Option<f64>,
}

impl Smoothing {
    fn apply(&self, base: SmoothingParams) -> Result<SmoothingParams, Failure> {
        SmoothingParams::new(self.k1.unwrap_or(base.k1), self.k2.unwrap_or(base.k2), base.rho_max)
            .map_err(|e| Failure::Input(e.to_string()))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the optimizer seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the output files; created if missing.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    smoothing: Smoothing,
    /// Overrides the update budget.
    #[arg(long)]
    max_updates: Option<usize>,
    /// Threads evaluating samples. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress per-update progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct MonitorArgs {
    /// Scenario configuration providing regions, obstacles and weights.
    #[arg(long)]
    config: PathBuf,
    /// Trajectory CSV as written by `run` or `rollout`.
    #[arg(long)]
    trace: PathBuf,
    /// Formula to check instead of the configured one.
    #[arg(long)]
    formula: Option<String>,
    #[command(flatten)]
    smoothing: Smoothing,
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long)]
    config: PathBuf,
    /// Parameters CSV as written by `run`.
    #[arg(long)]
    params: PathBuf,
    /// Writes `trajectory.csv` here instead of to standard output.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    /// Bad configuration, arguments or input files (exit 2).
    Input(String),
    /// The optimizer ran but did not produce a satisfying trajectory (exit 1).
    Unsolved(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Unsolved(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

fn input<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn load_config(path: &Path) -> Result<ScenarioSpec, Failure> {
    ScenarioSpec::load(path).map_err(input(path.display()))
}

fn write_file<E: std::fmt::Display>(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
) -> Result<(), Failure> {
    let mut w = File::create(path).map(BufWriter::new).map_err(input(path.display()))?;
    body(&mut w).map_err(input(path.display()))?;
    w.flush().map_err(input(path.display()))
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut spec = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        spec.optimizer.seed = seed;
    }
    if let Some(m) = args.max_updates {
        spec.optimizer.max_updates = m;
    }
    spec.optimizer.threads = args.threads;
    spec.smoothing = args.smoothing.apply(spec.smoothing)?;
    spec.validate().map_err(input(args.config.display()))?;
    fs::create_dir_all(&args.out_dir).map_err(input(args.out_dir.display()))?;

    let started = Instant::now();
    let quiet = args.quiet;
    let outcome = learn(&spec, |r| {
        if !quiet {
            eprintln!(
                "update {:>4}  mean cost {:.6e}  min cost {:.6e}",
                r.update, r.mean_cost, r.min_cost
            );
        }
    });
    let wall = started.elapsed().as_secs_f64();
    let out = outcome.map_err(|e| Failure::Unsolved(format!("optimization failed: {e}")))?;

    let dir = &args.out_dir;
    write_file(&dir.join("trajectory.csv"), |w| out.trajectory.write_csv(w))?;
    write_file(&dir.join("learning_curve.csv"), |w| {
        write_learning_curve(&out.result.history, w)
    })?;
    write_file(&dir.join("parameters.csv"), |w| write_parameters(&out.result.theta, w))?;
    let summary = json!({
        "seed": spec.optimizer.seed,
        "updates": out.result.updates,
        "converged": out.result.converged,
        "satisfied": out.satisfied,
        "robustness": out.robustness,
        "smoothed_robustness": out.smoothed_robustness,
        "wall_seconds": wall,
        "config": serde_json::to_value(&spec).expect("scenario serializes"),
    });
    write_file(&dir.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w).map_err(serde_json::Error::io)
    })?;

    println!(
        "{} after {} updates: robustness {:.6e}, satisfied {}",
        if out.result.converged {
            "converged"
        } else {
            "not converged"
        },
        out.result.updates,
        out.robustness,
        out.satisfied
    );
    if out.success() {
        Ok(())
    } else {
        Err(Failure::Unsolved(format!(
            "no satisfying trajectory within {} updates",
            spec.optimizer.max_updates
        )))
    }
}

fn monitor(args: &MonitorArgs) -> Result<(), Failure> {
    let mut spec = load_config(&args.config)?;
    if let Some(text) = &args.formula {
        spec.formula = text.clone();
    }
    let formula = spec.parsed_formula().map_err(input("--formula"))?;
    let params = args.smoothing.apply(spec.smoothing)?;
    let file = File::open(&args.trace).map_err(input(args.trace.display()))?;
    let trace = Trace::read_csv(BufReader::new(file)).map_err(input(args.trace.display()))?;
    let monitor = Monitor::new(&formula, &spec.registry(), trace.dim()).map_err(input("formula"))?;
    let verdict = monitor.satisfies(&trace).map_err(input(args.trace.display()))?;
    let rho = monitor
        .robustness(&trace, params.rho_max)
        .map_err(input(args.trace.display()))?;
    let smooth = monitor
        .smooth_robustness(&trace, &params)
        .map_err(input(args.trace.display()))?;
    println!("formula: {formula}");
    println!("verdict: {}", if verdict { "satisfied" } else { "violated" });
    println!("robustness: {rho:.12e}");
    println!(
        "smoothed robustness: {smooth:.12e} (k1 = {}, k2 = {})",
        params.k1, params.k2
    );
    println!("gap: {:.12e}", rho - smooth);
    Ok(())
}

fn rollout_cmd(args: &RolloutArgs) -> Result<(), Failure> {
    let spec = load_config(&args.config)?;
    let file = File::open(&args.params).map_err(input(args.params.display()))?;
    let theta = read_parameters(BufReader::new(file)).map_err(input(args.params.display()))?;
    let sys = spec
        .dmp_system()
        .and_then(|s| s.with_theta(&theta))
        .map_err(input(args.params.display()))?;
    let trace = rollout(&sys, &spec.integration).map_err(|e| Failure::Unsolved(e.to_string()))?;
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(input(dir.display()))?;
            write_file(&dir.join("trajectory.csv"), |w| trace.write_csv(w))
        }
        None => trace.write_csv(io::stdout().lock()).map_err(input("stdout")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Monitor(a) => monitor(a),
        Command::Rollout(a) => rollout_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(m) => eprintln!("error: {m}"),
                Failure::Unsolved(m) => eprintln!("{m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
