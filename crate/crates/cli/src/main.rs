mod options;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use siplog::bench::{self, ExperimentSpec, Family};
use siplog::driver::{write_trace_csv, SolveStatus};
use siplog::merit::ResidualBreakdown;
use siplog::problem::io::{from_json, to_json};
use siplog::{solve, SiplogProblem};

use options::{Flags, Settings};

const EXIT_SOLVER: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "siplog",
    version,
    about = "Interior-point SQP for log-det semi-infinite programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write seeded benchmark instances as JSON problem files into --out.
    Generate,
    /// Solve one problem file, or a generated instance when no file is given.
    Solve { problem: Option<PathBuf> },
    /// Run a batch experiment and print the summary table.
    Bench {
        /// Per-run CSV in addition to the table CSV given by --out.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
}

enum Outcome {
    Success,
    SolverFailure,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::SolverFailure) => ExitCode::from(EXIT_SOLVER),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let settings = Settings::resolve(cli.flags)?;
    match cli.command {
        Command::Generate => generate(&settings),
        Command::Solve { problem } => solve_one(&settings, problem.as_deref()),
        Command::Bench { runs } => run_bench(&settings, runs.as_deref()),
    }
}

fn defaulted<T: Copy>(values: &[T], default: T) -> Vec<T> {
    if values.is_empty() {
        vec![default]
    } else {
        values.to_vec()
    }
}

fn instance_name(family: Family, m: usize, mu: f64, seed: u64) -> String {
    format!("{family}-m{m}-mu{mu:e}-s{seed}.json")
}

fn generate(s: &Settings) -> anyhow::Result<Outcome> {
    let family = s.family()?;
    let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut failed = false;
    println!("file,seed,redraws");
    for &m in &defaulted(&s.m, 10) {
        for &mu in &defaulted(&s.mu, 1.0) {
            for index in 0..s.instances {
                let seed = bench::instance_seed(s.seed, index);
                let problem = match bench::generate(family, m, mu, seed) {
                    Ok(p) => p,
                    Err(e) => {
                        eprintln!("{family} m={m} mu={mu} seed={seed}: {e}");
                        failed = true;
                        continue;
                    }
                };
                let path = dir.join(instance_name(family, m, mu, seed));
                fs::write(&path, to_json(&problem)?)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                let redraws = problem.family().map_or(0, |f| f.redraws());
                println!("{},{seed},{redraws}", path.display());
            }
        }
    }
    Ok(if failed {
        Outcome::SolverFailure
    } else {
        Outcome::Success
    })
}

fn load_problem(s: &Settings, path: Option<&Path>) -> anyhow::Result<SiplogProblem> {
    let mu = match s.mu.as_slice() {
        [] => None,
        [mu] => Some(*mu),
        _ => bail!("`solve` takes a single --mu"),
    };
    let problem = match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            from_json(&text).with_context(|| format!("cannot parse {}", path.display()))?
        }
        None => {
            let family = s.family().context("give a problem file or --family")?;
            let m = match s.m.as_slice() {
                [] => 10,
                [m] => *m,
                _ => bail!("`solve` takes a single --m"),
            };
            return Ok(bench::generate(family, m, mu.unwrap_or(1.0), s.seed)?);
        }
    };
    match mu {
        Some(mu) if mu != problem.mu() => {
            let family = problem
                .family()
                .context("problem file carries no generator data to rebuild with a new mu")?;
            Ok(family.build(mu)?)
        }
        _ => Ok(problem),
    }
}

#[derive(Serialize)]
struct Report {
    status: SolveStatus,
    scaling: String,
    curvature: String,
    mu: f64,
    iterations: usize,
    qp_total: usize,
    final_residual: ResidualBreakdown,
    wall_time: f64,
    x: Vec<f64>,
    message: Option<String>,
}

fn solve_one(s: &Settings, path: Option<&Path>) -> anyhow::Result<Outcome> {
    let problem = load_problem(s, path)?;
    let mut config = s.solver;
    if let Some(scaling) = s.single_scaling()? {
        config.scaling = scaling;
    }
    let (x0, v0) = problem.default_start();
    let report = solve(&problem, &config, &x0, &v0)?;
    if let Some(trace) = &s.trace {
        let file =
            File::create(trace).with_context(|| format!("cannot create {}", trace.display()))?;
        write_trace_csv(&report.trace, BufWriter::new(file))?;
    }
    if let Some(out) = &s.out {
        let json = Report {
            status: report.status,
            scaling: config.scaling.to_string(),
            curvature: config.curvature.to_string(),
            mu: problem.mu(),
            iterations: report.iterations,
            qp_total: report.qp_total,
            final_residual: report.final_residual,
            wall_time: report.wall_time,
            x: report.final_iterate.x.iter().copied().collect(),
            message: report.message.clone(),
        };
        let text = serde_json::to_string_pretty(&json)?;
        fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    }
    println!(
        "{} scaling={} ite={} qp={} R*={:.3e} time={:.3}s",
        report.status.as_str(),
        config.scaling,
        report.iterations,
        report.qp_total,
        report.final_residual.total,
        report.wall_time,
    );
    if let Some(msg) = &report.message {
        eprintln!("{msg}");
    }
    Ok(if report.status == SolveStatus::Converged {
        Outcome::Success
    } else {
        Outcome::SolverFailure
    })
}

fn run_bench(s: &Settings, runs_path: Option<&Path>) -> anyhow::Result<Outcome> {
    let mut spec = ExperimentSpec::new(s.family()?, defaulted(&s.m, 10), defaulted(&s.mu, 1.0));
    spec.instances = s.instances;
    spec.seed = s.seed;
    spec.config = s.solver;
    if !s.scaling.is_empty() {
        spec.scalings = s.scaling.clone();
    }
    let result = bench::run_experiment(&spec, s.jobs)?;
    print!("{}", bench::format_table(&result.rows));
    if let Some(out) = &s.out {
        let file = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
        bench::write_table_csv(&result.rows, BufWriter::new(file))?;
    }
    if let Some(path) = runs_path {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        bench::write_runs_csv(&result.runs, BufWriter::new(file))?;
    }
    for run in result.runs.iter().filter(|r| !r.status.converged()) {
        let c = run.key.cell;
        eprintln!(
            "{} m={} mu={} {} seed={}: {}",
            c.family,
            c.m,
            c.mu,
            c.scaling,
            run.key.seed,
            run.message.as_deref().unwrap_or(run.status.as_str())
        );
    }
    Ok(if result.all_converged() {
        Outcome::Success
    } else {
        Outcome::SolverFailure
    })
}
