//! Batch experiments over the generated families and their summary tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::ScalingChoice;
use crate::driver::{self, SolveStatus, SolverConfig, StepRecord};
use crate::problem::generate::DEFAULT_DEGREE;
use crate::problem::{gen_lsiplog, gen_nsiplog, GenerateError, SiplogProblem};

/// Version tag written into every row of the table CSV.
pub const TABLE_SCHEMA: &str = "siplog-table-1";

pub const TABLE_COLUMNS: [&str; 11] = [
    "schema",
    "family",
    "m",
    "mu",
    "scaling",
    "instances",
    "successes",
    "mean_r",
    "mean_qp",
    "mean_ite",
    "qp_per_ite",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lsiplog,
    Nsiplog,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lsiplog => "lsiplog",
            Family::Nsiplog => "nsiplog",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lsiplog" => Ok(Family::Lsiplog),
            "nsiplog" => Ok(Family::Nsiplog),
            other => Err(format!(
                "unknown family `{other}` (expected lsiplog or nsiplog)"
            )),
        }
    }
}

/// Seed of instance `index` in a cell.
pub fn instance_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

pub fn generate(
    family: Family,
    m: usize,
    mu: f64,
    seed: u64,
) -> Result<SiplogProblem, GenerateError> {
    match family {
        Family::Lsiplog => gen_lsiplog(m, mu, DEFAULT_DEGREE, seed),
        Family::Nsiplog => gen_nsiplog(m, mu, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("experiment needs at least one instance per cell")]
    NoInstances,
    #[error("experiment needs at least one value of `{0}`")]
    Empty(&'static str),
    #[error("barrier weight must be positive, got {0}")]
    BadMu(f64),
}

/// A grid of cells `m × μ × scaling`, each with `instances` seeded problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    pub m: Vec<usize>,
    pub mu: Vec<f64>,
    pub instances: usize,
    pub scalings: Vec<ScalingChoice>,
    pub seed: u64,
    pub config: SolverConfig,
}

impl ExperimentSpec {
    pub fn new(family: Family, m: Vec<usize>, mu: Vec<f64>) -> Self {
        Self {
            family,
            m,
            mu,
            instances: 10,
            scalings: vec![ScalingChoice::Hkm, ScalingChoice::Nt],
            seed: 0,
            config: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.instances == 0 {
            return Err(SpecError::NoInstances);
        }
        if self.m.is_empty() {
            return Err(SpecError::Empty("m"));
        }
        if self.mu.is_empty() {
            return Err(SpecError::Empty("mu"));
        }
        if self.scalings.is_empty() {
            return Err(SpecError::Empty("scaling"));
        }
        if let Some(&mu) = self.mu.iter().find(|&&mu| !(mu > 0.0 && mu.is_finite())) {
            return Err(SpecError::BadMu(mu));
        }
        Ok(())
    }

    /// Cells in table order: `m`, then `μ`, then scaling.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &m in &self.m {
            for &mu in &self.mu {
                for &scaling in &self.scalings {
                    out.push(Cell {
                        family: self.family,
                        m,
                        mu,
                        scaling,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub family: Family,
    pub m: usize,
    pub mu: f64,
    pub scaling: ScalingChoice,
}

/// Identifies one solve within an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub cell: Cell,
    pub instance: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Solved(SolveStatus),
    GenerationFailure,
    SetupFailure,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Solved(s) => s.as_str(),
            RunStatus::GenerationFailure => "generation_failure",
            RunStatus::SetupFailure => "setup_failure",
        }
    }

    pub fn converged(self) -> bool {
        self == RunStatus::Solved(SolveStatus::Converged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub status: RunStatus,
    pub iterations: usize,
    pub qp_total: usize,
    pub final_r: f64,
    /// Solve time only, excluding generation.
    pub wall_time: f64,
    pub message: Option<String>,
}

/// Runs one instance under the experiment's solver settings.
pub fn run_one(
    key: RunKey,
    problem: Result<&SiplogProblem, &GenerateError>,
    config: &SolverConfig,
    observer: &(dyn Fn(&RunKey, &SiplogProblem, &StepRecord<'_>) + Sync),
) -> RunRecord {
    let failed = |status, message: String| RunRecord {
        key,
        status,
        iterations: 0,
        qp_total: 0,
        final_r: f64::NAN,
        wall_time: 0.0,
        message: Some(message),
    };
    let problem = match problem {
        Ok(p) => p,
        Err(e) => return failed(RunStatus::GenerationFailure, e.to_string()),
    };
    let config = SolverConfig {
        scaling: key.cell.scaling,
        ..*config
    };
    let (x0, v0) = problem.default_start();
    match driver::solve_with_observer(problem, &config, &x0, &v0, |s| observer(&key, problem, s)) {
        Ok(report) => RunRecord {
            key,
            status: RunStatus::Solved(report.status),
            iterations: report.iterations,
            qp_total: report.qp_total,
            final_r: report.final_residual.total,
            wall_time: report.wall_time,
            message: report.message,
        },
        Err(e) => failed(RunStatus::SetupFailure, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub rows: Vec<TableRow>,
}

impl ExperimentResult {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.status.converged())
    }
}

pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentResult, SpecError> {
    run_experiment_observed(spec, jobs, &|_, _, _| {})
}

/// Runs every cell, calling `observer` after each accepted step of each
/// solve. Instances are generated once per `(m, μ, index)` and shared by all
/// scalings. Results are ordered by cell and instance, never by completion.
pub fn run_experiment_observed(
    spec: &ExperimentSpec,
    jobs: usize,
    observer: &(dyn Fn(&RunKey, &SiplogProblem, &StepRecord<'_>) + Sync),
) -> Result<ExperimentResult, SpecError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let runs = pool.install(|| {
        let mut groups = Vec::new();
        for &m in &spec.m {
            for &mu in &spec.mu {
                for index in 0..spec.instances {
                    groups.push((m, mu, index));
                }
            }
        }
        let problems: Vec<_> = groups
            .par_iter()
            .map(|&(m, mu, index)| generate(spec.family, m, mu, instance_seed(spec.seed, index)))
            .collect();
        let mut tasks = Vec::new();
        for cell in spec.cells() {
            for index in 0..spec.instances {
                let group = groups
                    .iter()
                    .position(|&(m, mu, i)| m == cell.m && mu == cell.mu && i == index)
                    .expect("group exists for every cell");
                let key = RunKey {
                    cell,
                    instance: index,
                    seed: instance_seed(spec.seed, index),
                };
                tasks.push((key, group));
            }
        }
        tasks
            .par_iter()
            .map(|&(key, group)| run_one(key, problems[group].as_ref(), &spec.config, observer))
            .collect::<Vec<_>>()
    });
    let rows = aggregate(&spec.cells(), &runs);
    Ok(ExperimentResult { runs, rows })
}

/// Averages over the successful runs of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub cell: Cell,
    pub instances: usize,
    pub successes: usize,
    pub mean_time: Option<f64>,
    pub mean_r: Option<f64>,
    pub mean_qp: Option<f64>,
    pub mean_ite: Option<f64>,
}

impl TableRow {
    pub fn label(&self) -> String {
        format!(
            "{} ({})",
            self.cell.m,
            self.cell.scaling.as_str().to_uppercase()
        )
    }

    pub fn qp_per_ite(&self) -> Option<f64> {
        match (self.mean_qp, self.mean_ite) {
            (Some(qp), Some(ite)) if ite > 0.0 => Some(qp / ite),
            _ => None,
        }
    }
}

pub fn aggregate(cells: &[Cell], runs: &[RunRecord]) -> Vec<TableRow> {
    cells
        .iter()
        .map(|cell| {
            let in_cell: Vec<_> = runs.iter().filter(|r| r.key.cell == *cell).collect();
            let ok: Vec<_> = in_cell.iter().filter(|r| r.status.converged()).collect();
            let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
            };
            TableRow {
                cell: *cell,
                instances: in_cell.len(),
                successes: ok.len(),
                mean_time: mean(&|r| r.wall_time),
                mean_r: mean(&|r| r.final_r),
                mean_qp: mean(&|r| r.qp_total as f64),
                mean_ite: mean(&|r| r.iterations as f64),
            }
        })
        .collect()
}

fn cell_or_dash(v: Option<f64>, fmt: impl Fn(f64) -> String) -> String {
    v.map(fmt).unwrap_or_else(|| "-".to_string())
}

/// Aligned text table in the layout `m (scaling) | time(s) | R* | #QP | #ite`,
/// grouped by family and `μ`.
pub fn format_table(rows: &[TableRow]) -> String {
    let header = [
        "m (scaling)",
        "time(s)",
        "R*",
        "#QP",
        "#ite",
        "#QP/#ite",
        "success",
    ];
    let mut lines: Vec<[String; 7]> = Vec::new();
    let mut out = String::new();
    let mut groups: Vec<(Family, f64)> = Vec::new();
    for row in rows {
        if !groups.contains(&(row.cell.family, row.cell.mu)) {
            groups.push((row.cell.family, row.cell.mu));
        }
    }
    for (family, mu) in groups {
        lines.clear();
        for row in rows
            .iter()
            .filter(|r| r.cell.family == family && r.cell.mu == mu)
        {
            lines.push([
                row.label(),
                cell_or_dash(row.mean_time, |v| format!("{v:.2}")),
                cell_or_dash(row.mean_r, |v| format!("{v:.2e}")),
                cell_or_dash(row.mean_qp, |v| format!("{v:.1}")),
                cell_or_dash(row.mean_ite, |v| format!("{v:.2}")),
                cell_or_dash(row.qp_per_ite(), |v| format!("{v:.2}")),
                format!("{}/{}", row.successes, row.instances),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|j| {
                lines
                    .iter()
                    .map(|l| l[j].len())
                    .chain([header[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let render = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, &w))| {
                    if j == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            parts.join(" | ")
        };
        let head: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        let head = render(&head);
        out.push_str(&format!(
            "Results for the {} with mu = {}\n",
            family.as_str().to_uppercase(),
            mu
        ));
        out.push_str(&head);
        out.push('\n');
        out.push_str(&"-".repeat(head.len()));
        out.push('\n');
        for l in &lines {
            out.push_str(&render(l));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Table CSV. Timing is left out so the same spec and seed give the same bytes.
pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_COLUMNS)?;
    for row in rows {
        w.write_record([
            TABLE_SCHEMA.to_string(),
            row.cell.family.to_string(),
            row.cell.m.to_string(),
            format!("{:e}", row.cell.mu),
            row.cell.scaling.to_string(),
            row.instances.to_string(),
            row.successes.to_string(),
            opt(row.mean_r),
            opt(row.mean_qp),
            opt(row.mean_ite),
            opt(row.qp_per_ite()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const RUN_COLUMNS: [&str; 10] = [
    "family",
    "m",
    "mu",
    "scaling",
    "instance",
    "seed",
    "status",
    "iterations",
    "qp_total",
    "final_r",
];

/// One row per solve, without timing.
pub fn write_runs_csv<W: Write>(runs: &[RunRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for r in runs {
        let c = r.key.cell;
        w.write_record([
            c.family.to_string(),
            c.m.to_string(),
            format!("{:e}", c.mu),
            c.scaling.to_string(),
            r.key.instance.to_string(),
            r.key.seed.to_string(),
            r.status.as_str().to_string(),
            r.iterations.to_string(),
            r.qp_total.to_string(),
            format!("{:e}", r.final_r),
        ])?;
    }
    w.flush()?;
    Ok(())
}
