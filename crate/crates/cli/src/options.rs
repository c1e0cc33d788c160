use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Deserialize;
use siplog::bench::Family;
use siplog::{Curvature, ScalingChoice, SolverConfig};

/// Flags shared by all subcommands. Each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub family: Option<Family>,
    /// Matrix order(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Barrier weight(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu: Vec<f64>,
    /// aho, hkm or nt; comma separated for `bench`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub scaling: Vec<ScalingChoice>,
    /// l2hp or identity.
    #[arg(long, global = true)]
    pub curvature: Option<Curvature>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Stopping tolerance on the residual R.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Per-iteration CSV trace (`solve` only).
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Instances per cell (`generate`, `bench`).
    #[arg(long, global = true)]
    pub instances: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    family: Option<Family>,
    m: Option<OneOrMany<usize>>,
    mu: Option<OneOrMany<f64>>,
    scaling: Option<OneOrMany<ScalingChoice>>,
    curvature: Option<Curvature>,
    seed: Option<u64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    trace: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    instances: Option<usize>,
    /// Full solver settings; the flat keys above are applied on top.
    solver: Option<SolverConfig>,
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub family: Option<Family>,
    pub m: Vec<usize>,
    pub mu: Vec<f64>,
    pub scaling: Vec<ScalingChoice>,
    pub seed: u64,
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub instances: usize,
    pub solver: SolverConfig,
}

fn read_config(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn pick<T>(flag: Vec<T>, file: Option<OneOrMany<T>>) -> Vec<T> {
    if flag.is_empty() {
        file.map(OneOrMany::into_vec).unwrap_or_default()
    } else {
        flag
    }
}

impl Settings {
    pub fn resolve(flags: Flags) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(p) => read_config(p)?,
            None => FileConfig::default(),
        };
        let mut solver = file.solver.unwrap_or_default();
        if let Some(c) = flags.curvature.or(file.curvature) {
            solver.curvature = c;
        }
        if let Some(t) = flags.tol.or(file.tol) {
            solver.tol_r = t;
        }
        if let Some(k) = flags.max_iter.or(file.max_iter) {
            solver.max_outer = k;
        }
        let jobs = flags.jobs.or(file.jobs).unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        Ok(Self {
            family: flags.family.or(file.family),
            m: pick(flags.m, file.m),
            mu: pick(flags.mu, file.mu),
            scaling: pick(flags.scaling, file.scaling),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            trace: flags.trace.or(file.trace),
            out: flags.out.or(file.out),
            jobs,
            instances: flags.instances.or(file.instances).unwrap_or(10),
            solver,
        })
    }

    pub fn family(&self) -> anyhow::Result<Family> {
        self.family.context("--family is required")
    }

    pub fn single_scaling(&self) -> anyhow::Result<Option<ScalingChoice>> {
        match self.scaling.as_slice() {
            [] => Ok(None),
            [s] => Ok(Some(*s)),
            _ => bail!("`solve` takes a single --scaling"),
        }
    }
}
