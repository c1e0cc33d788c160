//! Random benchmark families.
//!
//! * `lsiplog`: linear objective `−A₀ • X`, constraints `A(τ) • X >= 0` with
//!   a degree-`q` matrix polynomial `A(τ)`, `Tr X = 1`, `F(x) = X`.
//! * `nsiplog`: quartic objective `½xᵀMx + cᵀx + ω‖x‖⁴`, moment constraints
//!   `a(τ)ᵀx <= b(τ)`, `F(x) = X + κI`, no equalities.
//!
//! Both live on `T = [0, 1]` with `x` the upper-triangle coordinates of `X`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    IndexInterval, LinearObjective, MomentConstraint, PolynomialMatrixConstraint, ProblemError,
    QuarticObjective, SiplogProblem, SymVecIndexing,
};
use crate::driver::{self, SolveStatus, SolverConfig};
use crate::symmat::SymMat;

pub const DEFAULT_DEGREE: usize = 9;
pub const DEFAULT_REDRAW_BUDGET: usize = 100;
/// Acceptance threshold: the constraint-free optimum must violate some
/// `A(τ) • X >= 0` on the check grid by at least this much.
pub const REJECTION_THRESHOLD: f64 = 1e-3;
pub const REJECTION_GRID_INTERVALS: usize = 20;
pub const NSIPLOG_OMEGA: f64 = 0.01;
pub const NSIPLOG_KAPPA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("matrix order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("no admissible lsiplog instance after {attempts} draws")]
    BudgetExhausted { attempts: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Raw generator data; enough to rebuild an instance bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratedFamily {
    Lsiplog {
        m: usize,
        q: usize,
        seed: u64,
        /// Draws rejected before this one was accepted.
        redraws: usize,
        #[serde(rename = "A0")]
        a0: SymMat,
        /// `A` coefficient matrices, `A(τ) = Σₗ τˡ A[l]`.
        #[serde(rename = "A")]
        a: Vec<SymMat>,
    },
    Nsiplog {
        m: usize,
        seed: u64,
        #[serde(rename = "M")]
        m_mat: SymMat,
        c: Vec<f64>,
        omega: f64,
        kappa: f64,
    },
}

impl GeneratedFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            GeneratedFamily::Lsiplog { .. } => "lsiplog",
            GeneratedFamily::Nsiplog { .. } => "nsiplog",
        }
    }

    pub fn order(&self) -> usize {
        match self {
            GeneratedFamily::Lsiplog { m, .. } | GeneratedFamily::Nsiplog { m, .. } => *m,
        }
    }

    pub fn redraws(&self) -> usize {
        match self {
            GeneratedFamily::Lsiplog { redraws, .. } => *redraws,
            GeneratedFamily::Nsiplog { .. } => 0,
        }
    }

    /// Instantiates the problem for barrier weight `mu`.
    pub fn build(&self, mu: f64) -> Result<SiplogProblem, ProblemError> {
        let problem = match self {
            GeneratedFamily::Lsiplog { m, a0, a, .. } => {
                let idx = SymVecIndexing::new(*m);
                let n = idx.dim();
                let c = -idx.pair_with(a0);
                let coeffs = a.iter().map(|al| idx.pair_with(al)).collect();
                let trace_row = idx.pair_with(&SymMat::identity(*m));
                SiplogProblem::new(
                    Arc::new(LinearObjective::new(c)),
                    Arc::new(PolynomialMatrixConstraint::new(coeffs)),
                    idx.affine_map(SymMat::zeros(*m)),
                    DMatrix::from_row_slice(1, n, trace_row.as_slice()),
                    DVector::from_element(1, 1.0),
                    IndexInterval::unit(),
                    mu,
                )?
            }
            GeneratedFamily::Nsiplog {
                m,
                m_mat,
                c,
                omega,
                kappa,
                ..
            } => {
                let idx = SymVecIndexing::new(*m);
                let n = idx.dim();
                if m_mat.order() != n || c.len() != n {
                    return Err(ProblemError::Dimension {
                        what: "nsiplog M/c",
                        expected: n,
                        found: c.len(),
                    });
                }
                SiplogProblem::new(
                    Arc::new(QuarticObjective::new(
                        m_mat.as_matrix().clone(),
                        DVector::from_column_slice(c),
                        *omega,
                    )),
                    Arc::new(MomentConstraint::new(n)),
                    idx.affine_map(&SymMat::identity(*m) * *kappa),
                    DMatrix::zeros(0, n),
                    DVector::zeros(0),
                    IndexInterval::unit(),
                    mu,
                )?
            }
        };
        Ok(problem.with_family(self.clone()))
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

fn draw_sym(rng: &mut ChaCha8Rng, m: usize) -> SymMat {
    SymMat::from_upper_fn(m, |_, _| uniform(rng))
}

/// Draws `A₀` and the coefficients `a_{i,j,l}` for `i <= j` (row-major, `l`
/// innermost), mirrored to keep every `A(τ)` symmetric.
fn draw_lsiplog_data(rng: &mut ChaCha8Rng, m: usize, q: usize) -> (SymMat, Vec<SymMat>) {
    let a0 = draw_sym(rng, m);
    let mut coeffs = vec![vec![0.0; m * (m + 1) / 2]; q + 1];
    for k in 0..m * (m + 1) / 2 {
        for c in coeffs.iter_mut() {
            c[k] = uniform(rng);
        }
    }
    let a = coeffs
        .iter()
        .map(|c| SymMat::from_upper_row_major(m, c).expect("sized above"))
        .collect();
    (a0, a)
}

/// Random linear instance with the default redraw budget.
pub fn gen_lsiplog(m: usize, mu: f64, q: usize, seed: u64) -> Result<SiplogProblem, GenerateError> {
    gen_lsiplog_with_budget(m, mu, q, seed, DEFAULT_REDRAW_BUDGET)
}

/// Random linear instance. Draws are rejected until the optimum of the
/// instance without semi-infinite constraints violates `A(τ) • X >= 0` by at
/// least `REJECTION_THRESHOLD` somewhere on a 21-point grid of `T`.
pub fn gen_lsiplog_with_budget(
    m: usize,
    mu: f64,
    q: usize,
    seed: u64,
    budget: usize,
) -> Result<SiplogProblem, GenerateError> {
    if m < 2 {
        return Err(GenerateError::OrderTooSmall(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SolverConfig::default();
    for attempt in 0..budget {
        let (a0, a) = draw_lsiplog_data(&mut rng, m, q);
        let family = GeneratedFamily::Lsiplog {
            m,
            q,
            seed,
            redraws: attempt,
            a0,
            a,
        };
        let problem = family.build(mu)?;
        if violates_constraints_without_them(&problem, &config) {
            return Ok(problem);
        }
        log::debug!("lsiplog seed {seed}: draw {attempt} rejected");
    }
    Err(GenerateError::BudgetExhausted { attempts: budget })
}

fn violates_constraints_without_them(problem: &SiplogProblem, config: &SolverConfig) -> bool {
    let relaxed = problem.without_constraints();
    let (x0, v0) = problem.default_start();
    let report = match driver::solve(&relaxed, config, &x0, &v0) {
        Ok(r) => r,
        Err(_) => return false,
    };
    if report.status != SolveStatus::Converged {
        return false;
    }
    let x = &report.final_iterate.x;
    let g = problem.constraints();
    // A(τ) • X̃ = −g(x̃, τ)
    problem
        .index_set()
        .grid(REJECTION_GRID_INTERVALS)
        .map(|tau| -g.value(x, tau))
        .fold(f64::INFINITY, f64::min)
        <= -REJECTION_THRESHOLD
}

/// Random nonconvex instance with `ω = κ = 0.01`.
pub fn gen_nsiplog(m: usize, mu: f64, seed: u64) -> Result<SiplogProblem, GenerateError> {
    if m < 2 {
        return Err(GenerateError::OrderTooSmall(m));
    }
    let n = m * (m + 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_mat = draw_sym(&mut rng, n);
    let c: Vec<f64> = (0..n).map(|_| uniform(&mut rng)).collect();
    let family = GeneratedFamily::Nsiplog {
        m,
        seed,
        m_mat,
        c,
        omega: NSIPLOG_OMEGA,
        kappa: NSIPLOG_KAPPA,
    };
    Ok(family.build(mu)?)
}
