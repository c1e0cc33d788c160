//! Exchange method for the semi-infinite quadratic subproblem
//!
//! ```text
//!     min  (∇f(x) − μξ(x))ᵀd + ½dᵀBd
//!     s.t. g(x, τ) + ∇ₓg(x, τ)ᵀd <= 0   (τ ∈ T),   G(x + d) = h.
//! ```
//!
//! Finite relaxations over a working set `T_k` are solved exactly, indices
//! with zero multiplier are dropped and the most violated index of the
//! linearized constraint is added, until the violation is at most `γ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{
    maximize_on_interval, xi, Atom, DiscreteMeasure, ProblemError, SiplogProblem,
};
use crate::qpcore::{row_tolerance, solve_qp, QpError, QpInstance};
use crate::symmat::SymMat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeConfig {
    pub max_iter: usize,
    /// Indices with multiplier at most this are dropped.
    pub multiplier_tol: f64,
    /// Points closer than this count as the same index.
    pub duplicate_tol: f64,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            multiplier_tol: 1e-12,
            duplicate_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeResult {
    pub dx: DVector<f64>,
    pub y_plus: DiscreteMeasure,
    pub z_plus: DVector<f64>,
    pub qp_count: usize,
    /// `max_τ (g(x, τ) + ∇ₓg(x, τ)ᵀdx)₊`.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExchangeError {
    #[error("subproblem failed: {0}")]
    Qp(#[from] QpError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("exchange did not terminate in {} iterations (violation {:e})", .best.qp_count, .best.max_violation)]
    IterationCap { best: Box<ExchangeResult> },
    #[error("maximizer τ = {tau} repeats a working index with violation {violation:e}")]
    Stalled { tau: f64, violation: f64 },
}

fn contains(points: &[f64], tau: f64, tol: f64) -> bool {
    points.iter().any(|&p| (p - tau).abs() <= tol)
}

fn push_unique(points: &mut Vec<f64>, tau: f64, tol: f64) {
    if !contains(points, tau, tol) {
        points.push(tau);
    }
}

/// Linear term `∇f(x) − μξ(x)` of the subproblem.
pub fn siqp_linear_term(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    xi: &DVector<f64>,
) -> DVector<f64> {
    problem.objective().gradient(x) - xi * problem.mu()
}

/// Finite relaxation of the subproblem over `points`.
pub fn relaxation(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    b: &SymMat,
    linear: &DVector<f64>,
    points: &[f64],
) -> QpInstance {
    let n = problem.dim();
    let g = problem.constraints();
    let mut a = DMatrix::zeros(points.len(), n);
    let mut rhs = DVector::zeros(points.len());
    for (k, &tau) in points.iter().enumerate() {
        a.set_row(k, &g.grad_x(x, tau).transpose());
        rhs[k] = -g.value(x, tau);
    }
    QpInstance::new(b.clone(), linear.clone())
        .with_inequalities(a, rhs)
        .with_equalities(problem.eq_matrix().clone(), -problem.eq_residual(x))
}

fn linearized_max(problem: &SiplogProblem, x: &DVector<f64>, dx: &DVector<f64>) -> (f64, f64) {
    let g = problem.constraints();
    maximize_on_interval(problem.index_set(), |tau| {
        g.linearized_jet(x, Some(dx), tau)
    })
}

/// Violation the QP cannot resolve for the row at `tau`: its own
/// feasibility tolerance for that row.
fn rounding_slack(problem: &SiplogProblem, x: &DVector<f64>, dx: &DVector<f64>, tau: f64) -> f64 {
    let g = problem.constraints();
    row_tolerance(g.grad_x(x, tau).norm(), g.value(x, tau), dx.norm())
}

/// Runs the exchange method from `T₀ = supp(warm) ∪ {t_min, t_max}`.
pub fn solve_siqp(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    b: &SymMat,
    xi: &DVector<f64>,
    gamma: f64,
    warm: &DiscreteMeasure,
    cfg: &ExchangeConfig,
) -> Result<ExchangeResult, ExchangeError> {
    let linear = siqp_linear_term(problem, x, xi);
    let t = problem.index_set();
    let mut points = Vec::new();
    for tau in warm.support() {
        push_unique(&mut points, t.clamp(tau), cfg.duplicate_tol);
    }
    push_unique(&mut points, t.t_min(), cfg.duplicate_tol);
    push_unique(&mut points, t.t_max(), cfg.duplicate_tol);

    let g = problem.constraints();
    let mut best: Option<ExchangeResult> = None;
    for k in 0..cfg.max_iter {
        let inst = relaxation(problem, x, b, &linear, &points);
        let sol = solve_qp(&inst)?;
        let atoms: Vec<Atom> = points
            .iter()
            .zip(sol.zeta.iter())
            .filter(|(_, &w)| w > cfg.multiplier_tol)
            .map(|(&tau, &weight)| Atom { tau, weight })
            .collect();
        let kept: Vec<f64> = atoms.iter().map(|a| a.tau).collect();
        let (tau_star, value) = linearized_max(problem, x, &sol.d);
        let result = ExchangeResult {
            y_plus: DiscreteMeasure::new(atoms)?,
            z_plus: sol.z.clone(),
            qp_count: k + 1,
            max_violation: value.max(0.0),
            dx: sol.d,
        };
        if value <= gamma + rounding_slack(problem, x, &result.dx, tau_star) {
            return Ok(result);
        }
        if contains(&kept, tau_star, cfg.duplicate_tol) {
            // the retained index is enforced by the QP, so re-check it there
            let at = g.linearized_jet(x, Some(&result.dx), tau_star).value;
            if at <= gamma + rounding_slack(problem, x, &result.dx, tau_star) {
                return Ok(result);
            }
            return Err(ExchangeError::Stalled {
                tau: tau_star,
                violation: at,
            });
        }
        if best
            .as_ref()
            .is_none_or(|b| result.max_violation < b.max_violation)
        {
            best = Some(result);
        }
        points = kept;
        points.push(tau_star);
    }
    match best {
        Some(mut b) => {
            b.qp_count = cfg.max_iter;
            Err(ExchangeError::IterationCap { best: Box::new(b) })
        }
        None => Err(ExchangeError::IterationCap {
            best: Box::new(ExchangeResult {
                dx: DVector::zeros(problem.dim()),
                y_plus: DiscreteMeasure::empty(),
                z_plus: DVector::zeros(problem.eq_rows()),
                qp_count: 0,
                max_violation: f64::INFINITY,
            }),
        }),
    }
}

/// Largest residual over the inexact optimality conditions of the
/// subproblem: stationarity, linearized feasibility on the support,
/// complementarity, the equalities, nonnegative weights, and the `γ`-relaxed
/// feasibility over all of `T`. All components use the max norm.
pub fn verify_inexact_kkt(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    b: &SymMat,
    gamma: f64,
    result: &ExchangeResult,
) -> f64 {
    let xi = match xi(problem.map(), x) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let g = problem.constraints();
    let dx = &result.dx;
    let mut stat = siqp_linear_term(problem, x, &xi) + b.as_matrix() * dx;
    if problem.eq_rows() > 0 {
        stat += problem.eq_matrix().transpose() * &result.z_plus;
    }
    let mut worst = 0.0f64;
    for atom in result.y_plus.atoms() {
        stat += g.grad_x(x, atom.tau) * atom.weight;
        let lin = g.value(x, atom.tau) + g.grad_x(x, atom.tau).dot(dx);
        worst = worst.max(lin.max(0.0));
        worst = worst.max((atom.weight * lin).abs());
        worst = worst.max((-atom.weight).max(0.0));
    }
    worst = worst.max(stat.amax());
    worst = worst.max(problem.eq_residual(&(x + dx)).amax());
    let (_, value) = linearized_max(problem, x, dx);
    worst.max((value - gamma).max(0.0))
}
