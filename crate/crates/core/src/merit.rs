//! Merit function, constraint violation, boundary step, Armijo line search and
//! the KKT residual.
//!
//! ```text
//!     Φ_ρ(x, V) = χ_ρ(x) + νψ(x, V)
//!     χ_ρ(x)    = f(x) − μ log det F(x) + ρθ(x) + ρ‖Gx − h‖₁
//!     ψ(x, V)   = F(x) • V − μ log det F(x)V
//! ```
//!
//! Functions that need `F(x) ≻ 0` or `V ≻ 0` return `None` when the point
//! has left the cone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::problem::{max_g_over_t, DiscreteMeasure, SiplogProblem};
use crate::symmat::{jordan, logdet_pd, SymMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritParams {
    pub nu: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualBreakdown {
    pub theta: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub matrix_comp: f64,
    pub equality: f64,
    pub total: f64,
}

impl ResidualBreakdown {
    fn from_parts(
        theta: f64,
        stationarity: f64,
        complementarity: f64,
        matrix_comp: f64,
        equality: f64,
    ) -> Self {
        let total = [theta, stationarity, complementarity, matrix_comp, equality]
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt();
        Self {
            theta,
            stationarity,
            complementarity,
            matrix_comp,
            equality,
            total,
        }
    }
}

/// `θ(x) = max_τ (g(x, τ))₊`.
pub fn theta(problem: &SiplogProblem, x: &DVector<f64>) -> f64 {
    max_g_over_t(problem, x).1.max(0.0)
}

/// `ψ = F • V − μ(log det F + log det V)`.
pub fn psi(f: &SymMat, v: &SymMat, mu: f64) -> Option<f64> {
    let lf = logdet_pd(f)?;
    let lv = logdet_pd(v)?;
    Some(f.dot(v) - mu * (lf + lv))
}

/// `Tr(L⁻¹ A L⁻ᵀ)` where `X = LLᵀ`, i.e. `Tr(X⁻¹A)`.
fn trace_solve(l: &DMatrix<f64>, a: &SymMat) -> f64 {
    let half = l
        .solve_lower_triangular(a.as_matrix())
        .expect("nonsingular Cholesky factor");
    let full = l
        .solve_lower_triangular(&half.transpose())
        .expect("nonsingular Cholesky factor");
    full.trace()
}

/// Directional derivative of `ψ` along `(ΔF, ΔV)` with `ΔF = Σ Δxᵢ Fᵢ`:
/// `Tr(ΔF V + F ΔV − μF⁻¹ΔF − μV⁻¹ΔV)`.
pub fn psi_dir(f: &SymMat, v: &SymMat, df: &SymMat, dv: &SymMat, mu: f64) -> Option<f64> {
    let lf = f.cholesky()?;
    let lv = v.cholesky()?;
    Some(df.dot(v) + f.dot(dv) - mu * trace_solve(&lf, df) - mu * trace_solve(&lv, dv))
}

/// `χ_ρ(x)`.
pub fn chi(problem: &SiplogProblem, x: &DVector<f64>, rho: f64) -> Option<f64> {
    let f = problem.eval_f(x).ok()?;
    chi_at(problem, x, &f, rho)
}

fn chi_at(problem: &SiplogProblem, x: &DVector<f64>, f: &SymMat, rho: f64) -> Option<f64> {
    let ld = logdet_pd(f)?;
    let eq = problem.eq_residual(x).lp_norm(1);
    Some(problem.objective().value(x) - problem.mu() * ld + rho * theta(problem, x) + rho * eq)
}

/// `Φ_ρ(x, V)`.
pub fn merit_value(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    v: &SymMat,
    nu: f64,
    rho: f64,
) -> Option<f64> {
    let f = problem.eval_f(x).ok()?;
    let c = chi_at(problem, x, &f, rho)?;
    Some(c + nu * psi(&f, v, problem.mu())?)
}

/// `−σ / λ_min(X⁻¹ΔX)` when that eigenvalue is negative, else `∞`.
fn boundary_step(l: &DMatrix<f64>, dx: &SymMat, sigma: f64) -> f64 {
    let half = l
        .solve_lower_triangular(dx.as_matrix())
        .expect("nonsingular Cholesky factor");
    let full = l
        .solve_lower_triangular(&half.transpose())
        .expect("nonsingular Cholesky factor");
    let lam = SymMat::from_matrix(full)
        .map(|s| s.lambda_min())
        .unwrap_or(f64::NEG_INFINITY);
    if lam < 0.0 {
        -sigma / lam
    } else {
        f64::INFINITY
    }
}

/// Fraction-to-boundary step `s̄ = min(s_x, s_V, 1)`.
pub fn initial_step(f: &SymMat, v: &SymMat, df: &SymMat, dv: &SymMat, sigma: f64) -> Option<f64> {
    let lf = f.cholesky()?;
    let lv = v.cholesky()?;
    let s = boundary_step(&lf, df, sigma)
        .min(boundary_step(&lv, dv, sigma))
        .min(1.0);
    debug_assert!(f.axpy(s, df).is_pd() && v.axpy(s, dv).is_pd());
    Some(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub s: f64,
    pub s_bar: f64,
    pub ell: usize,
    pub x: DVector<f64>,
    pub v: SymMat,
    pub phi_old: f64,
    pub phi_new: f64,
    /// `ΔΦ = ΔxᵀBΔx − νψ′`.
    pub delta_phi: f64,
    pub psi_dir: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchFailure {
    pub delta_phi: f64,
    pub gamma: f64,
    pub last_trial: Option<f64>,
    pub reason: &'static str,
}

/// Backtracks `s = s̄β₁^ℓ` until
/// `Φ_ρ(x + sΔx, V + sΔV) <= Φ_ρ(x, V) − αsΔΦ + ρsγ`.
/// Trial points outside the cone are rejected.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    v: &SymMat,
    dx: &DVector<f64>,
    dv: &SymMat,
    b: &SymMat,
    params: &MeritParams,
    gamma: f64,
    max_backtracks: usize,
) -> Result<LineSearchOutcome, LineSearchFailure> {
    let fail = |delta_phi, last_trial, reason| LineSearchFailure {
        delta_phi,
        gamma,
        last_trial,
        reason,
    };
    let mu = problem.mu();
    let f = problem
        .eval_f(x)
        .map_err(|_| fail(f64::NAN, None, "dimension mismatch"))?;
    let df = problem.map().linear(dx);
    let psi_dir = psi_dir(&f, v, &df, dv, mu).ok_or(fail(f64::NAN, None, "start outside cone"))?;
    let delta_phi = dx.dot(&(b.as_matrix() * dx)) - params.nu * psi_dir;
    let phi_old = merit_value(problem, x, v, params.nu, params.rho).ok_or(fail(
        delta_phi,
        None,
        "start outside cone",
    ))?;
    let s_bar = initial_step(&f, v, &df, dv, params.sigma).ok_or(fail(
        delta_phi,
        None,
        "start outside cone",
    ))?;

    let mut s = s_bar;
    let mut last = None;
    for ell in 0..=max_backtracks {
        let xt = x + dx * s;
        let vt = v.axpy(s, dv);
        if let Some(phi) = merit_value(problem, &xt, &vt, params.nu, params.rho) {
            last = Some(phi);
            if phi <= phi_old - params.alpha * s * delta_phi + params.rho * s * gamma {
                return Ok(LineSearchOutcome {
                    s,
                    s_bar,
                    ell,
                    x: xt,
                    v: vt,
                    phi_old,
                    phi_new: phi,
                    delta_phi,
                    psi_dir,
                });
            }
        }
        s *= params.beta1;
    }
    Err(fail(delta_phi, last, "backtrack limit reached"))
}

/// KKT residual `R(x, y, z, V)` and its components.
pub fn residual_r(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    y: &DiscreteMeasure,
    z: &DVector<f64>,
    v: &SymMat,
) -> ResidualBreakdown {
    let g = problem.constraints();
    let mut phi1 = problem.objective().gradient(x);
    let mut phi2 = 0.0;
    for atom in y.atoms() {
        phi1 += g.grad_x(x, atom.tau) * atom.weight;
        phi2 += g.value(x, atom.tau) * atom.weight;
    }
    for (i, fi) in problem.map().coefficients().iter().enumerate() {
        phi1[i] -= fi.dot(v);
    }
    if problem.eq_rows() > 0 {
        phi1 += problem.eq_matrix().transpose() * z;
    }
    let matrix_comp = match problem.eval_f(x) {
        Ok(f) => {
            let m = f.order();
            let fv = jordan(&f, v).expect("orders match");
            (&fv - &(&SymMat::identity(m) * problem.mu())).frobenius_norm()
        }
        Err(_) => f64::INFINITY,
    };
    ResidualBreakdown::from_parts(
        theta(problem, x),
        phi1.norm(),
        phi2.abs(),
        matrix_comp,
        problem.eq_residual(x).norm(),
    )
}
