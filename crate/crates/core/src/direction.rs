//! Dual matrix directions from scaled Newton equations, and the curvature
//! matrices used in the quadratic subproblems.
//!
//! For a nonsingular scaling `P` put `F̃ = P F Pᵀ`, `Ṽ = P⁻ᵀ V P⁻¹` and
//! `F̃ᵢ = P Fᵢ Pᵀ`. Linearizing `F̃∘Ṽ = μI` gives
//!
//! ```text
//!     ΔṼ = μF̃⁻¹ − 𝓛_F̃⁻¹(ΔF̃∘Ṽ) − Ṽ,      ΔV = Pᵀ ΔṼ P,
//! ```
//!
//! with `ΔF̃ = Σ Δxᵢ F̃ᵢ`. The choice of `P` selects a Monteiro-Zhang
//! direction: identity (AHO), `F^{-1/2}` (HKM) or `W^{-1/2}` with `W` the
//! Nesterov-Todd scaling point (NT).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{DiscreteMeasure, SiplogProblem};
use crate::symmat::{
    inv_sqrt_pd, jordan, nt_scaling_point, sqrt_pd, LinalgError, LyapunovSolver, SymMat,
};

/// Eigenvalues of the assembled curvature matrix below this are lifted to 1.
pub const LIFT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("curvature `l2hp` needs Hessians of f and g; use `identity` instead")]
    MissingHessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingChoice {
    Aho,
    Hkm,
    Nt,
}

impl ScalingChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalingChoice::Aho => "aho",
            ScalingChoice::Hkm => "hkm",
            ScalingChoice::Nt => "nt",
        }
    }
}

impl fmt::Display for ScalingChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalingChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aho" => Ok(ScalingChoice::Aho),
            "hkm" => Ok(ScalingChoice::Hkm),
            "nt" => Ok(ScalingChoice::Nt),
            other => Err(format!("unknown scaling `{other}` (aho|hkm|nt)")),
        }
    }
}

/// Curvature matrix used in the quadratic subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Curvature {
    /// `∇²ₓₓL₂(x, y) + H_P(x, V)` with eigenvalue lifting.
    #[serde(rename = "l2hp")]
    L2PlusHp,
    #[serde(rename = "identity")]
    Identity,
}

impl Curvature {
    pub fn as_str(self) -> &'static str {
        match self {
            Curvature::L2PlusHp => "l2hp",
            Curvature::Identity => "identity",
        }
    }
}

impl fmt::Display for Curvature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Curvature {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2hp" => Ok(Curvature::L2PlusHp),
            "identity" => Ok(Curvature::Identity),
            other => Err(format!("unknown curvature `{other}` (l2hp|identity)")),
        }
    }
}

/// `F(x)`, `V` and the coefficient matrices seen through a scaling `P`.
#[derive(Debug, Clone)]
pub struct ScaledFrame {
    pub kind: ScalingChoice,
    pub p: DMatrix<f64>,
    pub p_inv: DMatrix<f64>,
    pub f_tilde: SymMat,
    pub v_tilde: SymMat,
    pub fi_tilde: Vec<SymMat>,
    lyap: LyapunovSolver,
}

impl ScaledFrame {
    pub fn lyapunov(&self) -> &LyapunovSolver {
        &self.lyap
    }

    /// `‖F̃Ṽ − ṼF̃‖_F`.
    pub fn commutator_norm(&self) -> f64 {
        let a = self.f_tilde.as_matrix() * self.v_tilde.as_matrix();
        (&a - a.transpose()).norm()
    }
}

pub fn build_frame(
    kind: ScalingChoice,
    f: &SymMat,
    v: &SymMat,
    fi: &[SymMat],
) -> Result<ScaledFrame, LinalgError> {
    if !f.is_pd() {
        return Err(LinalgError::NotPositiveDefinite {
            lambda_min: f.lambda_min(),
        });
    }
    if !v.is_pd() {
        return Err(LinalgError::NotPositiveDefinite {
            lambda_min: v.lambda_min(),
        });
    }
    let m = f.order();
    let (p, p_inv) = match kind {
        ScalingChoice::Aho => (DMatrix::identity(m, m), DMatrix::identity(m, m)),
        ScalingChoice::Hkm => (inv_sqrt_pd(f)?.into_matrix(), sqrt_pd(f)?.into_matrix()),
        ScalingChoice::Nt => {
            let w = nt_scaling_point(f, v)?;
            (inv_sqrt_pd(&w)?.into_matrix(), sqrt_pd(&w)?.into_matrix())
        }
    };
    let f_tilde = match kind {
        ScalingChoice::Aho => f.clone(),
        _ => f.congruence(&p),
    };
    let v_tilde = match kind {
        ScalingChoice::Aho => v.clone(),
        _ => v.congruence_t(&p_inv),
    };
    let fi_tilde = match kind {
        ScalingChoice::Aho => fi.to_vec(),
        _ => fi.iter().map(|a| a.congruence(&p)).collect(),
    };
    let lyap = LyapunovSolver::new(&f_tilde)?;
    Ok(ScaledFrame {
        kind,
        p,
        p_inv,
        f_tilde,
        v_tilde,
        fi_tilde,
        lyap,
    })
}

fn combine(mats: &[SymMat], coeffs: &DVector<f64>) -> SymMat {
    let m = mats.first().map_or(0, |a| a.order());
    let mut acc = DMatrix::zeros(m, m);
    for (a, &c) in mats.iter().zip(coeffs.iter()) {
        if c != 0.0 {
            acc += a.as_matrix() * c;
        }
    }
    SymMat::from_matrix(acc).expect("finite combination")
}

/// `ΔṼ` in the scaled space.
pub fn scaled_dual_direction(
    frame: &ScaledFrame,
    dx: &DVector<f64>,
    mu: f64,
) -> Result<SymMat, LinalgError> {
    if dx.len() != frame.fi_tilde.len() {
        return Err(LinalgError::Dimension {
            expected: frame.fi_tilde.len(),
            found: dx.len(),
        });
    }
    let df = combine(&frame.fi_tilde, dx);
    let coupled = frame.lyap.solve(&jordan(&df, &frame.v_tilde)?)?;
    let f_inv = frame.lyap.eig().map(|l| 1.0 / l);
    Ok(&(&(&f_inv * mu) - &coupled) - &frame.v_tilde)
}

/// `ΔV = Pᵀ ΔṼ P`.
pub fn dual_direction(
    frame: &ScaledFrame,
    dx: &DVector<f64>,
    mu: f64,
) -> Result<SymMat, LinalgError> {
    let dv_tilde = scaled_dual_direction(frame, dx, mu)?;
    Ok(match frame.kind {
        ScalingChoice::Aho => dv_tilde,
        _ => dv_tilde.congruence_t(&frame.p),
    })
}

/// `‖(F̃ + ΔF̃)∘Ṽ + F̃∘ΔṼ − μI‖_F` for an unscaled `ΔV`.
pub fn scaled_newton_residual(frame: &ScaledFrame, dx: &DVector<f64>, dv: &SymMat, mu: f64) -> f64 {
    let dv_tilde = dv.congruence_t(&frame.p_inv);
    let df = combine(&frame.fi_tilde, dx);
    let m = frame.f_tilde.order();
    let lhs = jordan(&(&frame.f_tilde + &df), &frame.v_tilde).expect("orders match");
    let rhs = jordan(&frame.f_tilde, &dv_tilde).expect("orders match");
    (&(&lhs + &rhs) - &(&SymMat::identity(m) * mu)).frobenius_norm()
}

/// `(H_P)ᵢⱼ = F̃ᵢ • (𝓛_F̃⁻¹𝓛_Ṽ + 𝓛_Ṽ𝓛_F̃⁻¹) F̃ⱼ / 2`.
///
/// Both operators are self-adjoint, so `H_P = (K + Kᵀ)/2` with
/// `Kᵢⱼ = F̃ᵢ • 𝓛_F̃⁻¹(Ṽ∘F̃ⱼ)`. Everything is evaluated in the eigenbasis of
/// `F̃`, where `𝓛_F̃⁻¹` is an elementwise division.
pub fn curvature_hp(frame: &ScaledFrame) -> SymMat {
    let n = frame.fi_tilde.len();
    let eig = frame.lyap.eig();
    let m = eig.values.len();
    let q = &eig.vectors;
    let v_hat = q.transpose() * frame.v_tilde.as_matrix() * q;

    let mut hats = DMatrix::zeros(m * m, n);
    let mut solved = DMatrix::zeros(m * m, n);
    for (j, fj) in frame.fi_tilde.iter().enumerate() {
        let f_hat = q.transpose() * fj.as_matrix() * q;
        let prod = &v_hat * &f_hat;
        let mut g = (&prod + prod.transpose()) * 0.5;
        frame.lyap.divide_in_eigenbasis(&mut g);
        hats.set_column(j, &DVector::from_column_slice(f_hat.as_slice()));
        solved.set_column(j, &DVector::from_column_slice(g.as_slice()));
    }
    let k = hats.transpose() * solved;
    SymMat::from_matrix(k).expect("finite curvature")
}

/// Replaces eigenvalues below [`LIFT_THRESHOLD`] with 1.
pub fn lift_eigenvalues(b: &SymMat) -> SymMat {
    let eig = b.eig();
    if eig.min() >= LIFT_THRESHOLD {
        return b.clone();
    }
    eig.map(|l| if l < LIFT_THRESHOLD { 1.0 } else { l })
}

/// `∇²ₓₓL₂(x, y) = ∇²f(x) + Σⱼ yⱼ ∇²ₓₓg(x, τⱼ)`.
pub fn lagrangian_hessian(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    y: &DiscreteMeasure,
) -> Result<DMatrix<f64>, DirectionError> {
    let mut m = problem
        .objective()
        .hessian(x)
        .ok_or(DirectionError::MissingHessian)?;
    for atom in y.atoms() {
        let h = problem
            .constraints()
            .hess_x(x, atom.tau)
            .ok_or(DirectionError::MissingHessian)?;
        m += h * atom.weight;
    }
    Ok(m)
}

/// Curvature matrix `B` for the quadratic subproblem.
pub fn assemble_b(
    problem: &SiplogProblem,
    x: &DVector<f64>,
    y: &DiscreteMeasure,
    frame: &ScaledFrame,
    curvature: Curvature,
) -> Result<SymMat, DirectionError> {
    match curvature {
        Curvature::Identity => Ok(SymMat::identity(problem.dim())),
        Curvature::L2PlusHp => {
            let m = lagrangian_hessian(problem, x, y)?;
            let hp = curvature_hp(frame);
            let b = SymMat::from_matrix(m + hp.into_matrix())?;
            Ok(lift_eigenvalues(&b))
        }
    }
}
