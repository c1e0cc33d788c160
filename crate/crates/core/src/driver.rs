//! Outer loop of the interior-point SQP method.
//!
//! Each iteration evaluates the KKT residual, builds the scaled frame and the
//! curvature matrix, solves the semi-infinite QP by exchange, computes the
//! dual matrix direction, updates the penalty, runs the Armijo search on
//! `Φ_ρ` and decays the relaxation `γ`.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::{
    assemble_b, build_frame, dual_direction, Curvature, DirectionError, ScalingChoice,
};
use crate::exchange::{solve_siqp, ExchangeConfig, ExchangeError, ExchangeResult};
use crate::merit::{
    armijo_search, merit_value, residual_r, LineSearchOutcome, MeritParams, ResidualBreakdown,
};
use crate::problem::{xi_at, DiscreteMeasure, SiplogProblem};
use crate::symmat::SymMat;

/// Largest `‖Gx₀ − h‖∞` accepted at the start point.
pub const START_EQ_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scaling: ScalingChoice,
    pub curvature: Curvature,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
    pub delta: f64,
    pub nu: f64,
    pub rho0: f64,
    pub gamma0: f64,
    pub gamma_floor: f64,
    pub tol_r: f64,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub exchange: ExchangeConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scaling: ScalingChoice::Hkm,
            curvature: Curvature::L2PlusHp,
            alpha: 1e-3,
            beta1: 0.95,
            beta2: 0.5,
            sigma: 0.95,
            delta: 1.0,
            nu: 1.0,
            rho0: 100.0,
            gamma0: 0.1,
            gamma_floor: 1e-8,
            tol_r: 1e-6,
            max_outer: 2000,
            max_backtracks: 200,
            exchange: ExchangeConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let open = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(SolveError::InvalidConfig(name, v))
            }
        };
        open("alpha", self.alpha)?;
        open("beta1", self.beta1)?;
        open("beta2", self.beta2)?;
        open("sigma", self.sigma)?;
        for (name, v) in [
            ("delta", self.delta),
            ("nu", self.nu),
            ("rho0", self.rho0),
            ("gamma0", self.gamma0),
            ("gamma_floor", self.gamma_floor),
            ("tol_r", self.tol_r),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SolveError::InvalidConfig(name, v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("start point has length {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("F(x0) is not positive definite")]
    StartNotInterior,
    #[error("V0 is not positive definite")]
    DualStartNotInterior,
    #[error("start point violates Gx = h by {0:e}")]
    StartInfeasible(f64),
    #[error("invalid configuration value {0} = {1}")]
    InvalidConfig(&'static str, f64),
    #[error(transparent)]
    Direction(#[from] DirectionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    LineSearchFailure,
    ExchangeFailure,
    /// A scaling or factorization failed at an accepted iterate.
    NumericalFailure,
    IterationCap,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::LineSearchFailure => "line_search_failure",
            SolveStatus::ExchangeFailure => "exchange_failure",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationCap => "iteration_cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub y: DiscreteMeasure,
    pub z: DVector<f64>,
    pub v: SymMat,
    pub rho: f64,
    pub gamma: f64,
    pub r: usize,
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub r: usize,
    #[serde(rename = "R_total")]
    pub r_total: f64,
    #[serde(rename = "R_theta")]
    pub r_theta: f64,
    #[serde(rename = "R_stat")]
    pub r_stat: f64,
    #[serde(rename = "R_comp")]
    pub r_comp: f64,
    #[serde(rename = "R_matcomp")]
    pub r_matcomp: f64,
    #[serde(rename = "R_eq")]
    pub r_eq: f64,
    pub phi: f64,
    pub step: f64,
    pub ell: usize,
    pub supp_size: usize,
    pub rho: f64,
    pub gamma: f64,
    pub qp_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub qp_total: usize,
    pub final_residual: ResidualBreakdown,
    /// Seconds.
    pub wall_time: f64,
    pub trace: Vec<TraceRow>,
    pub final_iterate: Iterate,
    pub message: Option<String>,
}

/// Everything computed in one accepted outer iteration.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub r: usize,
    pub x: &'a DVector<f64>,
    pub v: &'a SymMat,
    pub b: &'a SymMat,
    pub dv: &'a SymMat,
    pub exchange: &'a ExchangeResult,
    pub rho: f64,
    pub gamma: f64,
    pub line_search: &'a LineSearchOutcome,
}

/// Solves from `(x0, V0)` with `y = 0`, `z = 0`.
pub fn solve(
    problem: &SiplogProblem,
    config: &SolverConfig,
    x0: &DVector<f64>,
    v0: &SymMat,
) -> Result<SolveReport, SolveError> {
    solve_with_observer(problem, config, x0, v0, |_| {})
}

/// Like [`solve`], calling `observer` after every accepted step.
pub fn solve_with_observer(
    problem: &SiplogProblem,
    config: &SolverConfig,
    x0: &DVector<f64>,
    v0: &SymMat,
    mut observer: impl FnMut(&StepRecord<'_>),
) -> Result<SolveReport, SolveError> {
    config.validate()?;
    if x0.len() != problem.dim() {
        return Err(SolveError::Dimension {
            expected: problem.dim(),
            found: x0.len(),
        });
    }
    if v0.order() != problem.order() {
        return Err(SolveError::Dimension {
            expected: problem.order(),
            found: v0.order(),
        });
    }
    if !problem.eval_f(x0).is_ok_and(|f| f.is_pd()) {
        return Err(SolveError::StartNotInterior);
    }
    if !v0.is_pd() {
        return Err(SolveError::DualStartNotInterior);
    }
    let eq = problem.eq_residual(x0).amax();
    if eq > START_EQ_TOL {
        return Err(SolveError::StartInfeasible(eq));
    }
    if config.curvature == Curvature::L2PlusHp
        && (problem.objective().hessian(x0).is_none()
            || problem
                .constraints()
                .hess_x(x0, problem.index_set().t_min())
                .is_none())
    {
        return Err(DirectionError::MissingHessian.into());
    }

    let start = Instant::now();
    let mu = problem.mu();
    let mut it = Iterate {
        x: x0.clone(),
        y: DiscreteMeasure::empty(),
        z: DVector::zeros(problem.eq_rows()),
        v: v0.clone(),
        rho: config.rho0,
        gamma: config.gamma0,
        r: 0,
    };
    let mut trace = Vec::new();
    let mut qp_total = 0;

    let finish = |status, it: Iterate, trace, qp_total, message: Option<String>| {
        let final_residual = residual_r(problem, &it.x, &it.y, &it.z, &it.v);
        SolveReport {
            status,
            iterations: it.r,
            qp_total,
            final_residual,
            wall_time: start.elapsed().as_secs_f64(),
            trace,
            final_iterate: it,
            message,
        }
    };

    loop {
        let res = residual_r(problem, &it.x, &it.y, &it.z, &it.v);
        if res.total < config.tol_r {
            return Ok(finish(SolveStatus::Converged, it, trace, qp_total, None));
        }
        if it.r >= config.max_outer {
            return Ok(finish(SolveStatus::IterationCap, it, trace, qp_total, None));
        }

        let numerical = |e: String| Some(format!("iteration {}: {e}", it.r));
        let f = match problem.eval_f(&it.x) {
            Ok(f) => f,
            Err(e) => {
                let msg = numerical(e.to_string());
                return Ok(finish(
                    SolveStatus::NumericalFailure,
                    it,
                    trace,
                    qp_total,
                    msg,
                ));
            }
        };
        let frame = match build_frame(config.scaling, &f, &it.v, problem.map().coefficients()) {
            Ok(fr) => fr,
            Err(e) => {
                let msg = numerical(e.to_string());
                return Ok(finish(
                    SolveStatus::NumericalFailure,
                    it,
                    trace,
                    qp_total,
                    msg,
                ));
            }
        };
        let b = assemble_b(problem, &it.x, &it.y, &frame, config.curvature)?;
        let xi = match xi_at(problem.map(), &f) {
            Ok(v) => v,
            Err(e) => {
                let msg = numerical(e.to_string());
                return Ok(finish(
                    SolveStatus::NumericalFailure,
                    it,
                    trace,
                    qp_total,
                    msg,
                ));
            }
        };

        let ex = match solve_siqp(problem, &it.x, &b, &xi, it.gamma, &it.y, &config.exchange) {
            Ok(ex) => ex,
            Err(e) => {
                if let ExchangeError::IterationCap { best } = &e {
                    qp_total += best.qp_count;
                }
                let msg = numerical(e.to_string());
                return Ok(finish(
                    SolveStatus::ExchangeFailure,
                    it,
                    trace,
                    qp_total,
                    msg,
                ));
            }
        };
        qp_total += ex.qp_count;

        let dv = match dual_direction(&frame, &ex.dx, mu) {
            Ok(dv) => dv,
            Err(e) => {
                let msg = numerical(e.to_string());
                return Ok(finish(
                    SolveStatus::NumericalFailure,
                    it,
                    trace,
                    qp_total,
                    msg,
                ));
            }
        };

        let mult = ex.y_plus.total_variation().max(ex.z_plus.amax());
        if it.rho <= mult {
            it.rho = config.delta + mult;
        }
        let params = MeritParams {
            nu: config.nu,
            rho: it.rho,
            alpha: config.alpha,
            beta1: config.beta1,
            sigma: config.sigma,
        };
        let ls = match armijo_search(
            problem,
            &it.x,
            &it.v,
            &ex.dx,
            &dv,
            &b,
            &params,
            it.gamma,
            config.max_backtracks,
        ) {
            Ok(ls) => ls,
            Err(fail) => {
                let msg = numerical(format!(
                    "{} (dPhi = {:e}, gamma = {:e}, last trial = {:?})",
                    fail.reason, fail.delta_phi, fail.gamma, fail.last_trial
                ));
                return Ok(finish(
                    SolveStatus::LineSearchFailure,
                    it,
                    trace,
                    qp_total,
                    msg,
                ));
            }
        };

        observer(&StepRecord {
            r: it.r,
            x: &it.x,
            v: &it.v,
            b: &b,
            dv: &dv,
            exchange: &ex,
            rho: it.rho,
            gamma: it.gamma,
            line_search: &ls,
        });

        trace.push(TraceRow {
            r: it.r,
            r_total: res.total,
            r_theta: res.theta,
            r_stat: res.stationarity,
            r_comp: res.complementarity,
            r_matcomp: res.matrix_comp,
            r_eq: res.equality,
            phi: ls.phi_old,
            step: ls.s,
            ell: ls.ell,
            supp_size: ex.y_plus.len(),
            rho: it.rho,
            gamma: it.gamma,
            qp_count: ex.qp_count,
        });

        it.x = ls.x;
        it.v = ls.v;
        it.y = ex.y_plus;
        it.z = ex.z_plus;
        it.gamma = config.gamma_floor.max(config.beta2 * it.gamma);
        it.r += 1;
    }
}

/// KKT residual at an iterate together with the cone conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub residual: ResidualBreakdown,
    pub f_pd: bool,
    pub v_pd: bool,
}

impl KktCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.residual.total < tol && self.f_pd && self.v_pd
    }
}

pub fn kkt_certificate(problem: &SiplogProblem, it: &Iterate) -> KktCertificate {
    KktCertificate {
        residual: residual_r(problem, &it.x, &it.y, &it.z, &it.v),
        f_pd: problem.eval_f(&it.x).is_ok_and(|f| f.is_pd()),
        v_pd: it.v.is_pd(),
    }
}

/// `Φ_ρ` at an iterate with its own penalty.
pub fn merit_at(problem: &SiplogProblem, config: &SolverConfig, it: &Iterate) -> Option<f64> {
    merit_value(problem, &it.x, &it.v, config.nu, it.rho)
}

pub const TRACE_COLUMNS: [&str; 14] = [
    "r",
    "R_total",
    "R_theta",
    "R_stat",
    "R_comp",
    "R_matcomp",
    "R_eq",
    "phi",
    "step",
    "ell",
    "supp_size",
    "rho",
    "gamma",
    "qp_count",
];

/// Writes the trace as CSV; the header row is written even for an empty trace.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        AffineMatrixMap, Atom, InactiveConstraint, IndexInterval, LinearObjective,
    };
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn scalar(mu: f64) -> SiplogProblem {
        let map = AffineMatrixMap::new(SymMat::zeros(1), vec![SymMat::identity(1)]).unwrap();
        SiplogProblem::new(
            Arc::new(LinearObjective::new(DVector::from_element(1, 1.0))),
            Arc::new(InactiveConstraint::default()),
            map,
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            IndexInterval::unit(),
            mu,
        )
        .unwrap()
    }

    #[test]
    fn scalar_barrier_problem_converges() {
        let p = scalar(1.0);
        let x0 = DVector::from_element(1, 0.5);
        let rep = solve(&p, &SolverConfig::default(), &x0, &SymMat::identity(1)).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert!((rep.final_iterate.x[0] - 1.0).abs() < 1e-6);
        assert!((rep.final_iterate.v.get(0, 0) - 1.0).abs() < 1e-6);
        assert!(rep.final_residual.total < 1e-6);
        assert!(rep.final_iterate.y.is_empty());
    }

    #[test]
    fn gamma_schedule_is_exact() {
        let p = scalar(1e-3);
        let cfg = SolverConfig::default();
        let rep = solve(
            &p,
            &cfg,
            &DVector::from_element(1, 0.5),
            &SymMat::identity(1),
        )
        .unwrap();
        for row in &rep.trace {
            let expect = cfg
                .gamma_floor
                .max(cfg.gamma0 * cfg.beta2.powi(row.r as i32));
            assert!((row.gamma - expect).abs() <= 1e-15 * expect);
        }
    }

    #[test]
    fn preconditions_are_checked() {
        let p = scalar(1.0);
        let cfg = SolverConfig::default();
        let v = SymMat::identity(1);
        assert_eq!(
            solve(&p, &cfg, &DVector::from_element(1, -1.0), &v).unwrap_err(),
            SolveError::StartNotInterior
        );
        assert_eq!(
            solve(&p, &cfg, &DVector::from_element(1, 1.0), &(&v * -1.0)).unwrap_err(),
            SolveError::DualStartNotInterior
        );
        let bad = SolverConfig { beta1: 1.0, ..cfg };
        assert!(matches!(
            solve(&p, &bad, &DVector::from_element(1, 1.0), &v),
            Err(SolveError::InvalidConfig("beta1", _))
        ));
    }

    #[test]
    fn certificate_reacts_to_perturbations() {
        let p = scalar(0.5);
        let rep = solve(
            &p,
            &SolverConfig::default(),
            &DVector::from_element(1, 2.0),
            &SymMat::identity(1),
        )
        .unwrap();
        let cert = kkt_certificate(&p, &rep.final_iterate);
        assert!(cert.passes(1e-6));
        let mut it = rep.final_iterate.clone();
        it.v = &it.v * 2.0;
        let cert = kkt_certificate(&p, &it);
        // F∘V − μI = μI after doubling V
        assert!((cert.residual.matrix_comp - 0.5).abs() < 1e-5);
        it.y = DiscreteMeasure::new(vec![Atom {
            tau: 0.3,
            weight: 1.0,
        }])
        .unwrap();
        assert!(!kkt_certificate(&p, &it).passes(1e-6));
    }

    #[test]
    fn trace_csv_has_fixed_header() {
        let p = scalar(1.0);
        let rep = solve(
            &p,
            &SolverConfig::default(),
            &DVector::from_element(1, 0.5),
            &SymMat::identity(1),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&rep.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "r,R_total,R_theta,R_stat,R_comp,R_matcomp,R_eq,phi,step,ell,supp_size,rho,gamma,qp_count"
        );
        let mut empty = Vec::new();
        write_trace_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
        assert_eq!(text.lines().count(), rep.trace.len() + 1);
    }
}
