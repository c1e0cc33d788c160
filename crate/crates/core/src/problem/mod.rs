//! Problem instances: the objective, the semi-infinite constraint family
//! `g(x, τ) <= 0 (τ ∈ T)`, the affine matrix map `F(x) ≻ 0`, linear
//! equalities `Gx = h`, and the barrier weight `μ`.

mod families;
pub mod generate;
pub mod io;
mod maximize;
mod measure;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symmat::{LinalgError, SymMat};

pub use families::{
    InactiveConstraint, LinearObjective, MomentConstraint, PolynomialMatrixConstraint,
    QuarticObjective,
};
pub use generate::{gen_lsiplog, gen_nsiplog, GenerateError, GeneratedFamily};
pub use maximize::{maximize_on_interval, GRID_INTERVALS};
pub use measure::{Atom, DiscreteMeasure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{what}: expected length {expected}, got {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("barrier weight must be positive, got {0}")]
    InvalidMu(f64),
    #[error("index interval must satisfy t_min < t_max, got [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("measure weight {weight} at tau = {tau} is negative or non-finite")]
    InvalidWeight { tau: f64, weight: f64 },
    #[error("support points {0} and {1} coincide")]
    DuplicateSupport(f64, f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Value, first and second derivative of a scalar function of `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Smooth objective `f`. The Hessian is optional; curvature choices that need
/// it report a configuration error when it is missing.
pub trait Objective: Send + Sync + fmt::Debug {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Constraint family `g(x, τ)`, convex in `x` for every `τ` and twice
/// differentiable in `τ`.
pub trait ConstraintFamily: Send + Sync + fmt::Debug {
    fn value(&self, x: &DVector<f64>, tau: f64) -> f64;
    fn grad_x(&self, x: &DVector<f64>, tau: f64) -> DVector<f64>;
    fn hess_x(&self, _x: &DVector<f64>, _tau: f64) -> Option<DMatrix<f64>> {
        None
    }
    /// `τ`-jet of `g(x, τ) + ∇ₓg(x, τ)ᵀdx` (`dx = None` gives `g(x, ·)` itself).
    fn linearized_jet(&self, x: &DVector<f64>, dx: Option<&DVector<f64>>, tau: f64) -> TauJet;
}

/// `F(x) = F₀ + Σ xᵢFᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixMap {
    constant: SymMat,
    coefficients: Vec<SymMat>,
}

impl AffineMatrixMap {
    pub fn new(constant: SymMat, coefficients: Vec<SymMat>) -> Result<Self, ProblemError> {
        let m = constant.order();
        if let Some(bad) = coefficients.iter().find(|c| c.order() != m) {
            return Err(LinalgError::Dimension {
                expected: m,
                found: bad.order(),
            }
            .into());
        }
        Ok(Self {
            constant,
            coefficients,
        })
    }

    pub fn order(&self) -> usize {
        self.constant.order()
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn constant(&self) -> &SymMat {
        &self.constant
    }

    pub fn coefficients(&self) -> &[SymMat] {
        &self.coefficients
    }

    /// The linear part `Σ dxᵢFᵢ`.
    pub fn linear(&self, dx: &DVector<f64>) -> SymMat {
        let m = self.order();
        let mut acc = DMatrix::zeros(m, m);
        for (fi, &d) in self.coefficients.iter().zip(dx.iter()) {
            if d != 0.0 {
                acc += fi.as_matrix() * d;
            }
        }
        SymMat::symmetrize(acc)
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::Dimension {
                what: "x",
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub fn eval_f(map: &AffineMatrixMap, x: &DVector<f64>) -> Result<SymMat, ProblemError> {
    map.check_len(x)?;
    Ok(map.constant.axpy(1.0, &map.linear(x)))
}

/// Gradient of `log det F(x)`: `ξᵢ = Fᵢ • F(x)⁻¹`.
pub fn xi(map: &AffineMatrixMap, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
    let f = eval_f(map, x)?;
    xi_at(map, &f)
}

/// `ξ` given an already evaluated `F(x)`.
pub fn xi_at(map: &AffineMatrixMap, f: &SymMat) -> Result<DVector<f64>, ProblemError> {
    if !f.is_pd() {
        return Err(LinalgError::NotPositiveDefinite {
            lambda_min: f.lambda_min(),
        }
        .into());
    }
    let inv = crate::symmat::inv_pd(f)?;
    Ok(DVector::from_iterator(
        map.dim(),
        map.coefficients.iter().map(|fi| fi.dot(&inv)),
    ))
}

/// Closed index interval `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexInterval {
    t_min: f64,
    t_max: f64,
}

impl IndexInterval {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self, ProblemError> {
        if !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
            return Err(ProblemError::InvalidInterval(t_min, t_max));
        }
        Ok(Self { t_min, t_max })
    }

    pub fn unit() -> Self {
        Self {
            t_min: 0.0,
            t_max: 1.0,
        }
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn clamp(&self, tau: f64) -> f64 {
        tau.clamp(self.t_min, self.t_max)
    }

    /// `count + 1` evenly spaced points including both ends.
    pub fn grid(&self, intervals: usize) -> impl Iterator<Item = f64> + '_ {
        let h = (self.t_max - self.t_min) / intervals as f64;
        (0..=intervals).map(move |i| self.t_min + i as f64 * h)
    }
}

/// Bijection between the distinct upper-triangle positions of an `m×m`
/// symmetric matrix and coordinates of `x ∈ R^{m(m+1)/2}`, in row-major order.
/// Basis matrices are `Eᵢᵢ` on the diagonal and `Eᵢⱼ + Eⱼᵢ` off it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVecIndexing {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl SymVecIndexing {
    pub fn new(m: usize) -> Self {
        let pairs = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
        Self { m, pairs }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn encode(&self, x: &SymMat) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.pairs.iter().map(|&(i, j)| x.get(i, j)))
    }

    pub fn decode(&self, x: &DVector<f64>) -> SymMat {
        let mut it = x.iter();
        SymMat::from_upper_fn(self.m, |_, _| *it.next().unwrap())
    }

    pub fn basis(&self, k: usize) -> SymMat {
        let (i, j) = self.pairs[k];
        SymMat::from_upper_fn(self.m, |a, b| if (a, b) == (i, j) { 1.0 } else { 0.0 })
    }

    /// `A • E_k` for every coordinate `k`: the gradient of `x ↦ A • X`.
    pub fn pair_with(&self, a: &SymMat) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.pairs.iter().map(|&(i, j)| {
                if i == j {
                    a.get(i, i)
                } else {
                    2.0 * a.get(i, j)
                }
            }),
        )
    }

    pub fn affine_map(&self, constant: SymMat) -> AffineMatrixMap {
        AffineMatrixMap {
            constant,
            coefficients: (0..self.dim()).map(|k| self.basis(k)).collect(),
        }
    }
}

/// A complete problem instance.
#[derive(Debug, Clone)]
pub struct SiplogProblem {
    objective: Arc<dyn Objective>,
    constraints: Arc<dyn ConstraintFamily>,
    map: AffineMatrixMap,
    eq_matrix: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    index_set: IndexInterval,
    mu: f64,
    family: Option<GeneratedFamily>,
}

impl SiplogProblem {
    pub fn new(
        objective: Arc<dyn Objective>,
        constraints: Arc<dyn ConstraintFamily>,
        map: AffineMatrixMap,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        index_set: IndexInterval,
        mu: f64,
    ) -> Result<Self, ProblemError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ProblemError::InvalidMu(mu));
        }
        let n = map.dim();
        if eq_matrix.ncols() != n && eq_matrix.nrows() > 0 {
            return Err(ProblemError::Dimension {
                what: "G columns",
                expected: n,
                found: eq_matrix.ncols(),
            });
        }
        if eq_rhs.len() != eq_matrix.nrows() {
            return Err(ProblemError::Dimension {
                what: "h",
                expected: eq_matrix.nrows(),
                found: eq_rhs.len(),
            });
        }
        let eq_matrix = if eq_matrix.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            eq_matrix
        };
        Ok(Self {
            objective,
            constraints,
            map,
            eq_matrix,
            eq_rhs,
            index_set,
            mu,
            family: None,
        })
    }

    pub(crate) fn with_family(mut self, family: GeneratedFamily) -> Self {
        self.family = Some(family);
        self
    }

    /// Same data with the semi-infinite constraints removed.
    pub fn without_constraints(&self) -> Self {
        Self {
            constraints: Arc::new(InactiveConstraint::default()),
            family: None,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn order(&self) -> usize {
        self.map.order()
    }

    pub fn eq_rows(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    pub fn constraints(&self) -> &dyn ConstraintFamily {
        self.constraints.as_ref()
    }

    pub fn map(&self) -> &AffineMatrixMap {
        &self.map
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &DVector<f64> {
        &self.eq_rhs
    }

    pub fn index_set(&self) -> IndexInterval {
        self.index_set
    }

    pub fn family(&self) -> Option<&GeneratedFamily> {
        self.family.as_ref()
    }

    pub fn eval_f(&self, x: &DVector<f64>) -> Result<SymMat, ProblemError> {
        eval_f(&self.map, x)
    }

    /// `Gx - h`.
    pub fn eq_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.eq_matrix * x - &self.eq_rhs
    }

    /// The starting point used for the generated families: `X⁰ = I/m` and
    /// `V₀ = μI`.
    pub fn default_start(&self) -> (DVector<f64>, SymMat) {
        let m = self.order();
        let idx = SymVecIndexing::new(m);
        let x0 = if idx.dim() == self.dim() {
            idx.encode(&(&SymMat::identity(m) * (1.0 / m as f64)))
        } else {
            DVector::zeros(self.dim())
        };
        (x0, &SymMat::identity(m) * self.mu)
    }
}

/// Global maximum of `g(x, ·)` over `T`: grid search on `N + 1` points seeded
/// into a projected Newton refinement. Never worse than the grid.
pub fn max_g_over_t(problem: &SiplogProblem, x: &DVector<f64>) -> (f64, f64) {
    let g = problem.constraints();
    maximize_on_interval(problem.index_set(), |tau| g.linearized_jet(x, None, tau))
}
