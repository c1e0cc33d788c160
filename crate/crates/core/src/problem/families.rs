//! Concrete objectives and constraint families used by the benchmark
//! generators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{ConstraintFamily, Objective, TauJet};

/// Value, first and second derivative of `Σ cₖ τᵏ` by Horner's rule.
fn poly_jet(coeffs: impl DoubleEndedIterator<Item = f64>, tau: f64) -> TauJet {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for c in coeffs.rev() {
        d2 = d2 * tau + 2.0 * d1;
        d1 = d1 * tau + p;
        p = p * tau + c;
    }
    TauJet { value: p, d1, d2 }
}

/// `f(x) = cᵀx`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    c: DVector<f64>,
}

impl LinearObjective {
    pub fn new(c: DVector<f64>) -> Self {
        Self { c }
    }
}

impl Objective for LinearObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }

    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.c.clone()
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.c.len();
        Some(DMatrix::zeros(n, n))
    }
}

/// `f(x) = ½xᵀMx + cᵀx + ω‖x‖⁴`; nonconvex for indefinite `M` but coercive.
#[derive(Debug, Clone)]
pub struct QuarticObjective {
    m: DMatrix<f64>,
    c: DVector<f64>,
    omega: f64,
}

impl QuarticObjective {
    pub fn new(m: DMatrix<f64>, c: DVector<f64>, omega: f64) -> Self {
        Self { m, c, omega }
    }
}

impl Objective for QuarticObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let sq = x.norm_squared();
        0.5 * x.dot(&(&self.m * x)) + self.c.dot(x) + self.omega * sq * sq
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x + &self.c + x * (4.0 * self.omega * x.norm_squared())
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = x.len();
        let sq = x.norm_squared();
        let mut h = self.m.clone();
        h += DMatrix::identity(n, n) * (4.0 * self.omega * sq);
        h += (x * x.transpose()) * (8.0 * self.omega);
        Some(h)
    }
}

/// `g(x, τ) = −Σₗ τˡ aₗᵀx`: the constraint `A(τ) • X >= 0` with `A(τ)` a
/// matrix polynomial, written in the coordinates of `x`.
#[derive(Debug, Clone)]
pub struct PolynomialMatrixConstraint {
    coeffs: Vec<DVector<f64>>,
}

impl PolynomialMatrixConstraint {
    /// `coeffs[l]` is the gradient of `x ↦ Aₗ • X`.
    pub fn new(coeffs: Vec<DVector<f64>>) -> Self {
        Self { coeffs }
    }

    fn gradient(&self, tau: f64) -> DVector<f64> {
        let n = self.coeffs[0].len();
        let mut g = DVector::zeros(n);
        let mut p = 1.0;
        for a in &self.coeffs {
            g.axpy(-p, a, 1.0);
            p *= tau;
        }
        g
    }
}

impl ConstraintFamily for PolynomialMatrixConstraint {
    fn value(&self, x: &DVector<f64>, tau: f64) -> f64 {
        self.gradient(tau).dot(x)
    }

    fn grad_x(&self, _x: &DVector<f64>, tau: f64) -> DVector<f64> {
        self.gradient(tau)
    }

    fn hess_x(&self, x: &DVector<f64>, _tau: f64) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(x.len(), x.len()))
    }

    fn linearized_jet(&self, x: &DVector<f64>, dx: Option<&DVector<f64>>, tau: f64) -> TauJet {
        let point = match dx {
            Some(d) => x + d,
            None => x.clone(),
        };
        poly_jet(self.coeffs.iter().map(|a| -a.dot(&point)), tau)
    }
}

/// `g(x, τ) = a(τ)ᵀx − b(τ)` with `a(τ) = (1, τ, .., τⁿ⁻¹)` and
/// `b(τ) = Σᵢ₌₁ⁿ τ²ⁱ + sin(9πτ) + 2`.
#[derive(Debug, Clone)]
pub struct MomentConstraint {
    n: usize,
}

impl MomentConstraint {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    fn rhs(&self, tau: f64) -> TauJet {
        let evens = (0..=2 * self.n).map(|k| if k >= 2 && k % 2 == 0 { 1.0 } else { 0.0 });
        let p = poly_jet(evens, tau);
        let w = 9.0 * PI;
        let (s, c) = (w * tau).sin_cos();
        TauJet {
            value: p.value + s + 2.0,
            d1: p.d1 + w * c,
            d2: p.d2 - w * w * s,
        }
    }
}

impl ConstraintFamily for MomentConstraint {
    fn value(&self, x: &DVector<f64>, tau: f64) -> f64 {
        poly_jet(x.iter().copied(), tau).value - self.rhs(tau).value
    }

    fn grad_x(&self, _x: &DVector<f64>, tau: f64) -> DVector<f64> {
        let mut p = 1.0;
        DVector::from_fn(self.n, |_, _| {
            let v = p;
            p *= tau;
            v
        })
    }

    fn hess_x(&self, x: &DVector<f64>, _tau: f64) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(x.len(), x.len()))
    }

    fn linearized_jet(&self, x: &DVector<f64>, dx: Option<&DVector<f64>>, tau: f64) -> TauJet {
        let lhs = match dx {
            Some(d) => poly_jet(x.iter().zip(d.iter()).map(|(a, b)| a + b), tau),
            None => poly_jet(x.iter().copied(), tau),
        };
        let b = self.rhs(tau);
        TauJet {
            value: lhs.value - b.value,
            d1: lhs.d1 - b.d1,
            d2: lhs.d2 - b.d2,
        }
    }
}

/// A constraint family that can never be violated: `g ≡ level < 0`.
#[derive(Debug, Clone)]
pub struct InactiveConstraint {
    level: f64,
}

impl InactiveConstraint {
    pub fn new(level: f64) -> Self {
        assert!(level < 0.0, "inactive constraint level must be negative");
        Self { level }
    }
}

impl Default for InactiveConstraint {
    fn default() -> Self {
        Self { level: -1.0 }
    }
}

impl ConstraintFamily for InactiveConstraint {
    fn value(&self, _x: &DVector<f64>, _tau: f64) -> f64 {
        self.level
    }

    fn grad_x(&self, x: &DVector<f64>, _tau: f64) -> DVector<f64> {
        DVector::zeros(x.len())
    }

    fn hess_x(&self, x: &DVector<f64>, _tau: f64) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(x.len(), x.len()))
    }

    fn linearized_jet(&self, _x: &DVector<f64>, _dx: Option<&DVector<f64>>, _tau: f64) -> TauJet {
        TauJet {
            value: self.level,
            d1: 0.0,
            d2: 0.0,
        }
    }
}
