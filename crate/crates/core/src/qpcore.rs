//! Dense strictly convex quadratic programming.
//!
//! ```text
//!     minimize     ½ dᵀBd + qᵀd
//!     subject to   A d <= b
//!                  G d  = r
//! ```
//!
//! Solved with the Goldfarb-Idnani dual active-set method: start from the
//! unconstrained minimizer, add equalities, then repeatedly add the most
//! violated inequality while keeping the active multipliers dual feasible.
//! Projections are recomputed from a thin QR of `L⁻¹N` (`B = LLᵀ`, `N` the
//! active normals) instead of being updated, which is plenty for the sizes
//! met here. The final active set is re-solved once to polish the
//! certificate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::symmat::SymMat;

/// Certificate tolerance relative to [`QpInstance::scale`].
pub const KKT_RTOL: f64 = 1e-9;

const DEPENDENCE_RTOL: f64 = 1e-10;
const VIOLATION_RTOL: f64 = 1e-12;
const POLISH_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("quadratic term is not positive definite")]
    NotPositiveDefinite,
    #[error("{what}: expected {expected}, got {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("constraints are infeasible (witness gap {:e})", .0.gap)]
    Infeasible(FarkasWitness),
    #[error("active-set iteration limit ({0}) reached")]
    IterationLimit(usize),
}

/// Nonnegative weights `w` on the inequality rows and free weights `v` on the
/// equality rows with `Aᵀw + Gᵀv ≈ 0` and `bᵀw + rᵀv = −gap < 0`, which rules
/// out any feasible `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasWitness {
    pub ineq: DVector<f64>,
    pub eq: DVector<f64>,
    pub gap: f64,
}

impl FarkasWitness {
    /// `(‖Aᵀw + Gᵀv‖∞, bᵀw + rᵀv)`.
    pub fn check(&self, inst: &QpInstance) -> (f64, f64) {
        let comb =
            inst.ineq_matrix.transpose() * &self.ineq + inst.eq_matrix.transpose() * &self.eq;
        let value = inst.ineq_rhs.dot(&self.ineq) + inst.eq_rhs.dot(&self.eq);
        (comb.amax(), value)
    }
}

#[derive(Debug, Clone)]
pub struct QpInstance {
    pub hessian: SymMat,
    pub linear: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl QpInstance {
    /// Unconstrained instance; add rows with the `with_*` builders.
    pub fn new(hessian: SymMat, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.ineq_matrix = a;
        self.ineq_rhs = b;
        self
    }

    pub fn with_equalities(mut self, g: DMatrix<f64>, r: DVector<f64>) -> Self {
        self.eq_matrix = g;
        self.eq_rhs = r;
        self
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// `1 + ‖q‖ + max row norm`.
    pub fn scale(&self) -> f64 {
        let rows = self
            .ineq_matrix
            .row_iter()
            .chain(self.eq_matrix.row_iter())
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        1.0 + self.linear.norm() + rows
    }

    pub fn objective(&self, d: &DVector<f64>) -> f64 {
        0.5 * d.dot(&(self.hessian.as_matrix() * d)) + self.linear.dot(d)
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        let checks = [
            ("B order", n, self.hessian.order()),
            ("A columns", n, self.ineq_matrix.ncols()),
            ("b length", self.ineq_matrix.nrows(), self.ineq_rhs.len()),
            ("G columns", n, self.eq_matrix.ncols()),
            ("r length", self.eq_matrix.nrows(), self.eq_rhs.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(QpError::Dimension {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub d: DVector<f64>,
    /// Multipliers of the inequality rows, `>= 0`.
    pub zeta: DVector<f64>,
    /// Multipliers of the equality rows.
    pub z: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Largest of the stationarity, feasibility, complementarity and sign
/// residuals (all measured in the max norm).
pub fn verify_kkt(inst: &QpInstance, sol: &QpSolution) -> f64 {
    let stat = inst.hessian.as_matrix() * &sol.d
        + &inst.linear
        + inst.ineq_matrix.transpose() * &sol.zeta
        + inst.eq_matrix.transpose() * &sol.z;
    let slack = &inst.ineq_matrix * &sol.d - &inst.ineq_rhs;
    let primal = slack.iter().fold(0.0f64, |m, &s| m.max(s));
    let eq = (&inst.eq_matrix * &sol.d - &inst.eq_rhs).amax();
    let comp = slack
        .iter()
        .zip(sol.zeta.iter())
        .fold(0.0f64, |m, (s, z)| m.max((s * z).abs()));
    let sign = sol.zeta.iter().fold(0.0f64, |m, &z| m.max(-z));
    stat.amax().max(primal).max(eq).max(comp).max(sign)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Ineq(usize),
    /// Equality row with the orientation it was added in.
    Eq(usize, f64),
}

/// Normal and right-hand side of a row in the `nᵀd >= e` form.
fn row_data(inst: &QpInstance, row: Row) -> (DVector<f64>, f64) {
    match row {
        Row::Ineq(i) => (-inst.ineq_matrix.row(i).transpose(), -inst.ineq_rhs[i]),
        Row::Eq(i, s) => (inst.eq_matrix.row(i).transpose() * s, inst.eq_rhs[i] * s),
    }
}

struct ActiveSet {
    rows: Vec<Row>,
    /// `L⁻¹ nⱼ` for each active row.
    scaled: Vec<DVector<f64>>,
    u: Vec<f64>,
}

struct Projection {
    /// Dual step on the active multipliers.
    r: DVector<f64>,
    /// Component of `L⁻¹ n_p` orthogonal to the active normals.
    w: DVector<f64>,
}

impl ActiveSet {
    fn project(&self, v: &DVector<f64>) -> Projection {
        if self.rows.is_empty() {
            return Projection {
                r: DVector::zeros(0),
                w: v.clone(),
            };
        }
        let n = v.len();
        let nt = DMatrix::from_fn(n, self.rows.len(), |i, j| self.scaled[j][i]);
        let qr = nt.qr();
        let q = qr.q();
        let rmat = qr.r();
        let qtv = q.transpose() * v;
        let r = rmat
            .solve_upper_triangular(&qtv)
            .unwrap_or_else(|| DVector::zeros(self.rows.len()));
        let w = v - q * qtv;
        Projection { r, w }
    }

    /// Blocking active inequality for a dual step along `-r`.
    fn blocking(&self, r: &DVector<f64>) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (k, row) in self.rows.iter().enumerate() {
            if matches!(row, Row::Ineq(_)) && r[k] > 0.0 {
                let t = self.u[k] / r[k];
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, k));
                }
            }
        }
        best
    }

    fn remove(&mut self, k: usize) {
        self.rows.remove(k);
        self.scaled.remove(k);
        self.u.remove(k);
    }
}

enum AddOutcome {
    Added,
    Redundant,
}

/// Feasibility tolerance the solver uses for a single row with normal norm
/// `normal_norm` and right-hand side `rhs` at a point of norm `d_norm`.
pub fn row_tolerance(normal_norm: f64, rhs: f64, d_norm: f64) -> f64 {
    VIOLATION_RTOL * (1.0 + rhs.abs() + normal_norm * d_norm)
}

struct Solver<'a> {
    inst: &'a QpInstance,
    l: DMatrix<f64>,
    x: DVector<f64>,
    active: ActiveSet,
    iterations: usize,
    max_iterations: usize,
}

impl<'a> Solver<'a> {
    fn row_tol(&self, normal_norm: f64, rhs: f64) -> f64 {
        row_tolerance(normal_norm, rhs, self.x.norm())
    }

    fn l_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(v)
            .expect("nonsingular factor")
    }

    fn lt_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.l
            .tr_solve_lower_triangular(v)
            .expect("nonsingular factor")
    }

    fn add(&mut self, row: Row) -> Result<AddOutcome, QpError> {
        let (normal, rhs) = row_data(self.inst, row);
        let v = self.l_solve(&normal);
        let mut u_new = 0.0;
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(QpError::IterationLimit(self.max_iterations));
            }
            let Projection { r, w } = self.active.project(&v);
            let blocking = self.active.blocking(&r);
            let slack = normal.dot(&self.x) - rhs;
            let dependent = w.norm() <= DEPENDENCE_RTOL * v.norm().max(f64::MIN_POSITIVE);
            if dependent {
                if slack >= -self.row_tol(normal.norm(), rhs) {
                    return Ok(AddOutcome::Redundant);
                }
                match blocking {
                    None => return Err(QpError::Infeasible(self.witness(row, &r))),
                    Some((t, k)) => {
                        for (uj, rj) in self.active.u.iter_mut().zip(r.iter()) {
                            *uj -= t * rj;
                        }
                        u_new += t;
                        self.active.remove(k);
                        continue;
                    }
                }
            }
            let full = -slack / w.norm_squared();
            let z = self.lt_solve(&w);
            let (t, drop) = match blocking {
                Some((t1, k)) if t1 < full => (t1, Some(k)),
                _ => (full, None),
            };
            self.x.axpy(t, &z, 1.0);
            for (uj, rj) in self.active.u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            u_new += t;
            match drop {
                None => {
                    self.active.rows.push(row);
                    self.active.scaled.push(v);
                    self.active.u.push(u_new);
                    return Ok(AddOutcome::Added);
                }
                Some(k) => self.active.remove(k),
            }
        }
    }

    /// Builds the Farkas combination from `n_p = Σ rⱼ nⱼ` with `rⱼ <= 0` on
    /// active inequalities.
    fn witness(&self, row: Row, r: &DVector<f64>) -> FarkasWitness {
        let mut ineq = DVector::zeros(self.inst.ineq_matrix.nrows());
        let mut eq = DVector::zeros(self.inst.eq_matrix.nrows());
        let mut put = |row: Row, lambda: f64| match row {
            Row::Ineq(i) => ineq[i] += lambda,
            Row::Eq(i, s) => eq[i] -= lambda * s,
        };
        put(row, 1.0);
        for (k, &arow) in self.active.rows.iter().enumerate() {
            put(arow, -r[k]);
        }
        let value = self.inst.ineq_rhs.dot(&ineq) + self.inst.eq_rhs.dot(&eq);
        FarkasWitness {
            ineq,
            eq,
            gap: -value,
        }
    }

    fn solution(&self, x: DVector<f64>, u: &[f64]) -> QpSolution {
        let mut zeta = DVector::zeros(self.inst.ineq_matrix.nrows());
        let mut z = DVector::zeros(self.inst.eq_matrix.nrows());
        for (row, &uj) in self.active.rows.iter().zip(u) {
            match *row {
                Row::Ineq(i) => zeta[i] = uj.max(0.0),
                Row::Eq(i, s) => z[i] = -uj * s,
            }
        }
        let mut sol = QpSolution {
            d: x,
            zeta,
            z,
            kkt_residual: 0.0,
            iterations: self.iterations,
        };
        sol.kkt_residual = verify_kkt(self.inst, &sol);
        sol
    }

    /// Re-solves the equality-constrained problem on the final active set,
    /// with two rounds of iterative refinement.
    fn polished(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let k = self.active.rows.len();
        if k == 0 {
            return None;
        }
        let n = self.x.len();
        let nt = DMatrix::from_fn(n, k, |i, j| self.active.scaled[j][i]);
        let normals = DMatrix::from_fn(n, k, |i, j| row_data(self.inst, self.active.rows[j]).0[i]);
        let e = DVector::from_iterator(
            k,
            self.active
                .rows
                .iter()
                .map(|&row| row_data(self.inst, row).1),
        );
        let qr = nt.clone().qr();
        let rmat = qr.r();
        // B x − N u = −q,  Nᵀx = e
        let kkt = |q: &DVector<f64>, e: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>)> {
            let v0 = -self.l_solve(q);
            let rhs = e - nt.transpose() * &v0;
            let y = rmat.tr_solve_upper_triangular(&rhs)?;
            let u = rmat.solve_upper_triangular(&y)?;
            let x = self.lt_solve(&(v0 + &nt * &u));
            Some((x, u))
        };
        let (mut x, mut u) = kkt(&self.inst.linear, &e)?;
        let b = self.inst.hessian.as_matrix();
        for _ in 0..2 {
            let rq = b * &x - &normals * &u + &self.inst.linear;
            let re = &e - normals.transpose() * &x;
            let (dx, du) = kkt(&rq, &re)?;
            x += dx;
            u += du;
        }
        Some((x, u))
    }

    /// Replaces the iterate by its polished version when that lowers the
    /// certificate residual. Returns whether it did.
    fn polish(&mut self) -> bool {
        let Some((x, mut u)) = self.polished() else {
            return false;
        };
        for (uj, row) in u.iter_mut().zip(&self.active.rows) {
            if matches!(row, Row::Ineq(_)) {
                *uj = uj.max(0.0);
            }
        }
        let current = self.solution(self.x.clone(), &self.active.u).kkt_residual;
        if self.solution(x.clone(), u.as_slice()).kkt_residual > current {
            return false;
        }
        self.x = x;
        self.active.u = u.as_slice().to_vec();
        true
    }

    fn most_violated(&self) -> Option<usize> {
        let inst = self.inst;
        let slack = &inst.ineq_rhs - &inst.ineq_matrix * &self.x;
        let mut worst: Option<(usize, f64)> = None;
        for (i, &s) in slack.iter().enumerate() {
            if s < -self.row_tol(inst.ineq_matrix.row(i).norm(), inst.ineq_rhs[i])
                && !self.active.rows.contains(&Row::Ineq(i))
                && worst.is_none_or(|(_, ws)| s < ws)
            {
                worst = Some((i, s));
            }
        }
        worst.map(|(i, _)| i)
    }
}

/// Solves a strictly convex QP and returns the primal minimizer with a
/// multiplier certificate.
pub fn solve_qp(inst: &QpInstance) -> Result<QpSolution, QpError> {
    inst.validate()?;
    let chol = nalgebra::Cholesky::new(inst.hessian.as_matrix().clone())
        .ok_or(QpError::NotPositiveDefinite)?;
    let l = chol.l();
    let x = chol.solve(&(-&inst.linear));
    let rows = inst.ineq_matrix.nrows() + inst.eq_matrix.nrows();
    let mut solver = Solver {
        inst,
        l,
        x,
        active: ActiveSet {
            rows: Vec::new(),
            scaled: Vec::new(),
            u: Vec::new(),
        },
        iterations: 0,
        max_iterations: 50 * (rows + inst.dim()) + 1000,
    };

    for i in 0..inst.eq_matrix.nrows() {
        let res = inst.eq_matrix.row(i).dot(&solver.x.transpose()) - inst.eq_rhs[i];
        let sign = if res > 0.0 { -1.0 } else { 1.0 };
        let tol = solver.row_tol(inst.eq_matrix.row(i).norm(), inst.eq_rhs[i]);
        if res.abs() <= tol && is_dependent_eq(&solver, i) {
            continue;
        }
        solver.add(Row::Eq(i, sign))?;
    }

    for _ in 0..POLISH_ROUNDS {
        while let Some(p) = solver.most_violated() {
            if let AddOutcome::Redundant = solver.add(Row::Ineq(p))? {
                // numerically satisfied after all
                break;
            }
        }
        if !solver.polish() || solver.most_violated().is_none() {
            break;
        }
    }
    Ok(solver.solution(solver.x.clone(), &solver.active.u))
}

fn is_dependent_eq(solver: &Solver<'_>, i: usize) -> bool {
    let (normal, _) = row_data(solver.inst, Row::Eq(i, 1.0));
    let v = solver.l_solve(&normal);
    let p = solver.active.project(&v);
    p.w.norm() <= DEPENDENCE_RTOL * v.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn unconstrained() {
        let c = vec(&[1.0, -2.0, 0.5]);
        let inst = QpInstance::new(SymMat::identity(3), c.clone());
        let sol = solve_qp(&inst).unwrap();
        assert_relative_eq!(sol.d, -c, epsilon = 1e-15);
        assert!(sol.kkt_residual <= 1e-9);
    }

    #[test]
    fn least_norm_on_hyperplane() {
        let inst = QpInstance::new(SymMat::identity(2), DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), vec(&[1.0]));
        let sol = solve_qp(&inst).unwrap();
        assert_relative_eq!(sol.d, vec(&[0.5, 0.5]), epsilon = 1e-15);
        assert_relative_eq!(sol.z[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn clamp_at_bound() {
        let inst = QpInstance::new(SymMat::identity(1), vec(&[-2.0]))
            .with_inequalities(DMatrix::from_row_slice(1, 1, &[1.0]), vec(&[1.0]));
        let sol = solve_qp(&inst).unwrap();
        assert_relative_eq!(sol.d[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(sol.zeta[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn verify_kkt_detects_perturbation_and_sign() {
        let c = vec(&[1.0, -2.0]);
        let inst = QpInstance::new(SymMat::identity(2), c);
        let mut sol = solve_qp(&inst).unwrap();
        assert!(verify_kkt(&inst, &sol) <= 1e-9);
        sol.d[0] += 1e-3;
        assert_relative_eq!(verify_kkt(&inst, &sol), 1e-3, max_relative = 1e-9);

        let inst = QpInstance::new(SymMat::identity(1), vec(&[-2.0]))
            .with_inequalities(DMatrix::from_row_slice(1, 1, &[1.0]), vec(&[1.0]));
        let mut sol = solve_qp(&inst).unwrap();
        sol.zeta[0] = -0.25;
        assert!(verify_kkt(&inst, &sol) >= 0.25);
    }

    #[test]
    fn infeasible_system_yields_witness() {
        // d <= -1 and -d <= -1 (d >= 1)
        let inst = QpInstance::new(SymMat::identity(1), vec(&[0.0])).with_inequalities(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            vec(&[-1.0, -1.0]),
        );
        match solve_qp(&inst) {
            Err(QpError::Infeasible(w)) => {
                let (comb, value) = w.check(&inst);
                assert!(comb <= 1e-12);
                assert!(value < 0.0);
                assert!(w.ineq.iter().all(|&v| v >= 0.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_with_equality() {
        // d1 + d2 = 1, d1 <= 0, d2 <= 0
        let inst = QpInstance::new(SymMat::identity(2), DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), vec(&[1.0]))
            .with_inequalities(
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
                vec(&[0.0, 0.0]),
            );
        match solve_qp(&inst) {
            Err(QpError::Infeasible(w)) => {
                let (comb, value) = w.check(&inst);
                assert!(comb <= 1e-12);
                assert!(value < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let inst = QpInstance::new(SymMat::from_diagonal(&[1.0, -1.0]), DVector::zeros(2));
        assert_eq!(solve_qp(&inst).unwrap_err(), QpError::NotPositiveDefinite);
    }

    #[test]
    fn duplicate_rows_are_tolerated() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let inst = QpInstance::new(SymMat::identity(2), vec(&[-3.0, -3.0]))
            .with_inequalities(a, vec(&[1.0, 1.0, 1.0]));
        let sol = solve_qp(&inst).unwrap();
        assert_relative_eq!(sol.d, vec(&[0.5, 0.5]), epsilon = 1e-12);
        assert_relative_eq!(sol.zeta.sum(), 2.5, epsilon = 1e-12);
        assert!(sol.kkt_residual <= 1e-9 * inst.scale());
    }

    #[test]
    fn redundant_equalities_are_pruned() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let inst = QpInstance::new(SymMat::identity(2), DVector::zeros(2))
            .with_equalities(g, vec(&[1.0, 2.0]));
        let sol = solve_qp(&inst).unwrap();
        assert_relative_eq!(sol.d, vec(&[0.5, 0.5]), epsilon = 1e-14);
        assert!(sol.kkt_residual <= 1e-12);
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> QpInstance {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = SymMat::from_matrix(&a * a.transpose() + DMatrix::identity(n, n) * 0.1).unwrap();
        let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let rows = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        // the origin is strictly feasible
        let rhs = DVector::from_fn(k, |_, _| rng.random_range(0.1..1.0));
        QpInstance::new(b, q).with_inequalities(rows, rhs)
    }

    #[test]
    fn beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..10 {
            let n = 2 + trial % 5;
            let k = 5 + 5 * trial;
            let inst = random_instance(&mut rng, n, k);
            let sol = solve_qp(&inst).unwrap();
            assert!(sol.kkt_residual <= KKT_RTOL * inst.scale());
            let best = inst.objective(&sol.d);
            let mut checked = 0;
            while checked < 1000 {
                let d = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let slack = &inst.ineq_rhs - &inst.ineq_matrix * &d;
                if slack.iter().all(|&s| s >= 0.0) {
                    assert!(best <= inst.objective(&d) + 1e-12);
                    checked += 1;
                } else {
                    // pull toward the feasible origin
                    let shrunk = d * 0.1;
                    let slack = &inst.ineq_rhs - &inst.ineq_matrix * &shrunk;
                    if slack.iter().all(|&s| s >= 0.0) {
                        assert!(best <= inst.objective(&shrunk) + 1e-12);
                        checked += 1;
                    }
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn certificate_holds(seed in proptest::prelude::any::<u64>(), n in 1usize..12, k in 0usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, n, k);
            let sol = solve_qp(&inst).unwrap();
            proptest::prop_assert!(verify_kkt(&inst, &sol) <= KKT_RTOL * inst.scale());
            let again = solve_qp(&inst).unwrap();
            proptest::prop_assert_eq!(sol, again);
        }
    }
}
