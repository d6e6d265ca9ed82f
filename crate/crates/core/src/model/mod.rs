//! Plant, constraint sets, infinite-horizon LQR ingredients and the terminal set.

mod polytope;

pub use polytope::Polytope;

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::linalg::{complex_rank, is_symmetric, min_sym_eigenvalue, spectral_radius};
use crate::lp::LpError;

const DARE_MAX_ITER: usize = 100_000;
const DARE_STEP_TOL: f64 = 1e-12;
const DARE_RESIDUAL_TOL: f64 = 1e-9;
const HAUTUS_TOL: f64 = 1e-8;
const TERMINAL_MAX_ITER: usize = 500;
const REDUNDANCY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("(A, B) is not stabilizable")]
    NotStabilizable,
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("Riccati iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("invariant-set iteration not finitely determined within {0} steps")]
    NoFiniteDetermination(usize),
    #[error("terminal set is empty")]
    EmptyTerminalSet,
    #[error("polytope is empty")]
    EmptySet,
    #[error("invalid constraint set: {0}")]
    InvalidSet(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Discrete-time plant `x+ = A x + B u`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    /// Fails on inconsistent shapes or when an unstable mode is uncontrollable.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(ModelError::DimensionMismatch("A must be square and nonempty".into()));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "B is {}x{}, expected {n}xm with m >= 1",
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::DimensionMismatch("non-finite entries".into()));
        }
        let sys = Self { a, b };
        if !sys.is_stabilizable() {
            return Err(ModelError::NotStabilizable);
        }
        Ok(sys)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Hautus test on every eigenvalue with `|lambda| >= 1`.
    fn is_stabilizable(&self) -> bool {
        let n = self.n();
        let m = self.m();
        for lambda in self.a.complex_eigenvalues().iter() {
            if lambda.norm() < 1.0 {
                continue;
            }
            let mut h = DMatrix::<Complex<f64>>::zeros(n, n + m);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] = Complex::new(self.a[(i, j)], 0.0);
                }
                h[(i, i)] -= *lambda;
                for j in 0..m {
                    h[(i, n + j)] = Complex::new(self.b[(i, j)], 0.0);
                }
            }
            if complex_rank(&h, HAUTUS_TOL) < n {
                return false;
            }
        }
        true
    }
}

/// Stage and terminal weights with the unconstrained LQR gain (`u = K x`).
#[derive(Clone, Debug)]
pub struct Weights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

impl Weights {
    /// Frobenius norm of the Riccati residual at `P`.
    pub fn riccati_residual(&self, sys: &LinearSystem) -> f64 {
        riccati_map(sys, &self.q, &self.r, &self.p)
            .map(|next| (&self.p - next).norm())
            .unwrap_or(f64::INFINITY)
    }
}

fn riccati_map(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (a, b) = (sys.a(), sys.b());
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let gain = s.cholesky()?.solve(&(&bt_p * a));
    let at_p = a.transpose() * p;
    let next = q + &at_p * a - &at_p * b * gain;
    Some((&next + next.transpose()) * 0.5)
}

fn check_weights(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(), ModelError> {
    let (n, m) = (sys.n(), sys.m());
    if q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(ModelError::DimensionMismatch(
            "Q must be n x n and R must be m x m".into(),
        ));
    }
    if !is_symmetric(q, 1e-12) || !is_symmetric(r, 1e-12) {
        return Err(ModelError::InvalidWeight("Q and R must be symmetric".into()));
    }
    if min_sym_eigenvalue(q) < -1e-12 * (1.0 + q.amax()) {
        return Err(ModelError::InvalidWeight("Q must be positive semidefinite".into()));
    }
    if min_sym_eigenvalue(r) <= 0.0 {
        return Err(ModelError::InvalidWeight("R must be positive definite".into()));
    }
    Ok(())
}

/// Solves the discrete algebraic Riccati equation by fixed-point iteration from `P_0 = Q`.
pub fn solve_dare(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Weights, ModelError> {
    check_weights(sys, q, r)?;
    let mut p = q.clone();
    let mut converged = false;
    for _ in 0..DARE_MAX_ITER {
        let next = riccati_map(sys, q, r, &p).ok_or(ModelError::NonConvergence(0))?;
        let step = (&next - &p).norm();
        let scale = p.norm().max(1.0);
        p = next;
        if step <= DARE_STEP_TOL * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ModelError::NonConvergence(DARE_MAX_ITER));
    }
    let (a, b) = (sys.a(), sys.b());
    let bt_p = b.transpose() * &p;
    let s = r + &bt_p * b;
    let k = -s
        .cholesky()
        .ok_or(ModelError::NonConvergence(DARE_MAX_ITER))?
        .solve(&(&bt_p * a));
    let w = Weights {
        q: q.clone(),
        r: r.clone(),
        p,
        k,
    };
    if min_sym_eigenvalue(&w.p) <= 0.0 {
        return Err(ModelError::InvalidWeight(
            "Riccati solution is not positive definite".into(),
        ));
    }
    if w.riccati_residual(sys) > DARE_RESIDUAL_TOL * w.p.norm() {
        return Err(ModelError::NonConvergence(DARE_MAX_ITER));
    }
    if spectral_radius(&(a + b * &w.k)) >= 1.0 {
        return Err(ModelError::NotStabilizable);
    }
    Ok(w)
}

/// Result of the invariant-set iteration.
#[derive(Clone, Debug)]
pub struct TerminalSet {
    pub polytope: Polytope,
    /// Number of redundancy passes over freshly generated rows.
    pub passes: usize,
}

/// Maximal positively invariant set of `x+ = (A + B K) x` inside `{x in X : K x in U}`.
pub fn terminal_set(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    x_set: &Polytope,
    u_set: &Polytope,
) -> Result<Polytope, ModelError> {
    maximal_invariant_set(sys, k, x_set, u_set).map(|t| t.polytope)
}

pub fn maximal_invariant_set(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    x_set: &Polytope,
    u_set: &Polytope,
) -> Result<TerminalSet, ModelError> {
    let n = sys.n();
    if k.shape() != (sys.m(), n) || x_set.dim() != n || u_set.dim() != sys.m() {
        return Err(ModelError::DimensionMismatch("terminal set data".into()));
    }
    let closed = sys.a() + sys.b() * k;
    if spectral_radius(&closed) >= 1.0 {
        return Err(ModelError::InvalidWeight("A + B K is not Schur stable".into()));
    }
    let base = x_set.intersect(&u_set.preimage(k)?)?;
    let mut omega = base.remove_redundant(REDUNDANCY_TOL)?;
    let mut power = closed.clone();
    for pass in 1..=TERMINAL_MAX_ITER {
        let candidate = base.preimage(&power)?;
        let fresh: Vec<usize> = (0..candidate.num_rows())
            .filter_map(|i| match candidate.row_implied_by(i, &omega, REDUNDANCY_TOL) {
                Ok(true) => None,
                Ok(false) => Some(Ok(i)),
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_, _>>()?;
        if fresh.is_empty() {
            let (_, radius) = omega.chebyshev_ball()?;
            if radius < 0.0 {
                return Err(ModelError::EmptyTerminalSet);
            }
            return Ok(TerminalSet {
                polytope: omega,
                passes: pass,
            });
        }
        omega = omega
            .intersect(&candidate.select(&fresh))?
            .remove_redundant(REDUNDANCY_TOL)?;
        power = &closed * power;
    }
    Err(ModelError::NoFiniteDetermination(TERMINAL_MAX_ITER))
}

/// Constrained LQR problem data with stagewise constraint counts.
#[derive(Clone, Debug)]
pub struct Ocp {
    sys: LinearSystem,
    u_set: Polytope,
    x_set: Polytope,
    t_set: Polytope,
    weights: Weights,
}

impl Ocp {
    /// Computes `P`, `K` from the Riccati equation and the terminal set from the invariant-set
    /// iteration.
    pub fn new(
        sys: LinearSystem,
        u_set: Polytope,
        x_set: Polytope,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        if u_set.dim() != sys.m() || x_set.dim() != sys.n() {
            return Err(ModelError::DimensionMismatch("constraint set dimensions".into()));
        }
        u_set.validate_constraint_set("U")?;
        x_set.validate_constraint_set("X")?;
        let weights = solve_dare(&sys, q, r)?;
        let t_set = terminal_set(&sys, &weights.k, &x_set, &u_set)?;
        Ok(Self {
            sys,
            u_set,
            x_set,
            t_set,
            weights,
        })
    }

    /// Uses caller-supplied terminal ingredients. Only shapes are checked.
    pub fn with_terminal(
        sys: LinearSystem,
        u_set: Polytope,
        x_set: Polytope,
        t_set: Polytope,
        weights: Weights,
    ) -> Result<Self, ModelError> {
        let (n, m) = (sys.n(), sys.m());
        if u_set.dim() != m
            || x_set.dim() != n
            || t_set.dim() != n
            || weights.p.shape() != (n, n)
            || weights.q.shape() != (n, n)
            || weights.r.shape() != (m, m)
            || weights.k.shape() != (m, n)
        {
            return Err(ModelError::DimensionMismatch("terminal ingredients".into()));
        }
        Ok(Self {
            sys,
            u_set,
            x_set,
            t_set,
            weights,
        })
    }

    pub fn sys(&self) -> &LinearSystem {
        &self.sys
    }

    pub fn u_set(&self) -> &Polytope {
        &self.u_set
    }

    pub fn x_set(&self) -> &Polytope {
        &self.x_set
    }

    pub fn t_set(&self) -> &Polytope {
        &self.t_set
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Constraints per stage: input rows plus state rows.
    pub fn q_ux(&self) -> usize {
        self.u_set.num_rows() + self.x_set.num_rows()
    }

    pub fn q_t(&self) -> usize {
        self.t_set.num_rows()
    }
}

/// The double integrator `x+ = [1 1; 0 1] x + [0.5; 1] u` with `|u| <= 1`, `|x1| <= 25`,
/// `|x2| <= 5`, `Q = I`, `R = 0.1`.
pub fn double_integrator() -> Ocp {
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
    )
    .expect("double integrator is controllable");
    let u_set = Polytope::symmetric_box(&[1.0]).expect("valid box");
    let x_set = Polytope::symmetric_box(&[25.0, 5.0]).expect("valid box");
    Ocp::new(
        sys,
        u_set,
        x_set,
        &DMatrix::identity(2, 2),
        &DMatrix::from_element(1, 1, 0.1),
    )
    .expect("double integrator data is valid")
}
