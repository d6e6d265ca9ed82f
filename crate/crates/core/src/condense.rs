//! Elimination of the state trajectory: the control problem becomes the parametric QP
//!
//! ```text
//!     min_U  1/2 x0' Y x0 + x0' F U + 1/2 U' H U
//!     s.t.   G U <= E x0 + w
//! ```
//!
//! with constraint rows in stagewise order: for every stage `k = 0..N-1` the input rows of
//! `u(k)` followed by the state rows of `x(k)`, then the terminal rows of `x(N)`. Indices handed
//! out by this module are 1-based, so stage `k` owns rows `k*q_ux + 1 ..= (k+1)*q_ux`.
//!
//! `H`, `F` and `Y` carry a factor two relative to the stage-summed cost so that the halves above
//! reproduce it exactly.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{block_diag, min_sym_eigenvalue};
use crate::model::Ocp;

#[derive(Debug, Error)]
pub enum CondenseError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("stage {stage} outside 0..={horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },
    #[error("Hessian is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
}

/// Condensed QP for a fixed horizon together with the products reused by every certificate LP.
#[derive(Clone, Debug)]
pub struct CondensedQp {
    pub y: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DVector<f64>,
    pub e: DMatrix<f64>,
    horizon: usize,
    q_ux: usize,
    q_t: usize,
    n: usize,
    m: usize,
    h_inv: DMatrix<f64>,
    /// `G H^-1 G'`
    gram: DMatrix<f64>,
    /// `-(G H^-1 F' + E)`: the constraint slack map after eliminating `U`.
    reduced_e: DMatrix<f64>,
}

impl CondensedQp {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self) -> usize {
        self.g.nrows()
    }

    pub fn q_ux(&self) -> usize {
        self.q_ux
    }

    pub fn q_t(&self) -> usize {
        self.q_t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of decision variables `N m`.
    pub fn nu(&self) -> usize {
        self.h.nrows()
    }

    pub fn h_inv(&self) -> &DMatrix<f64> {
        &self.h_inv
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn reduced_e(&self) -> &DMatrix<f64> {
        &self.reduced_e
    }

    /// Stage of the 1-based constraint index `i`; terminal rows report stage `N`.
    pub fn stage_of(&self, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.q());
        if i <= self.horizon * self.q_ux {
            (i - 1) / self.q_ux
        } else {
            self.horizon
        }
    }

    /// 1-based index range of stage `k`; stage `N` is the terminal block.
    pub fn stage_indices(&self, k: usize) -> Result<RangeInclusive<usize>, CondenseError> {
        if k > self.horizon {
            return Err(CondenseError::StageOutOfRange {
                stage: k,
                horizon: self.horizon,
            });
        }
        if k == self.horizon {
            let start = self.horizon * self.q_ux + 1;
            Ok(start..=start + self.q_t - 1)
        } else {
            Ok(k * self.q_ux + 1..=(k + 1) * self.q_ux)
        }
    }

    /// `1/2 x' Y x + x' F U + 1/2 U' H U`.
    pub fn objective(&self, x0: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * x0.dot(&(&self.y * x0)) + x0.dot(&(&self.f * u)) + 0.5 * u.dot(&(&self.h * u))
    }

    /// `E x0 + w - G U`; all entries nonnegative iff `U` is feasible for `x0`.
    pub fn slack(&self, x0: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.e * x0 + &self.w - &self.g * u
    }
}

/// Condenses `ocp` for horizon `horizon >= 1`.
pub fn condense(ocp: &Ocp, horizon: usize) -> Result<CondensedQp, CondenseError> {
    if horizon == 0 {
        return Err(CondenseError::DimensionMismatch("horizon must be at least 1".into()));
    }
    let sys = ocp.sys();
    let (a, b) = (sys.a(), sys.b());
    let (n, m) = (sys.n(), sys.m());
    let nu = horizon * m;
    let weights = ocp.weights();

    // powers[k] = A^k, response[k] = map from U to x(k)
    let mut powers = vec![DMatrix::identity(n, n)];
    let mut response = vec![DMatrix::zeros(n, nu)];
    for k in 1..=horizon {
        powers.push(a * &powers[k - 1]);
        let mut s = a * &response[k - 1];
        let mut blk = s.view_mut((0, (k - 1) * m), (n, m));
        blk += b;
        response.push(s);
    }

    let mut a_hat = DMatrix::zeros(horizon * n, n);
    let mut s_hat = DMatrix::zeros(horizon * n, nu);
    for k in 1..=horizon {
        a_hat.view_mut(((k - 1) * n, 0), (n, n)).copy_from(&powers[k]);
        s_hat.view_mut(((k - 1) * n, 0), (n, nu)).copy_from(&response[k]);
    }
    let mut q_blocks: Vec<&DMatrix<f64>> = vec![&weights.q; horizon - 1];
    q_blocks.push(&weights.p);
    let q_hat = block_diag(&q_blocks);
    let r_hat = block_diag(&vec![&weights.r; horizon]);

    let sq = s_hat.transpose() * &q_hat;
    let mut h = (&sq * &s_hat + &r_hat) * 2.0;
    h = (&h + h.transpose()) * 0.5;
    let f = (a_hat.transpose() * &q_hat * &s_hat) * 2.0;
    let mut y = (&weights.q + a_hat.transpose() * &q_hat * &a_hat) * 2.0;
    y = (&y + y.transpose()) * 0.5;

    let (cu, du) = (ocp.u_set().c(), ocp.u_set().d());
    let (cx, dx) = (ocp.x_set().c(), ocp.x_set().d());
    let (ct, dt) = (ocp.t_set().c(), ocp.t_set().d());
    let q_ux = cu.nrows() + cx.nrows();
    let q_t = ct.nrows();
    let q = horizon * q_ux + q_t;

    let mut g = DMatrix::zeros(q, nu);
    let mut e = DMatrix::zeros(q, n);
    let mut w = DVector::zeros(q);
    let mut row = 0;
    for k in 0..horizon {
        g.view_mut((row, k * m), (cu.nrows(), m)).copy_from(cu);
        w.rows_mut(row, cu.nrows()).copy_from(du);
        row += cu.nrows();
        g.view_mut((row, 0), (cx.nrows(), nu)).copy_from(&(cx * &response[k]));
        e.view_mut((row, 0), (cx.nrows(), n)).copy_from(&(-(cx * &powers[k])));
        w.rows_mut(row, cx.nrows()).copy_from(dx);
        row += cx.nrows();
    }
    g.view_mut((row, 0), (q_t, nu)).copy_from(&(ct * &response[horizon]));
    e.view_mut((row, 0), (q_t, n)).copy_from(&(-(ct * &powers[horizon])));
    w.rows_mut(row, q_t).copy_from(dt);

    let lmin = min_sym_eigenvalue(&h);
    if lmin <= 1e-10 {
        return Err(CondenseError::NotPositiveDefinite(lmin));
    }
    let h_inv = h
        .clone()
        .cholesky()
        .ok_or(CondenseError::NotPositiveDefinite(lmin))?
        .inverse();
    let g_hinv = &g * &h_inv;
    let mut gram = &g_hinv * g.transpose();
    gram = (&gram + gram.transpose()) * 0.5;
    let reduced_e = -(&g_hinv * f.transpose() + &e);

    Ok(CondensedQp {
        y,
        f,
        h,
        g,
        w,
        e,
        horizon,
        q_ux,
        q_t,
        n,
        m,
        h_inv,
        gram,
        reduced_e,
    })
}
