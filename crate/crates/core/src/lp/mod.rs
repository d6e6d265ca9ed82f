//! Linear programming: the simplex solver and the active-set certificate programs.
//!
//! The optimality certificate for an active set `A` (with complement `I`) is
//!
//! ```text
//!     max t
//!     s.t.  F' x0 + H U + G_A' lambda_A = 0
//!           t <= lambda_A
//!           G_A U - E_A x0 - w_A = 0
//!           G_I U - E_I x0 - w_I + s_I = 0
//!           t <= s_I
//!           0 <= t <= 1
//! ```
//!
//! and the feasibility certificate drops the first two rows. `t` is capped at one because any
//! positive value already certifies a strictly complementary point.
//!
//! The `build_*` functions return these programs verbatim. The solver path uses equivalent
//! reduced programs in which the slacks are substituted and, for the optimality test, `U` is
//! eliminated through stationarity (`H` is positive definite). Both forms share the same optimal
//! `t`.

mod simplex;

pub use simplex::{solve_lp, LpOutcome, LpProblem, LpStatus, FEASIBILITY_TOL, OPTIMALITY_TOL, PIVOT_TOL};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::condense::CondensedQp;
use crate::enumeration::ActiveSet;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("numerical failure in simplex: {0}")]
    NumericalFailure(String),
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("constraint index {index} outside 1..={q}")]
    IndexOutOfRange { index: u32, q: usize },
}

fn check_indices(qp: &CondensedQp, aset: &ActiveSet) -> Result<(), LpError> {
    match aset.max() {
        Some(i) if i as usize > qp.q() => Err(LpError::IndexOutOfRange { index: i, q: qp.q() }),
        _ => Ok(()),
    }
}

/// 0-based active rows and inactive rows.
fn partition(qp: &CondensedQp, aset: &ActiveSet) -> (Vec<usize>, Vec<usize>) {
    let active = aset.rows();
    let mut inactive = Vec::with_capacity(qp.q() - active.len());
    let mut k = 0;
    for i in 0..qp.q() {
        if k < active.len() && active[k] == i {
            k += 1;
        } else {
            inactive.push(i);
        }
    }
    (active, inactive)
}

/// Optimality certificate with variables `(U, x0, lambda_A, s_I, t)`.
pub fn build_optimality_lp(qp: &CondensedQp, aset: &ActiveSet) -> Result<LpProblem, LpError> {
    check_indices(qp, aset)?;
    let (act, ina) = partition(qp, aset);
    let (nu, n, na, ni) = (qp.nu(), qp.n(), act.len(), ina.len());
    let (ou, ox, ol, os, ot) = (0, nu, nu + n, nu + n + na, nu + n + na + ni);
    let nv = ot + 1;

    let mut p = LpProblem::new(nv);
    p.c[ot] = -1.0;
    p.lower = vec![f64::NEG_INFINITY; nv];
    p.lower[ot] = 0.0;
    p.upper[ot] = 1.0;

    let mut a_eq = DMatrix::zeros(nu + na + ni, nv);
    let mut b_eq = DVector::zeros(nu + na + ni);
    // stationarity
    a_eq.view_mut((0, ou), (nu, nu)).copy_from(&qp.h);
    a_eq.view_mut((0, ox), (nu, n)).copy_from(&qp.f.transpose());
    for (k, &i) in act.iter().enumerate() {
        for j in 0..nu {
            a_eq[(j, ol + k)] = qp.g[(i, j)];
        }
    }
    // active rows
    for (k, &i) in act.iter().enumerate() {
        let r = nu + k;
        for j in 0..nu {
            a_eq[(r, ou + j)] = qp.g[(i, j)];
        }
        for j in 0..n {
            a_eq[(r, ox + j)] = -qp.e[(i, j)];
        }
        b_eq[r] = qp.w[i];
    }
    // inactive rows with slacks
    for (k, &i) in ina.iter().enumerate() {
        let r = nu + na + k;
        for j in 0..nu {
            a_eq[(r, ou + j)] = qp.g[(i, j)];
        }
        for j in 0..n {
            a_eq[(r, ox + j)] = -qp.e[(i, j)];
        }
        a_eq[(r, os + k)] = 1.0;
        b_eq[r] = qp.w[i];
    }
    p.a_eq = a_eq;
    p.b_eq = b_eq;

    let mut a_ub = DMatrix::zeros(na + ni, nv);
    for k in 0..na {
        a_ub[(k, ot)] = 1.0;
        a_ub[(k, ol + k)] = -1.0;
    }
    for k in 0..ni {
        a_ub[(na + k, ot)] = 1.0;
        a_ub[(na + k, os + k)] = -1.0;
    }
    p.a_ub = a_ub;
    p.b_ub = DVector::zeros(na + ni);
    Ok(p)
}

/// Feasibility certificate with variables `(U, x0, s_I, t)`.
pub fn build_feasibility_lp(qp: &CondensedQp, aset: &ActiveSet) -> Result<LpProblem, LpError> {
    check_indices(qp, aset)?;
    let (act, ina) = partition(qp, aset);
    let (nu, n, na, ni) = (qp.nu(), qp.n(), act.len(), ina.len());
    let (ou, ox, os, ot) = (0, nu, nu + n, nu + n + ni);
    let nv = ot + 1;

    let mut p = LpProblem::new(nv);
    p.c[ot] = -1.0;
    p.lower = vec![f64::NEG_INFINITY; nv];
    p.lower[ot] = 0.0;
    p.upper[ot] = 1.0;

    let mut a_eq = DMatrix::zeros(na + ni, nv);
    let mut b_eq = DVector::zeros(na + ni);
    for (r, &i) in act.iter().chain(ina.iter()).enumerate() {
        for j in 0..nu {
            a_eq[(r, ou + j)] = qp.g[(i, j)];
        }
        for j in 0..n {
            a_eq[(r, ox + j)] = -qp.e[(i, j)];
        }
        if r >= na {
            a_eq[(r, os + r - na)] = 1.0;
        }
        b_eq[r] = qp.w[i];
    }
    p.a_eq = a_eq;
    p.b_eq = b_eq;

    let mut a_ub = DMatrix::zeros(ni, nv);
    for k in 0..ni {
        a_ub[(k, ot)] = 1.0;
        a_ub[(k, os + k)] = -1.0;
    }
    p.a_ub = a_ub;
    p.b_ub = DVector::zeros(ni);
    Ok(p)
}

/// Optimality certificate after eliminating `U` and `s_I`; variables `(x0, lambda_A, t)`.
pub fn build_reduced_optimality_lp(qp: &CondensedQp, aset: &ActiveSet) -> Result<LpProblem, LpError> {
    check_indices(qp, aset)?;
    let (act, ina) = partition(qp, aset);
    let (n, na, ni) = (qp.n(), act.len(), ina.len());
    let (ox, ol, ot) = (0, n, n + na);
    let nv = ot + 1;
    let (gram, red) = (qp.gram(), qp.reduced_e());

    let mut p = LpProblem::new(nv);
    p.c[ot] = -1.0;
    for j in 0..n {
        p.lower[ox + j] = f64::NEG_INFINITY;
    }
    p.upper[ot] = 1.0;

    let mut a_eq = DMatrix::zeros(na, nv);
    let mut b_eq = DVector::zeros(na);
    for (r, &i) in act.iter().enumerate() {
        for j in 0..n {
            a_eq[(r, ox + j)] = red[(i, j)];
        }
        for (k, &l) in act.iter().enumerate() {
            a_eq[(r, ol + k)] = -gram[(i, l)];
        }
        b_eq[r] = qp.w[i];
    }
    p.a_eq = a_eq;
    p.b_eq = b_eq;

    let mut a_ub = DMatrix::zeros(ni + na, nv);
    let mut b_ub = DVector::zeros(ni + na);
    for (r, &i) in ina.iter().enumerate() {
        for j in 0..n {
            a_ub[(r, ox + j)] = red[(i, j)];
        }
        for (k, &l) in act.iter().enumerate() {
            a_ub[(r, ol + k)] = -gram[(i, l)];
        }
        a_ub[(r, ot)] = 1.0;
        b_ub[r] = qp.w[i];
    }
    for k in 0..na {
        a_ub[(ni + k, ol + k)] = -1.0;
        a_ub[(ni + k, ot)] = 1.0;
    }
    p.a_ub = a_ub;
    p.b_ub = b_ub;
    Ok(p)
}

/// Feasibility certificate with the slacks substituted; variables `(U, x0, t)`.
pub fn build_reduced_feasibility_lp(qp: &CondensedQp, aset: &ActiveSet) -> Result<LpProblem, LpError> {
    check_indices(qp, aset)?;
    let (act, ina) = partition(qp, aset);
    let (nu, n, na, ni) = (qp.nu(), qp.n(), act.len(), ina.len());
    let (ou, ox, ot) = (0, nu, nu + n);
    let nv = ot + 1;

    let mut p = LpProblem::new(nv);
    p.c[ot] = -1.0;
    for j in 0..nu + n {
        p.lower[j] = f64::NEG_INFINITY;
    }
    p.upper[ot] = 1.0;

    let fill = |a: &mut DMatrix<f64>, r: usize, i: usize| {
        for j in 0..nu {
            a[(r, ou + j)] = qp.g[(i, j)];
        }
        for j in 0..n {
            a[(r, ox + j)] = -qp.e[(i, j)];
        }
    };
    let mut a_eq = DMatrix::zeros(na, nv);
    let mut b_eq = DVector::zeros(na);
    for (r, &i) in act.iter().enumerate() {
        fill(&mut a_eq, r, i);
        b_eq[r] = qp.w[i];
    }
    let mut a_ub = DMatrix::zeros(ni, nv);
    let mut b_ub = DVector::zeros(ni);
    for (r, &i) in ina.iter().enumerate() {
        fill(&mut a_ub, r, i);
        a_ub[(r, ot)] = 1.0;
        b_ub[r] = qp.w[i];
    }
    p.a_eq = a_eq;
    p.b_eq = b_eq;
    p.a_ub = a_ub;
    p.b_ub = b_ub;
    Ok(p)
}

/// Optimal `t` of a certificate program, or `None` when it has no solution.
fn certificate_value(p: &LpProblem) -> Result<Option<f64>, LpError> {
    let out = solve_lp(p)?;
    match out.status {
        LpStatus::Optimal => Ok(Some(out.x[p.num_vars() - 1])),
        LpStatus::Infeasible => Ok(None),
        // t is boxed, so this only happens through numerical trouble
        LpStatus::Unbounded => Err(LpError::NumericalFailure("certificate LP reported unbounded".into())),
    }
}

/// Solves the optimality certificate for `aset`; `Some(t)` when `aset` is an optimal active set.
pub fn optimality_certificate(qp: &CondensedQp, aset: &ActiveSet) -> Result<Option<f64>, LpError> {
    certificate_value(&build_reduced_optimality_lp(qp, aset)?)
}

/// Solves the feasibility certificate for `aset`; `None` marks an infeasible active set.
pub fn feasibility_certificate(qp: &CondensedQp, aset: &ActiveSet) -> Result<Option<f64>, LpError> {
    certificate_value(&build_reduced_feasibility_lp(qp, aset)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::condense;
    use crate::model::double_integrator;

    #[test]
    fn empty_set_has_no_multipliers() {
        let qp = condense(&double_integrator(), 1).unwrap();
        let p = build_optimality_lp(&qp, &ActiveSet::empty()).unwrap();
        // U, x0, s_I, t
        assert_eq!(p.num_vars(), qp.nu() + qp.n() + qp.q() + 1);
        assert_eq!(p.a_ub.nrows(), qp.q());
    }

    #[test]
    fn full_set_has_no_slacks() {
        let qp = condense(&double_integrator(), 1).unwrap();
        let all = ActiveSet::new(1..=qp.q() as u32);
        let p = build_optimality_lp(&qp, &all).unwrap();
        assert_eq!(p.num_vars(), qp.nu() + qp.n() + qp.q() + 1);
        assert_eq!(p.a_eq.nrows(), qp.nu() + qp.q());
        assert_eq!(p.a_ub.nrows(), qp.q());
    }

    #[test]
    fn out_of_range_index_rejected() {
        let qp = condense(&double_integrator(), 1).unwrap();
        let bad = ActiveSet::new([qp.q() as u32 + 1]);
        assert!(matches!(
            build_optimality_lp(&qp, &bad),
            Err(LpError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            build_feasibility_lp(&qp, &bad),
            Err(LpError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn unconstrained_set_is_strictly_optimal() {
        let qp = condense(&double_integrator(), 1).unwrap();
        let t = optimality_certificate(&qp, &ActiveSet::empty()).unwrap().unwrap();
        assert!(t > 1e-9);
        let t = feasibility_certificate(&qp, &ActiveSet::empty()).unwrap().unwrap();
        assert!(t > 1e-9);
    }

    #[test]
    fn opposite_input_bounds_are_infeasible() {
        let qp = condense(&double_integrator(), 1).unwrap();
        let pair = ActiveSet::new([1, 2]);
        assert!(feasibility_certificate(&qp, &pair).unwrap().is_none());
        let literal = solve_lp(&build_feasibility_lp(&qp, &pair).unwrap()).unwrap();
        assert_eq!(literal.status, LpStatus::Infeasible);
    }
}
