//! Dense primal active-set solver for the condensed QP at a fixed state.
//!
//! Independent of the certificate programs; used to cross-check the explicit law.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::condense::CondensedQp;
use crate::enumeration::ActiveSet;
use crate::lp::{solve_lp, LpError, LpProblem};
use crate::model::Polytope;

const STEP_TOL: f64 = 1e-11;
const MULTIPLIER_TOL: f64 = 1e-9;
/// Zero-length steps in a row before dropping constraints by smallest index.
const STALL_LIMIT: usize = 20;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// Constraints tight at `u` (residual below `1e-8`).
    pub active: ActiveSet,
    /// Multipliers of the final working set, by constraint row.
    pub multipliers: Vec<(usize, f64)>,
    pub objective: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn first_input(&self, m: usize) -> DVector<f64> {
        self.u.rows(0, m).clone_owned()
    }
}

/// Minimizes the condensed cost over `U` at state `x`. `Ok(None)` when no feasible `U` exists.
pub fn solve_qp(qp: &CondensedQp, x: &DVector<f64>) -> Result<Option<QpSolution>, LpError> {
    let nu = qp.nu();
    let q = qp.q();
    let b = &qp.e * x + &qp.w;
    let lin = qp.f.transpose() * x;

    let mut lp = LpProblem::new(nu);
    lp.lower = vec![f64::NEG_INFINITY; nu];
    lp.a_ub = qp.g.clone();
    lp.b_ub = b.clone();
    let start = solve_lp(&lp)?;
    if !start.is_optimal() {
        return Ok(None);
    }
    let mut u = DVector::from_vec(start.x);

    let mut working: Vec<usize> = Vec::new();
    let mut stalled = 0usize;
    for it in 0..MAX_ITERATIONS {
        let k = working.len();
        let dim = nu + k;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (nu, nu)).copy_from(&qp.h);
        for (j, &r) in working.iter().enumerate() {
            for c in 0..nu {
                kkt[(nu + j, c)] = qp.g[(r, c)];
                kkt[(c, nu + j)] = qp.g[(r, c)];
            }
        }
        let grad = &qp.h * &u + &lin;
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, nu).copy_from(&(-&grad));
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| LpError::NumericalFailure("singular KKT system in QP oracle".into()))?;
        let p = sol.rows(0, nu).clone_owned();
        let lambda = sol.rows(nu, k).clone_owned();

        if p.amax() <= STEP_TOL * (1.0 + u.amax()) {
            let tol = MULTIPLIER_TOL * (1.0 + lambda.amax());
            let negative = (0..k).filter(|&j| lambda[j] < -tol);
            let worst = if stalled >= STALL_LIMIT {
                negative.min_by_key(|&j| working[j])
            } else {
                negative.min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]))
            };
            match worst {
                None => {
                    let slack = &b - &qp.g * &u;
                    let active = ActiveSet::new((0..q).filter(|&i| slack[i].abs() <= 1e-8).map(|i| i as u32 + 1));
                    let objective = 0.5 * u.dot(&(&qp.h * &u)) + lin.dot(&u) + 0.5 * x.dot(&(&qp.y * x));
                    let multipliers = working.iter().zip(lambda.iter()).map(|(&r, &l)| (r, l)).collect();
                    return Ok(Some(QpSolution {
                        u,
                        active,
                        multipliers,
                        objective,
                        iterations: it,
                    }));
                }
                Some(j) => {
                    working.remove(j);
                }
            }
            continue;
        }

        let gp = &qp.g * &p;
        let gu = &qp.g * &u;
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..q {
            if working.contains(&i) || gp[i] <= STEP_TOL {
                continue;
            }
            let step = ((b[i] - gu[i]) / gp[i]).max(0.0);
            if step < alpha {
                alpha = step;
                blocking = Some(i);
            }
        }
        if alpha == 0.0 {
            stalled += 1;
        } else {
            stalled = 0;
        }
        u += alpha * &p;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(LpError::NumericalFailure("QP oracle iteration limit reached".into()))
}

/// Up to `count` states drawn uniformly from the bounding box of `region` (rejection sampled
/// against `region`) at which the QP is feasible. Gives up after `50 * count` draws.
pub fn sample_feasible_states(
    qp: &CondensedQp,
    region: &Polytope,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>, LpError> {
    let Some((lo, hi)) = region.bounding_box()? else {
        return Ok(Vec::new());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..50 * count {
        if out.len() == count {
            break;
        }
        let x = DVector::from_fn(lo.len(), |i, _| rng.gen_range(lo[i]..=hi[i]));
        if region.contains(&x, 0.0) && solve_qp(qp, &x)?.is_some() {
            out.push(x);
        }
    }
    Ok(out)
}
