//! Critical regions and the piecewise-affine control law.
//!
//! For an active set `A` with full row rank, stationarity and the active equalities give the
//! multipliers and the optimizer as affine functions of the state,
//!
//! ```text
//!     lambda(x) = -(G_A H^-1 G_A')^-1 (w_A + (E_A + G_A H^-1 F') x)
//!     U(x)      = -H^-1 (F' x + G_A' lambda(x)),
//! ```
//!
//! and the region is `{x : G_I U(x) <= w_I + E_I x, lambda(x) >= 0}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condense::CondensedQp;
use crate::enumeration::{has_full_row_rank, ActiveSet, Counters};
use crate::linalg::select_rows;
use crate::lp::LpError;
use crate::model::{ModelError, Polytope};

/// Inscribed radius above which a region counts as full-dimensional.
pub const FULL_DIM_RADIUS: f64 = 1e-7;
/// Redundancy tolerance for region rows; negative so marginal rows are kept.
const REGION_REDUNDANCY_TOL: f64 = -1e-9;
/// Normals closer than this are treated as the same halfspace direction.
const PARALLEL_TOL: f64 = 1e-9;
/// Membership tolerance used by point location.
pub const LOCATE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("G_A of active set {0} does not have full row rank")]
    RankDeficient(ActiveSet),
    #[error("region of active set {0} is empty or lower-dimensional")]
    EmptyRegion(ActiveSet),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Colour classes of a region by the stage of its active constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageClass {
    /// At least one terminal constraint is active.
    TerminalActive,
    /// No terminal constraint, but one in stage `N - 1`.
    LastStageActive,
    /// Nothing active in stages `N - 1` and `N`.
    Interior,
}

impl StageClass {
    pub fn of(aset: &ActiveSet, horizon: usize, q_ux: usize) -> Self {
        if !aset.within(horizon * q_ux) {
            StageClass::TerminalActive
        } else if !aset.within((horizon - 1) * q_ux) {
            StageClass::LastStageActive
        } else {
            StageClass::Interior
        }
    }
}

/// One affine piece of the explicit solution.
#[derive(Clone, Debug)]
pub struct Region {
    pub aset: ActiveSet,
    pub polytope: Polytope,
    /// First input `u = gain x + offset`.
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub class: StageClass,
}

impl Region {
    pub fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gain * x + &self.offset
    }
}

/// Affine parametrization of multipliers and optimizer for one active set.
#[derive(Clone, Debug)]
pub struct AffineSolution {
    /// `lambda(x) = lambda_gain x + lambda_offset`
    pub lambda_gain: DMatrix<f64>,
    pub lambda_offset: DVector<f64>,
    /// `U(x) = u_gain x + u_offset`
    pub u_gain: DMatrix<f64>,
    pub u_offset: DVector<f64>,
    /// Raw halfspaces `C x <= d` (inactive rows, then multiplier signs), not normalized.
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

pub fn affine_solution(qp: &CondensedQp, aset: &ActiveSet) -> Result<AffineSolution, RegionError> {
    if let Some(i) = aset.max() {
        if i as usize > qp.q() {
            return Err(LpError::IndexOutOfRange { index: i, q: qp.q() }.into());
        }
    }
    if !has_full_row_rank(qp, aset) {
        return Err(RegionError::RankDeficient(aset.clone()));
    }
    let act = aset.rows();
    let ina: Vec<usize> = (0..qp.q()).filter(|i| !aset.contains(*i as u32 + 1)).collect();
    let (n, na) = (qp.n(), act.len());
    let red = qp.reduced_e();
    let gram = qp.gram();

    let (lambda_gain, lambda_offset) = if na == 0 {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    } else {
        let m_aa = DMatrix::from_fn(na, na, |i, j| gram[(act[i], act[j])]);
        let lu = m_aa.lu();
        let d_a = select_rows(red, &act);
        let w_a = DVector::from_fn(na, |i, _| qp.w[act[i]]);
        let lg = lu.solve(&d_a).ok_or_else(|| RegionError::RankDeficient(aset.clone()))?;
        let lo = -lu.solve(&w_a).ok_or_else(|| RegionError::RankDeficient(aset.clone()))?;
        (lg, lo)
    };

    let g_a = select_rows(&qp.g, &act);
    let h_inv = qp.h_inv();
    let u_gain = -(h_inv * (qp.f.transpose() + g_a.transpose() * &lambda_gain));
    let u_offset = -(h_inv * (g_a.transpose() * &lambda_offset));

    // inactive rows: (D_I - M_IA L) x <= w_I + M_IA l
    let ni = ina.len();
    let mut c = DMatrix::zeros(ni + na, n);
    let mut d = DVector::zeros(ni + na);
    for (r, &i) in ina.iter().enumerate() {
        let mut row = red.row(i).clone_owned();
        let mut rhs = qp.w[i];
        for (k, &l) in act.iter().enumerate() {
            row -= lambda_gain.row(k) * gram[(i, l)];
            rhs += gram[(i, l)] * lambda_offset[k];
        }
        c.row_mut(r).copy_from(&row);
        d[r] = rhs;
    }
    for k in 0..na {
        c.row_mut(ni + k).copy_from(&(-lambda_gain.row(k)));
        d[ni + k] = lambda_offset[k];
    }
    Ok(AffineSolution {
        lambda_gain,
        lambda_offset,
        u_gain,
        u_offset,
        c,
        d,
    })
}

/// Full-dimensionality test: positive inscribed radius of the region of `aset`.
pub fn is_full_dimensional(qp: &CondensedQp, aset: &ActiveSet) -> Result<bool, RegionError> {
    let sol = affine_solution(qp, aset)?;
    let poly = match Polytope::new(sol.c, sol.d) {
        Ok(p) => p.merge_parallel(PARALLEL_TOL),
        Err(ModelError::EmptySet) => return Ok(false),
        Err(e) => return Err(e.into()),
    };
    let (_, radius) = poly.chebyshev_ball()?;
    Ok(radius > FULL_DIM_RADIUS)
}

pub fn region_from_active_set(qp: &CondensedQp, aset: &ActiveSet) -> Result<Region, RegionError> {
    let sol = affine_solution(qp, aset)?;
    let poly = match Polytope::new(sol.c.clone(), sol.d.clone()) {
        Ok(p) => p.merge_parallel(PARALLEL_TOL),
        Err(ModelError::EmptySet) => return Err(RegionError::EmptyRegion(aset.clone())),
        Err(e) => return Err(e.into()),
    };
    let (_, radius) = poly.chebyshev_ball()?;
    if radius <= FULL_DIM_RADIUS {
        return Err(RegionError::EmptyRegion(aset.clone()));
    }
    let polytope = poly.remove_redundant(REGION_REDUNDANCY_TOL)?;
    let m = qp.m();
    Ok(Region {
        aset: aset.clone(),
        polytope,
        gain: sol.u_gain.rows(0, m).clone_owned(),
        offset: sol.u_offset.rows(0, m).clone_owned(),
        class: StageClass::of(aset, qp.horizon(), qp.q_ux()),
    })
}

/// Explicit control law on the feasible set.
#[derive(Clone, Debug)]
pub struct PwaLaw {
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub q_ux: usize,
    pub regions: Vec<Region>,
    pub finitely_determined: bool,
    pub n_reached: usize,
    pub counters: Option<Counters>,
}

/// Builds one region per active set; sets whose region collapses are dropped with a warning.
pub fn build_pwa<'a, I>(qp: &CondensedQp, sets: I) -> Result<PwaLaw, RegionError>
where
    I: IntoIterator<Item = &'a ActiveSet>,
{
    let mut regions = Vec::new();
    for a in sets {
        match region_from_active_set(qp, a) {
            Ok(r) => regions.push(r),
            Err(RegionError::EmptyRegion(a)) => log::warn!("dropping active set {a}: region collapsed"),
            Err(e) => return Err(e),
        }
    }
    Ok(PwaLaw {
        horizon: qp.horizon(),
        n: qp.n(),
        m: qp.m(),
        q_ux: qp.q_ux(),
        regions,
        finitely_determined: false,
        n_reached: qp.horizon(),
        counters: None,
    })
}

impl PwaLaw {
    /// Index of the region containing `x` with the largest margin.
    pub fn locate(&self, x: &DVector<f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, r) in self.regions.iter().enumerate() {
            let margin = r.polytope.margin(x);
            if margin >= -LOCATE_TOL && best.is_none_or(|(_, b)| margin > b) {
                best = Some((k, margin));
            }
        }
        best.map(|(k, _)| k)
    }

    /// First optimal input at `x`, or `None` outside the feasible set.
    pub fn evaluate(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.locate(x).map(|k| self.regions[k].control(x))
    }
}

pub fn evaluate(law: &PwaLaw, x: &DVector<f64>) -> Option<DVector<f64>> {
    law.evaluate(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::condense;
    use crate::model::double_integrator;

    #[test]
    fn empty_active_set_gives_unconstrained_law() {
        let ocp = double_integrator();
        let qp = condense(&ocp, 3).unwrap();
        let r = region_from_active_set(&qp, &ActiveSet::empty()).unwrap();
        assert!(r.offset.amax() < 1e-12);
        assert!(r.polytope.contains(&DVector::zeros(2), 0.0));
        // with the Riccati terminal cost the unconstrained horizon law is the LQR gain
        assert!((&r.gain - &ocp.weights().k).amax() < 1e-9);
        assert_eq!(r.class, StageClass::Interior);
    }

    #[test]
    fn slab_region_is_not_full_dimensional() {
        let p = Polytope::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let bounded = p.intersect(&Polytope::symmetric_box(&[1.0, 1.0]).unwrap()).unwrap();
        assert!(bounded.chebyshev_ball().unwrap().1 <= FULL_DIM_RADIUS);
    }

    #[test]
    fn rank_deficient_set_rejected() {
        let qp = condense(&double_integrator(), 2).unwrap();
        // row 3 is a stage-0 state constraint with a zero G row
        assert!(matches!(
            region_from_active_set(&qp, &ActiveSet::new([3])),
            Err(RegionError::RankDeficient(_))
        ));
    }

    #[test]
    fn classification_by_stage() {
        assert_eq!(StageClass::of(&ActiveSet::new([13]), 2, 6), StageClass::TerminalActive);
        assert_eq!(StageClass::of(&ActiveSet::new([7]), 2, 6), StageClass::LastStageActive);
        assert_eq!(StageClass::of(&ActiveSet::new([1]), 2, 6), StageClass::Interior);
        assert_eq!(StageClass::of(&ActiveSet::empty(), 1, 6), StageClass::Interior);
    }
}
