use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::lp::{solve_lp, LpError, LpProblem, LpStatus};

/// Rows whose normal is shorter than this are treated as constant constraints.
const ZERO_ROW_TOL: f64 = 1e-10;
/// Upper bound placed on the inscribed-ball radius so the LP stays bounded.
const RADIUS_CAP: f64 = 1e6;

/// Componentwise lower and upper bounds.
pub type Bounds = (DVector<f64>, DVector<f64>);

/// Polytope in halfspace representation `{z : C z <= d}` with unit-norm rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    c: DMatrix<f64>,
    d: DVector<f64>,
}

impl Polytope {
    /// Builds the polytope and normalizes every row to unit Euclidean norm.
    ///
    /// Rows with a vanishing normal are dropped when trivially satisfied; a vanishing row with a
    /// negative right-hand side makes the set empty and is reported as an error.
    pub fn new(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self, ModelError> {
        if c.nrows() != d.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "polytope has {} rows but {} offsets",
                c.nrows(),
                d.len()
            )));
        }
        if c.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidSet("non-finite polytope data".into()));
        }
        let mut keep = Vec::with_capacity(c.nrows());
        for i in 0..c.nrows() {
            let norm = c.row(i).norm();
            if norm > ZERO_ROW_TOL {
                keep.push((i, norm));
            } else if d[i] < -1e-9 {
                return Err(ModelError::EmptySet);
            }
        }
        let mut cn = DMatrix::zeros(keep.len(), c.ncols());
        let mut dn = DVector::zeros(keep.len());
        for (k, &(i, norm)) in keep.iter().enumerate() {
            cn.row_mut(k).copy_from(&(c.row(i) / norm));
            dn[k] = d[i] / norm;
        }
        Ok(Self { c: cn, d: dn })
    }

    /// Takes rows as given, without normalization; used when reloading stored polytopes.
    pub fn from_raw(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self, ModelError> {
        if c.nrows() != d.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "polytope has {} rows but {} offsets",
                c.nrows(),
                d.len()
            )));
        }
        if c.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidSet("non-finite polytope data".into()));
        }
        Ok(Self { c, d })
    }

    /// Merges rows whose normals agree within `tol` (max-norm), keeping the tightest offset at
    /// the position of the first occurrence. The set is unchanged up to `tol`.
    pub fn merge_parallel(&self, tol: f64) -> Polytope {
        let mut kept: Vec<usize> = Vec::with_capacity(self.num_rows());
        let mut d = self.d.clone();
        for i in 0..self.num_rows() {
            let twin = kept
                .iter()
                .copied()
                .find(|&j| (self.c.row(i) - self.c.row(j)).amax() <= tol);
            match twin {
                Some(j) => d[j] = d[j].min(d[i]),
                None => kept.push(i),
            }
        }
        Polytope {
            c: DMatrix::from_fn(kept.len(), self.dim(), |r, k| self.c[(kept[r], k)]),
            d: DVector::from_fn(kept.len(), |r, _| d[kept[r]]),
        }
    }

    /// Axis-aligned box `{z : |z_i| <= bound_i}`, rows ordered `+e_1, -e_1, +e_2, -e_2, ...`.
    pub fn symmetric_box(bounds: &[f64]) -> Result<Self, ModelError> {
        let n = bounds.len();
        let mut c = DMatrix::zeros(2 * n, n);
        let mut d = DVector::zeros(2 * n);
        for (i, &b) in bounds.iter().enumerate() {
            c[(2 * i, i)] = 1.0;
            c[(2 * i + 1, i)] = -1.0;
            d[2 * i] = b;
            d[2 * i + 1] = b;
        }
        Self::new(c, d)
    }

    pub fn dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.c.nrows()
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    /// `min_i (d_i - c_i z)`; nonnegative exactly when `z` lies in the polytope.
    pub fn margin(&self, z: &DVector<f64>) -> f64 {
        if self.c.nrows() == 0 {
            return f64::INFINITY;
        }
        (&self.d - &self.c * z).min()
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        self.margin(z) >= -tol
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope, ModelError> {
        if self.dim() != other.dim() {
            return Err(ModelError::DimensionMismatch(
                "intersecting polytopes of different dimension".into(),
            ));
        }
        let mut c = DMatrix::zeros(self.num_rows() + other.num_rows(), self.dim());
        c.rows_mut(0, self.num_rows()).copy_from(&self.c);
        c.rows_mut(self.num_rows(), other.num_rows()).copy_from(&other.c);
        let d = DVector::from_iterator(c.nrows(), self.d.iter().chain(other.d.iter()).copied());
        Ok(Self { c, d })
    }

    /// Maximum of `dir . z` over the rows in `subset`; `None` when unbounded or infeasible.
    fn support(&self, dir: &DVector<f64>, subset: &[usize]) -> Result<Option<f64>, LpError> {
        let n = self.dim();
        let mut p = LpProblem::new(n);
        p.c = -dir.clone();
        p.lower = vec![f64::NEG_INFINITY; n];
        p.a_ub = DMatrix::from_fn(subset.len(), n, |i, j| self.c[(subset[i], j)]);
        p.b_ub = DVector::from_fn(subset.len(), |i, _| self.d[subset[i]]);
        let out = solve_lp(&p)?;
        Ok(match out.status {
            LpStatus::Optimal => Some(-out.objective),
            _ => None,
        })
    }

    /// Removes rows that cannot become active: row `i` is dropped when maximizing its normal over
    /// the remaining kept rows stays below `d_i + tol`. A negative `tol` keeps marginal rows.
    pub fn remove_redundant(&self, tol: f64) -> Result<Polytope, LpError> {
        let r = self.num_rows();
        let mut kept: Vec<bool> = vec![true; r];
        for i in 0..r {
            let others: Vec<usize> = (0..r).filter(|&k| k != i && kept[k]).collect();
            let dir = self.c.row(i).transpose();
            if let Some(v) = self.support(&dir, &others)? {
                if v <= self.d[i] + tol {
                    kept[i] = false;
                }
            }
        }
        let idx: Vec<usize> = (0..r).filter(|&k| kept[k]).collect();
        Ok(self.select(&idx))
    }

    /// True when row `i` is implied by `other` (maximum of the row over `other` is at most
    /// `d_i + tol`).
    pub fn row_implied_by(&self, i: usize, other: &Polytope, tol: f64) -> Result<bool, LpError> {
        let all: Vec<usize> = (0..other.num_rows()).collect();
        let dir = self.c.row(i).transpose();
        Ok(matches!(other.support(&dir, &all)?, Some(v) if v <= self.d[i] + tol))
    }

    pub fn select(&self, rows: &[usize]) -> Polytope {
        Polytope {
            c: DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.c[(rows[i], j)]),
            d: DVector::from_fn(rows.len(), |i, _| self.d[rows[i]]),
        }
    }

    /// Largest inscribed ball `(center, radius)`. The radius is negative for empty sets and is
    /// capped at a large constant for unbounded ones.
    pub fn chebyshev_ball(&self) -> Result<(DVector<f64>, f64), LpError> {
        let n = self.dim();
        let r = self.num_rows();
        if r == 0 {
            return Ok((DVector::zeros(n), RADIUS_CAP));
        }
        let mut p = LpProblem::new(n + 1);
        p.c[n] = -1.0;
        p.lower = vec![f64::NEG_INFINITY; n + 1];
        p.upper[n] = RADIUS_CAP;
        let mut a = DMatrix::zeros(r, n + 1);
        a.view_mut((0, 0), (r, n)).copy_from(&self.c);
        a.column_mut(n).fill(1.0);
        p.a_ub = a;
        p.b_ub = self.d.clone();
        let out = solve_lp(&p)?;
        match out.status {
            LpStatus::Optimal => Ok((DVector::from_column_slice(&out.x[..n]), out.x[n])),
            _ => Ok((DVector::zeros(n), f64::NEG_INFINITY)),
        }
    }

    /// Per-coordinate bounds; `None` when the set is unbounded or empty.
    pub fn bounding_box(&self) -> Result<Option<Bounds>, LpError> {
        let n = self.dim();
        let all: Vec<usize> = (0..self.num_rows()).collect();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            match (self.support(&e, &all)?, self.support(&(-&e), &all)?) {
                (Some(up), Some(down)) => {
                    hi[i] = up;
                    lo[i] = -down;
                }
                _ => return Ok(None),
            }
        }
        Ok(Some((lo, hi)))
    }

    /// Image constraint `{z : C M z <= d}` for a linear map `M`.
    pub fn preimage(&self, m: &DMatrix<f64>) -> Result<Polytope, ModelError> {
        Polytope::new(&self.c * m, self.d.clone())
    }

    /// Checks the assumptions placed on input and state constraint sets: bounded,
    /// full-dimensional, origin strictly inside.
    pub fn validate_constraint_set(&self, name: &str) -> Result<(), ModelError> {
        if self.d.iter().any(|&v| v <= 0.0) {
            return Err(ModelError::InvalidSet(format!(
                "{name}: origin is not strictly interior"
            )));
        }
        if self.bounding_box()?.is_none() {
            return Err(ModelError::InvalidSet(format!("{name}: set is unbounded")));
        }
        let (_, radius) = self.chebyshev_ball()?;
        if radius <= 1e-9 {
            return Err(ModelError::InvalidSet(format!("{name}: set is not full-dimensional")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_rows_merge_to_tightest() {
        let p = Polytope::new(
            DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]),
            DVector::from_vec(vec![3.0, 4.0, 1.0]),
        )
        .unwrap()
        .merge_parallel(1e-9);
        assert_eq!(p.num_rows(), 2);
        assert_eq!(p.d()[0], 2.0);
    }

    #[test]
    fn rows_are_normalized() {
        let p = Polytope::new(
            DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, -2.0]),
            DVector::from_vec(vec![10.0, 4.0]),
        )
        .unwrap();
        for i in 0..p.num_rows() {
            assert!((p.c().row(i).norm() - 1.0).abs() < 1e-15);
        }
        assert!((p.d()[0] - 2.0).abs() < 1e-15);
        assert!((p.d()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let p = Polytope::new(
            DMatrix::from_row_slice(5, 1, &[1.0, -1.0, 1.0, 2.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0, 3.0, 2.0, 1.0]),
        )
        .unwrap();
        let r = p.remove_redundant(1e-9).unwrap();
        assert_eq!(r.num_rows(), 2);
        let (_, radius) = r.chebyshev_ball().unwrap();
        assert!((radius - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_width_slab_has_no_interior() {
        let p = Polytope::new(
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]),
        )
        .unwrap();
        let (_, radius) = p.chebyshev_ball().unwrap();
        assert!(radius.abs() < 1e-9);
    }

    #[test]
    fn chebyshev_of_box() {
        let p = Polytope::symmetric_box(&[25.0, 5.0]).unwrap();
        let (c, r) = p.chebyshev_ball().unwrap();
        assert!((r - 5.0).abs() < 1e-9);
        assert!(p.contains(&c, 0.0));
        let (lo, hi) = p.bounding_box().unwrap().unwrap();
        assert!((hi[0] - 25.0).abs() < 1e-9 && (lo[1] + 5.0).abs() < 1e-9);
    }

    #[test]
    fn constraint_set_validation() {
        assert!(Polytope::symmetric_box(&[1.0])
            .unwrap()
            .validate_constraint_set("U")
            .is_ok());
        let half = Polytope::new(DMatrix::from_row_slice(1, 1, &[1.0]), DVector::from_vec(vec![1.0])).unwrap();
        assert!(half.validate_constraint_set("U").is_err());
        let off = Polytope::new(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![2.0, -1.0]),
        )
        .unwrap();
        assert!(off.validate_constraint_set("U").is_err());
    }

    #[test]
    fn infeasible_constant_row_is_an_error() {
        let r = Polytope::new(DMatrix::zeros(1, 2), DVector::from_vec(vec![-1.0]));
        assert!(matches!(r, Err(ModelError::EmptySet)));
    }
}
