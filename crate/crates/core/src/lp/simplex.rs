//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems are stated in the general form
//!
//! ```text
//!     minimize     c' x
//!     subject to   A_eq x  = b_eq
//!                  A_ub x <= b_ub
//!                  lower <= x <= upper      (entries may be infinite)
//! ```
//!
//! and converted internally to `min c'y, Ay = b, y >= 0`: finite lower bounds are shifted out,
//! variables without one are split into a nonnegative pair, and finite upper bounds become extra
//! inequality rows. Upper-bounded variables are deliberately not mirrored, since a large bound
//! would then offset every right-hand side and swamp the arithmetic.

use nalgebra::{DMatrix, DVector};

use super::LpError;

/// Primal feasibility tolerance (scaled by `1 + max |b|` for the phase-1 objective).
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Smallest admissible pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-11;

const MAX_PIVOTS: usize = 100_000;

/// A linear program in general form. See the module documentation.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// An empty problem over `n` variables with zero objective and bounds `[0, inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            c: DVector::zeros(n),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_ub: DMatrix::zeros(0, n),
            b_ub: DVector::zeros(0),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let dims_ok = self.a_eq.ncols() == n
            && self.a_ub.ncols() == n
            && self.a_eq.nrows() == self.b_eq.len()
            && self.a_ub.nrows() == self.b_ub.len()
            && self.lower.len() == n
            && self.upper.len() == n;
        if !dims_ok {
            return Err(LpError::Malformed("inconsistent dimensions".into()));
        }
        let finite = self.c.iter().all(|v| v.is_finite())
            && self.a_eq.iter().all(|v| v.is_finite())
            && self.b_eq.iter().all(|v| v.is_finite())
            && self.a_ub.iter().all(|v| v.is_finite())
            && self.b_ub.iter().all(|v| v.is_finite());
        if !finite {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("bad bounds on variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let mut worst = 0.0f64;
        if self.a_eq.nrows() > 0 {
            let r = &self.a_eq * &xv - &self.b_eq;
            worst = worst.max(r.amax());
        }
        if self.a_ub.nrows() > 0 {
            let r = &self.a_ub * &xv - &self.b_ub;
            worst = worst.max(r.max().max(0.0));
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Primal solution; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Number of pivots over both phases.
    pub pivots: usize,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug)]
enum ColumnMap {
    /// x = lower + y
    Shift { col: usize, lower: f64 },
    /// x = y+ - y-
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    active: Vec<bool>,
    num_structural: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        let inv = 1.0 / p;
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let total_rows = self.rows + 2;
        for i in 0..total_rows {
            if i == r {
                continue;
            }
            let row = if i < r {
                &mut before[i * w..(i + 1) * w]
            } else {
                let k = i - r - 1;
                &mut after[k * w..(k + 1) * w]
            };
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for (a, b) in row.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
            row[c] = 0.0;
        }
        // clean tiny negative right-hand sides produced by cancellation
        for i in 0..self.rows {
            let v = &mut self.data[i * w + w - 1];
            if *v < 0.0 && *v > -FEASIBILITY_TOL {
                *v = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Picks the entering column and leaving row for `obj_row`.
    ///
    /// By default the most negative reduced cost enters and a two-pass (Harris) ratio test picks
    /// the largest pivot among the nearly tied rows. With `bland` set, the smallest eligible
    /// column enters and ties leave by smallest basic index, which rules out cycling. Columns
    /// whose pivot candidates are all numerically tiny are skipped. Returns the pivot position,
    /// `Ok(None)` at optimality, `Err(true)` for an unbounded ray and `Err(false)` when only tiny
    /// pivots remain.
    fn choose_pivot(&self, obj_row: usize, col_limit: usize, bland: bool) -> Result<Option<(usize, usize)>, bool> {
        let mut cols: Vec<usize> = (0..col_limit)
            .filter(|&c| self.at(obj_row, c) < -OPTIMALITY_TOL)
            .collect();
        if cols.is_empty() {
            return Ok(None);
        }
        if !bland {
            cols.sort_by(|&a, &b| self.at(obj_row, a).total_cmp(&self.at(obj_row, b)).then(a.cmp(&b)));
        }
        let mut skipped_tiny = false;
        for c in cols {
            let mut tiny = false;
            let mut bound = f64::INFINITY;
            for r in 0..self.rows {
                if !self.active[r] {
                    continue;
                }
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let slack = if bland { 0.0 } else { FEASIBILITY_TOL };
                    bound = bound.min((self.rhs(r).max(0.0) + slack) / a);
                } else if a > 1e-13 {
                    tiny = true;
                }
            }
            if bound.is_infinite() {
                if tiny {
                    skipped_tiny = true;
                    continue;
                }
                return Err(true);
            }
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if !self.active[r] || a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                let eligible = if bland {
                    ratio <= bound * (1.0 + 1e-12) + 1e-300
                } else {
                    ratio <= bound
                };
                if !eligible {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((br, _)) if bland => self.basis[r] < self.basis[br],
                    Some((br, ba)) => a > ba || (a == ba && self.basis[r] < self.basis[br]),
                };
                if better {
                    best = Some((r, a));
                }
            }
            let (r, _) = best.expect("the row attaining the bound is eligible");
            return Ok(Some((r, c)));
        }
        if skipped_tiny {
            Err(false)
        } else {
            Ok(None)
        }
    }
}

/// Degenerate pivots in a row before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

fn track_degeneracy(leaving_rhs: f64, stalled: &mut usize, bland: &mut bool) {
    if leaving_rhs <= FEASIBILITY_TOL {
        *stalled += 1;
        if *stalled >= STALL_LIMIT {
            *bland = true;
        }
    } else {
        *stalled = 0;
    }
}

/// Solves `p` with the two-phase simplex method.
pub fn solve_lp(p: &LpProblem) -> Result<LpOutcome, LpError> {
    p.validate()?;
    let n = p.num_vars();

    // variable substitution
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut upper_rows: Vec<(usize, Option<usize>, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l.is_finite() {
            maps.push(ColumnMap::Shift { col: ncols, lower: l });
            if u.is_finite() {
                upper_rows.push((ncols, None, u - l));
            }
            ncols += 1;
        } else {
            maps.push(ColumnMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            if u.is_finite() {
                upper_rows.push((ncols, Some(ncols + 1), u));
            }
            ncols += 2;
        }
    }
    let num_structural = ncols;

    // rows in the transformed variables: (coefficients, rhs, is_inequality)
    let n_ub = p.a_ub.nrows();
    let n_eq = p.a_eq.nrows();
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::with_capacity(n_ub + n_eq + upper_rows.len());
    let mut transform = |a: &dyn Fn(usize) -> f64, b: f64, ineq: bool| {
        let mut coeffs = vec![0.0; num_structural];
        let mut rhs = b;
        for (j, m) in maps.iter().enumerate() {
            let aj = a(j);
            if aj == 0.0 {
                continue;
            }
            match *m {
                ColumnMap::Shift { col, lower } => {
                    coeffs[col] = aj;
                    rhs -= aj * lower;
                }
                ColumnMap::Split { pos, neg } => {
                    coeffs[pos] = aj;
                    coeffs[neg] = -aj;
                }
            }
        }
        rows.push((coeffs, rhs, ineq));
    };
    for i in 0..n_ub {
        transform(&|j| p.a_ub[(i, j)], p.b_ub[i], true);
    }
    for i in 0..n_eq {
        transform(&|j| p.a_eq[(i, j)], p.b_eq[i], false);
    }
    for &(col, neg, ub) in &upper_rows {
        let mut coeffs = vec![0.0; num_structural];
        coeffs[col] = 1.0;
        if let Some(k) = neg {
            coeffs[k] = -1.0;
        }
        rows.push((coeffs, ub, true));
    }

    // equilibrate: largest coefficient of every row becomes one
    for (coeffs, rhs, _) in rows.iter_mut() {
        let scale = coeffs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale > 0.0 {
            coeffs.iter_mut().for_each(|v| *v /= scale);
            *rhs /= scale;
        }
    }

    let m = rows.len();
    let num_slack = rows.iter().filter(|r| r.2).count();
    let num_artificial = rows.iter().filter(|r| !r.2 || r.1 < 0.0).count();
    let first_slack = num_structural;
    let first_artificial = first_slack + num_slack;
    let total_cols = first_artificial + num_artificial;
    let width = total_cols + 1;

    let mut t = Tableau {
        rows: m,
        width,
        data: vec![0.0; (m + 2) * width],
        basis: vec![usize::MAX; m],
        active: vec![true; m],
        num_structural,
    };
    let obj1 = m;
    let obj2 = m + 1;

    let mut slack = first_slack;
    let mut art = first_artificial;
    for (i, (coeffs, rhs, ineq)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        let base = i * width;
        for (c, &v) in coeffs.iter().enumerate() {
            t.data[base + c] = sign * v;
        }
        t.data[base + width - 1] = sign * rhs;
        let mut needs_artificial = !*ineq;
        if *ineq {
            t.data[base + slack] = sign;
            if sign > 0.0 {
                t.basis[i] = slack;
            } else {
                needs_artificial = true;
            }
            slack += 1;
        }
        if needs_artificial {
            t.data[base + art] = 1.0;
            t.basis[i] = art;
            art += 1;
        }
    }

    // phase-1 objective: sum of artificials, expressed in nonbasic columns
    for i in 0..m {
        if t.basis[i] >= first_artificial {
            for c in 0..width {
                if c < first_artificial || c == width - 1 {
                    let v = t.data[i * width + c];
                    t.data[obj1 * width + c] -= v;
                }
            }
        }
    }
    // phase-2 objective
    let mut cost = vec![0.0; num_structural];
    let mut obj_const = 0.0;
    for (j, mp) in maps.iter().enumerate() {
        let cj = p.c[j];
        match *mp {
            ColumnMap::Shift { col, lower } => {
                cost[col] = cj;
                obj_const += cj * lower;
            }
            ColumnMap::Split { pos, neg } => {
                cost[pos] = cj;
                cost[neg] = -cj;
            }
        }
    }
    for (c, &v) in cost.iter().enumerate() {
        t.data[obj2 * width + c] = v;
    }
    for i in 0..m {
        let b = t.basis[i];
        if b < num_structural && cost[b] != 0.0 {
            let f = cost[b];
            for c in 0..width {
                let v = t.data[i * width + c];
                t.data[obj2 * width + c] -= f * v;
            }
        }
    }

    let mut pivots = 0usize;
    let rhs_scale = 1.0 + rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);

    // phase 1
    if num_artificial > 0 {
        let (mut bland, mut stalled) = (false, 0usize);
        loop {
            match t.choose_pivot(obj1, total_cols, bland) {
                Ok(Some((r, c))) => {
                    track_degeneracy(t.rhs(r), &mut stalled, &mut bland);
                    t.pivot(r, c);
                    pivots += 1;
                    if pivots > MAX_PIVOTS {
                        return Err(LpError::NumericalFailure("pivot limit in phase 1".into()));
                    }
                }
                Ok(None) => break,
                // phase 1 is bounded below by zero
                Err(true) => break,
                Err(false) => return Err(LpError::NumericalFailure("no admissible pivot in phase 1".into())),
            }
        }
        let infeasibility = -t.rhs(obj1);
        if infeasibility < -1e-6 * rhs_scale {
            return Err(LpError::NumericalFailure(format!(
                "negative phase-1 objective {infeasibility:e}"
            )));
        }
        if infeasibility > FEASIBILITY_TOL * rhs_scale {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                pivots,
            });
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            if t.basis[r] < first_artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for c in 0..first_artificial {
                let a = t.at(r, c).abs();
                if a > 1e-9 && best.is_none_or(|(_, v)| a > v) {
                    best = Some((c, a));
                }
            }
            match best {
                Some((c, _)) => {
                    t.pivot(r, c);
                    pivots += 1;
                }
                None => t.active[r] = false,
            }
        }
    }

    // phase 2
    let (mut bland, mut stalled) = (false, 0usize);
    loop {
        match t.choose_pivot(obj2, first_artificial, bland) {
            Ok(Some((r, c))) => {
                track_degeneracy(t.rhs(r), &mut stalled, &mut bland);
                t.pivot(r, c);
                pivots += 1;
                if pivots > MAX_PIVOTS {
                    return Err(LpError::NumericalFailure("pivot limit in phase 2".into()));
                }
            }
            Ok(None) => break,
            Err(true) => {
                return Ok(LpOutcome {
                    status: LpStatus::Unbounded,
                    x: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    pivots,
                })
            }
            Err(false) => return Err(LpError::NumericalFailure("no admissible pivot in phase 2".into())),
        }
    }

    let mut y = vec![0.0; t.num_structural];
    for r in 0..m {
        if t.active[r] && t.basis[r] < t.num_structural {
            y[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            ColumnMap::Shift { col, lower } => lower + y[col],
            ColumnMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let violation = p.max_violation(&x);
    let data_scale = [p.a_eq.amax(), p.a_ub.amax(), p.b_eq.amax(), p.b_ub.amax()]
        .into_iter()
        .chain(x.iter().map(|v| v.abs()))
        .fold(1.0f64, |a, b| a.max(b));
    if violation > 1e-6 * data_scale {
        return Err(LpError::NumericalFailure(format!(
            "solution violates constraints by {violation:e}"
        )));
    }
    let objective = p.c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
    debug_assert!((objective - (obj_const - t.rhs(obj2))).abs() <= 1e-6 * (1.0 + objective.abs()));
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots,
    })
}
