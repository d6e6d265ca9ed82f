//! Combinatorial search for optimal active sets.
//!
//! Two drivers are provided: [`alg1_baseline`] scans all candidates of bounded cardinality for a
//! fixed horizon, while [`alg4_dp`] builds the optimal active sets horizon by horizon, starting
//! from [`alg3_init`] and extending with [`alg2_extend`], and stops early once the solution no
//! longer depends on the horizon.
//!
//! Candidates are processed in cardinality layers. Sets found infeasible in one layer prune
//! candidates of later layers only, so the outcome and all counters are independent of whether a
//! layer is evaluated serially or in parallel.

mod active_set;
mod baseline;
pub mod count;
mod counters;
mod dp;

pub use active_set::ActiveSet;
pub use baseline::{alg1_baseline, BaselineResult};
pub use counters::Counters;
pub use dp::{
    alg2_extend, alg3_init, alg4_dp, explicit_filter, extend_candidates, is_finitely_determined, DpResult,
    HorizonStats, SolutionFamily,
};

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::condense::{CondenseError, CondensedQp};
use crate::linalg::{rank, select_rows, RANK_TOL};
use crate::lp::{feasibility_certificate, optimality_certificate, LpError};
use crate::regions::RegionError;

/// Optimal `t` at or below this value marks a degenerate certificate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EnumerationError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Condense(#[from] CondenseError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("family for horizon {family} cannot be extended with a QP of horizon {qp}")]
    HorizonMismatch { family: usize, qp: usize },
}

/// How candidates within one cardinality layer are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    #[default]
    Serial,
    Parallel,
}

/// Outcome of the certificate programs for one candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict {
    Optimal {
        t: f64,
    },
    /// Not optimal, but the feasibility program has a solution.
    Feasible,
    Infeasible,
}

impl Verdict {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Verdict::Optimal { .. })
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Verdict::Optimal { t } if *t <= DEGENERACY_TOL)
    }

    /// LPs spent: (optimality, feasibility).
    fn lp_cost(&self) -> (u64, u64) {
        match self {
            Verdict::Optimal { .. } => (1, 0),
            _ => (1, 1),
        }
    }
}

/// Optimality test, followed by the feasibility test when the first fails.
pub fn classify(qp: &CondensedQp, aset: &ActiveSet) -> Result<Verdict, LpError> {
    if let Some(t) = optimality_certificate(qp, aset)? {
        return Ok(Verdict::Optimal { t });
    }
    Ok(match feasibility_certificate(qp, aset)? {
        Some(_) => Verdict::Feasible,
        None => Verdict::Infeasible,
    })
}

/// `rowrank(G_A) == |A|`.
pub fn has_full_row_rank(qp: &CondensedQp, aset: &ActiveSet) -> bool {
    if aset.is_empty() {
        return true;
    }
    if aset.len() > qp.nu() {
        return false;
    }
    rank(&select_rows(&qp.g, &aset.rows()), RANK_TOL) == aset.len()
}

/// Antichain of known infeasible active sets.
#[derive(Clone, Debug, Default)]
pub struct PrunedStore {
    sets: Vec<ActiveSet>,
}

impl PrunedStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// True when some stored set is contained in `candidate`.
    pub fn covers(&self, candidate: &ActiveSet) -> bool {
        self.sets.iter().any(|p| p.is_subset_of(candidate))
    }

    /// Inserts `set` unless it is already covered; supersets of `set` are evicted.
    pub fn insert(&mut self, set: ActiveSet) {
        if self.covers(&set) {
            return;
        }
        self.sets.retain(|p| !set.is_subset_of(p));
        self.sets.push(set);
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[ActiveSet] {
        &self.sets
    }

    pub fn into_sets(mut self) -> Vec<ActiveSet> {
        self.sets.sort();
        self.sets
    }
}

/// Evaluates `f` on every item, in parallel if requested, keeping input order.
fn evaluate<T, R, F>(schedule: Schedule, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match schedule {
        Schedule::Serial => items.iter().map(f).collect(),
        Schedule::Parallel => items.par_iter().map(f).collect(),
    }
}

/// Next layer of a downward-closed family: all `(k+1)`-sets over `{1..=ground}` whose
/// `k`-subsets all belong to `layer` (every set in `layer` has size `k`).
fn next_layer(layer: &[ActiveSet], ground: u32) -> Vec<ActiveSet> {
    if layer.is_empty() {
        return Vec::new();
    }
    if layer[0].is_empty() {
        return (1..=ground).map(|i| ActiveSet::from_sorted(vec![i])).collect();
    }
    let mut sorted: Vec<&ActiveSet> = layer.iter().collect();
    sorted.sort();
    let members: HashSet<&[u32]> = layer.iter().map(|s| s.indices()).collect();
    let k = sorted[0].len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let prefix = &sorted[start].indices()[..k - 1];
        let mut end = start + 1;
        while end < sorted.len() && &sorted[end].indices()[..k - 1] == prefix {
            end += 1;
        }
        for a in start..end {
            for b in a + 1..end {
                let mut cand = sorted[a].indices().to_vec();
                cand.push(sorted[b].indices()[k - 1]);
                let mut probe = Vec::with_capacity(k);
                let all_present = (0..k - 1).all(|skip| {
                    probe.clear();
                    probe.extend(cand.iter().enumerate().filter(|&(p, _)| p != skip).map(|(_, &v)| v));
                    members.contains(probe.as_slice())
                });
                if all_present {
                    out.push(ActiveSet::from_sorted(cand));
                }
            }
        }
        start = end;
    }
    out
}
