use std::collections::BTreeSet;

use log::{debug, info};

use super::{
    classify, evaluate, has_full_row_rank, next_layer, ActiveSet, Counters, EnumerationError, PrunedStore, Schedule,
    Verdict,
};
use crate::condense::{condense, CondensedQp};
use crate::model::Ocp;
use crate::regions::is_full_dimensional;

/// Optimal active sets for one horizon.
#[derive(Clone, Debug)]
pub struct SolutionFamily {
    pub horizon: usize,
    pub q_ux: usize,
    /// All optimal active sets.
    pub sets: BTreeSet<ActiveSet>,
    /// Members whose optimality certificate has `t = 0`.
    pub degen: BTreeSet<ActiveSet>,
    /// Minimal infeasible candidates met while building this family.
    pub pruned: Vec<ActiveSet>,
    /// Tallies accumulated since horizon one.
    pub counters: Counters,
    /// Tallies of the step that produced this family.
    pub step: Counters,
    /// Sets carried over unchanged from the previous horizon.
    pub copied: BTreeSet<ActiveSet>,
}

impl SolutionFamily {
    /// Members with an active constraint in one of the last two stages or the terminal block;
    /// only these are extended when the horizon grows.
    pub fn extendable(&self) -> impl Iterator<Item = &ActiveSet> {
        let limit = (self.horizon - 1) * self.q_ux;
        self.sets.iter().filter(move |a| !a.within(limit))
    }
}

/// True when no member touches stages `N-1`, `N` or the terminal block; the solution is then the
/// same for every longer horizon.
pub fn is_finitely_determined(family: &SolutionFamily) -> bool {
    family.extendable().next().is_none()
}

/// All subsets of `{1..=q_ux}` grouped by cardinality, lexicographic within a group.
fn stage_subsets(q_ux: usize) -> Vec<Vec<ActiveSet>> {
    let mut groups = vec![vec![ActiveSet::empty()]];
    for _ in 0..q_ux {
        let next = next_layer(groups.last().expect("nonempty"), q_ux as u32);
        groups.push(next);
    }
    groups
}

/// `A_j ∪ (a_l ⊕ {q_ux})` for every `A_j ⊆ {1..=q_ux}`, by increasing `|A_j|` and
/// lexicographically within a cardinality.
pub fn extend_candidates(a_l: &ActiveSet, q_ux: usize) -> Vec<ActiveSet> {
    let shifted = a_l.shift(q_ux as u32);
    stage_subsets(q_ux)
        .into_iter()
        .flatten()
        .map(|aj| aj.union(&shifted))
        .collect()
}

/// Optimal active sets for horizon one: all subsets of the stage-0 and terminal rows by
/// increasing cardinality, with superset pruning and no rank filter.
pub fn alg3_init(qp: &CondensedQp, schedule: Schedule) -> Result<SolutionFamily, EnumerationError> {
    if qp.horizon() != 1 {
        return Err(EnumerationError::HorizonMismatch {
            family: 0,
            qp: qp.horizon(),
        });
    }
    let ground = qp.q();
    let total = if ground < 64 { 1u64 << ground } else { u64::MAX };
    let mut counters = Counters {
        candidates_generated: total,
        pruning_tests: total,
        ..Counters::default()
    };
    let mut sets = BTreeSet::new();
    let mut degen = BTreeSet::new();
    let mut pruned = PrunedStore::new();
    let mut survivors: Vec<ActiveSet> = Vec::new();
    let mut tested = 0u64;
    for card in 0..=ground {
        let layer = if card == 0 {
            vec![ActiveSet::empty()]
        } else {
            next_layer(&survivors, ground as u32)
        };
        if layer.is_empty() {
            break;
        }
        let verdicts = evaluate(schedule, &layer, |a| classify(qp, a));
        survivors = Vec::with_capacity(layer.len());
        for (a, v) in layer.into_iter().zip(verdicts) {
            let v = v?;
            tested += 1;
            let (o, f) = v.lp_cost();
            counters.optimality_lps += o;
            counters.feasibility_lps += f;
            match v {
                Verdict::Infeasible => pruned.insert(a),
                Verdict::Optimal { .. } => {
                    if v.is_degenerate() {
                        degen.insert(a.clone());
                    }
                    sets.insert(a.clone());
                    survivors.push(a);
                }
                Verdict::Feasible => survivors.push(a),
            }
        }
    }
    counters.skipped = total - tested;
    debug!(
        "horizon 1: |S|={} |degen|={} pruned={}",
        sets.len(),
        degen.len(),
        pruned.len()
    );
    Ok(SolutionFamily {
        horizon: 1,
        q_ux: qp.q_ux(),
        sets,
        degen,
        pruned: pruned.into_sets(),
        counters,
        step: counters,
        copied: BTreeSet::new(),
    })
}

/// Builds the optimal active sets for horizon `N + 1` from those for horizon `N`.
///
/// Sets without constraints in the last stage or the terminal block are copied. Sets touching
/// stage `N - 1`, `N` or the terminal block are shifted by one stage and augmented with every
/// subset of the new first stage; the resulting candidates are tested against `qp`.
pub fn alg2_extend(
    family: &SolutionFamily,
    qp: &CondensedQp,
    schedule: Schedule,
) -> Result<SolutionFamily, EnumerationError> {
    let n = family.horizon;
    if qp.horizon() != n + 1 || qp.q_ux() != family.q_ux {
        return Err(EnumerationError::HorizonMismatch {
            family: n,
            qp: qp.horizon(),
        });
    }
    let q_ux = family.q_ux;

    let mut sets = BTreeSet::new();
    let mut degen = BTreeSet::new();
    let mut copied = BTreeSet::new();
    for a in family.sets.iter().filter(|a| a.within(n * q_ux)) {
        sets.insert(a.clone());
        copied.insert(a.clone());
        if family.degen.contains(a) {
            degen.insert(a.clone());
        }
    }

    let shifted: Vec<ActiveSet> = family.extendable().map(|a| a.shift(q_ux as u32)).collect();
    let groups = stage_subsets(q_ux);
    let total = shifted.len() as u64 * (1u64 << q_ux);
    let mut step = Counters {
        candidates_generated: total,
        pruning_tests: total,
        ..Counters::default()
    };
    let mut pruned = PrunedStore::new();
    for group in &groups {
        let mut layer = Vec::with_capacity(group.len() * shifted.len());
        for base in &shifted {
            for aj in group {
                let cand = aj.union(base);
                if pruned.covers(&cand) {
                    step.skipped += 1;
                } else {
                    layer.push(cand);
                }
            }
        }
        let verdicts = evaluate(schedule, &layer, |a| classify(qp, a));
        for (a, v) in layer.into_iter().zip(verdicts) {
            let v = v?;
            let (o, f) = v.lp_cost();
            step.optimality_lps += o;
            step.feasibility_lps += f;
            match v {
                Verdict::Optimal { .. } => {
                    if v.is_degenerate() {
                        degen.insert(a.clone());
                    }
                    sets.insert(a);
                }
                Verdict::Infeasible => pruned.insert(a),
                Verdict::Feasible => {}
            }
        }
    }
    debug!(
        "horizon {}: |S|={} |degen|={} extended from {} sets, {} LPs",
        n + 1,
        sets.len(),
        degen.len(),
        shifted.len(),
        step.optimality_lps + step.feasibility_lps
    );
    Ok(SolutionFamily {
        horizon: n + 1,
        q_ux,
        sets,
        degen,
        pruned: pruned.into_sets(),
        counters: family.counters + step,
        step,
        copied,
    })
}

/// Keeps the members with full row rank, and among degenerate ones only those defining a
/// full-dimensional region. Returns the kept sets and the number of rank tests.
pub fn explicit_filter(
    qp: &CondensedQp,
    family: &SolutionFamily,
) -> Result<(BTreeSet<ActiveSet>, u64), EnumerationError> {
    let mut out = BTreeSet::new();
    for a in &family.sets {
        if !has_full_row_rank(qp, a) {
            continue;
        }
        if !family.degen.contains(a) || is_full_dimensional(qp, a)? {
            out.insert(a.clone());
        }
    }
    Ok((out, family.sets.len() as u64))
}

/// Cost and size of a run that stops at `horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonStats {
    pub horizon: usize,
    /// Counters of a complete run with `N_max = horizon`, including its final rank tests.
    pub counters: Counters,
    pub s_size: usize,
    pub degen_size: usize,
    pub m_size: usize,
    /// The explicit solution `M_N` at this horizon.
    pub m_sets: BTreeSet<ActiveSet>,
}

#[derive(Clone, Debug)]
pub struct DpResult {
    pub n_reached: usize,
    pub finitely_determined: bool,
    pub explicit: BTreeSet<ActiveSet>,
    pub family: SolutionFamily,
    pub qp: CondensedQp,
    pub history: Vec<HorizonStats>,
}

impl DpResult {
    pub fn counters(&self) -> Counters {
        self.history.last().expect("history is never empty").counters
    }
}

/// Builds the explicit solution horizon by horizon up to `n_max`, stopping as soon as the family
/// is horizon-independent.
pub fn alg4_dp(ocp: &Ocp, n_max: usize, schedule: Schedule) -> Result<DpResult, EnumerationError> {
    let n_max = n_max.max(1);
    let mut qp = condense(ocp, 1)?;
    let mut family = alg3_init(&qp, schedule)?;
    let (mut explicit, ranks) = explicit_filter(&qp, &family)?;
    let mut history = vec![stats(&family, &explicit, ranks)];
    while family.horizon < n_max {
        qp = condense(ocp, family.horizon + 1)?;
        family = alg2_extend(&family, &qp, schedule)?;
        let (m, ranks) = explicit_filter(&qp, &family)?;
        explicit = m;
        history.push(stats(&family, &explicit, ranks));
        if is_finitely_determined(&family) {
            break;
        }
    }
    let finitely_determined = is_finitely_determined(&family);
    info!(
        "reached horizon {} (finitely determined: {finitely_determined}), |M|={}",
        family.horizon,
        explicit.len()
    );
    Ok(DpResult {
        n_reached: family.horizon,
        finitely_determined,
        explicit,
        family,
        qp,
        history,
    })
}

fn stats(family: &SolutionFamily, explicit: &BTreeSet<ActiveSet>, rank_tests: u64) -> HorizonStats {
    let mut counters = family.counters;
    counters.rank_tests += rank_tests;
    HorizonStats {
        horizon: family.horizon,
        counters,
        s_size: family.sets.len(),
        degen_size: family.degen.len(),
        m_size: explicit.len(),
        m_sets: explicit.clone(),
    }
}
