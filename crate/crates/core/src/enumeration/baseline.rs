use std::collections::BTreeSet;

use log::debug;

use super::count::{binomials, count_avoiding};
use super::{
    classify, evaluate, has_full_row_rank, next_layer, ActiveSet, Counters, EnumerationError, PrunedStore, Schedule,
    Verdict, DEGENERACY_TOL,
};
use crate::condense::CondensedQp;
use crate::regions::is_full_dimensional;

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub horizon: usize,
    /// Optimal active sets with full row rank defining full-dimensional regions.
    pub explicit: BTreeSet<ActiveSet>,
    pub counters: Counters,
    /// Minimal infeasible sets found.
    pub pruned: Vec<ActiveSet>,
}

enum Outcome {
    RankDeficient,
    Tested { verdict: Verdict, keep: bool },
}

/// Scans every active set with at most `N m` elements by increasing cardinality, skipping
/// supersets of infeasible sets and sets whose `G_A` lacks full row rank.
///
/// Supersets of rank-deficient sets are rank-deficient as well, so only sets whose subsets all
/// passed are materialized. The remaining rank tests are counted exactly without listing the
/// sets.
pub fn alg1_baseline(qp: &CondensedQp, schedule: Schedule) -> Result<BaselineResult, EnumerationError> {
    let q = qp.q();
    let max_card = qp.nu().min(q);
    let binom = binomials(q);
    let total: u64 = (0..=max_card).fold(0u64, |acc, k| acc.saturating_add(binom[q][k]));

    let mut counters = Counters {
        candidates_generated: total,
        pruning_tests: total,
        ..Counters::default()
    };
    let mut explicit = BTreeSet::new();
    let mut pruned = PrunedStore::new();
    let mut good: Vec<ActiveSet> = Vec::new();

    for card in 0..=max_card {
        let layer = if card == 0 {
            vec![ActiveSet::empty()]
        } else {
            next_layer(&good, q as u32)
        };
        if layer.is_empty() {
            break;
        }
        let outcomes = evaluate(schedule, &layer, |a| -> Result<Outcome, EnumerationError> {
            if !has_full_row_rank(qp, a) {
                return Ok(Outcome::RankDeficient);
            }
            let verdict = classify(qp, a)?;
            let keep = match verdict {
                Verdict::Optimal { t } if t > DEGENERACY_TOL => true,
                Verdict::Optimal { .. } => is_full_dimensional(qp, a)?,
                _ => false,
            };
            Ok(Outcome::Tested { verdict, keep })
        });
        good = Vec::with_capacity(layer.len());
        let mut tested = 0usize;
        for (a, outcome) in layer.into_iter().zip(outcomes) {
            match outcome? {
                Outcome::RankDeficient => {}
                Outcome::Tested { verdict, keep } => {
                    tested += 1;
                    let (o, f) = verdict.lp_cost();
                    counters.optimality_lps += o;
                    counters.feasibility_lps += f;
                    if keep {
                        explicit.insert(a.clone());
                    }
                    if verdict == Verdict::Infeasible {
                        pruned.insert(a);
                    } else {
                        good.push(a);
                    }
                }
            }
        }
        debug!(
            "baseline N={} |A|={card}: {tested} tested, {} pruned so far",
            qp.horizon(),
            pruned.len()
        );
    }

    let pruned = pruned.into_sets();
    let free = count_avoiding(q, max_card, &pruned);
    let survivors = free.iter().sum::<u64>() + pruned.len() as u64;
    counters.rank_tests = survivors;
    counters.skipped = total - survivors;
    Ok(BaselineResult {
        horizon: qp.horizon(),
        explicit,
        counters,
        pruned,
    })
}
