use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Operation tallies of an enumeration run.
///
/// Every generated candidate passes through exactly one pruning test; `skipped` counts the
/// candidates discarded there. `rank_tests` counts row-rank evaluations of `G_A`, and the two
/// LP counters count solved certificate programs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub candidates_generated: u64,
    pub pruning_tests: u64,
    pub rank_tests: u64,
    pub optimality_lps: u64,
    pub feasibility_lps: u64,
    pub skipped: u64,
}

impl Add for Counters {
    type Output = Counters;

    fn add(self, o: Counters) -> Counters {
        Counters {
            candidates_generated: self.candidates_generated + o.candidates_generated,
            pruning_tests: self.pruning_tests + o.pruning_tests,
            rank_tests: self.rank_tests + o.rank_tests,
            optimality_lps: self.optimality_lps + o.optimality_lps,
            feasibility_lps: self.feasibility_lps + o.feasibility_lps,
            skipped: self.skipped + o.skipped,
        }
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Counters) {
        *self = *self + o;
    }
}

impl Sub for Counters {
    type Output = Counters;

    fn sub(self, o: Counters) -> Counters {
        Counters {
            candidates_generated: self.candidates_generated - o.candidates_generated,
            pruning_tests: self.pruning_tests - o.pruning_tests,
            rank_tests: self.rank_tests - o.rank_tests,
            optimality_lps: self.optimality_lps - o.optimality_lps,
            feasibility_lps: self.feasibility_lps - o.feasibility_lps,
            skipped: self.skipped - o.skipped,
        }
    }
}

impl Counters {
    /// True when every field of `self` is at least the corresponding field of `earlier`.
    pub fn dominates(&self, earlier: &Counters) -> bool {
        self.candidates_generated >= earlier.candidates_generated
            && self.pruning_tests >= earlier.pruning_tests
            && self.rank_tests >= earlier.rank_tests
            && self.optimality_lps >= earlier.optimality_lps
            && self.feasibility_lps >= earlier.feasibility_lps
            && self.skipped >= earlier.skipped
    }
}
