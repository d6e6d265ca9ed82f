//! Exact counting of the sets that avoid a family of forbidden subsets.
//!
//! The baseline enumeration rank-tests every candidate that survives the pruning check. Those
//! survivors form a downward-closed family with the pruned sets as minimal non-members, and their
//! number grows like a binomial coefficient in the constraint count. They are counted here by a
//! memoized scan over the ground set instead of being listed.

use std::collections::HashMap;

use super::ActiveSet;

/// `binom[n][k]` for `n <= max_n`, saturating.
pub(crate) fn binomials(max_n: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; max_n + 1]; max_n + 1];
    for n in 0..=max_n {
        t[n][0] = 1;
        for k in 1..=n {
            t[n][k] = t[n - 1][k - 1].saturating_add(if k < n { t[n - 1][k] } else { 0 });
        }
    }
    t
}

/// Number of subsets of `{1..=ground}` of each size `0..=max_size` that contain none of the sets
/// in `forbidden` as a subset.
pub fn count_avoiding(ground: usize, max_size: usize, forbidden: &[ActiveSet]) -> Vec<u64> {
    let binom = binomials(ground);
    // 0-based element lists; an empty forbidden set excludes everything
    if forbidden.iter().any(|f| f.is_empty()) {
        return vec![0; max_size + 1];
    }
    let sets: Vec<Vec<u32>> = forbidden
        .iter()
        .map(|f| f.indices().iter().map(|&i| i - 1).collect())
        .collect();
    let mut starts: Vec<Vec<Vec<u32>>> = vec![Vec::new(); ground];
    for s in &sets {
        if (s[s.len() - 1] as usize) < ground {
            starts[s[0] as usize].push(s.clone());
        }
    }
    // last position at which some forbidden set starts
    let last_start = starts.iter().rposition(|v| !v.is_empty());
    let mut counter = Counter {
        ground,
        max_size,
        starts,
        last_start,
        binom,
        memo: HashMap::new(),
    };
    counter.count(0, Vec::new())
}

struct Counter {
    ground: usize,
    max_size: usize,
    starts: Vec<Vec<Vec<u32>>>,
    last_start: Option<usize>,
    binom: Vec<Vec<u64>>,
    memo: HashMap<(usize, Vec<Vec<u32>>), Vec<u64>>,
}

/// Keeps only inclusion-minimal remainders, sorted; a superset remainder can never complete
/// before its subset does.
fn canonical(mut parts: Vec<Vec<u32>>) -> Vec<Vec<u32>> {
    parts.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    parts.dedup();
    let mut out: Vec<Vec<u32>> = Vec::with_capacity(parts.len());
    for p in parts {
        if !out.iter().any(|q| super::active_set::is_sorted_subset(q, &p)) {
            out.push(p);
        }
    }
    out.sort();
    out
}

impl Counter {
    /// Completions from position `i` on; `alive` holds the unmatched remainders of forbidden sets
    /// whose earlier elements were all chosen.
    fn count(&mut self, i: usize, alive: Vec<Vec<u32>>) -> Vec<u64> {
        let k = self.max_size;
        if alive.is_empty() && self.last_start.is_none_or(|ls| ls < i) {
            let free = self.ground - i;
            return (0..=k)
                .map(|j| if j <= free { self.binom[free][j] } else { 0 })
                .collect();
        }
        if i == self.ground {
            let mut v = vec![0; k + 1];
            v[0] = 1;
            return v;
        }
        let key = (i, alive);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let alive = key.1.clone();
        let e = i as u32;

        // skip element i: remainders that need it die
        let excluded: Vec<Vec<u32>> = alive.iter().filter(|r| r[0] != e).cloned().collect();
        let mut result = self.count(i + 1, canonical(excluded));

        // take element i
        let mut included: Vec<Vec<u32>> = Vec::with_capacity(alive.len() + self.starts[i].len());
        let mut blocked = false;
        for r in alive.iter().chain(self.starts[i].iter()) {
            if r[0] == e {
                if r.len() == 1 {
                    blocked = true;
                    break;
                }
                included.push(r[1..].to_vec());
            } else {
                included.push(r.clone());
            }
        }
        if !blocked {
            let sub = self.count(i + 1, canonical(included));
            for j in 1..=k {
                result[j] = result[j].saturating_add(sub[j - 1]);
            }
        }
        self.memo.insert(key, result.clone());
        result
    }
}
