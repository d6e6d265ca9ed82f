use std::fmt;

use serde::{Deserialize, Serialize};

/// Strictly increasing set of 1-based constraint indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActiveSet(Vec<u32>);

impl ActiveSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Sorts and deduplicates. Index 0 is not a valid constraint and panics.
    pub fn new<I: IntoIterator<Item = u32>>(indices: I) -> Self {
        let mut v: Vec<u32> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        assert!(v.first().is_none_or(|&i| i >= 1), "constraint indices are 1-based");
        Self(v)
    }

    pub fn from_sorted(indices: Vec<u32>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.first().is_none_or(|&i| i >= 1));
        Self(indices)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    /// 0-based row positions, for indexing matrices.
    pub fn rows(&self) -> Vec<usize> {
        self.0.iter().map(|&i| i as usize - 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<u32> {
        self.0.last().copied()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// `A ⊆ {1, ..., limit}`.
    pub fn within(&self, limit: usize) -> bool {
        self.max().is_none_or(|m| m as usize <= limit)
    }

    /// Minkowski sum with `{offset}`.
    pub fn shift(&self, offset: u32) -> Self {
        Self(self.0.iter().map(|&i| i + offset).collect())
    }

    /// Pontryagin difference with `{offset}`; indices not exceeding `offset` are dropped.
    pub fn unshift(&self, offset: u32) -> Self {
        Self(self.0.iter().filter(|&&i| i > offset).map(|&i| i - offset).collect())
    }

    pub fn union(&self, other: &ActiveSet) -> Self {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self(out)
    }

    /// Sorted-merge subset test.
    pub fn is_subset_of(&self, other: &ActiveSet) -> bool {
        is_sorted_subset(&self.0, &other.0)
    }

    /// Elements `<= limit`.
    pub fn restrict(&self, limit: u32) -> Self {
        Self(self.0.iter().copied().filter(|&i| i <= limit).collect())
    }
}

pub(crate) fn is_sorted_subset(small: &[u32], big: &[u32]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut j = 0;
    for &s in small {
        while j < big.len() && big[j] < s {
            j += 1;
        }
        if j == big.len() || big[j] != s {
            return false;
        }
        j += 1;
    }
    true
}

impl fmt::Display for ActiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<u32> for ActiveSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        Self::new(iter)
    }
}
