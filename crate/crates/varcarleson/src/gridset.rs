//! Exact set arithmetic on sample-index runs.
//!
//! A `GridSet` is a union of half-open sample-index runs `[a, b)` over a grid
//! of `n` samples. Each sample index `k` owns the cell
//! `(x_k - dx/2, x_k + dx/2)`, so run measures are exact integer multiples of
//! the spacing and disjointness checks are integer comparisons. Stopping-time
//! certificates are stated in this arithmetic.

use serde::{Deserialize, Serialize};

use crate::signal::Interval;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GridSet {
    /// Sorted, disjoint, non-adjacent half-open runs.
    runs: Vec<(usize, usize)>,
}

impl GridSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(n: usize) -> Self {
        if n == 0 {
            Self::empty()
        } else {
            Self { runs: vec![(0, n)] }
        }
    }

    pub fn from_run(a: usize, b: usize) -> Self {
        if a < b {
            Self { runs: vec![(a, b)] }
        } else {
            Self::empty()
        }
    }

    /// Build from a per-sample predicate.
    pub fn from_pred(n: usize, pred: impl Fn(usize) -> bool) -> Self {
        let mut runs = Vec::new();
        let mut open: Option<usize> = None;
        for k in 0..n {
            match (pred(k), open) {
                (true, None) => open = Some(k),
                (false, Some(a)) => {
                    runs.push((a, k));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(a) = open {
            runs.push((a, n));
        }
        Self { runs }
    }

    fn normalize(mut raw: Vec<(usize, usize)>) -> Self {
        raw.retain(|&(a, b)| a < b);
        raw.sort_unstable();
        let mut runs: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match runs.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => runs.push((a, b)),
            }
        }
        Self { runs }
    }

    pub fn runs(&self) -> &[(usize, usize)] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of samples in the set.
    pub fn count(&self) -> usize {
        self.runs.iter().map(|&(a, b)| b - a).sum()
    }

    /// Total cell measure, `count * spacing`.
    pub fn measure(&self, spacing: f64) -> f64 {
        self.count() as f64 * spacing
    }

    pub fn contains(&self, k: usize) -> bool {
        self.runs.iter().any(|&(a, b)| a <= k && k < b)
    }

    pub fn union(&self, other: &GridSet) -> GridSet {
        let mut raw = self.runs.clone();
        raw.extend_from_slice(&other.runs);
        Self::normalize(raw)
    }

    pub fn intersect(&self, other: &GridSet) -> GridSet {
        let mut raw = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.runs.len() && j < other.runs.len() {
            let (a1, b1) = self.runs[i];
            let (a2, b2) = other.runs[j];
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if lo < hi {
                raw.push((lo, hi));
            }
            if b1 <= b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalize(raw)
    }

    /// Samples of `[0, n)` not in the set.
    pub fn complement(&self, n: usize) -> GridSet {
        let mut raw = Vec::new();
        let mut cursor = 0;
        for &(a, b) in &self.runs {
            if cursor < a.min(n) {
                raw.push((cursor, a.min(n)));
            }
            cursor = cursor.max(b);
        }
        if cursor < n {
            raw.push((cursor, n));
        }
        Self { runs: raw }
    }

    pub fn minus(&self, other: &GridSet, n: usize) -> GridSet {
        self.intersect(&other.complement(n))
    }

    pub fn is_disjoint_from(&self, other: &GridSet) -> bool {
        self.intersect(other).is_empty()
    }

    /// Maximal runs as real intervals with endpoints on cell boundaries.
    pub fn to_intervals(&self, origin: f64, spacing: f64) -> Vec<Interval> {
        self.runs
            .iter()
            .map(|&(a, b)| {
                Interval::from_endpoints(
                    origin + (a as f64 - 0.5) * spacing,
                    origin + (b as f64 - 0.5) * spacing,
                )
            })
            .collect()
    }

    pub fn iter_samples(&self) -> impl Iterator<Item = usize> + '_ {
        self.runs.iter().flat_map(|&(a, b)| a..b)
    }
}
