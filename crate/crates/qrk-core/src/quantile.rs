//! The q-quantile of a residual multiset and the threshold-set construction.
//!
//! The quantile is the k-th smallest element with k = floor(q * |S|), which
//! matches the defining count condition |{r in S : r <= s}| = floor(q|S|)
//! whenever values are distinct and stays well-defined under ties.

use crate::error::{Error, Result};
use crate::linalg::IndexSet;

/// Quantile parameter q in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSpec {
    q: f64,
}

impl QuantileSpec {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidSpec(format!("q must lie in (0,1), got {q}")));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// 1-based order-statistic index floor(q * len); zero means the quantile
    /// is undefined for this sample size.
    pub fn index(&self, len: usize) -> usize {
        (self.q * len as f64).floor() as usize
    }
}

/// k-th smallest element of `values` with k = floor(q * |values|).
///
/// A singleton sample returns its lone element for any q (floor(q) would be
/// zero for every valid q, yet the only defensible answer exists); larger
/// samples with floor(q * |values|) = 0 are an error.
///
/// Selection runs in expected linear time; a recursion-depth guard falls
/// back to sorting the remaining range so the worst case is O(n log n).
pub fn q_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let spec = QuantileSpec::new(q)?;
    if values.len() == 1 {
        return Ok(values[0]);
    }
    let k = spec.index(values.len());
    if k == 0 {
        return Err(Error::QuantileIndexZero { q, len: values.len() });
    }
    let mut scratch = values.to_vec();
    let depth_limit = 2 * usize::BITS - scratch.len().leading_zeros();
    Ok(select_kth(&mut scratch, k - 1, depth_limit as usize))
}

// Quickselect with median-of-three pivots; sorts the residual range once the
// depth budget is exhausted.
fn select_kth(v: &mut [f64], k: usize, depth: usize) -> f64 {
    let (mut lo, mut hi) = (0usize, v.len());
    let mut budget = depth;
    loop {
        let len = hi - lo;
        if len <= 8 {
            v[lo..hi].sort_by(|a, b| a.partial_cmp(b).unwrap());
            return v[k];
        }
        if budget == 0 {
            v[lo..hi].sort_by(|a, b| a.partial_cmp(b).unwrap());
            return v[k];
        }
        budget -= 1;

        let mid = lo + len / 2;
        let pivot = median3(v[lo], v[mid], v[hi - 1]);
        // Three-way partition around the pivot value.
        let (mut lt, mut gt) = (lo, hi);
        let mut i = lo;
        while i < gt {
            if v[i] < pivot {
                v.swap(i, lt);
                lt += 1;
                i += 1;
            } else if v[i] > pivot {
                gt -= 1;
                v.swap(i, gt);
            } else {
                i += 1;
            }
        }
        if k < lt {
            hi = lt;
        } else if k < gt {
            return pivot;
        } else {
            lo = gt;
        }
    }
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    if (a <= b) == (b <= c) {
        b
    } else if (b <= a) == (a <= c) {
        a
    } else {
        c
    }
}

/// Threshold comparison used when building the accepted set B_k.
///
/// `Strict` is the literal `< gamma` of the screening rule; `Inclusive`
/// (`<= gamma`, the default) guarantees the accepted set is nonempty and
/// keeps the cardinality bound |B_k| >= floor(q|tau|).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    Strict,
    #[default]
    Inclusive,
}

/// Indices of `tau` whose residual magnitude passes the threshold.
/// `magnitudes[j]` must correspond to the j-th index of `tau`.
pub fn threshold_set(
    tau: &IndexSet,
    magnitudes: &[f64],
    gamma: f64,
    mode: ThresholdMode,
) -> Result<IndexSet> {
    if magnitudes.len() != tau.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} magnitudes for {} indices",
            magnitudes.len(),
            tau.len()
        )));
    }
    if !gamma.is_finite() {
        return Err(Error::InvalidSpec(format!("gamma must be finite, got {gamma}")));
    }
    let keep: Vec<usize> = tau
        .iter()
        .zip(magnitudes)
        .filter(|(_, &mag)| match mode {
            ThresholdMode::Strict => mag < gamma,
            ThresholdMode::Inclusive => mag <= gamma,
        })
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyAcceptedSet);
    }
    // tau is sorted, so the filtered indices are too.
    Ok(IndexSet::new(keep, usize::MAX)?)
}
