//! Robust slope estimators.
//!
//! Theil-Sen is the median of all pairwise slopes
//! `(y_j - y_i) / (x_j - x_i)`; the repeated median nests a per-point median
//! inside an across-point median and tolerates up to half the points being
//! arbitrary. Pairs with equal x are skipped: their slope is undefined, and
//! tied ordinal ratings make them common.

use serde::Serialize;

use crate::concordance::validate_paired;
use crate::error::{Error, Result};
use crate::util::median;

/// Which estimator produced a [`SlopeEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMethod {
    TheilSen,
    RepeatedMedian,
}

/// A robust slope with bookkeeping on how many pairs carried it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub method: SlopeMethod,
    pub n: usize,
    /// Pairs with distinct x that entered the estimate.
    pub n_pairs_used: usize,
}

/// Median of all pairwise slopes; even counts average the middle two.
pub fn theil_sen(x: &[f64], y: &[f64]) -> Result<SlopeEstimate> {
    validate_paired(x, y, 2)?;
    let n = x.len();
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    let slope = median(&slopes).ok_or(Error::AllTied { what: "x" })?;
    Ok(SlopeEstimate {
        slope,
        method: SlopeMethod::TheilSen,
        n,
        n_pairs_used: slopes.len(),
    })
}

/// Siegel's repeated median: per-point median of slopes to every partner,
/// then the median across points.
///
/// Every point needs at least one partner with distinct x; an isolated point
/// has no defined inner median.
pub fn repeated_median(x: &[f64], y: &[f64]) -> Result<SlopeEstimate> {
    validate_paired(x, y, 2)?;
    let n = x.len();
    let mut inner_medians = Vec::with_capacity(n);
    let mut pairs_used = 0usize;
    for i in 0..n {
        let mut slopes = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j != i && x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
        pairs_used += slopes.len();
        let m = median(&slopes).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "point {i} shares its x with every other point; no slope defined"
            ))
        })?;
        inner_medians.push(m);
    }
    let slope = median(&inner_medians).expect("n >= 2 inner medians");
    Ok(SlopeEstimate {
        slope,
        method: SlopeMethod::RepeatedMedian,
        n,
        // Ordered pairs counted once per endpoint; halve for the pair count.
        n_pairs_used: pairs_used / 2,
    })
}
