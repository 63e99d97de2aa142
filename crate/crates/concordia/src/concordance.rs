//! Pairwise-order concordance.
//!
//! Two rating sources agree on a pair of units when they order the pair the
//! same way. All pairwise orders of a vector are collected into an
//! antisymmetric sign matrix, and the concordance between two vectors is the
//! cosine of their sign matrices under the Frobenius inner product:
//!
//! `tau = <X, Y>_F / (||X||_F ||Y||_F)`
//!
//! Ties contribute zero entries, so the normalization divides by the non-tied
//! pair counts and the statistic coincides with tau-b. Confidence intervals
//! use the Fieller variance `0.437 / (n - 4)` on the arctanh scale.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::util::normal::inverse_phi;
use crate::util::{mean, quantile};

/// Antisymmetric matrix of pairwise order signs: `entry(i, j) = sign(v[j] - v[i])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    n: usize,
    entries: Vec<i8>,
}

impl SignMatrix {
    /// Build the pairwise-order matrix of a vector. Ties map to zero.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        check_finite(values, "values")?;
        let n = values.len();
        if n < 2 {
            return Err(Error::InsufficientData {
                what: "sign matrix",
                needed: 2,
                got: n,
            });
        }
        let mut entries = vec![0i8; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = sgn(values[j] - values[i]);
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    /// Squared Frobenius norm, i.e. the number of nonzero entries.
    pub fn norm_sq(&self) -> u64 {
        self.entries.iter().filter(|&&e| e != 0).count() as u64
    }
}

/// Concordance of two sign matrices: Frobenius inner product over the product
/// of Frobenius norms.
pub fn tau_from_matrices(x: &SignMatrix, y: &SignMatrix) -> Result<f64> {
    if x.n != y.n {
        return Err(Error::LengthMismatch {
            left: x.n,
            right: y.n,
        });
    }
    let inner: i64 = x
        .entries
        .iter()
        .zip(&y.entries)
        .map(|(&a, &b)| a as i64 * b as i64)
        .sum();
    let nx = x.norm_sq();
    let ny = y.norm_sq();
    if nx == 0 {
        return Err(Error::AllTied { what: "x" });
    }
    if ny == 0 {
        return Err(Error::AllTied { what: "y" });
    }
    Ok(inner as f64 / ((nx as f64) * (ny as f64)).sqrt())
}

/// The same Frobenius form evaluated without materializing the matrices.
///
/// Each unordered pair contributes its sign product once; the norms count
/// non-tied pairs. Integer accumulation keeps the result exact.
pub fn tau_stat(x: &[f64], y: &[f64]) -> Result<f64> {
    validate_paired(x, y, 2)?;
    let n = x.len();
    let mut inner = 0i64;
    let mut nx = 0i64;
    let mut ny = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let sx = sgn(x[j] - x[i]);
            let sy = sgn(y[j] - y[i]);
            inner += sx as i64 * sy as i64;
            nx += (sx != 0) as i64;
            ny += (sy != 0) as i64;
        }
    }
    if nx == 0 {
        return Err(Error::AllTied { what: "x" });
    }
    if ny == 0 {
        return Err(Error::AllTied { what: "y" });
    }
    Ok(inner as f64 / ((nx as f64) * (ny as f64)).sqrt())
}

/// How the interval attached to a [`TauResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Fieller,
}

/// Confidence bounds on the arctanh scale, back-transformed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiBounds {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub method: CiMethod,
    /// True when |tau| = 1 had to be clamped before arctanh.
    pub clamped: bool,
}

/// A concordance estimate with its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tau: f64,
    pub n: usize,
    /// Present when n >= 5; the Fieller variance is undefined below that.
    pub ci: Option<CiBounds>,
}

/// Kendall tau with a 95% Fieller interval.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<TauResult> {
    kendall_tau_at(x, y, 0.95)
}

/// Kendall tau with a Fieller interval at the given two-sided level.
pub fn kendall_tau_at(x: &[f64], y: &[f64], level: f64) -> Result<TauResult> {
    let tau = tau_stat(x, y)?;
    let n = x.len();
    let ci = if n >= 5 {
        Some(fieller_ci(tau, n, level)?)
    } else {
        None
    };
    Ok(TauResult { tau, n, ci })
}

const TAU_CLAMP: f64 = 1.0 - 1e-12;

/// Fieller-corrected interval for a Kendall tau.
///
/// `z = arctanh(tau)`, half-width `z_crit * sqrt(0.437 / (n - 4))`, bounds
/// back-transformed with tanh. Requires `n >= 5`. A perfect |tau| = 1 is
/// clamped to 1 - 1e-12 before the transform and flagged.
pub fn fieller_ci(tau: f64, n: usize, level: f64) -> Result<CiBounds> {
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidLevel(level));
    }
    if tau.abs() > 1.0 || !tau.is_finite() {
        return Err(Error::TauOutOfRange(tau));
    }
    if n <= 4 {
        return Err(Error::InsufficientData {
            what: "fieller interval",
            needed: 5,
            got: n,
        });
    }
    let clamped = tau.abs() == 1.0;
    let t = tau.clamp(-TAU_CLAMP, TAU_CLAMP);
    let z = t.atanh();
    let z_crit = inverse_phi(0.5 + level / 2.0);
    let half = z_crit * (0.437 / (n as f64 - 4.0)).sqrt();
    Ok(CiBounds {
        low: (z - half).tanh(),
        high: (z + half).tanh(),
        level,
        method: CiMethod::Fieller,
        clamped,
    })
}

/// Result of a one-sided permutation test against the shuffled-y null.
#[derive(Debug, Clone, Serialize)]
pub struct PermutationTest {
    pub tau_obs: f64,
    /// `(1 + #{tau_perm >= tau_obs}) / (m + 1)`.
    pub p_value: f64,
    pub m: usize,
    /// Null statistics, kept so callers can take quantiles.
    #[serde(skip)]
    pub null_taus: Vec<f64>,
}

impl PermutationTest {
    /// Empirical quantile of the permutation null.
    pub fn null_quantile(&self, q: f64) -> f64 {
        let mut v = self.null_taus.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        quantile(&v, q)
    }
}

/// One-sided permutation test: does the observed tau exceed taus obtained by
/// randomly re-pairing y with x?
pub fn permutation_null_test(x: &[f64], y: &[f64], m: usize, seed: u64) -> Result<PermutationTest> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "permutation count must be at least 1".into(),
        ));
    }
    let tau_obs = tau_stat(x, y)?;
    let null_taus: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "permutation", i);
            let mut perm = y.to_vec();
            perm.shuffle(&mut rng);
            // Permutation preserves the tie structure, so tau stays defined.
            tau_stat(x, &perm).expect("permuted tau defined when observed tau is")
        })
        .collect();
    let exceed = null_taus.iter().filter(|&&t| t >= tau_obs).count();
    let p_value = (1 + exceed) as f64 / (m + 1) as f64;
    Ok(PermutationTest {
        tau_obs,
        p_value,
        m,
        null_taus,
    })
}

/// Quartile gap statistic: mean outcome in the top rating quartile minus mean
/// outcome in the bottom one.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuartileGap {
    pub gap: f64,
    /// One-sided bootstrap p for gap > 0.
    pub p_value: f64,
    /// Units per quartile (floor(n / 4)).
    pub quartile_size: usize,
}

/// Gap between top- and bottom-quartile outcomes, with a unit-resampling
/// bootstrap p-value.
///
/// Quartile membership is by rating rank, ties broken by position so the
/// split is deterministic. Requires n >= 8 and at least two rating levels.
pub fn quartile_gap_test(
    ratings: &[f64],
    outcomes: &[f64],
    m: usize,
    seed: u64,
) -> Result<QuartileGap> {
    validate_paired(ratings, outcomes, 8)?;
    if ratings.iter().all(|&r| r == ratings[0]) {
        return Err(Error::AllTied { what: "ratings" });
    }
    let n = ratings.len();
    let gap = quartile_gap(ratings, outcomes).expect("non-degenerate by the checks above");

    let gaps: Vec<Option<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "quartile-boot", i);
            let mut r = Vec::with_capacity(n);
            let mut o = Vec::with_capacity(n);
            for _ in 0..n {
                let k = rng.random_range(0..n);
                r.push(ratings[k]);
                o.push(outcomes[k]);
            }
            quartile_gap(&r, &o)
        })
        .collect();
    let valid: Vec<f64> = gaps.into_iter().flatten().collect();
    let at_or_below = valid.iter().filter(|&&g| g <= 0.0).count();
    let p_value = (1 + at_or_below) as f64 / (valid.len() + 1) as f64;
    Ok(QuartileGap {
        gap,
        p_value,
        quartile_size: n / 4,
    })
}

fn quartile_gap(ratings: &[f64], outcomes: &[f64]) -> Option<f64> {
    let n = ratings.len();
    let q = n / 4;
    if q == 0 || ratings.iter().all(|&r| r == ratings[0]) {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| ratings[a].total_cmp(&ratings[b]).then(a.cmp(&b)));
    let bottom = mean(&idx[..q].iter().map(|&i| outcomes[i]).collect::<Vec<_>>());
    let top = mean(&idx[n - q..].iter().map(|&i| outcomes[i]).collect::<Vec<_>>());
    Some(top - bottom)
}

/// Difference in alignment between a rating source and a baseline source.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineDelta {
    pub tau_x: f64,
    pub tau_baseline: f64,
    /// `tau(x, y) - tau(baseline, y)`.
    pub delta: f64,
    /// Percentile bootstrap interval for the delta.
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    /// One-sided bootstrap p for delta > 0.
    pub p_value: f64,
    /// Bootstrap resamples that kept both taus defined.
    pub m_effective: usize,
}

impl BaselineDelta {
    /// Row fragment in the robustness-table style: "0.04, Y (0.000, 0.08)".
    pub fn table_cell(&self) -> String {
        format!(
            "{:.2}, {} ({:.3}, {:.2})",
            self.delta,
            if self.delta >= 0.0 { "Y" } else { "N" },
            self.ci_low,
            self.ci_high
        )
    }
}

/// Compare the alignment of `x` and of `baseline` with the same outcome by a
/// unit-level bootstrap of the tau difference.
pub fn tau_vs_baseline(
    x: &[f64],
    baseline: &[f64],
    y: &[f64],
    m: usize,
    seed: u64,
    level: f64,
) -> Result<BaselineDelta> {
    validate_paired(x, y, 2)?;
    validate_paired(baseline, y, 2)?;
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidLevel(level));
    }
    let tau_x = tau_stat(x, y)?;
    let tau_baseline = tau_stat(baseline, y)?;
    let delta = tau_x - tau_baseline;
    let n = x.len();

    let deltas: Vec<Option<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "baseline-boot", i);
            let mut xs = Vec::with_capacity(n);
            let mut bs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let k = rng.random_range(0..n);
                xs.push(x[k]);
                bs.push(baseline[k]);
                ys.push(y[k]);
            }
            match (tau_stat(&xs, &ys), tau_stat(&bs, &ys)) {
                (Ok(a), Ok(b)) => Some(a - b),
                _ => None,
            }
        })
        .collect();
    let mut valid: Vec<f64> = deltas.into_iter().flatten().collect();
    valid.sort_by(|a, b| a.total_cmp(b));
    let m_effective = valid.len();
    let (ci_low, ci_high) = if valid.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let alpha = 1.0 - level;
        (
            quantile(&valid, alpha / 2.0),
            quantile(&valid, 1.0 - alpha / 2.0),
        )
    };
    let at_or_below = valid.iter().filter(|&&d| d <= 0.0).count();
    let p_value = (1 + at_or_below) as f64 / (m_effective + 1) as f64;
    Ok(BaselineDelta {
        tau_x,
        tau_baseline,
        delta,
        ci_low,
        ci_high,
        level,
        p_value,
        m_effective,
    })
}

#[inline]
fn sgn(d: f64) -> i8 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what });
    }
    Ok(())
}

pub(crate) fn validate_paired(x: &[f64], y: &[f64], min_n: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min_n {
        return Err(Error::InsufficientData {
            what: "paired vectors",
            needed: min_n,
            got: x.len(),
        });
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use concordia_oracle as oracle;

    #[test]
    fn sign_matrix_single_comparison() {
        let m = SignMatrix::from_values(&[1.0, 2.0]).unwrap();
        assert_eq!(m.entry(0, 1), 1);
        assert_eq!(m.entry(1, 0), -1);
        assert_eq!(m.entry(0, 0), 0);
    }

    #[test]
    fn sign_matrix_all_ties_is_zero() {
        let m = SignMatrix::from_values(&[2.0, 2.0]).unwrap();
        assert_eq!(m.norm_sq(), 0);
    }

    #[test]
    fn sign_matrix_matches_pair_enumeration() {
        // [1,3,2]: unit 2 above unit 1, unit 3 above unit 1, unit 3 below unit 2.
        let m = SignMatrix::from_values(&[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(m.entry(0, 2), 1);
        assert_eq!(m.entry(1, 2), -1);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.entry(i, j), -m.entry(j, i));
            }
        }
    }

    #[test]
    fn sign_matrix_rejects_single_value() {
        assert!(SignMatrix::from_values(&[1.0]).is_err());
    }

    #[test]
    fn perfect_concordance() {
        let r = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.tau, 1.0);
        assert!(r.ci.is_none(), "no interval below n = 5");
    }

    #[test]
    fn single_swap_jumble() {
        // 5 concordant pairs, 1 discordant: tau = 4/6.
        let r = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r.tau, 4.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn tie_adjusted_case() {
        // Hand Frobenius form: inner = 1, one non-tied pair count 2 each side.
        let r = kendall_tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(r.tau, 0.5, epsilon = 1e-15);
        let brute = oracle::tau_b_brute(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.tau, brute);
    }

    #[test]
    fn all_tied_vector_errors() {
        assert!(matches!(
            tau_stat(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::AllTied { what: "x" })
        ));
    }

    #[test]
    fn matrix_and_streaming_routes_agree() {
        let mut cases = oracle::CaseGen::new(11);
        for _ in 0..50 {
            let n = cases.len_in(2, 40);
            let x = cases.mixed(n);
            let y = cases.mixed(n);
            let streaming = tau_stat(&x, &y);
            let mx = SignMatrix::from_values(&x).unwrap();
            let my = SignMatrix::from_values(&y).unwrap();
            let via_matrix = tau_from_matrices(&mx, &my);
            match (streaming, via_matrix) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                other => panic!("routes disagree: {other:?}"),
            }
        }
    }

    #[test]
    fn frobenius_equals_brute_force_tau_b() {
        let mut cases = oracle::CaseGen::new(23);
        for _ in 0..200 {
            let n = cases.len_in(2, 60);
            let x = cases.mixed(n);
            let y = cases.mixed(n);
            match (tau_stat(&x, &y), oracle::tau_b_brute(&x, &y)) {
                (Ok(a), Some(b)) => assert_eq!(a, b, "exact integer route"),
                (Err(_), None) => {}
                other => panic!("oracle disagreement: {other:?}"),
            }
        }
    }

    #[test]
    fn fieller_wide_null_interval() {
        // tau = 0, n = 404: half-width 1.96 * sqrt(0.437/400) on the z scale.
        let ci = fieller_ci(0.0, 404, 0.95).unwrap();
        assert_abs_diff_eq!(ci.low, -0.0647, epsilon = 1e-3);
        assert_abs_diff_eq!(ci.high, 0.0647, epsilon = 1e-3);
        let (lo, hi) = oracle::fieller_reference(0.0, 404, oracle::zcrit::Z95);
        assert_abs_diff_eq!(ci.low, lo, epsilon = 1e-12);
        assert_abs_diff_eq!(ci.high, hi, epsilon = 1e-12);
    }

    #[test]
    fn fieller_midrange_interval() {
        let ci = fieller_ci(0.5, 20, 0.95).unwrap();
        assert_abs_diff_eq!(ci.low, 0.2217, epsilon = 1e-3);
        assert_abs_diff_eq!(ci.high, 0.7030, epsilon = 1e-3);
        let (lo, hi) = oracle::fieller_reference(0.5, 20, oracle::zcrit::Z95);
        assert_abs_diff_eq!(ci.low, lo, epsilon = 1e-12);
        assert_abs_diff_eq!(ci.high, hi, epsilon = 1e-12);
    }

    #[test]
    fn fieller_rejects_bad_inputs() {
        assert!(matches!(fieller_ci(0.5, 20, 0.0), Err(Error::InvalidLevel(_))));
        assert!(matches!(fieller_ci(0.5, 20, 1.0), Err(Error::InvalidLevel(_))));
        assert!(fieller_ci(0.5, 4, 0.95).is_err());
        assert!(matches!(fieller_ci(1.5, 20, 0.95), Err(Error::TauOutOfRange(_))));
    }

    #[test]
    fn fieller_clamps_perfect_tau() {
        let ci = fieller_ci(1.0, 20, 0.95).unwrap();
        assert!(ci.clamped);
        assert!(ci.low < 1.0 && ci.high <= 1.0);
        assert!(ci.low > 0.9, "clamped interval stays near 1");
    }

    #[test]
    fn permutation_identity_is_maximal() {
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let t = permutation_null_test(&x, &x, 999, 42).unwrap();
        assert!(t.p_value <= 0.001);
    }

    #[test]
    fn permutation_reversed_is_minimal() {
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().rev().copied().collect();
        let t = permutation_null_test(&x, &y, 999, 42).unwrap();
        assert!(t.p_value > 0.99);
    }

    #[test]
    fn permutation_is_deterministic() {
        let x: Vec<f64> = (1..=15).map(f64::from).collect();
        let y = vec![
            3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0, 9.0, 7.0, 9.0,
        ];
        let a = permutation_null_test(&x, &y, 500, 7).unwrap();
        let b = permutation_null_test(&x, &y, 500, 7).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.null_taus, b.null_taus);
    }

    #[test]
    fn quartile_gap_on_identity() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        let g = quartile_gap_test(&v, &v, 200, 3).unwrap();
        assert_eq!(g.gap, 15.0);
        assert_eq!(g.quartile_size, 5);
        assert_eq!(g.gap, oracle::quartile_gap_direct(&v, &v));
        assert!(g.p_value < 0.05);
    }

    #[test]
    fn quartile_gap_constant_outcomes() {
        let r: Vec<f64> = (1..=12).map(f64::from).collect();
        let o = vec![2.0; 12];
        let g = quartile_gap_test(&r, &o, 100, 3).unwrap();
        assert_eq!(g.gap, 0.0);
    }

    #[test]
    fn quartile_gap_matches_direct_arithmetic() {
        let mut cases = oracle::CaseGen::new(5);
        for _ in 0..40 {
            let n = cases.len_in(8, 50);
            let r = cases.mixed(n);
            let o = cases.uniform(n);
            if r.iter().all(|&v| v == r[0]) {
                continue;
            }
            let g = quartile_gap_test(&r, &o, 1, 0).unwrap();
            assert_abs_diff_eq!(g.gap, oracle::quartile_gap_direct(&r, &o), epsilon = 1e-12);
        }
    }

    #[test]
    fn quartile_gap_rejects_degenerate() {
        assert!(quartile_gap_test(&[1.0; 10], &[1.0; 10], 10, 0).is_err());
        assert!(quartile_gap_test(&[1.0, 2.0], &[1.0, 2.0], 10, 0).is_err());
    }

    #[test]
    fn baseline_delta_self_is_zero() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y = vec![2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0, 10.0, 9.0];
        let d = tau_vs_baseline(&x, &x, &y, 200, 1, 0.95).unwrap();
        assert_eq!(d.delta, 0.0);
    }

    #[test]
    fn baseline_delta_extremes() {
        let y: Vec<f64> = (1..=10).map(f64::from).collect();
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        let d = tau_vs_baseline(&y, &rev, &y, 100, 1, 0.95).unwrap();
        assert_eq!(d.delta, 2.0);
    }

    #[test]
    fn baseline_table_cell_format() {
        let d = BaselineDelta {
            tau_x: 0.12,
            tau_baseline: 0.08,
            delta: 0.04,
            ci_low: 0.0004,
            ci_high: 0.08,
            level: 0.95,
            p_value: 0.03,
            m_effective: 999,
        };
        assert_eq!(d.table_cell(), "0.04, Y (0.000, 0.08)");
    }

    #[test]
    fn tau_invariant_under_monotone_transforms() {
        let mut cases = oracle::CaseGen::new(31);
        for _ in 0..30 {
            let n = cases.len_in(4, 30);
            let x = cases.mixed(n);
            let y = cases.mixed(n);
            let Ok(base) = tau_stat(&x, &y) else { continue };
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ay: Vec<f64> = y.iter().map(|v| 3.5 * v + 11.0).collect();
            assert_abs_diff_eq!(tau_stat(&ex, &ay).unwrap(), base, epsilon = 1e-15);
        }
    }

    #[test]
    fn tau_self_and_negation() {
        let mut cases = oracle::CaseGen::new(37);
        for _ in 0..30 {
            let n = cases.len_in(2, 30);
            let x = cases.mixed(n);
            if x.iter().all(|&v| v == x[0]) {
                continue;
            }
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            assert_eq!(tau_stat(&x, &x).unwrap(), 1.0);
            assert_eq!(tau_stat(&x, &neg).unwrap(), -1.0);
        }
    }

    #[test]
    fn fieller_coverage_bivariate_normal() {
        // rho = 0.5 implies population tau = 2 asin(0.5) / pi = 1/3.
        use rand::Rng;
        let rho: f64 = 0.5;
        let tau_true = 2.0 * rho.asin() / std::f64::consts::PI;
        let reps = 2000;
        let n = 50;
        let covered: usize = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(90210, "fieller-cov", rep);
                let mut x = Vec::with_capacity(n);
                let mut y = Vec::with_capacity(n);
                for _ in 0..n {
                    let (a, b) = bivariate(&mut rng, rho);
                    x.push(a);
                    y.push(b);
                }
                let r = kendall_tau(&x, &y).unwrap();
                let ci = r.ci.unwrap();
                (ci.low <= tau_true && tau_true <= ci.high) as usize
            })
            .sum();
        let coverage = covered as f64 / reps as f64;
        assert!(
            (0.93..=0.97).contains(&coverage),
            "coverage {coverage} outside 95% +/- 2%"
        );

        fn bivariate(rng: &mut impl Rng, rho: f64) -> (f64, f64) {
            use rand_distr::{Distribution, StandardNormal};
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            (z1, rho * z1 + (1.0 - rho * rho).sqrt() * z2)
        }
    }
}
