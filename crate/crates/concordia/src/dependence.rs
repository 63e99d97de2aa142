//! Distance dependence between rating sources.
//!
//! The bias-corrected squared distance correlation detects any departure from
//! independence, linear or not, and works on tied ordinal data. For a vector
//! `v` the distance matrix is `a[i][j] = |v_i - v_j|`; U-centering subtracts
//! row, column, and grand means with small-sample denominators:
//!
//! `A~[i][j] = a[i][j] - a[i.]/(n-2) - a[.j]/(n-2) + a[..]/((n-1)(n-2))`
//!
//! and the unbiased squared distance covariance is
//! `<A~, B~> / (n(n-3))`. The estimator can be slightly negative for
//! independent data; values are reported as-is.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::concordance::validate_paired;
use crate::data::{RaterFamily, RatingsTable, SourceKey, UnitId};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;

/// U-centered distance matrix: zero diagonal, rows and columns sum to zero.
#[derive(Debug, Clone)]
pub struct UCenteredMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl UCenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Inner product scaled by `n(n-3)`: the unbiased squared distance
    /// covariance of the two underlying vectors.
    pub fn dcov2(&self, other: &Self) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let inner: f64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum();
        Ok(inner / (self.n as f64 * (self.n as f64 - 3.0)))
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.entry(i, j))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// U-center the absolute-difference distance matrix of a vector.
///
/// Requires `n >= 4`; the U-statistic denominators are undefined below that.
pub fn ucenter(values: &[f64]) -> Result<UCenteredMatrix> {
    crate::concordance::check_finite(values, "values")?;
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData {
            what: "u-centering",
            needed: 4,
            got: n,
        });
    }
    let nf = n as f64;
    let mut row_sums = vec![0.0; n];
    let mut grand = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (values[i] - values[j]).abs();
            row_sums[i] += d;
            row_sums[j] += d;
            grand += 2.0 * d;
        }
    }
    let mut entries = vec![0.0; n * n];
    let grand_term = grand / ((nf - 1.0) * (nf - 2.0));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = (values[i] - values[j]).abs();
            entries[i * n + j] =
                d - row_sums[i] / (nf - 2.0) - row_sums[j] / (nf - 2.0) + grand_term;
        }
    }
    Ok(UCenteredMatrix { n, entries })
}

/// A pairwise dependence estimate.
#[derive(Debug, Clone, Serialize)]
pub struct DependenceResult {
    /// Bias-corrected squared distance correlation; may be slightly negative.
    pub dcor2: f64,
    /// Permutation p-value, when a significance test was run.
    pub p: Option<f64>,
    pub n: usize,
}

/// Bias-corrected squared distance correlation.
///
/// Computed through the margin identity
/// `<A~,B~> = S1 - 2 S2/(n-2) + S3/((n-1)(n-2))` with
/// `S1 = sum a_ij b_ij`, `S2 = sum_i a_i. b_i.`, `S3 = a_.. b_..`,
/// which avoids materializing the centered matrices. `ucenter` and the
/// literal double sum serve as cross-checks in tests.
pub fn dcor2_bias_corrected(x: &[f64], y: &[f64]) -> Result<DependenceResult> {
    validate_paired(x, y, 4)?;
    let n = x.len();
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return Err(Error::ZeroDistanceVariance);
    }
    let nf = n as f64;

    let mut s1_xy = 0.0;
    let mut s1_xx = 0.0;
    let mut s1_yy = 0.0;
    let mut arow = vec![0.0; n];
    let mut brow = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let a = (x[i] - x[j]).abs();
            let b = (y[i] - y[j]).abs();
            s1_xy += 2.0 * a * b;
            s1_xx += 2.0 * a * a;
            s1_yy += 2.0 * b * b;
            arow[i] += a;
            arow[j] += a;
            brow[i] += b;
            brow[j] += b;
        }
    }
    let s2_xy: f64 = arow.iter().zip(&brow).map(|(a, b)| a * b).sum();
    let s2_xx: f64 = arow.iter().map(|a| a * a).sum();
    let s2_yy: f64 = brow.iter().map(|b| b * b).sum();
    let a_grand: f64 = arow.iter().sum();
    let b_grand: f64 = brow.iter().sum();

    let omega = |s1: f64, s2: f64, s3: f64| {
        (s1 - 2.0 * s2 / (nf - 2.0) + s3 / ((nf - 1.0) * (nf - 2.0))) / (nf * (nf - 3.0))
    };
    let vxy = omega(s1_xy, s2_xy, a_grand * b_grand);
    let vxx = omega(s1_xx, s2_xx, a_grand * a_grand);
    let vyy = omega(s1_yy, s2_yy, b_grand * b_grand);
    // A vector of n-1 equal values and one outlier U-centers to the exact
    // zero matrix, so dVar = 0 can happen for non-constant input; guard
    // relative to the uncentered distance scale.
    let scale_x = s1_xx / (nf * (nf - 3.0));
    let scale_y = s1_yy / (nf * (nf - 3.0));
    if vxx <= scale_x * 1e-12 || vyy <= scale_y * 1e-12 {
        return Err(Error::ZeroDistanceVariance);
    }
    Ok(DependenceResult {
        dcor2: vxy / (vxx * vyy).sqrt(),
        p: None,
        n,
    })
}

/// Permutation p-value for dependence: shuffle y, recompute, count exceedance.
pub fn dcor_significance(x: &[f64], y: &[f64], m: usize, seed: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "permutation count must be at least 1".into(),
        ));
    }
    let observed = dcor2_bias_corrected(x, y)?.dcor2;
    let exceed: usize = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "dcor-perm", i);
            let mut perm = y.to_vec();
            perm.shuffle(&mut rng);
            let d = dcor2_bias_corrected(x, &perm)
                .expect("permuted vector keeps its distance variance")
                .dcor2;
            (d >= observed) as usize
        })
        .sum();
    Ok((1 + exceed) as f64 / (m + 1) as f64)
}

/// Family-wise significance mask: `p <= alpha / m` with m the family size.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if p_values.is_empty() {
        return Err(Error::Empty("p-value family"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let threshold = alpha / p_values.len() as f64;
    Ok(p_values.iter().map(|&p| p <= threshold).collect())
}

const CORR_CLAMP: f64 = 1.0 - 1e-12;

/// Mean of correlations computed on the arctanh scale and back-transformed.
#[derive(Debug, Clone, Serialize)]
pub struct FisherZMean {
    /// `tanh(mean(arctanh(v)))`.
    pub mean: f64,
    /// Standard error of the mean on the z scale; `None` for a single value.
    pub se_z: Option<f64>,
    /// `tanh(mean_z -/+ se_z)`: the error band back-transformed.
    pub band: Option<(f64, f64)>,
    pub n: usize,
    /// Inputs at or beyond +/-1 that were clamped before arctanh.
    pub n_clamped: usize,
}

/// Fisher-z mean of correlation-scale values, optionally weighted.
///
/// Values at or beyond +/-1 are clamped to 1 - 1e-12 in magnitude and
/// counted; anything past 1 + 1e-6 is treated as a data error.
pub fn fisher_z_mean(values: &[f64], weights: Option<&[f64]>) -> Result<FisherZMean> {
    if values.is_empty() {
        return Err(Error::Empty("fisher-z input"));
    }
    if let Some(w) = weights {
        if w.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: w.len(),
            });
        }
        if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidParameter("negative or non-finite weight".into()));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
    }
    let mut n_clamped = 0usize;
    let mut zs = Vec::with_capacity(values.len());
    for &v in values {
        if !v.is_finite() || v.abs() > 1.0 + 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "correlation-scale value {v} outside [-1, 1]"
            )));
        }
        let clamped = v.clamp(-CORR_CLAMP, CORR_CLAMP);
        if clamped != v {
            n_clamped += 1;
        }
        zs.push(clamped.atanh());
    }
    let (mean_z, se_z) = match weights {
        None => {
            let m = crate::util::mean(&zs);
            let se = if zs.len() >= 2 {
                Some((crate::util::sample_variance(&zs) / zs.len() as f64).sqrt())
            } else {
                None
            };
            (m, se)
        }
        Some(w) => {
            let total: f64 = w.iter().sum();
            let m = zs.iter().zip(w).map(|(z, wi)| z * wi).sum::<f64>() / total;
            let sum_sq: f64 = w.iter().map(|wi| wi * wi).sum();
            let n_eff = total * total / sum_sq;
            let se = if n_eff > 1.0 {
                let var = zs
                    .iter()
                    .zip(w)
                    .map(|(z, wi)| wi * (z - m) * (z - m))
                    .sum::<f64>()
                    / total
                    * (n_eff / (n_eff - 1.0));
                Some((var / n_eff).sqrt())
            } else {
                None
            };
            (m, se)
        }
    };
    let band = se_z.map(|se| ((mean_z - se).tanh(), (mean_z + se).tanh()));
    Ok(FisherZMean {
        mean: mean_z.tanh(),
        se_z,
        band,
        n: values.len(),
        n_clamped,
    })
}

/// How a pair of rating series relates for the summary grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    /// A model series against a human series.
    WithHumans,
    /// Two different model raters.
    WithOtherModels,
    /// The same model rater (across tasks or prompts).
    IntraModel,
}

/// One aggregated cell of the dependence summary.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryCell {
    pub n_pairs: usize,
    pub mean: f64,
    pub se_z: Option<f64>,
    pub band: Option<(f64, f64)>,
    pub n_clamped: usize,
}

/// Cell state: computed, structurally redundant, or empty.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Computed(SummaryCell),
    /// Same rater on the same task correlates with itself trivially.
    Redundant,
    /// No pair fell into the cell.
    Absent,
}

/// The same-task / different-task by pair-class grid of mean dependence.
#[derive(Debug, Clone, Serialize)]
pub struct DependenceSummary {
    pub same_task_with_humans: CellStatus,
    pub same_task_with_other_models: CellStatus,
    pub same_task_intramodel: CellStatus,
    pub different_task_with_humans: CellStatus,
    pub different_task_with_other_models: CellStatus,
    pub different_task_intramodel: CellStatus,
    /// Pairs skipped because fewer than `min_n` units overlapped.
    pub skipped_small_pairs: usize,
}

/// Mean inter-source dependence, aggregated with Fisher-z per cell.
///
/// Pairs are formed from every (rater, prompt, task) series of human or model
/// family; each pair joins on its shared units (pairwise-complete). The
/// same-task intramodel cell is marked redundant rather than computed.
pub fn dependence_summary(table: &RatingsTable, min_n: usize) -> Result<DependenceSummary> {
    let min_n = min_n.max(4);
    let sources: Vec<SourceKey> = table
        .sources()
        .into_iter()
        .filter(|s| matches!(s.rater_family, RaterFamily::Human | RaterFamily::Model))
        .collect();
    let series: Vec<BTreeMap<UnitId, f64>> = sources.iter().map(|s| table.series(s)).collect();

    let mut cells: BTreeMap<(bool, PairClass), Vec<f64>> = BTreeMap::new();
    let mut skipped = 0usize;
    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            let a = &sources[i];
            let b = &sources[j];
            let Some(class) = classify_pair(a, b) else {
                continue;
            };
            let same_task = a.task_id == b.task_id;
            if same_task && class == PairClass::IntraModel {
                continue; // redundant cell
            }
            let (xs, ys) = pairwise_complete(&series[i], &series[j]);
            if xs.len() < min_n {
                skipped += 1;
                continue;
            }
            match dcor2_bias_corrected(&xs, &ys) {
                Ok(r) => cells.entry((same_task, class)).or_default().push(r.dcor2),
                Err(Error::ZeroDistanceVariance) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }

    let cell = |same: bool, class: PairClass| -> Result<CellStatus> {
        match cells.get(&(same, class)) {
            Some(values) => {
                let agg = fisher_z_mean(values, None)?;
                Ok(CellStatus::Computed(SummaryCell {
                    n_pairs: agg.n,
                    mean: agg.mean,
                    se_z: agg.se_z,
                    band: agg.band,
                    n_clamped: agg.n_clamped,
                }))
            }
            None => Ok(CellStatus::Absent),
        }
    };

    Ok(DependenceSummary {
        same_task_with_humans: cell(true, PairClass::WithHumans)?,
        same_task_with_other_models: cell(true, PairClass::WithOtherModels)?,
        same_task_intramodel: CellStatus::Redundant,
        different_task_with_humans: cell(false, PairClass::WithHumans)?,
        different_task_with_other_models: cell(false, PairClass::WithOtherModels)?,
        different_task_intramodel: cell(false, PairClass::IntraModel)?,
        skipped_small_pairs: skipped,
    })
}

fn classify_pair(a: &SourceKey, b: &SourceKey) -> Option<PairClass> {
    use RaterFamily::*;
    match (a.rater_family, b.rater_family) {
        (Model, Human) | (Human, Model) => Some(PairClass::WithHumans),
        (Model, Model) if a.rater_id == b.rater_id => Some(PairClass::IntraModel),
        (Model, Model) => Some(PairClass::WithOtherModels),
        // Human-human pairs sit outside the grid.
        _ => None,
    }
}

fn pairwise_complete(
    a: &BTreeMap<UnitId, f64>,
    b: &BTreeMap<UnitId, f64>,
) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (unit, va) in a {
        if let Some(vb) = b.get(unit) {
            xs.push(*va);
            ys.push(*vb);
        }
    }
    (xs, ys)
}

/// Full dependence matrix over rating series, for dumps and clustering.
#[derive(Debug, Clone, Serialize)]
pub struct PairwiseDependence {
    pub labels: Vec<String>,
    /// Row-major dcor2 matrix; diagonal is exactly 1.
    pub dcor2: Vec<Vec<f64>>,
    /// Permutation p-values when requested; diagonal 0.
    pub p_values: Option<Vec<Vec<f64>>>,
    /// Shared-unit count per pair.
    pub n_units: Vec<Vec<usize>>,
    /// Pairs with too little overlap or zero variance hold NaN in `dcor2`.
    pub n_undefined: usize,
}

/// Options for [`pairwise_dependence`].
#[derive(Debug, Clone, Copy)]
pub struct PairwiseOptions {
    /// Minimum shared units per pair (at least 4).
    pub min_n: usize,
    /// Permutations for per-pair significance; 0 disables p-values.
    pub permutations: usize,
    pub seed: u64,
}

impl Default for PairwiseOptions {
    fn default() -> Self {
        Self {
            min_n: 4,
            permutations: 0,
            seed: 0,
        }
    }
}

/// Compute the full series-by-series dependence matrix.
///
/// Labels are `rater[+prompt]:task`, sorted; pair computations run in
/// parallel with per-pair substreams so the matrix is identical for any
/// thread count.
pub fn pairwise_dependence(table: &RatingsTable, opts: PairwiseOptions) -> Result<PairwiseDependence> {
    let min_n = opts.min_n.max(4);
    let sources = table.sources();
    if sources.is_empty() {
        return Err(Error::Empty("rating table"));
    }
    let labels: Vec<String> = sources.iter().map(source_label).collect();
    let series: Vec<BTreeMap<UnitId, f64>> = sources.iter().map(|s| table.series(s)).collect();
    let k = sources.len();

    let mut pair_indices = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            pair_indices.push((i, j));
        }
    }
    let results: Vec<(usize, usize, usize, f64, Option<f64>)> = pair_indices
        .into_par_iter()
        .enumerate()
        .map(|(pair_no, (i, j))| {
            let (xs, ys) = pairwise_complete(&series[i], &series[j]);
            let n = xs.len();
            if n < min_n {
                return (i, j, n, f64::NAN, None);
            }
            match dcor2_bias_corrected(&xs, &ys) {
                Ok(r) => {
                    let p = if opts.permutations > 0 {
                        // Derive this pair's permutation seed from its index so
                        // the schedule cannot matter.
                        dcor_significance(
                            &xs,
                            &ys,
                            opts.permutations,
                            opts.seed ^ (pair_no as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                        )
                        .ok()
                    } else {
                        None
                    };
                    (i, j, n, r.dcor2, p)
                }
                Err(_) => (i, j, n, f64::NAN, None),
            }
        })
        .collect();

    let mut dcor2 = vec![vec![f64::NAN; k]; k];
    let mut p_values = vec![vec![f64::NAN; k]; k];
    let mut n_units = vec![vec![0usize; k]; k];
    let mut n_undefined = 0usize;
    for i in 0..k {
        dcor2[i][i] = 1.0;
        p_values[i][i] = 0.0;
        n_units[i][i] = series[i].len();
    }
    for (i, j, n, d, p) in results {
        if d.is_nan() {
            n_undefined += 1;
        }
        dcor2[i][j] = d;
        dcor2[j][i] = d;
        n_units[i][j] = n;
        n_units[j][i] = n;
        if let Some(p) = p {
            p_values[i][j] = p;
            p_values[j][i] = p;
        }
    }
    Ok(PairwiseDependence {
        labels,
        dcor2,
        p_values: (opts.permutations > 0).then_some(p_values),
        n_units,
        n_undefined,
    })
}

fn source_label(s: &SourceKey) -> String {
    match &s.prompt_id {
        Some(p) => format!("{}+{}:{}", s.rater_id, p, s.task_id),
        None => format!("{}:{}", s.rater_id, s.task_id),
    }
}
