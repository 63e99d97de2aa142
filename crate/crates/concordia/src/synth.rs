//! Seeded generators with planted ground truth.
//!
//! Every validation path in the crate leans on data whose true structure is
//! known by construction: crossed designs with chosen variance components,
//! rating/outcome pairs hitting a target concordance through the Gaussian
//! copula (`rho = sin(pi tau / 2)` makes the target exact without iteration),
//! and multi-rater panels where raters share a planted bias. Generators
//! report both the population parameters and the realized per-draw values,
//! since low-level factors realize visibly different variances draw to draw.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::{
    OutcomeId, OutcomeRow, OutcomeTable, PromptId, RaterFamily, RaterId, RatingRecord,
    RatingsTable, TaskId, UnitId,
};
use crate::decompose::design::{CrossedData, FactorDesign};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::util::normal::{inverse_phi, phi};
use crate::util::quadrature::integrate;
use crate::util::sample_variance;

/// A crossed design with chosen per-term variances.
#[derive(Debug, Clone, Serialize)]
pub struct PlantedDesign {
    /// Factor names and level counts, e.g. unit/item/model/prompt.
    pub factors: Vec<(String, usize)>,
    /// Population variance per term name (':'-joined factors). Terms left
    /// out are planted at zero.
    pub variances: BTreeMap<String, f64>,
    /// Residual (within-cell) variance.
    pub residual: f64,
    pub seed: u64,
}

/// What the generator actually planted: the population values echoed back
/// plus the realized sample variance of every drawn effect vector.
#[derive(Debug, Clone, Serialize)]
pub struct PlantedTruth {
    pub population: BTreeMap<String, f64>,
    pub population_residual: f64,
    /// Sample variance of each drawn effect vector (only planted terms).
    pub realized: BTreeMap<String, f64>,
    pub realized_residual: f64,
}

/// Draw one balanced panel: every effect vector from a zero-mean normal with
/// its planted variance, summed over the crossed structure, one observation
/// per cell.
pub fn gen_crossed(planted: &PlantedDesign) -> Result<(CrossedData, PlantedTruth)> {
    let design = FactorDesign::new(
        planted
            .factors
            .iter()
            .map(|(n, l)| (n.clone(), *l))
            .collect::<Vec<_>>(),
    )?;
    for (name, &v) in &planted.variances {
        design.term_mask(name)?;
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative planted variance for {name}"
            )));
        }
    }
    if !(planted.residual >= 0.0) {
        return Err(Error::InvalidParameter("negative residual variance".into()));
    }
    let total: f64 = planted.variances.values().sum::<f64>() + planted.residual;
    if total <= 0.0 {
        return Err(Error::ZeroTotalVariance);
    }

    let cells = design.cells();
    let mut values = vec![0.0f64; cells];
    let mut realized = BTreeMap::new();
    let normal = StandardNormal;

    for (term_index, (name, &sigma2)) in planted.variances.iter().enumerate() {
        if sigma2 == 0.0 {
            continue;
        }
        let mask = design.term_mask(name)?;
        let size = design.term_size(mask);
        let mut rng = stream_rng(planted.seed, "crossed-term", term_index as u64);
        let sd = sigma2.sqrt();
        let effects: Vec<f64> = (0..size)
            .map(|_| {
                let z: f64 = normal.sample(&mut rng);
                sd * z
            })
            .collect();
        realized.insert(name.clone(), sample_variance(&effects));
        for cell in 0..cells {
            let levels = design.cell_levels(cell);
            values[cell] += effects[design.group_index(mask, &levels)];
        }
    }

    let mut rng = stream_rng(planted.seed, "crossed-residual", 0);
    let sd = planted.residual.sqrt();
    let eps: Vec<f64> = (0..cells)
        .map(|_| {
            let z: f64 = normal.sample(&mut rng);
            sd * z
        })
        .collect();
    for (v, e) in values.iter_mut().zip(&eps) {
        *v += e;
    }
    let truth = PlantedTruth {
        population: planted.variances.clone(),
        population_residual: planted.residual,
        realized,
        realized_residual: sample_variance(&eps),
    };
    Ok((CrossedData::from_cell_values(design, values, 1)?, truth))
}

/// Target-concordance pair through the Gaussian copula.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CopulaSpec {
    /// Desired Kendall tau of the continuous pair, strictly inside (-1, 1).
    pub target_tau: f64,
    pub n: usize,
    /// Discretize both margins into this many equal-mass ordinal bins.
    pub bins: Option<usize>,
}

/// A generated pair with the dependence the generator expects to measure.
#[derive(Debug, Clone, Serialize)]
pub struct TauPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// The latent normal correlation `sin(pi tau / 2)`.
    pub rho: f64,
    /// Population tau-b of the emitted pair; the tie correction means this
    /// barely drops under binning. This is what `kendall_tau` measures.
    pub expected_tau: f64,
    /// Population tau without tie correction. Binning pushes pairs into
    /// joint ties, so this is where the information loss shows up.
    pub expected_tau_uncorrected: f64,
}

/// Draw a bivariate-normal pair with `rho = sin(pi target / 2)`, optionally
/// binned to ordinal scales. Binning attenuates the concordance; the
/// expectation reported accounts for it.
pub fn gen_tau_pair(spec: &CopulaSpec, seed: u64) -> Result<TauPair> {
    if !(spec.target_tau.abs() < 1.0) {
        return Err(Error::TauOutOfRange(spec.target_tau));
    }
    if spec.n < 2 {
        return Err(Error::InsufficientData {
            what: "copula pair",
            needed: 2,
            got: spec.n,
        });
    }
    if let Some(bins) = spec.bins {
        if bins < 2 {
            return Err(Error::InvalidParameter("need at least 2 bins".into()));
        }
    }
    let rho = (std::f64::consts::FRAC_PI_2 * spec.target_tau).sin();
    let mut rng = stream_rng(seed, "tau-pair", 0);
    let normal = StandardNormal;
    let s = (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let z1: f64 = normal.sample(&mut rng);
        let z2: f64 = normal.sample(&mut rng);
        x.push(z1);
        y.push(rho * z1 + s * z2);
    }
    let (expected_tau, expected_tau_uncorrected) = match spec.bins {
        None => (spec.target_tau, spec.target_tau),
        Some(bins) => {
            let thresholds = bin_thresholds(bins);
            x = x.iter().map(|&v| bin_value(v, &thresholds)).collect();
            y = y.iter().map(|&v| bin_value(v, &thresholds)).collect();
            let e = binned_tau_expectation(rho, bins);
            (e.tau_b, e.tau_a)
        }
    };
    Ok(TauPair {
        x,
        y,
        rho,
        expected_tau,
        expected_tau_uncorrected,
    })
}

fn bin_thresholds(bins: usize) -> Vec<f64> {
    (1..bins).map(|i| inverse_phi(i as f64 / bins as f64)).collect()
}

fn bin_value(v: f64, thresholds: &[f64]) -> f64 {
    (thresholds.iter().filter(|&&t| v > t).count() + 1) as f64
}

/// Population concordance of a binned bivariate normal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BinnedTau {
    /// Tie-corrected (tau-b) value.
    pub tau_b: f64,
    /// Uncorrected (tau-a) value: concordant minus discordant probability.
    pub tau_a: f64,
}

/// Population tau of a bivariate normal after equal-mass binning of both
/// margins, by quadrature over the bin-cell probabilities.
pub fn binned_tau_expectation(rho: f64, bins: usize) -> BinnedTau {
    const RANGE: f64 = 8.5;
    let t = bin_thresholds(bins);
    let edge = |k: usize| -> f64 {
        if k == 0 {
            -RANGE
        } else if k == bins {
            RANGE
        } else {
            t[k - 1]
        }
    };
    let s = (1.0 - rho * rho).sqrt().max(1e-12);
    let density = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut p = vec![vec![0.0f64; bins]; bins];
    for k in 0..bins {
        for l in 0..bins {
            let (ylo, yhi) = (edge(l), edge(l + 1));
            p[k][l] = integrate(
                |x| density(x) * (phi((yhi - rho * x) / s) - phi((ylo - rho * x) / s)),
                edge(k),
                edge(k + 1),
            );
        }
    }
    // Concordant minus discordant mass, then tau-b's tie-corrected
    // normalization over the geometric mean of non-tied pair masses.
    let mut concordant = 0.0;
    let mut discordant = 0.0;
    for k1 in 0..bins {
        for l1 in 0..bins {
            for k2 in (k1 + 1)..bins {
                for l2 in 0..bins {
                    if l2 > l1 {
                        concordant += p[k1][l1] * p[k2][l2];
                    } else if l2 < l1 {
                        discordant += p[k1][l1] * p[k2][l2];
                    }
                }
            }
        }
    }
    let row: Vec<f64> = (0..bins).map(|k| p[k].iter().sum()).collect();
    let col: Vec<f64> = (0..bins).map(|l| (0..bins).map(|k| p[k][l]).sum()).collect();
    let tie_x: f64 = row.iter().map(|q| q * q).sum();
    let tie_y: f64 = col.iter().map(|q| q * q).sum();
    let tau_a = 2.0 * (concordant - discordant);
    BinnedTau {
        tau_b: tau_a / ((1.0 - tie_x) * (1.0 - tie_y)).sqrt(),
        tau_a,
    }
}

/// Multi-rater panel where every rater mixes a common signal, a shared bias,
/// and idiosyncratic noise; the outcome tracks the signal only.
#[derive(Debug, Clone, Serialize)]
pub struct SharedBiasSpec {
    pub k_raters: usize,
    /// Weight on the latent bias common to all raters.
    pub shared_bias_weight: f64,
    /// Weight on the outcome-relevant signal; negative plants misalignment.
    pub signal_weight: f64,
    /// Standard deviation of each rater's own noise.
    pub idiosyncratic_sd: f64,
    pub n_units: usize,
    /// Discretize rater scores into this many ordinal bins (needed for
    /// unanimous-vote ensembles to retain anything).
    pub bins: Option<usize>,
    pub task: String,
    pub seed: u64,
}

impl Default for SharedBiasSpec {
    fn default() -> Self {
        Self {
            k_raters: 3,
            shared_bias_weight: 0.0,
            signal_weight: 1.0,
            idiosyncratic_sd: 1.0,
            n_units: 200,
            bins: None,
            task: "SYNTH".into(),
            seed: 0,
        }
    }
}

/// The generated panel plus the latent vectors that produced it.
#[derive(Debug, Clone)]
pub struct SharedBiasPanel {
    pub ratings: RatingsTable,
    pub outcomes: OutcomeTable,
    pub signal: Vec<f64>,
    pub shared_bias: Vec<f64>,
}

/// Rater ids used by [`gen_shared_bias_panel`]: `model_01`, `model_02`, ...
pub fn shared_bias_rater_id(index: usize) -> RaterId {
    RaterId::new(format!("model_{:02}", index + 1))
}

/// Outcome id emitted by [`gen_shared_bias_panel`].
pub fn shared_bias_outcome_id() -> OutcomeId {
    OutcomeId::new("OUTCOME")
}

/// Generate the shared-bias panel:
/// `score_r = signal_weight * signal + shared_bias_weight * bias + noise_r`,
/// `outcome = signal + noise`.
pub fn gen_shared_bias_panel(spec: &SharedBiasSpec) -> Result<SharedBiasPanel> {
    if spec.k_raters == 0 {
        return Err(Error::Empty("rater list"));
    }
    if spec.n_units < 2 {
        return Err(Error::InsufficientData {
            what: "shared-bias panel",
            needed: 2,
            got: spec.n_units,
        });
    }
    if spec.signal_weight == 0.0 && spec.shared_bias_weight == 0.0 {
        return Err(Error::InvalidParameter(
            "signal and shared-bias weights are both zero".into(),
        ));
    }
    if spec.idiosyncratic_sd < 0.0 {
        return Err(Error::InvalidParameter("negative idiosyncratic sd".into()));
    }
    if let Some(bins) = spec.bins {
        if bins < 2 {
            return Err(Error::InvalidParameter("need at least 2 bins".into()));
        }
    }
    let normal = StandardNormal;
    let mut latent_rng = stream_rng(spec.seed, "shared-bias-latent", 0);
    let n = spec.n_units;
    let signal: Vec<f64> = (0..n).map(|_| normal.sample(&mut latent_rng)).collect();
    let shared_bias: Vec<f64> = (0..n).map(|_| normal.sample(&mut latent_rng)).collect();
    let outcome_noise: Vec<f64> = (0..n).map(|_| normal.sample(&mut latent_rng)).collect();

    let score_sd = (spec.signal_weight.powi(2)
        + spec.shared_bias_weight.powi(2)
        + spec.idiosyncratic_sd.powi(2))
    .sqrt();
    let thresholds: Option<Vec<f64>> = spec
        .bins
        .map(|b| bin_thresholds(b).iter().map(|t| t * score_sd).collect());

    let task = TaskId::new(spec.task.clone());
    let prompt = PromptId::new("base");
    let mut records = Vec::with_capacity(spec.k_raters * n);
    for r in 0..spec.k_raters {
        let mut rng = stream_rng(spec.seed, "shared-bias-rater", r as u64);
        for (u, (s, b)) in signal.iter().zip(&shared_bias).enumerate() {
            let noise: f64 = normal.sample(&mut rng);
            let raw = spec.signal_weight * s
                + spec.shared_bias_weight * b
                + spec.idiosyncratic_sd * noise;
            let score = match &thresholds {
                Some(t) => bin_value(raw, t),
                None => raw,
            };
            records.push(RatingRecord {
                rater_id: shared_bias_rater_id(r),
                rater_family: RaterFamily::Model,
                task_id: task.clone(),
                unit_id: unit_id(u),
                prompt_id: Some(prompt.clone()),
                score,
            });
        }
    }
    let mut bounds = BTreeMap::new();
    if let Some(bins) = spec.bins {
        bounds.insert(task.clone(), (1.0, bins as f64));
    }
    let ratings = RatingsTable::new(records, bounds)?;

    let outcome_id = shared_bias_outcome_id();
    let rows: Vec<OutcomeRow> = signal
        .iter()
        .zip(&outcome_noise)
        .enumerate()
        .map(|(u, (s, e))| OutcomeRow {
            unit_id: unit_id(u),
            outcome_id: outcome_id.clone(),
            value: s + e,
            year: None,
        })
        .collect();
    let outcomes = OutcomeTable::new(rows)?;
    Ok(SharedBiasPanel {
        ratings,
        outcomes,
        signal,
        shared_bias,
    })
}

fn unit_id(u: usize) -> UnitId {
    UnitId::new(format!("u{u:04}"))
}

/// Standard normal draws from a named substream, for callers that need raw
/// latent values without touching the rng crates directly.
pub fn standard_normal_vec(seed: u64, label: &str, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, label, 0);
    let normal = StandardNormal;
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concordance::tau_stat;
    use crate::dependence::dcor2_bias_corrected;
    use approx::assert_abs_diff_eq;
    use concordia_oracle as oracle;
    use rayon::prelude::*;

    #[test]
    fn gen_crossed_is_deterministic() {
        let planted = PlantedDesign {
            factors: vec![("c".into(), 10), ("m".into(), 3)],
            variances: [("c".to_string(), 1.0)].into_iter().collect(),
            residual: 1.0,
            seed: 42,
        };
        let (a, ta) = gen_crossed(&planted).unwrap();
        let (b, tb) = gen_crossed(&planted).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(ta.realized, tb.realized);
    }

    #[test]
    fn zero_total_variance_is_rejected() {
        let planted = PlantedDesign {
            factors: vec![("c".into(), 4)],
            variances: BTreeMap::new(),
            residual: 0.0,
            seed: 1,
        };
        assert!(matches!(
            gen_crossed(&planted),
            Err(Error::ZeroTotalVariance)
        ));
    }

    #[test]
    fn residual_only_design_has_small_group_means() {
        let planted = PlantedDesign {
            factors: vec![("c".into(), 30), ("m".into(), 4)],
            variances: BTreeMap::new(),
            residual: 1.0,
            seed: 7,
        };
        let (data, _) = gen_crossed(&planted).unwrap();
        // m-group means average 30 residual draws: sd ~ 0.18.
        let mut sums = vec![0.0f64; 4];
        let pos = data
            .term_masks()
            .iter()
            .position(|&m| data.design().term_name(m) == "m")
            .unwrap();
        for (obs, &g) in data.obs_groups(pos).iter().enumerate() {
            sums[g as usize] += data.values()[obs];
        }
        for s in sums {
            assert!((s / 30.0).abs() < 0.9, "group mean {s}");
        }
    }

    #[test]
    fn planted_unit_variance_realizes_near_population() {
        let planted = PlantedDesign {
            factors: vec![("c".into(), 50), ("m".into(), 3)],
            variances: [("c".to_string(), 1.0)].into_iter().collect(),
            residual: 1.0,
            seed: 11,
        };
        let (_, truth) = gen_crossed(&planted).unwrap();
        // chi2_49 spread: realized between-unit variance is near 1.
        let realized = truth.realized["c"];
        assert!((0.5..=1.6).contains(&realized), "realized {realized}");
    }

    #[test]
    fn tau_pair_hits_target_at_scale() {
        for (seed, target) in [(1u64, 0.0f64), (2, 0.5), (3, -0.4)] {
            let pair = gen_tau_pair(
                &CopulaSpec {
                    target_tau: target,
                    n: 2000,
                    bins: None,
                },
                seed,
            )
            .unwrap();
            let tau = tau_stat(&pair.x, &pair.y).unwrap();
            assert!(
                (tau - target).abs() < 0.03,
                "target {target}, measured {tau}"
            );
            assert_eq!(pair.expected_tau, target);
        }
    }

    #[test]
    fn tau_pair_mean_over_reps_is_calibrated() {
        let target = 0.5;
        let taus: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|rep| {
                let pair = gen_tau_pair(
                    &CopulaSpec {
                        target_tau: target,
                        n: 2000,
                        bins: None,
                    },
                    1000 + rep,
                )
                .unwrap();
                tau_stat(&pair.x, &pair.y).unwrap()
            })
            .collect();
        let mean = crate::util::mean(&taus);
        assert!(
            (mean - target).abs() < 0.01,
            "mean tau {mean} off target {target}"
        );
    }

    #[test]
    fn binning_attenuates_and_generator_predicts_it() {
        let spec = CopulaSpec {
            target_tau: 0.99,
            n: 4000,
            bins: Some(3),
        };
        let pair = gen_tau_pair(&spec, 5).unwrap();
        assert!(pair.x.iter().all(|v| (1.0..=3.0).contains(v)));
        let measured = tau_stat(&pair.x, &pair.y).unwrap();
        // The generator's tau-b expectation matches what is measured.
        assert!(
            (measured - pair.expected_tau).abs() < 0.04,
            "measured {measured} vs expected {}",
            pair.expected_tau
        );
        // The information loss from 3 bins is substantial on the uncorrected
        // scale: most pairs collapse into joint ties.
        assert!(
            pair.expected_tau_uncorrected < 0.75,
            "tau-a should drop well below the 0.99 target: {}",
            pair.expected_tau_uncorrected
        );
        assert!(pair.expected_tau_uncorrected < pair.expected_tau);
    }

    #[test]
    fn quadrature_expectation_matches_large_sample_table() {
        let rho = (std::f64::consts::FRAC_PI_2 * 0.6).sin();
        let bins = 4;
        let expected = binned_tau_expectation(rho, bins).tau_b;
        // Monte Carlo contingency-table oracle at n = 500k.
        let thresholds = bin_thresholds(bins);
        let mut rng = stream_rng(31337, "binned-oracle", 0);
        let normal = StandardNormal;
        let s = (1.0 - rho * rho).sqrt();
        let mut counts = vec![vec![0u64; bins]; bins];
        for _ in 0..500_000 {
            let z1: f64 = normal.sample(&mut rng);
            let w: f64 = normal.sample(&mut rng);
            let z2: f64 = rho * z1 + s * w;
            let bx = bin_value(z1, &thresholds) as usize - 1;
            let by = bin_value(z2, &thresholds) as usize - 1;
            counts[bx][by] += 1;
        }
        let mc = oracle::tau_b_from_table(&counts).unwrap();
        assert!(
            (expected - mc).abs() < 0.005,
            "quadrature {expected} vs table {mc}"
        );
    }

    #[test]
    fn shared_bias_panel_round_trips_through_tables() {
        let spec = SharedBiasSpec {
            k_raters: 3,
            n_units: 50,
            seed: 9,
            ..SharedBiasSpec::default()
        };
        let panel = gen_shared_bias_panel(&spec).unwrap();
        assert_eq!(panel.ratings.len(), 150);
        assert_eq!(panel.outcomes.rows().len(), 50);
        let again = gen_shared_bias_panel(&spec).unwrap();
        assert_eq!(panel.ratings.records(), again.ratings.records());
    }

    #[test]
    fn zero_weights_are_rejected() {
        let spec = SharedBiasSpec {
            signal_weight: 0.0,
            shared_bias_weight: 0.0,
            ..SharedBiasSpec::default()
        };
        assert!(gen_shared_bias_panel(&spec).is_err());
    }

    fn rater_series(panel: &SharedBiasPanel, r: usize) -> Vec<f64> {
        let task = TaskId::new("SYNTH");
        let series = panel
            .ratings
            .series_for(&shared_bias_rater_id(r), &task, None)
            .unwrap();
        series.values().copied().collect()
    }

    fn outcome_series(panel: &SharedBiasPanel) -> Vec<f64> {
        let values = panel
            .outcomes
            .values(&shared_bias_outcome_id(), crate::data::YearScope::Pooled)
            .unwrap();
        values.values().copied().collect()
    }

    #[test]
    fn no_shared_bias_keeps_dependence_symmetric() {
        let panel = gen_shared_bias_panel(&SharedBiasSpec {
            k_raters: 2,
            shared_bias_weight: 0.0,
            signal_weight: 1.0,
            n_units: 600,
            seed: 21,
            ..SharedBiasSpec::default()
        })
        .unwrap();
        let a = rater_series(&panel, 0);
        let b = rater_series(&panel, 1);
        let y = outcome_series(&panel);
        let inter = dcor2_bias_corrected(&a, &b).unwrap().dcor2;
        let with_outcome = dcor2_bias_corrected(&a, &y).unwrap().dcor2;
        assert!(
            (inter - with_outcome).abs() < 0.1,
            "inter {inter} vs outcome {with_outcome}"
        );
    }

    #[test]
    fn dominant_shared_bias_orders_dependence() {
        let panel = gen_shared_bias_panel(&SharedBiasSpec {
            k_raters: 2,
            shared_bias_weight: 3.0,
            signal_weight: 0.3,
            n_units: 600,
            seed: 22,
            ..SharedBiasSpec::default()
        })
        .unwrap();
        let a = rater_series(&panel, 0);
        let b = rater_series(&panel, 1);
        let y = outcome_series(&panel);
        let inter = dcor2_bias_corrected(&a, &b).unwrap().dcor2;
        let with_outcome = dcor2_bias_corrected(&a, &y).unwrap().dcor2;
        assert!(
            inter > 3.0 * with_outcome,
            "inter {inter} should dwarf outcome {with_outcome}"
        );
    }

    #[test]
    fn negative_signal_weight_plants_misalignment() {
        let panel = gen_shared_bias_panel(&SharedBiasSpec {
            k_raters: 1,
            shared_bias_weight: 0.5,
            signal_weight: -1.5,
            n_units: 400,
            seed: 23,
            ..SharedBiasSpec::default()
        })
        .unwrap();
        let a = rater_series(&panel, 0);
        let y = outcome_series(&panel);
        assert!(tau_stat(&a, &y).unwrap() < -0.2);
    }

    #[test]
    fn binned_panel_scores_are_ordinal() {
        let panel = gen_shared_bias_panel(&SharedBiasSpec {
            bins: Some(5),
            n_units: 100,
            seed: 3,
            ..SharedBiasSpec::default()
        })
        .unwrap();
        for rec in panel.ratings.records() {
            assert!(rec.score.fract() == 0.0 && (1.0..=5.0).contains(&rec.score));
        }
        assert_eq!(
            panel.ratings.bounds_for(&TaskId::new("SYNTH")),
            Some((1.0, 5.0))
        );
    }

    #[test]
    fn realized_truth_close_for_moderate_level_counts() {
        // 8 prompt-like levels: chi2_7 spread keeps realized within ~50%.
        let planted = PlantedDesign {
            factors: vec![("c".into(), 40), ("p".into(), 8)],
            variances: [("p".to_string(), 0.05), ("c".to_string(), 1.0)]
                .into_iter()
                .collect(),
            residual: 1.0,
            seed: 12,
        };
        let (_, truth) = gen_crossed(&planted).unwrap();
        let ratio = truth.realized["p"] / 0.05;
        assert!((0.2..=3.0).contains(&ratio), "ratio {ratio}");
        assert_abs_diff_eq!(truth.realized_residual, 1.0, epsilon = 0.15);
    }
}
