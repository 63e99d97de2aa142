//! The seven-test robustness battery for a rating/outcome panel.
//!
//! Faint signal in a noisy panel is credible when it survives estimators with
//! very different failure modes. The battery runs, in order: tau > 0, the
//! one-sided 90% lower confidence bound > 0, Theil-Sen > 0, repeated median
//! > 0, tau above the permutation null, tau at least the baseline source's
//! tau, and a top-vs-bottom rating-quartile outcome gap > 0.

use serde::Serialize;

use crate::concordance::{
    fieller_ci, permutation_null_test, quartile_gap_test, tau_stat, tau_vs_baseline,
    validate_paired,
};
use crate::error::{Error, Result};
use crate::slopes::{repeated_median, theil_sen};

/// Battery tuning knobs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BatteryConfig {
    pub permutations: usize,
    pub bootstrap: usize,
    pub seed: u64,
    /// The permutation-null quantile the observed tau must exceed. A low
    /// quantile lets a slightly negative tau pass against a wide null, which
    /// is the intended reading of "above random"; 0.05 also makes the null
    /// failure rate the nominal 5%.
    pub null_quantile: f64,
    /// Two-sided level whose lower bound is the one-sided 90% bound.
    pub lower_ci_two_sided_level: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            permutations: 999,
            bootstrap: 999,
            seed: 0,
            null_quantile: 0.05,
            lower_ci_two_sided_level: 0.80,
        }
    }
}

/// One battery entry. `passed = None` means the test was not run (no
/// baseline supplied) and it is excluded from the pass-rate denominator.
#[derive(Debug, Clone, Serialize)]
pub struct TestOutcome {
    pub name: &'static str,
    pub statistic: f64,
    pub passed: Option<bool>,
    pub detail: String,
}

impl TestOutcome {
    /// Table-style cell: "0.12, Y" / "-0.04, N" / "not run".
    pub fn table_cell(&self) -> String {
        match self.passed {
            Some(passed) => format!(
                "{:.2}, {}",
                self.statistic,
                if passed { "Y" } else { "N" }
            ),
            None => "not run".into(),
        }
    }
}

/// Battery result: the seven outcomes in canonical order plus the pass rate
/// over the tests that ran.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub tests: Vec<TestOutcome>,
    pub n: usize,
    pub n_passed: usize,
    pub n_run: usize,
    pub pass_rate: f64,
    pub footnotes: Vec<String>,
}

impl RobustnessReport {
    /// Formats like "100 (7/7)".
    pub fn pass_rate_cell(&self) -> String {
        format!(
            "{:.0} ({}/{})",
            self.pass_rate * 100.0,
            self.n_passed,
            self.n_run
        )
    }

    /// One pipe-separated table row: label, seven cells, pass rate.
    pub fn table_row(&self, label: &str) -> String {
        let cells: Vec<String> = self.tests.iter().map(|t| t.table_cell()).collect();
        format!("{label} | {} | {}", cells.join(" | "), self.pass_rate_cell())
    }
}

/// Significance stars in the usual thresholds.
pub(crate) fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Run the seven-test battery on one panel.
///
/// `baseline` is the baseline source's scores on the same units; without it
/// the baseline comparison is marked not run.
pub fn robustness_battery(
    ratings: &[f64],
    outcomes: &[f64],
    baseline: Option<&[f64]>,
    cfg: &BatteryConfig,
) -> Result<RobustnessReport> {
    validate_paired(ratings, outcomes, 8)?;
    if !(cfg.null_quantile > 0.0 && cfg.null_quantile < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "null quantile {} outside (0, 1)",
            cfg.null_quantile
        )));
    }
    let n = ratings.len();
    let mut tests = Vec::with_capacity(7);
    let mut footnotes = Vec::new();

    let tau = tau_stat(ratings, outcomes)?;
    tests.push(TestOutcome {
        name: "tau_positive",
        statistic: tau,
        passed: Some(tau > 0.0),
        detail: format!("tau = {tau:.4}, n = {n}"),
    });

    let ci = fieller_ci(tau, n, cfg.lower_ci_two_sided_level)?;
    tests.push(TestOutcome {
        name: "lower_90_ci_positive",
        statistic: ci.low,
        passed: Some(ci.low > 0.0),
        detail: format!(
            "one-sided 90% lower bound = {:.4} (two-sided level {:.2})",
            ci.low, cfg.lower_ci_two_sided_level
        ),
    });

    let ts = theil_sen(ratings, outcomes)?;
    tests.push(TestOutcome {
        name: "theil_sen_positive",
        statistic: ts.slope,
        passed: Some(ts.slope > 0.0),
        detail: format!("slope = {:.4} over {} pairs", ts.slope, ts.n_pairs_used),
    });

    let rm = repeated_median(ratings, outcomes)?;
    tests.push(TestOutcome {
        name: "repeated_median_positive",
        statistic: rm.slope,
        passed: Some(rm.slope > 0.0),
        detail: format!("slope = {:.4}", rm.slope),
    });

    let perm = permutation_null_test(ratings, outcomes, cfg.permutations, cfg.seed)?;
    let null_q = perm.null_quantile(cfg.null_quantile);
    let margin = tau - null_q;
    tests.push(TestOutcome {
        name: "tau_above_random",
        statistic: margin,
        passed: Some(margin > 0.0),
        detail: format!(
            "tau - null q{:.0} = {margin:.4}, permutation p = {:.4}{}",
            cfg.null_quantile * 100.0,
            perm.p_value,
            stars(perm.p_value)
        ),
    });
    footnotes.push(format!(
        "tau_above_random passes when tau exceeds the {:.0}th percentile of the shuffled-y null; \
         'above random' is ambiguous about the quantile, so it is configurable.",
        cfg.null_quantile * 100.0
    ));

    match baseline {
        Some(b) => {
            let delta =
                tau_vs_baseline(ratings, b, outcomes, cfg.bootstrap, cfg.seed ^ 0xBA5E, 0.95)?;
            tests.push(TestOutcome {
                name: "tau_at_least_baseline",
                statistic: delta.delta,
                passed: Some(delta.delta >= 0.0),
                detail: delta.table_cell(),
            });
        }
        None => {
            tests.push(TestOutcome {
                name: "tau_at_least_baseline",
                statistic: f64::NAN,
                passed: None,
                detail: "no baseline supplied".into(),
            });
            footnotes.push(
                "tau_at_least_baseline not run; it is excluded from the pass-rate denominator."
                    .into(),
            );
        }
    }

    let gap = quartile_gap_test(ratings, outcomes, cfg.bootstrap, cfg.seed ^ 0x4A47)?;
    tests.push(TestOutcome {
        name: "quartile_gap_positive",
        statistic: gap.gap,
        passed: Some(gap.gap > 0.0),
        detail: format!(
            "Q4 - Q1 gap = {:.4}{}, bootstrap p = {:.4}",
            gap.gap,
            stars(gap.p_value),
            gap.p_value
        ),
    });

    let n_run = tests.iter().filter(|t| t.passed.is_some()).count();
    let n_passed = tests.iter().filter(|t| t.passed == Some(true)).count();
    Ok(RobustnessReport {
        tests,
        n,
        n_passed,
        n_run,
        pass_rate: n_passed as f64 / n_run as f64,
        footnotes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;
    use rand::Rng;
    use rayon::prelude::*;

    /// Ratings carry signal plus noise, outcomes carry the same signal.
    fn planted_panel(seed: u64, n: usize, signal: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = stream_rng(seed, "battery-panel", 0);
        let mut ratings = Vec::with_capacity(n);
        let mut outcomes = Vec::with_capacity(n);
        let mut baseline = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = StandardNormal.sample(&mut rng);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let bnoise: f64 = StandardNormal.sample(&mut rng);
            ratings.push(signal * s + noise);
            outcomes.push(s);
            // Baseline is weakly aligned, so a strong rater beats it.
            baseline.push(0.05 * s + bnoise);
        }
        (ratings, outcomes, baseline)
    }

    #[test]
    fn planted_positive_panel_passes_everything() {
        let (ratings, outcomes, baseline) = planted_panel(11, 200, 2.0);
        let report = robustness_battery(
            &ratings,
            &outcomes,
            Some(&baseline),
            &BatteryConfig {
                permutations: 499,
                bootstrap: 499,
                seed: 21,
                ..BatteryConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.n_run, 7);
        assert_eq!(report.n_passed, 7, "report: {}", report.table_row("panel"));
        assert_eq!(report.pass_rate_cell(), "100 (7/7)");
    }

    #[test]
    fn missing_baseline_shrinks_denominator() {
        let (ratings, outcomes, _) = planted_panel(13, 100, 2.0);
        let report = robustness_battery(
            &ratings,
            &outcomes,
            None,
            &BatteryConfig {
                permutations: 199,
                bootstrap: 199,
                seed: 3,
                ..BatteryConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.n_run, 6);
        assert_eq!(report.tests[5].passed, None);
        assert!(report.tests[5].table_cell().contains("not run"));
    }

    #[test]
    fn table_row_layout() {
        let (ratings, outcomes, baseline) = planted_panel(17, 150, 2.5);
        let report = robustness_battery(
            &ratings,
            &outcomes,
            Some(&baseline),
            &BatteryConfig {
                permutations: 199,
                bootstrap: 199,
                seed: 5,
                ..BatteryConfig::default()
            },
        )
        .unwrap();
        let row = report.table_row("LANGIMP");
        assert!(row.starts_with("LANGIMP | "));
        assert_eq!(row.matches(" | ").count(), 8, "row: {row}");
        assert!(row.ends_with("(7/7)"), "row: {row}");
        for cell in report.tests.iter().take(5) {
            assert!(cell.table_cell().contains(", Y"), "cell: {:?}", cell);
        }
    }

    #[test]
    fn pure_noise_fails_tau_above_random_at_nominal_rate() {
        let reps = 200u64;
        let failures: u64 = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(606, "battery-null", rep);
                let ratings: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
                let outcomes: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
                let perm = permutation_null_test(&ratings, &outcomes, 199, rep).unwrap();
                let tau = perm.tau_obs;
                (tau <= perm.null_quantile(0.05)) as u64
            })
            .sum();
        let rate = failures as f64 / reps as f64;
        assert!(
            (0.01..=0.12).contains(&rate),
            "null failure rate {rate} far from nominal 0.05"
        );
    }

    #[test]
    fn battery_rejects_small_panels() {
        let v = [1.0, 2.0, 3.0];
        assert!(robustness_battery(&v, &v, None, &BatteryConfig::default()).is_err());
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(stars(0.005), "***");
        assert_eq!(stars(0.02), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.2), "");
    }
}
