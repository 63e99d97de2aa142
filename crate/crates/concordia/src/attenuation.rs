//! Disattenuation of alignment correlations against a noisy criterion.
//!
//! Two noisy variants of the same underlying outcome correlate less than
//! either does with the truth; the concordance between the variants acts as a
//! noise ceiling. Dividing an observed alignment by the square root of that
//! ceiling (the geometric mean of the implied reliabilities) recovers the
//! correlation with the underlying quantity:
//!
//! `tau_corrected = tau_raw / sqrt(tau(variant_a, variant_b))`
//!
//! The correction rescales the outcome axis only; it cannot reorder raters,
//! which is asserted as a property below. Greiner's equality
//! `sin(pi tau / 2)` optionally maps taus to the Pearson scale first.

use serde::Serialize;

use crate::concordance::tau_stat;
use crate::data::{join_series, OutcomeId, OutcomeTable, YearScope};
use crate::error::{Error, Result};

/// Concordance between two stacked outcome variants, used as a noise ceiling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReliabilityEstimate {
    /// Kendall tau between the variants at the joined level.
    pub reliability: f64,
    pub n: usize,
    /// Non-positive reliabilities cannot disattenuate anything.
    pub usable: bool,
}

/// Kendall tau between two outcome variants joined on unit.
pub fn stacked_reliability(
    outcomes: &OutcomeTable,
    variant_a: &OutcomeId,
    variant_b: &OutcomeId,
    scope: YearScope,
) -> Result<ReliabilityEstimate> {
    let a = outcomes.values(variant_a, scope)?;
    let b = outcomes.values(variant_b, scope)?;
    let panel = join_series(&a, &b)?;
    let reliability = tau_stat(&panel.scores, &panel.outcomes)?;
    Ok(ReliabilityEstimate {
        reliability,
        n: panel.n(),
        usable: reliability > 0.0,
    })
}

/// `tau_raw / sqrt(reliability)`. The reliability must be positive.
pub fn disattenuate(tau_raw: f64, reliability: f64) -> Result<f64> {
    if !(reliability > 0.0) {
        return Err(Error::NonPositiveReliability(reliability));
    }
    Ok(tau_raw / reliability.sqrt())
}

/// Greiner's equality: `sin(pi tau / 2)`, mapping a tau to the Pearson scale.
pub fn greiner(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau.abs() > 1.0 {
        return Err(Error::TauOutOfRange(tau));
    }
    Ok((std::f64::consts::FRAC_PI_2 * tau).sin())
}

/// A corrected alignment with the parameters echoed for auditability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttenuationResult {
    pub tau_raw: f64,
    pub reliability: f64,
    /// May exceed `tau_raw` in magnitude; the ceiling is below one.
    pub tau_corrected: f64,
    pub greiner_applied: bool,
}

/// Disattenuate one observed alignment, optionally through the Greiner map.
///
/// With the Greiner option both the observed tau and the reliability tau are
/// mapped to the Pearson scale before the ratio.
pub fn correct_alignment(
    tau_raw: f64,
    reliability: f64,
    apply_greiner: bool,
) -> Result<AttenuationResult> {
    if !(reliability > 0.0) {
        return Err(Error::NonPositiveReliability(reliability));
    }
    let tau_corrected = if apply_greiner {
        disattenuate(greiner(tau_raw)?, greiner(reliability)?)?
    } else {
        disattenuate(tau_raw, reliability)?
    };
    Ok(AttenuationResult {
        tau_raw,
        reliability,
        tau_corrected,
        greiner_applied: apply_greiner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{OutcomeRow, UnitId};
    use crate::seeding::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn outcome_rows(id: &str, values: &[f64]) -> Vec<OutcomeRow> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| OutcomeRow {
                unit_id: UnitId::new(format!("t{i:04}")),
                outcome_id: id.into(),
                value: *v,
                year: None,
            })
            .collect()
    }

    #[test]
    fn identical_variants_have_unit_reliability() {
        let v = [0.3, -0.1, 0.8, 0.4, -0.5];
        let mut rows = outcome_rows("STA", &v);
        rows.extend(outcome_rows("ALT", &v));
        let t = OutcomeTable::new(rows).unwrap();
        let r = stacked_reliability(&t, &"STA".into(), &"ALT".into(), YearScope::Pooled).unwrap();
        assert_eq!(r.reliability, 1.0);
        assert!(r.usable);
    }

    #[test]
    fn independent_variants_have_near_zero_reliability() {
        let mut rng = stream_rng(19, "reliability-null", 0);
        let a: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let mut rows = outcome_rows("STA", &a);
        rows.extend(outcome_rows("ALT", &b));
        let t = OutcomeTable::new(rows).unwrap();
        let r = stacked_reliability(&t, &"STA".into(), &"ALT".into(), YearScope::Pooled).unwrap();
        assert!(r.reliability.abs() < 0.08, "tau = {}", r.reliability);
    }

    #[test]
    fn anti_correlated_variants_are_flagged_unusable() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [4.0, 3.0, 2.0, 1.0];
        let mut rows = outcome_rows("STA", &a);
        rows.extend(outcome_rows("ALT", &b));
        let t = OutcomeTable::new(rows).unwrap();
        let r = stacked_reliability(&t, &"STA".into(), &"ALT".into(), YearScope::Pooled).unwrap();
        assert!(r.reliability < 0.0);
        assert!(!r.usable);
        assert!(disattenuate(0.1, r.reliability).is_err());
    }

    #[test]
    fn disattenuation_substitution_cases() {
        assert_abs_diff_eq!(disattenuate(0.10, 0.25).unwrap(), 0.20, epsilon = 1e-15);
        assert_eq!(disattenuate(0.37, 1.0).unwrap(), 0.37);
        assert!(matches!(
            disattenuate(0.1, 0.0),
            Err(Error::NonPositiveReliability(_))
        ));
    }

    #[test]
    fn greiner_fixed_points_and_closed_form() {
        assert_eq!(greiner(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(greiner(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(greiner(-1.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            greiner(0.5).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert!(greiner(1.2).is_err());
    }

    #[test]
    fn greiner_is_odd_increasing_and_expanding() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let tau = -1.0 + i as f64 / 100.0;
            let g = greiner(tau).unwrap();
            assert!(g > prev, "monotone on the grid");
            prev = g;
            assert_abs_diff_eq!(greiner(-tau).unwrap(), -g, epsilon = 1e-15);
            assert!(g.abs() + 1e-15 >= tau.abs(), "|greiner| >= |tau| at {tau}");
        }
    }

    #[test]
    fn disattenuation_preserves_sign_and_ordering() {
        let taus = [-0.2, 0.05, 0.11, 0.3, -0.02, 0.11];
        let r = 0.3;
        let corrected: Vec<f64> = taus.iter().map(|t| disattenuate(*t, r).unwrap()).collect();
        for (t, c) in taus.iter().zip(&corrected) {
            assert_eq!(t.signum(), c.signum());
            assert!(c.abs() >= t.abs());
        }
        // Monotone relabeling: every pairwise order is intact.
        for i in 0..taus.len() {
            for j in 0..taus.len() {
                assert_eq!(
                    taus[i].partial_cmp(&taus[j]),
                    corrected[i].partial_cmp(&corrected[j])
                );
            }
        }
    }

    #[test]
    fn correct_alignment_echoes_parameters() {
        let r = correct_alignment(0.10, 0.25, false).unwrap();
        assert_abs_diff_eq!(r.tau_corrected, 0.20, epsilon = 1e-15);
        assert!(!r.greiner_applied);
        let g = correct_alignment(0.10, 0.25, true).unwrap();
        assert!(g.greiner_applied);
        // sin(pi*0.05) / sqrt(sin(pi*0.125))
        let expected = (std::f64::consts::PI * 0.05).sin()
            / (std::f64::consts::PI * 0.125).sin().sqrt();
        assert_abs_diff_eq!(g.tau_corrected, expected, epsilon = 1e-12);
    }
}
