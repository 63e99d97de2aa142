//! Derived quantities of a variance decomposition: per-term percentages, the
//! developer-controllable share, and the prompt-generalizability ratio.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::{mean, median_of_sorted, quantile};

use super::ems::VarianceComponents;
use super::gibbs::PosteriorSummary;

/// Which factors count as developer levers and how the generalizability
/// ratio is formed.
#[derive(Debug, Clone, Serialize)]
pub struct SharesSpec {
    /// A term is controllable when it involves any of these factors.
    pub lever_factors: Vec<String>,
    /// Numerator term of the generalizability ratio.
    pub ratio_numerator: String,
    /// Denominator terms; empty means every term involving the numerator's
    /// factor.
    pub ratio_denominator: Vec<String>,
}

impl Default for SharesSpec {
    fn default() -> Self {
        Self {
            lever_factors: vec!["model".into(), "prompt".into()],
            ratio_numerator: "prompt".into(),
            ratio_denominator: Vec::new(),
        }
    }
}

/// Point-estimate shares from a closed-form decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct SharesReport {
    /// Percent of total variance per term, in component order.
    pub percent: Vec<(String, f64)>,
    /// Percent of total variance in terms touching a lever factor.
    pub controllable_percent: f64,
    /// Numerator variance over the summed denominator set.
    pub generalizability_ratio: f64,
    pub notes: Vec<String>,
}

/// Posterior summary of one derived scalar.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedPosterior {
    pub mean: f64,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl DerivedPosterior {
    /// "0.06 (CI [0.00,0.40])"
    pub fn display(&self) -> String {
        format!(
            "{:.2} (CI [{:.2},{:.2}])",
            self.median, self.ci_low, self.ci_high
        )
    }

    fn from_draws(mut draws: Vec<f64>) -> Self {
        draws.sort_by(|a, b| a.total_cmp(b));
        Self {
            mean: mean(&draws),
            median: median_of_sorted(&draws),
            ci_low: quantile(&draws, 0.025),
            ci_high: quantile(&draws, 0.975),
        }
    }
}

/// Interval-valid shares computed per posterior draw.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorShares {
    pub percent: Vec<(String, DerivedPosterior)>,
    pub controllable_percent: DerivedPosterior,
    pub generalizability_ratio: DerivedPosterior,
    pub notes: Vec<String>,
}

fn is_lever(factors: &[String], levers: &[String]) -> bool {
    factors.iter().any(|f| levers.contains(f))
}

fn denominator_names(
    spec: &SharesSpec,
    names: &[String],
    factors: &[Vec<String>],
) -> Result<Vec<String>> {
    if !spec.ratio_denominator.is_empty() {
        for d in &spec.ratio_denominator {
            if !names.contains(d) {
                return Err(Error::UnknownId {
                    kind: "denominator term",
                    id: d.clone(),
                });
            }
        }
        return Ok(spec.ratio_denominator.clone());
    }
    // Default: every term whose factor set includes the numerator factor.
    let num_factor = spec.ratio_numerator.clone();
    let out: Vec<String> = names
        .iter()
        .zip(factors)
        .filter(|(_, f)| f.contains(&num_factor))
        .map(|(n, _)| n.clone())
        .collect();
    if out.is_empty() {
        return Err(Error::UnknownId {
            kind: "ratio numerator factor",
            id: num_factor,
        });
    }
    Ok(out)
}

/// Shares from closed-form components.
pub fn derived_shares(vc: &VarianceComponents, spec: &SharesSpec) -> Result<SharesReport> {
    if vc.total <= 0.0 {
        return Err(Error::ZeroTotalVariance);
    }
    let names: Vec<String> = vc.components.iter().map(|c| c.name.clone()).collect();
    let factors: Vec<Vec<String>> = vc.components.iter().map(|c| c.factors.clone()).collect();
    if !names.contains(&spec.ratio_numerator) {
        return Err(Error::UnknownId {
            kind: "ratio numerator term",
            id: spec.ratio_numerator.clone(),
        });
    }
    let denom_names = denominator_names(spec, &names, &factors)?;

    let percent: Vec<(String, f64)> = vc
        .components
        .iter()
        .map(|c| (c.name.clone(), 100.0 * c.sigma2 / vc.total))
        .collect();
    let controllable_percent: f64 = vc
        .components
        .iter()
        .filter(|c| is_lever(&c.factors, &spec.lever_factors))
        .map(|c| 100.0 * c.sigma2 / vc.total)
        .sum();
    let num = vc
        .get(&spec.ratio_numerator)
        .expect("validated above")
        .sigma2;
    let denom: f64 = denom_names
        .iter()
        .map(|n| vc.get(n).expect("validated above").sigma2)
        .sum();
    if denom <= 0.0 {
        return Err(Error::ZeroTotalVariance);
    }
    Ok(SharesReport {
        percent,
        controllable_percent,
        generalizability_ratio: num / denom,
        notes: vec![format!(
            "generalizability ratio: {} over {}",
            spec.ratio_numerator,
            denom_names.join(" + ")
        )],
    })
}

/// Shares propagated through the posterior draws, so every derived quantity
/// carries an interval instead of being a ratio of point estimates.
pub fn derived_shares_posterior(
    summary: &PosteriorSummary,
    spec: &SharesSpec,
) -> Result<PosteriorShares> {
    let names: Vec<String> = summary.terms.iter().map(|t| t.name.clone()).collect();
    let numerator_idx = names
        .iter()
        .position(|n| *n == spec.ratio_numerator)
        .ok_or_else(|| Error::UnknownId {
            kind: "ratio numerator term",
            id: spec.ratio_numerator.clone(),
        })?;
    let denom_names = denominator_names(spec, &names, &summary.term_factors)?;
    let denom_idx: Vec<usize> = denom_names
        .iter()
        .map(|d| names.iter().position(|n| n == d).expect("validated"))
        .collect();
    let lever_idx: Vec<usize> = (0..names.len())
        .filter(|&i| is_lever(&summary.term_factors[i], &spec.lever_factors))
        .collect();

    let n_draws = summary.term_draws(0).len();
    let k = names.len();
    let mut percent_draws: Vec<Vec<f64>> = vec![Vec::with_capacity(n_draws); k];
    let mut controllable = Vec::with_capacity(n_draws);
    let mut ratio = Vec::with_capacity(n_draws);
    for d in 0..n_draws {
        let draws: Vec<f64> = (0..k).map(|t| summary.term_draws(t)[d]).collect();
        let total: f64 = draws.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalVariance);
        }
        for t in 0..k {
            percent_draws[t].push(100.0 * draws[t] / total);
        }
        controllable.push(
            lever_idx
                .iter()
                .map(|&i| 100.0 * draws[i] / total)
                .sum::<f64>(),
        );
        let denom: f64 = denom_idx.iter().map(|&i| draws[i]).sum();
        ratio.push(if denom > 0.0 {
            draws[numerator_idx] / denom
        } else {
            f64::NAN
        });
    }
    Ok(PosteriorShares {
        percent: names
            .into_iter()
            .zip(percent_draws)
            .map(|(n, d)| (n, DerivedPosterior::from_draws(d)))
            .collect(),
        controllable_percent: DerivedPosterior::from_draws(controllable),
        generalizability_ratio: DerivedPosterior::from_draws(ratio),
        notes: vec![format!(
            "generalizability ratio: {} over {}",
            spec.ratio_numerator,
            denom_names.join(" + ")
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::design::{CrossedData, FactorDesign};
    use crate::decompose::ems::ems_components;
    use crate::decompose::gibbs::{bayes_components, GibbsConfig};
    use crate::synth::{gen_crossed, PlantedDesign};
    use approx::assert_abs_diff_eq;

    /// Components in percent units assembled directly: model 4.8, prompt
    /// 1.0, model:prompt 1.4, other lever terms 42.8, everything else 50 -
    /// a split where developer levers own exactly half the variance.
    fn fixture_components() -> VarianceComponents {
        use crate::decompose::ems::Component;
        let define = |name: &str, factors: &[&str], sigma2: f64| Component {
            name: name.into(),
            factors: factors.iter().map(|s| s.to_string()).collect(),
            sigma2,
            raw: sigma2,
            truncated: false,
            proportion: sigma2 / 100.0,
            sum_sq: 0.0,
            df: 1.0,
            mean_square: 0.0,
            confounded_with: None,
        };
        let components = vec![
            define("unit", &["unit"], 30.0),
            define("item", &["item"], 10.0),
            define("model", &["model"], 4.8),
            define("prompt", &["prompt"], 1.0),
            define("unit:item", &["unit", "item"], 5.0),
            define("unit:model", &["unit", "model"], 20.0),
            define("item:model", &["item", "model"], 10.0),
            define("model:prompt", &["model", "prompt"], 1.4),
            define("unit:prompt", &["unit", "prompt"], 5.0),
            define("item:prompt", &["item", "prompt"], 2.8),
            define("unit:item:model", &["unit", "item", "model"], 3.0),
            define("unit:model:prompt", &["unit", "model", "prompt"], 2.0),
            define("residual", &[], 5.0),
        ];
        VarianceComponents {
            components,
            total: 100.0,
            n_obs: 0,
            replicates: 1,
            total_sum_sq: 0.0,
        }
    }

    #[test]
    fn controllable_share_sums_lever_terms_to_half() {
        let vc = fixture_components();
        let shares = derived_shares(&vc, &SharesSpec::default()).unwrap();
        // 4.8 + 1.0 + 1.4 + 20 + 10 + 5 + 2.8 + 3 + 2 = 50 exactly.
        assert_abs_diff_eq!(shares.controllable_percent, 50.0, epsilon = 1e-12);
        let model_pct = shares.percent.iter().find(|(n, _)| n == "model").unwrap().1;
        assert_abs_diff_eq!(model_pct, 4.8, epsilon = 1e-12);
    }

    #[test]
    fn single_nonzero_component_owns_the_total() {
        let d = FactorDesign::new(vec![("unit", 6), ("model", 3)]).unwrap();
        // Values vary only by unit: all variance lands on the unit term.
        let mut values = Vec::new();
        for unit in 0..6 {
            for _m in 0..3 {
                values.push(unit as f64);
            }
        }
        let data = CrossedData::from_cell_values(d, values, 1).unwrap();
        let vc = ems_components(&data).unwrap();
        let spec = SharesSpec {
            lever_factors: vec!["model".into()],
            ratio_numerator: "unit".into(),
            ratio_denominator: vec!["unit".into()],
        };
        let shares = derived_shares(&vc, &spec).unwrap();
        let unit_pct = shares.percent.iter().find(|(n, _)| n == "unit").unwrap().1;
        assert_abs_diff_eq!(unit_pct, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn default_denominator_collects_prompt_terms() {
        let vc = fixture_components();
        let shares = derived_shares(&vc, &SharesSpec::default()).unwrap();
        // prompt / (prompt + model:prompt + unit:prompt + item:prompt +
        // unit:model:prompt) = 1.0 / 12.2
        assert_abs_diff_eq!(
            shares.generalizability_ratio,
            1.0 / 12.2,
            epsilon = 1e-12
        );
        assert!(shares.notes[0].contains("prompt"));
    }

    #[test]
    fn zero_total_is_an_error() {
        let d = FactorDesign::new(vec![("a", 3), ("b", 3)]).unwrap();
        let data = CrossedData::from_cell_values(d, vec![0.0; 9], 1).unwrap();
        let vc = ems_components(&data).unwrap();
        assert!(matches!(
            derived_shares(&vc, &SharesSpec::default()),
            Err(Error::ZeroTotalVariance)
        ));
    }

    #[test]
    fn posterior_shares_carry_intervals() {
        let planted = PlantedDesign {
            factors: vec![
                ("unit".into(), 20),
                ("model".into(), 3),
                ("prompt".into(), 4),
            ],
            variances: [
                ("unit".to_string(), 1.0),
                ("model".to_string(), 0.3),
                ("prompt".to_string(), 0.1),
            ]
            .into_iter()
            .collect(),
            residual: 0.6,
            seed: 55,
        };
        let (data, _) = gen_crossed(&planted).unwrap();
        let cfg = GibbsConfig {
            chains: 4,
            iterations: 400,
            warmup: 200,
            seed: 8,
            allow_nonconverged: true,
            ..GibbsConfig::default()
        };
        let summary = bayes_components(&data, &cfg).unwrap();
        let shares = derived_shares_posterior(&summary, &SharesSpec::default()).unwrap();
        let g = &shares.generalizability_ratio;
        assert!(g.ci_low <= g.median && g.median <= g.ci_high);
        assert!(g.ci_low >= 0.0 && g.ci_high <= 1.0 + 1e-9);
        let c = &shares.controllable_percent;
        assert!(c.ci_low > 0.0 && c.ci_high < 100.0);
        // Compact display format for reports.
        let shown = g.display();
        assert!(
            shown.contains("(CI [") && shown.ends_with("])"),
            "format: {shown}"
        );
    }

    #[test]
    fn fixture_display_format() {
        let d = DerivedPosterior {
            mean: 0.08,
            median: 0.06,
            ci_low: 0.0,
            ci_high: 0.4,
        };
        assert_eq!(d.display(), "0.06 (CI [0.00,0.40])");
    }
}
