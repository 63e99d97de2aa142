//! Variance decomposition of misalignment error.
//!
//! Misalignment is what remains of an outcome after regressing it on a
//! rater's score: the part of the criterion the rating failed to track. Over
//! a crossed design (units x items x models x prompts) the variance of that
//! residual splits into per-factor and interaction components, which say how
//! much of the error the controllable levers (model and prompt choice) could
//! ever fix. Balanced designs solve in closed form ([`ems`]); anything
//! crossed works through the Gibbs sampler ([`gibbs`]).

pub mod design;
pub mod ems;
pub mod gibbs;
pub mod rhat;
pub mod shares;

pub use design::{CrossedData, FactorDesign};
pub use ems::{ems_components, Component, VarianceComponents};
pub use gibbs::{bayes_components, GibbsConfig, PosteriorSummary, ScalarSummary};
pub use shares::{
    derived_shares, derived_shares_posterior, DerivedPosterior, PosteriorShares, SharesReport,
    SharesSpec,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::data::{
    OutcomeId, OutcomeTable, PromptId, RaterFamily, RaterId, RatingsTable, TaskId, UnitId,
    YearScope,
};
use crate::error::{Error, Result};

/// How the residualizing regression pools observations.
///
/// The alignment question is per item, so the default pools each item's
/// observations across models and prompts; the per-series scope fits one
/// line per (item, model, prompt) instead. Both are reported because the
/// choice is a modeling judgment, not something the data decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    PerItem,
    PerSeries,
}

/// One residualized observation.
#[derive(Debug, Clone, Serialize)]
pub struct MisalignmentRow {
    pub unit: UnitId,
    pub item: TaskId,
    pub model: RaterId,
    pub prompt: PromptId,
    pub rating: f64,
    pub outcome: f64,
    /// Outcome minus the fitted line at this rating.
    pub residual: f64,
}

/// Residualized panel keyed by (unit, item, model, prompt).
#[derive(Debug, Clone, Serialize)]
pub struct MisalignmentPanel {
    pub rows: Vec<MisalignmentRow>,
    pub fit_scope: FitScope,
    pub n_groups: usize,
    /// Fit groups with constant ratings, which fell back to intercept-only.
    pub intercept_only_groups: Vec<String>,
}

impl MisalignmentPanel {
    /// Largest |mean residual| across fit groups, on the outcome scale.
    /// Least-squares residuals average zero per group up to rounding, so
    /// this is a cheap integrity check on the fit.
    pub fn max_group_residual_mean(&self) -> f64 {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for row in &self.rows {
            let key = match self.fit_scope {
                FitScope::PerItem => row.item.to_string(),
                FitScope::PerSeries => {
                    format!("{}|{}|{}", row.item, row.model, row.prompt)
                }
            };
            let e = sums.entry(key).or_insert((0.0, 0));
            e.0 += row.residual;
            e.1 += 1;
        }
        sums.values()
            .map(|(s, n)| (s / *n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Reshape into a crossed layout over (unit, item, model, prompt).
    ///
    /// Level labels are the sorted distinct ids per factor, returned
    /// alongside the data for report labeling. Factors with a single
    /// observed level are constant, carry no estimable variance, and are
    /// dropped from the design (they stay listed in the labels).
    pub fn to_crossed(&self) -> Result<(CrossedData, FactorLabels)> {
        let mut units: BTreeSet<&UnitId> = BTreeSet::new();
        let mut items: BTreeSet<&TaskId> = BTreeSet::new();
        let mut models: BTreeSet<&RaterId> = BTreeSet::new();
        let mut prompts: BTreeSet<&PromptId> = BTreeSet::new();
        for row in &self.rows {
            units.insert(&row.unit);
            items.insert(&row.item);
            models.insert(&row.model);
            prompts.insert(&row.prompt);
        }
        let labels = FactorLabels {
            units: units.iter().map(|u| u.to_string()).collect(),
            items: items.iter().map(|i| i.to_string()).collect(),
            models: models.iter().map(|m| m.to_string()).collect(),
            prompts: prompts.iter().map(|p| p.to_string()).collect(),
            dropped_constant: Vec::new(),
        };

        let all: [(&str, &[String]); 4] = [
            ("unit", &labels.units),
            ("item", &labels.items),
            ("model", &labels.models),
            ("prompt", &labels.prompts),
        ];
        let mut kept: Vec<(&str, &[String])> = Vec::new();
        let mut dropped = Vec::new();
        for (name, levels) in all {
            if levels.len() >= 2 {
                kept.push((name, levels));
            } else {
                dropped.push(name.to_string());
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidParameter(
                "every design factor is constant; nothing to decompose".into(),
            ));
        }
        let design = FactorDesign::new(
            kept.iter()
                .map(|(n, l)| (n.to_string(), l.len()))
                .collect::<Vec<_>>(),
        )?;
        let index =
            |xs: &[String], v: &str| xs.binary_search_by(|x| x.as_str().cmp(v)).expect("member");
        let rows: Vec<(Vec<usize>, f64)> = self
            .rows
            .iter()
            .map(|r| {
                let levels = kept
                    .iter()
                    .map(|(name, xs)| match *name {
                        "unit" => index(xs, r.unit.as_str()),
                        "item" => index(xs, r.item.as_str()),
                        "model" => index(xs, r.model.as_str()),
                        _ => index(xs, r.prompt.as_str()),
                    })
                    .collect();
                (levels, r.residual)
            })
            .collect();
        let labels = FactorLabels {
            dropped_constant: dropped,
            ..labels
        };
        Ok((CrossedData::from_rows(design, &rows)?, labels))
    }
}

/// Sorted level labels per factor of a reshaped panel.
#[derive(Debug, Clone, Serialize)]
pub struct FactorLabels {
    pub units: Vec<String>,
    pub items: Vec<String>,
    pub models: Vec<String>,
    pub prompts: Vec<String>,
    /// Factors left out of the design because only one level was observed.
    pub dropped_constant: Vec<String>,
}

/// Residualize an outcome on model ratings within each fit group.
///
/// Takes every model-family record with a score for a unit that has the
/// outcome, fits ordinary least squares (intercept and slope) of outcome on
/// rating per group, and keeps the residuals keyed by (unit, item, model,
/// prompt). Groups with constant ratings fall back to intercept-only fits
/// and are flagged.
pub fn misalignment_residuals(
    ratings: &RatingsTable,
    outcomes: &OutcomeTable,
    outcome: &OutcomeId,
    scope: YearScope,
    fit: FitScope,
) -> Result<MisalignmentPanel> {
    let outcome_values = outcomes.values(outcome, scope)?;
    struct Obs {
        unit: UnitId,
        item: TaskId,
        model: RaterId,
        prompt: PromptId,
        rating: f64,
        outcome: f64,
    }
    let mut observations = Vec::new();
    for rec in ratings.records() {
        if rec.rater_family != RaterFamily::Model {
            continue;
        }
        let Some(v) = outcome_values.get(&rec.unit_id) else {
            continue;
        };
        let prompt = rec
            .prompt_id
            .clone()
            .expect("validated: model records carry a prompt");
        observations.push(Obs {
            unit: rec.unit_id.clone(),
            item: rec.task_id.clone(),
            model: rec.rater_id.clone(),
            prompt,
            rating: rec.score,
            outcome: *v,
        });
    }
    if observations.is_empty() {
        return Err(Error::Empty("model ratings joined to the outcome"));
    }

    let group_key = |o: &Obs| -> String {
        match fit {
            FitScope::PerItem => o.item.to_string(),
            FitScope::PerSeries => format!("{}|{}|{}", o.item, o.model, o.prompt),
        }
    };
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, o) in observations.iter().enumerate() {
        groups.entry(group_key(o)).or_default().push(i);
    }

    let mut residuals = vec![0.0f64; observations.len()];
    let mut intercept_only = Vec::new();
    let n_groups = groups.len();
    for (key, idx) in groups {
        if idx.len() < 3 {
            return Err(Error::InsufficientData {
                what: "residualization fit group",
                needed: 3,
                got: idx.len(),
            });
        }
        let xs: Vec<f64> = idx.iter().map(|&i| observations[i].rating).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| observations[i].outcome).collect();
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let constant = xs.iter().all(|&x| x == xs[0]);
        if constant {
            intercept_only.push(key);
            for (&i, y) in idx.iter().zip(&ys) {
                residuals[i] = y - my;
            }
        } else {
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let slope = sxy / sxx;
            let intercept = my - slope * mx;
            for (&i, (&x, &y)) in idx.iter().zip(xs.iter().zip(&ys)) {
                residuals[i] = y - (intercept + slope * x);
            }
        }
    }

    let rows = observations
        .into_iter()
        .zip(residuals)
        .map(|(o, residual)| MisalignmentRow {
            unit: o.unit,
            item: o.item,
            model: o.model,
            prompt: o.prompt,
            rating: o.rating,
            outcome: o.outcome,
            residual,
        })
        .collect();
    Ok(MisalignmentPanel {
        rows,
        fit_scope: fit,
        n_groups,
        intercept_only_groups: intercept_only,
    })
}
