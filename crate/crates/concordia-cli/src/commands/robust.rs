//! `robust`: the seven-test battery per rating panel, one table row per
//! panel.

use serde::Serialize;

use concordia::data::{join_series, OutcomeId, RaterFamily, RaterId, SourceKey, TaskId};
use concordia::robustness::{robustness_battery, BatteryConfig, RobustnessReport};
use concordia::Error;

use super::{require, scope_for, Ctx};
use crate::report::{write_json, CsvReport};

#[derive(Serialize)]
struct PanelReport {
    rater: String,
    task: String,
    prompt: Option<String>,
    report: RobustnessReport,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.require_level()?;
    let ratings = ctx.load_ratings_with_baselines()?;
    let outcomes = ctx.load_outcomes()?;
    let rc = &ctx.cfg.robust;
    let outcome_id = OutcomeId::new(require(&rc.outcome, "robust.outcome")?.clone());
    let scope = scope_for(rc.year);
    let outcome_values = outcomes.values(&outcome_id, scope)?;
    let battery = BatteryConfig {
        permutations: rc.permutations.unwrap_or(999),
        bootstrap: rc.bootstrap.unwrap_or(999),
        seed: ctx.seed,
        null_quantile: rc.null_quantile.unwrap_or(0.05),
        ..BatteryConfig::default()
    };
    let baseline_rater = rc.baseline_rater.as_ref().map(|r| RaterId::new(r.clone()));

    // Default selection: human panels, the battery's usual subject.
    let sources: Vec<SourceKey> = ratings
        .sources()
        .into_iter()
        .filter(|s| {
            if rc.raters.is_empty() {
                s.rater_family == RaterFamily::Human
            } else {
                rc.raters.contains(&s.rater_id.to_string())
            }
        })
        .filter(|s| rc.tasks.is_empty() || rc.tasks.contains(&s.task_id.to_string()))
        .collect();
    if sources.is_empty() {
        return Err(Error::Empty("robustness panel selection").into());
    }

    let mut panels = Vec::new();
    for source in &sources {
        let series = ratings.series(source);
        let panel = join_series(&series, &outcome_values)?;
        let baseline_scores: Option<Vec<f64>> = match &baseline_rater {
            Some(b) => baseline_on_units(&ratings, b, &source.task_id, &panel.unit_ids)?,
            None => None,
        };
        let report = robustness_battery(
            &panel.scores,
            &panel.outcomes,
            baseline_scores.as_deref(),
            &battery,
        )?;
        panels.push(PanelReport {
            rater: source.rater_id.to_string(),
            task: source.task_id.to_string(),
            prompt: source.prompt_id.as_ref().map(|p| p.to_string()),
            report,
        });
    }

    let mut csv = CsvReport::create(&ctx.out, "robust.csv", &ctx.meta)?;
    csv.row([
        "panel",
        "tau_positive",
        "lower_90_ci_positive",
        "theil_sen_positive",
        "repeated_median_positive",
        "tau_above_random",
        "tau_at_least_baseline",
        "quartile_gap_positive",
        "pass_rate",
    ])?;
    for p in &panels {
        let mut row = vec![format!("{}:{}", p.rater, p.task)];
        row.extend(p.report.tests.iter().map(|t| t.table_cell()));
        row.push(p.report.pass_rate_cell());
        csv.row(&row)?;
    }
    csv.finish()?;

    write_json(&ctx.out, "robust.json", &ctx.meta, panels)?;
    Ok(())
}

/// Baseline scores aligned to the panel's units; None when the baseline has
/// no series for the task.
fn baseline_on_units(
    ratings: &concordia::data::RatingsTable,
    baseline: &RaterId,
    task: &TaskId,
    units: &[concordia::data::UnitId],
) -> anyhow::Result<Option<Vec<f64>>> {
    match ratings.series_for(baseline, task, None) {
        Ok(series) => {
            let mut values = Vec::with_capacity(units.len());
            for unit in units {
                match series.get(unit) {
                    Some(v) => values.push(*v),
                    None => return Ok(None), // partial coverage: skip the test
                }
            }
            Ok(Some(values))
        }
        Err(Error::UnknownId { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}
