//! `ensemble`: build the configured ensembles, write the derived sources as
//! canonical rating CSVs, and compare their alignment against the members'.

use serde::Serialize;

use concordia::data::{OutcomeId, TaskId};
use concordia::ensemble::{build_ensemble, ensemble_alignment_compare, EnsembleComparison};
use concordia::Error;

use super::{scope_for, Ctx};
use crate::report::write_json;

#[derive(Serialize)]
struct EnsembleReport {
    name: String,
    rule: String,
    coverage: f64,
    n_dropped_units: usize,
    empty_tasks: Vec<String>,
    csv: String,
    comparisons: Vec<TaskComparison>,
}

#[derive(Serialize)]
struct TaskComparison {
    task: String,
    narrative: String,
    comparison: EnsembleComparison,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.require_level()?;
    let ratings = ctx.load_ratings()?;
    let ec = &ctx.cfg.ensemble;
    if ec.specs.is_empty() {
        return Err(Error::Empty("ensemble.specs").into());
    }
    let scope = scope_for(ec.year);
    let bootstrap = ec.bootstrap.unwrap_or(999);

    let mut reports = Vec::new();
    for spec in &ec.specs {
        let result = build_ensemble(&ratings, spec)?;
        let file_name = format!("ensemble_{}.csv", spec.name);
        result.table.write_csv_path(ctx.out.join(&file_name))?;

        let mut comparisons = Vec::new();
        if let Some(outcome) = &ec.outcome {
            let outcomes = ctx.load_outcomes()?;
            let outcome_id = OutcomeId::new(outcome.clone());
            let tasks: Vec<TaskId> = if ec.tasks.is_empty() {
                result.table.tasks()
            } else {
                ec.tasks.iter().map(|t| TaskId::new(t.clone())).collect()
            };
            for task in tasks {
                let comparison = ensemble_alignment_compare(
                    &ratings,
                    &result,
                    &spec.name,
                    &spec.members,
                    &task,
                    &outcomes,
                    &outcome_id,
                    scope,
                    bootstrap,
                    ctx.seed,
                );
                match comparison {
                    Ok(c) => comparisons.push(TaskComparison {
                        task: task.to_string(),
                        narrative: c.narrative(),
                        comparison: c,
                    }),
                    // An empty unanimous subset is a finding, not a failure.
                    Err(Error::InsufficientData { .. }) if result.coverage == 0.0 => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        reports.push(EnsembleReport {
            name: spec.name.to_string(),
            rule: format!("{:?}", spec.rule).to_lowercase(),
            coverage: result.coverage,
            n_dropped_units: result.n_dropped_units,
            empty_tasks: result.empty_tasks.iter().map(|t| t.to_string()).collect(),
            csv: file_name,
            comparisons,
        });
    }
    write_json(&ctx.out, "ensemble.json", &ctx.meta, reports)?;
    Ok(())
}
