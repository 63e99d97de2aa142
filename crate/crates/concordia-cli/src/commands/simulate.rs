//! `simulate`: write synthetic rating/outcome bundles with planted truth, so
//! every other subcommand can be exercised end to end without real data.

use std::collections::BTreeMap;

use serde::Serialize;

use concordia::data::{
    OutcomeId, OutcomeRow, OutcomeTable, PromptId, RaterFamily, RaterId, RatingRecord,
    RatingsTable, TaskId, UnitId,
};
use concordia::synth::{
    gen_crossed, gen_shared_bias_panel, gen_tau_pair, standard_normal_vec, CopulaSpec,
    PlantedDesign, SharedBiasSpec,
};
use concordia::Error;

use super::Ctx;
use crate::report::write_json;

#[derive(Serialize)]
struct BundleInfo {
    preset: String,
    ratings: String,
    outcomes: String,
    truth: serde_json::Value,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let sc = &ctx.cfg.simulate;
    let preset = sc.preset.clone().unwrap_or_else(|| "shared-bias".into());
    let info = match preset.as_str() {
        "shared-bias" => shared_bias(ctx)?,
        "crossed" => crossed(ctx)?,
        "tau-pair" => tau_pair(ctx)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (shared-bias | crossed | tau-pair)"
            ))
            .into())
        }
    };
    write_json(&ctx.out, "simulate.json", &ctx.meta, info)?;
    Ok(())
}

fn shared_bias(ctx: &Ctx) -> anyhow::Result<BundleInfo> {
    let sc = &ctx.cfg.simulate;
    let spec = SharedBiasSpec {
        k_raters: sc.k_raters.unwrap_or(3),
        shared_bias_weight: sc.shared_bias_weight.unwrap_or(1.5),
        signal_weight: sc.signal_weight.unwrap_or(-0.6),
        idiosyncratic_sd: sc.idiosyncratic_sd.unwrap_or(1.5),
        n_units: sc.n_units.unwrap_or(400),
        bins: sc.bins,
        task: sc.task.clone().unwrap_or_else(|| "SYNTH".into()),
        seed: ctx.seed,
    };
    let panel = gen_shared_bias_panel(&spec)?;
    panel.ratings.write_csv_path(ctx.out.join("ratings.csv"))?;
    panel.outcomes.write_csv_path(ctx.out.join("outcomes.csv"))?;
    Ok(BundleInfo {
        preset: "shared-bias".into(),
        ratings: "ratings.csv".into(),
        outcomes: "outcomes.csv".into(),
        truth: serde_json::to_value(&spec)?,
    })
}

/// Fully crossed ratings with planted variance components; the outcome is a
/// per-unit normal that leaks into every rating with a fixed slope, so the
/// residualization step has real structure to remove.
fn crossed(ctx: &Ctx) -> anyhow::Result<BundleInfo> {
    const OUTCOME_SLOPE: f64 = 0.5;
    let sc = &ctx.cfg.simulate;
    let mut variances = sc.variances.clone();
    if variances.is_empty() {
        variances.insert("unit".into(), 1.0);
        variances.insert("model".into(), 0.25);
        variances.insert("prompt".into(), 0.05);
    }
    let planted = PlantedDesign {
        factors: vec![
            ("unit".into(), sc.units.unwrap_or(50)),
            ("item".into(), sc.items.unwrap_or(4)),
            ("model".into(), sc.models.unwrap_or(3)),
            ("prompt".into(), sc.prompts.unwrap_or(8)),
        ],
        variances,
        residual: sc.residual.unwrap_or(1.0),
        seed: ctx.seed,
    };
    let (data, truth) = gen_crossed(&planted)?;
    let design = data.design();
    let n_units = design.factors()[0].levels;

    let outcome_values = standard_normal_vec(ctx.seed, "simulate-outcome", n_units);

    let mut records = Vec::with_capacity(data.n_obs());
    for (cell, value) in data.values().iter().enumerate() {
        let levels = design.cell_levels(cell);
        let (u, i, m, p) = (levels[0], levels[1], levels[2], levels[3]);
        records.push(RatingRecord {
            rater_id: RaterId::new(format!("model_{:02}", m + 1)),
            rater_family: RaterFamily::Model,
            task_id: TaskId::new(format!("item_{:02}", i + 1)),
            unit_id: UnitId::new(format!("u{u:04}")),
            prompt_id: Some(PromptId::new(format!("p{:02}", p + 1))),
            score: value + OUTCOME_SLOPE * outcome_values[u],
        });
    }
    let ratings = RatingsTable::new(records, BTreeMap::new())?;
    ratings.write_csv_path(ctx.out.join("ratings.csv"))?;

    let outcome_id = OutcomeId::new("OUTCOME");
    let outcomes = OutcomeTable::new(
        outcome_values
            .iter()
            .enumerate()
            .map(|(u, v)| OutcomeRow {
                unit_id: UnitId::new(format!("u{u:04}")),
                outcome_id: outcome_id.clone(),
                value: *v,
                year: None,
            })
            .collect(),
    )?;
    outcomes.write_csv_path(ctx.out.join("outcomes.csv"))?;

    Ok(BundleInfo {
        preset: "crossed".into(),
        ratings: "ratings.csv".into(),
        outcomes: "outcomes.csv".into(),
        truth: serde_json::json!({
            "planted": planted,
            "realized": truth,
            "outcome_slope": OUTCOME_SLOPE,
        }),
    })
}

fn tau_pair(ctx: &Ctx) -> anyhow::Result<BundleInfo> {
    let sc = &ctx.cfg.simulate;
    let spec = CopulaSpec {
        target_tau: sc.target_tau.unwrap_or(0.3),
        n: sc.n.unwrap_or(500),
        bins: sc.bins,
    };
    let pair = gen_tau_pair(&spec, ctx.seed)?;
    let task = TaskId::new(sc.task.clone().unwrap_or_else(|| "SYNTH".into()));
    let records: Vec<RatingRecord> = pair
        .x
        .iter()
        .enumerate()
        .map(|(u, score)| RatingRecord {
            rater_id: RaterId::new("model_01"),
            rater_family: RaterFamily::Model,
            task_id: task.clone(),
            unit_id: UnitId::new(format!("u{u:04}")),
            prompt_id: Some(PromptId::new("base")),
            score: *score,
        })
        .collect();
    RatingsTable::new(records, BTreeMap::new())?.write_csv_path(ctx.out.join("ratings.csv"))?;
    let outcome_id = OutcomeId::new("OUTCOME");
    OutcomeTable::new(
        pair.y
            .iter()
            .enumerate()
            .map(|(u, v)| OutcomeRow {
                unit_id: UnitId::new(format!("u{u:04}")),
                outcome_id: outcome_id.clone(),
                value: *v,
                year: None,
            })
            .collect(),
    )?
    .write_csv_path(ctx.out.join("outcomes.csv"))?;
    Ok(BundleInfo {
        preset: "tau-pair".into(),
        ratings: "ratings.csv".into(),
        outcomes: "outcomes.csv".into(),
        truth: serde_json::json!({
            "target_tau": spec.target_tau,
            "rho": pair.rho,
            "expected_tau": pair.expected_tau,
            "expected_tau_uncorrected": pair.expected_tau_uncorrected,
            "bins": spec.bins,
        }),
    })
}
