//! `align`: per-source concordance with the expert axis and the outcome axis.

use serde::Serialize;

use concordia::attenuation::{correct_alignment, stacked_reliability, ReliabilityEstimate};
use concordia::concordance::{kendall_tau_at, permutation_null_test, SignMatrix, TauResult};
use concordia::data::{join_series, OutcomeId, RaterId, SourceKey};
use concordia::Error;

use super::{require, scope_for, Ctx};
use crate::report::{fmt, write_json, CsvReport};

#[derive(Serialize)]
struct AlignRow {
    rater: String,
    family: String,
    task: String,
    prompt: Option<String>,
    expert: Option<TauResult>,
    outcome: Option<TauResult>,
    outcome_corrected: Option<f64>,
    /// One-sided permutation p for the outcome-axis tau, when requested.
    p: Option<f64>,
    skipped: Option<String>,
}

#[derive(Serialize)]
struct AlignReport {
    expert_rater: String,
    outcome: String,
    level: f64,
    reliability: Option<ReliabilityEstimate>,
    greiner: bool,
    rows: Vec<AlignRow>,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.require_level()?;
    let ratings = ctx.load_ratings_with_baselines()?;
    let outcomes = ctx.load_outcomes()?;
    let align = &ctx.cfg.align;
    let expert: RaterId = RaterId::new(require(&align.expert_rater, "align.expert_rater")?.clone());
    let outcome_id: OutcomeId = OutcomeId::new(require(&align.outcome, "align.outcome")?.clone());
    let level = align.level.unwrap_or(0.95);
    let scope = scope_for(align.year);

    if !ratings.raters().contains(&expert) {
        return Err(Error::UnknownId {
            kind: "expert rater",
            id: expert.to_string(),
        }
        .into());
    }
    let outcome_values = outcomes.values(&outcome_id, scope)?;

    // Optional noise ceiling for the outcome axis.
    let reliability = match &align.reliability_variants {
        Some((a, b)) => {
            let est = stacked_reliability(
                &outcomes,
                &OutcomeId::new(a.clone()),
                &OutcomeId::new(b.clone()),
                scope,
            )?;
            if !est.usable {
                return Err(Error::NonPositiveReliability(est.reliability).into());
            }
            Some(est)
        }
        None => None,
    };

    let sources: Vec<SourceKey> = ratings
        .sources()
        .into_iter()
        .filter(|s| s.rater_id != expert)
        .filter(|s| align.tasks.is_empty() || align.tasks.contains(&s.task_id.to_string()))
        .filter(|s| align.raters.is_empty() || align.raters.contains(&s.rater_id.to_string()))
        .collect();
    if sources.is_empty() {
        return Err(Error::Empty("alignment source selection").into());
    }

    let mut rows = Vec::with_capacity(sources.len());
    for source in &sources {
        let series = ratings.series(source);
        if align.dump_sign_matrices {
            dump_sign_matrix(ctx, source, &series)?;
        }
        let expert_series = match ratings.series_for(&expert, &source.task_id, None) {
            Ok(s) => Some(s),
            Err(Error::UnknownId { .. }) => None,
            Err(e) => return Err(e.into()),
        };

        let tau_of = |other: &std::collections::BTreeMap<_, f64>| match join_series(&series, other)
        {
            Ok(panel) => match kendall_tau_at(&panel.scores, &panel.outcomes, level) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            },
            Err(e) => (None, Some(e.to_string())),
        };

        let (expert_tau, skip_a) = match &expert_series {
            Some(s) => tau_of(s),
            None => (None, Some("expert has no series for this task".into())),
        };
        let (outcome_tau, skip_b) = tau_of(&outcome_values);
        let outcome_corrected = match (&outcome_tau, &reliability) {
            (Some(t), Some(rel)) => {
                Some(correct_alignment(t.tau, rel.reliability, align.greiner)?.tau_corrected)
            }
            _ => None,
        };
        let p = match (align.permutations, &outcome_tau) {
            (Some(m), Some(_)) => {
                let panel = join_series(&series, &outcome_values)?;
                Some(permutation_null_test(&panel.scores, &panel.outcomes, m, ctx.seed)?.p_value)
            }
            _ => None,
        };
        rows.push(AlignRow {
            rater: source.rater_id.to_string(),
            family: source.rater_family.to_string(),
            task: source.task_id.to_string(),
            prompt: source.prompt_id.as_ref().map(|p| p.to_string()),
            expert: expert_tau,
            outcome: outcome_tau,
            outcome_corrected,
            p,
            skipped: skip_a.or(skip_b),
        });
    }

    let mut csv = CsvReport::create(&ctx.out, "align.csv", &ctx.meta)?;
    csv.row([
        "rater",
        "family",
        "task",
        "prompt",
        "n_expert",
        "tau_expert",
        "expert_ci_low",
        "expert_ci_high",
        "n_outcome",
        "tau_outcome",
        "outcome_ci_low",
        "outcome_ci_high",
        "tau_outcome_corrected",
        "p",
    ])?;
    for r in &rows {
        let (ne, te, tel, teh) = tau_cells(&r.expert);
        let (no, to, tol, toh) = tau_cells(&r.outcome);
        csv.row([
            r.rater.clone(),
            r.family.clone(),
            r.task.clone(),
            r.prompt.clone().unwrap_or_default(),
            ne,
            te,
            tel,
            teh,
            no,
            to,
            tol,
            toh,
            r.outcome_corrected.map(fmt).unwrap_or_default(),
            r.p.map(fmt).unwrap_or_default(),
        ])?;
    }
    csv.finish()?;

    write_json(
        &ctx.out,
        "align.json",
        &ctx.meta,
        AlignReport {
            expert_rater: expert.to_string(),
            outcome: outcome_id.to_string(),
            level,
            reliability,
            greiner: align.greiner,
            rows,
        },
    )?;
    Ok(())
}

/// One sign matrix per source, units as both header and row labels.
fn dump_sign_matrix(
    ctx: &Ctx,
    source: &SourceKey,
    series: &std::collections::BTreeMap<concordia::data::UnitId, f64>,
) -> anyhow::Result<()> {
    let units: Vec<&concordia::data::UnitId> = series.keys().collect();
    let values: Vec<f64> = series.values().copied().collect();
    let matrix = match SignMatrix::from_values(&values) {
        Ok(m) => m,
        Err(_) => return Ok(()), // a single-unit series has no pairs
    };
    let prompt = source.prompt_id.as_ref().map_or(String::new(), |p| format!("_{p}"));
    let name = format!("sign_{}{}_{}.csv", source.rater_id, prompt, source.task_id);
    let mut csv = CsvReport::create(&ctx.out, &name, &ctx.meta)?;
    let mut header = vec!["unit".to_string()];
    header.extend(units.iter().map(|u| u.to_string()));
    csv.row(&header)?;
    for (i, unit) in units.iter().enumerate() {
        let mut row = vec![unit.to_string()];
        row.extend((0..units.len()).map(|j| matrix.entry(i, j).to_string()));
        csv.row(&row)?;
    }
    csv.finish()?;
    Ok(())
}

fn tau_cells(t: &Option<TauResult>) -> (String, String, String, String) {
    match t {
        None => (String::new(), String::new(), String::new(), String::new()),
        Some(t) => (
            t.n.to_string(),
            fmt(t.tau),
            t.ci.map(|c| fmt(c.low)).unwrap_or_default(),
            t.ci.map(|c| fmt(c.high)).unwrap_or_default(),
        ),
    }
}
