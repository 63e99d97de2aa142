//! `decompose`: misalignment residuals, variance components by the
//! closed-form and sampler paths, and the derived shares.

use std::io::Write;

use serde::Serialize;

use concordia::data::OutcomeId;
use concordia::decompose::{
    bayes_components, derived_shares, derived_shares_posterior, ems_components,
    misalignment_residuals, FactorLabels, FitScope, GibbsConfig, PosteriorShares,
    PosteriorSummary, SharesReport, SharesSpec, VarianceComponents,
};
use concordia::Error;

use super::{require, scope_for, Ctx};
use crate::report::{fmt, write_json, CsvReport};

#[derive(Serialize)]
struct DecomposeReport {
    fit_scope: FitScope,
    n_rows: usize,
    n_fit_groups: usize,
    intercept_only_groups: Vec<String>,
    labels: FactorLabels,
    balanced: Option<usize>,
    ems: Option<VarianceComponents>,
    ems_shares: Option<SharesReport>,
    posterior: Option<PosteriorSummary>,
    posterior_shares: Option<PosteriorShares>,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.require_level()?;
    let ratings = ctx.load_ratings()?;
    let outcomes = ctx.load_outcomes()?;
    let dc = &ctx.cfg.decompose;
    let outcome_id = OutcomeId::new(require(&dc.outcome, "decompose.outcome")?.clone());
    let fit = match dc.fit_scope.as_deref() {
        None | Some("per_item") => FitScope::PerItem,
        Some("per_series") => FitScope::PerSeries,
        Some(other) => {
            return Err(Error::InvalidParameter(format!(
                "unknown fit scope '{other}' (per_item | per_series)"
            ))
            .into())
        }
    };

    let panel = misalignment_residuals(&ratings, &outcomes, &outcome_id, scope_for(dc.year), fit)?;
    let (data, labels) = panel.to_crossed()?;

    // The generalizability ratio needs its numerator factor in the design;
    // a configured numerator missing from the data is the caller's error,
    // but the default falls back to any surviving lever factor.
    let design_factors: Vec<String> = data
        .design()
        .factors()
        .iter()
        .map(|f| f.name.clone())
        .collect();
    let ratio_numerator = match &dc.ratio_numerator {
        Some(explicit) => {
            if !design_factors.contains(explicit) {
                return Err(Error::UnknownId {
                    kind: "ratio numerator factor",
                    id: explicit.clone(),
                }
                .into());
            }
            Some(explicit.clone())
        }
        None => {
            if design_factors.iter().any(|f| f == "prompt") {
                Some("prompt".to_string())
            } else {
                dc.lever_factors
                    .iter()
                    .find(|f| design_factors.contains(f))
                    .cloned()
            }
        }
    };
    let shares_spec = ratio_numerator.map(|numerator| SharesSpec {
        lever_factors: dc.lever_factors.clone(),
        ratio_numerator: numerator,
        ratio_denominator: dc.ratio_denominator.clone(),
    });

    let (ems, ems_shares) = match ems_components(&data) {
        Ok(vc) => {
            let shares = match &shares_spec {
                Some(spec) => Some(derived_shares(&vc, spec)?),
                None => None,
            };
            (Some(vc), shares)
        }
        Err(Error::UnbalancedDesign(_)) => (None, None),
        Err(e) => return Err(e.into()),
    };

    let (posterior, posterior_shares) = if dc.skip_bayes {
        (None, None)
    } else {
        let iterations = dc.iterations.unwrap_or(2000);
        let cfg = GibbsConfig {
            chains: dc.chains.unwrap_or(4),
            iterations,
            warmup: dc.warmup.unwrap_or(iterations / 2),
            seed: ctx.seed,
            allow_nonconverged: dc.allow_nonconverged,
            ..GibbsConfig::default()
        };
        let summary = bayes_components(&data, &cfg)?;
        let shares = match &shares_spec {
            Some(spec) => Some(derived_shares_posterior(&summary, spec)?),
            None => None,
        };
        if dc.dump_draws {
            dump_draws(ctx, &summary)?;
        }
        (Some(summary), shares)
    };

    // Component table: term, sigma^2, percent of total.
    let mut csv = CsvReport::create(&ctx.out, "decompose_components.csv", &ctx.meta)?;
    csv.row(["term", "sigma2", "raw", "truncated", "percent_of_total"])?;
    if let Some(vc) = &ems {
        for c in &vc.components {
            csv.row([
                c.name.clone(),
                fmt(c.sigma2),
                fmt(c.raw),
                c.truncated.to_string(),
                fmt(100.0 * c.proportion),
            ])?;
        }
    } else if let Some(post) = &posterior {
        // Unbalanced path: report posterior medians in the same shape.
        let total: f64 = post.terms.iter().map(|t| t.median).sum();
        for t in &post.terms {
            csv.row([
                t.name.clone(),
                fmt(t.median),
                fmt(t.median),
                "false".to_string(),
                fmt(100.0 * t.median / total),
            ])?;
        }
    }
    csv.finish()?;

    write_json(
        &ctx.out,
        "decompose.json",
        &ctx.meta,
        DecomposeReport {
            fit_scope: fit,
            n_rows: panel.rows.len(),
            n_fit_groups: panel.n_groups,
            intercept_only_groups: panel.intercept_only_groups.clone(),
            labels,
            balanced: data.balance(),
            ems,
            ems_shares,
            posterior,
            posterior_shares,
        },
    )?;
    Ok(())
}

/// Columnar dump of pooled posterior draws: one column per term.
fn dump_draws(ctx: &Ctx, summary: &PosteriorSummary) -> anyhow::Result<()> {
    let path = ctx.out.join("decompose_draws.tsv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "{}", ctx.meta.csv_line())?;
    let names: Vec<String> = summary.terms.iter().map(|t| t.name.clone()).collect();
    writeln!(w, "{}", names.join("\t"))?;
    let n = summary.term_draws(0).len();
    for d in 0..n {
        let row: Vec<String> = (0..names.len())
            .map(|t| fmt(summary.term_draws(t)[d]))
            .collect();
        writeln!(w, "{}", row.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}
