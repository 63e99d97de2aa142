//! `dcor`: pairwise dependence matrix, clustering, and the six-cell summary.

use serde::Serialize;

use concordia::cluster::{complete_linkage, Dendrogram};
use concordia::dependence::{
    bonferroni, dependence_summary, pairwise_dependence, DependenceSummary, PairwiseOptions,
};

use super::Ctx;
use crate::report::{fmt, write_json, CsvReport};

#[derive(Serialize)]
struct DcorReport {
    labels: Vec<String>,
    leaf_order: Vec<String>,
    n_undefined: usize,
    alpha: Option<f64>,
    permutations: usize,
    summary: DependenceSummary,
    dendrogram: Dendrogram,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.require_level()?;
    let ratings = ctx.load_ratings()?;
    let opts = PairwiseOptions {
        min_n: ctx.cfg.dcor.min_n.unwrap_or(4),
        permutations: ctx.cfg.dcor.permutations.unwrap_or(10_000),
        seed: ctx.seed,
    };
    let matrix = pairwise_dependence(&ratings, opts)?;
    let summary = dependence_summary(&ratings, opts.min_n)?;

    // Cluster on dissimilarity 1 - dcor2; undefined pairs sit at distance 2.
    let k = matrix.labels.len();
    let mut dissim = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let d = matrix.dcor2[i][j];
                dissim[i][j] = if d.is_nan() { 2.0 } else { 1.0 - d };
            }
        }
    }
    let dendrogram = complete_linkage(&matrix.labels, &dissim)?;
    let order = dendrogram.leaf_order.clone();

    // Bonferroni mask over the upper-triangle family of tests.
    let mask = match (ctx.cfg.dcor.alpha, &matrix.p_values) {
        (Some(alpha), Some(p)) => {
            let mut family = Vec::new();
            for i in 0..k {
                for j in (i + 1)..k {
                    if !p[i][j].is_nan() {
                        family.push(p[i][j]);
                    }
                }
            }
            let flags = bonferroni(&family, alpha)?;
            let mut significant = vec![vec![true; k]; k];
            let mut it = flags.iter();
            for i in 0..k {
                for j in (i + 1)..k {
                    if !p[i][j].is_nan() {
                        let f = *it.next().expect("family aligned");
                        significant[i][j] = f;
                        significant[j][i] = f;
                    }
                }
            }
            Some(significant)
        }
        _ => None,
    };

    // Matrix CSV in leaf order; masked cells are blank.
    let mut csv = CsvReport::create(&ctx.out, "dcor_matrix.csv", &ctx.meta)?;
    let mut header = vec!["source".to_string()];
    header.extend(order.iter().map(|&i| matrix.labels[i].clone()));
    csv.row(&header)?;
    for &i in &order {
        let mut row = vec![matrix.labels[i].clone()];
        for &j in &order {
            let visible = mask.as_ref().map_or(true, |m| m[i][j]);
            let v = matrix.dcor2[i][j];
            row.push(if visible { fmt(v) } else { String::new() });
        }
        csv.row(&row)?;
    }
    csv.finish()?;

    if let Some(p) = &matrix.p_values {
        let mut csv = CsvReport::create(&ctx.out, "dcor_pvalues.csv", &ctx.meta)?;
        csv.row(&header)?;
        for &i in &order {
            let mut row = vec![matrix.labels[i].clone()];
            for &j in &order {
                row.push(fmt(p[i][j]));
            }
            csv.row(&row)?;
        }
        csv.finish()?;
    }

    write_json(
        &ctx.out,
        "dcor_summary.json",
        &ctx.meta,
        DcorReport {
            labels: matrix.labels.clone(),
            leaf_order: dendrogram.ordered_labels(),
            n_undefined: matrix.n_undefined,
            alpha: ctx.cfg.dcor.alpha,
            permutations: opts.permutations,
            summary,
            dendrogram,
        },
    )?;
    Ok(())
}
