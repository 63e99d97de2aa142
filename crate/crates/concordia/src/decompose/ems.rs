//! Closed-form variance components for balanced crossed designs.
//!
//! Each term's sum of squares comes from the Moebius alternating sum of
//! squared group means; expected mean squares for an all-random balanced
//! design solve top-down:
//!
//! `E[MS_S] = sigma2_eps + r * sum over terms T containing S of
//!  (product of levels outside T) * sigma2_T`
//!
//! With one observation per cell the highest interaction is confounded with
//! the residual and reported as a single residual term. Negative solutions
//! are truncated to zero for reporting, with the raw value retained, and the
//! raw values are what the recursion uses.

use serde::Serialize;

use crate::error::{Error, Result};

use super::design::CrossedData;

/// One estimated variance component.
#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub name: String,
    /// Factor names in the term; empty for the residual.
    pub factors: Vec<String>,
    /// Truncated-at-zero estimate.
    pub sigma2: f64,
    /// Untruncated solution of the EMS system.
    pub raw: f64,
    pub truncated: bool,
    /// Share of the truncated total.
    pub proportion: f64,
    pub sum_sq: f64,
    pub df: f64,
    pub mean_square: f64,
    /// For one observation per cell, the interaction the residual absorbs.
    pub confounded_with: Option<String>,
}

/// Full decomposition: named terms in canonical order, residual last.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceComponents {
    pub components: Vec<Component>,
    /// Sum of truncated estimates.
    pub total: f64,
    pub n_obs: usize,
    pub replicates: usize,
    /// Total corrected sum of squares, for the additivity invariant.
    pub total_sum_sq: f64,
}

impl VarianceComponents {
    pub fn get(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn residual(&self) -> &Component {
        self.components
            .last()
            .expect("decomposition always has a residual")
    }
}

/// Solve the balanced-design expected-mean-square system.
///
/// Unbalanced data is rejected here; the Gibbs sampler handles those designs.
pub fn ems_components(data: &CrossedData) -> Result<VarianceComponents> {
    let r = data.balance().ok_or_else(|| {
        Error::UnbalancedDesign(
            "cells are unevenly filled; use the Bayesian sampler for unbalanced designs".into(),
        )
    })?;
    let design = data.design();
    let values = data.values();
    let n = data.n_obs() as f64;
    let masks = data.term_masks().to_vec();
    let full = design.full_mask();

    let grand_sum: f64 = values.iter().sum();
    let sum_sq_values: f64 = values.iter().map(|v| v * v).sum();
    let u_empty = grand_sum * grand_sum / n;

    // U_S = sum over groups of (group sum)^2 / (obs per group).
    let mut u = vec![0.0f64; (full + 1) as usize];
    for (pos, &mask) in masks.iter().enumerate() {
        let size = design.term_size(mask);
        let mut sums = vec![0.0f64; size];
        for (obs, &g) in data.obs_groups(pos).iter().enumerate() {
            sums[g as usize] += values[obs];
        }
        let per_group = n / size as f64;
        u[mask as usize] = sums.iter().map(|s| s * s / per_group).sum();
    }

    // SS_S via the alternating submask sum, df_S as the product of (levels-1).
    let mut ss = vec![0.0f64; (full + 1) as usize];
    let mut df = vec![0.0f64; (full + 1) as usize];
    for &mask in &masks {
        let mut acc = 0.0;
        let mut sub = mask;
        loop {
            let term = if sub == 0 { u_empty } else { u[sub as usize] };
            let sign = if (mask.count_ones() - sub.count_ones()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            acc += sign * term;
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
        ss[mask as usize] = acc;
        df[mask as usize] = design
            .mask_factor_levels(mask)
            .iter()
            .map(|&l| l as f64 - 1.0)
            .product();
    }

    let ss_within = sum_sq_values - u[full as usize];
    let df_within = n - design.cells() as f64;

    // Solve for raw components from the largest terms down.
    let mut order = masks.clone();
    order.sort_by_key(|m| std::cmp::Reverse((m.count_ones(), *m)));
    let mut raw = vec![0.0f64; (full + 1) as usize];
    let eps_raw = if r > 1 { ss_within / df_within } else { 0.0 };
    for &mask in &order {
        if r == 1 && mask == full {
            raw[mask as usize] = ss[mask as usize] / df[mask as usize];
            continue;
        }
        let ms = ss[mask as usize] / df[mask as usize];
        let mut higher = if r > 1 { eps_raw } else { 0.0 };
        for &other in &masks {
            if other != mask && (other & mask) == mask {
                let coeff = r as f64 * design.complement_size(other) as f64;
                higher += coeff * raw[other as usize];
            }
        }
        let coeff = r as f64 * design.complement_size(mask) as f64;
        raw[mask as usize] = (ms - higher) / coeff;
    }

    // Assemble the report: named terms in canonical order, residual last.
    let mut components = Vec::with_capacity(masks.len() + 1);
    for &mask in &masks {
        if r == 1 && mask == full {
            continue;
        }
        let value = raw[mask as usize];
        components.push(Component {
            name: design.term_name(mask),
            factors: design.factor_names_of(mask),
            sigma2: value.max(0.0),
            raw: value,
            truncated: value < 0.0,
            proportion: 0.0,
            sum_sq: ss[mask as usize],
            df: df[mask as usize],
            mean_square: ss[mask as usize] / df[mask as usize],
            confounded_with: None,
        });
    }
    if r == 1 {
        let value = raw[full as usize];
        components.push(Component {
            name: "residual".into(),
            factors: Vec::new(),
            sigma2: value.max(0.0),
            raw: value,
            truncated: value < 0.0,
            proportion: 0.0,
            sum_sq: ss[full as usize],
            df: df[full as usize],
            mean_square: ss[full as usize] / df[full as usize],
            confounded_with: Some(design.term_name(full)),
        });
    } else {
        components.push(Component {
            name: "residual".into(),
            factors: Vec::new(),
            sigma2: eps_raw.max(0.0),
            raw: eps_raw,
            truncated: eps_raw < 0.0,
            proportion: 0.0,
            sum_sq: ss_within,
            df: df_within,
            mean_square: eps_raw,
            confounded_with: None,
        });
    }

    let total: f64 = components.iter().map(|c| c.sigma2).sum();
    if total > 0.0 {
        for c in &mut components {
            c.proportion = c.sigma2 / total;
        }
    }
    Ok(VarianceComponents {
        components,
        total,
        n_obs: data.n_obs(),
        replicates: r,
        total_sum_sq: sum_sq_values - u_empty,
    })
}
