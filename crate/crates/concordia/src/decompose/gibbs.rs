//! Gibbs sampler for crossed random-intercept designs.
//!
//! The model puts an independent zero-mean normal effect vector on every
//! term (main effects and interactions up to one below the full cross) plus
//! a residual. Component standard deviations carry half-Student-t(df, scale)
//! priors, realized through a normal-times-inverse-gamma parameter
//! expansion: each term's effect is `xi * eta` with `eta ~ N(0, 1)` and
//!
//! `xi | q ~ N(0, scale^2 q)`, `q ~ InvGamma(df/2, df/2)`,
//!
//! so `|xi|` is half-t distributed and the component variance is `xi^2`.
//! Every full conditional is conjugate: effect levels and `xi` are normal
//! draws, the auxiliaries are inverse-gamma draws. Two interweaving moves
//! per term (the location split against the grand mean, and a centered
//! redraw of the scale along the `xi * eta` orbit) keep both near-zero and
//! strongly identified components mixing. Chains run independently in
//! parallel from per-chain substreams, so results do not depend on thread
//! scheduling.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::util::{median_of_sorted, quantile};

use super::design::CrossedData;
use super::rhat::split_rank_normalized_rhat;

/// Sampler configuration. Defaults: 4 chains of 2000 iterations with half
/// discarded as warmup, half-t(3, 2.5) priors, convergence ceiling 1.075.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GibbsConfig {
    pub chains: usize,
    /// Total iterations per chain, including warmup.
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Degrees of freedom of the half-t prior on component sds.
    pub prior_df: f64,
    /// Scale of the half-t prior on component sds.
    pub prior_scale: f64,
    /// Largest acceptable split R-hat.
    pub rhat_threshold: f64,
    /// Return the summary instead of failing when the threshold is exceeded.
    pub allow_nonconverged: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 2000,
            warmup: 1000,
            seed: 0,
            prior_df: 3.0,
            prior_scale: 2.5,
            rhat_threshold: 1.075,
            allow_nonconverged: false,
        }
    }
}

/// Posterior summary of one scalar.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    /// Central 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub rhat: f64,
}

/// Posterior of the variance decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub mu: ScalarSummary,
    /// Variance components: named terms in canonical order, residual last.
    pub terms: Vec<ScalarSummary>,
    /// Factor names per term (empty for the residual), for lever selection.
    pub term_factors: Vec<Vec<String>>,
    pub max_rhat: f64,
    pub converged: bool,
    pub rhat_threshold: f64,
    pub chains: usize,
    pub kept_per_chain: usize,
    /// Pooled post-warmup draws per term, aligned with `terms`.
    #[serde(skip)]
    draws: Vec<Vec<f64>>,
}

impl PosteriorSummary {
    /// Pooled post-warmup sigma^2 draws for the term at `index`.
    pub fn term_draws(&self, index: usize) -> &[f64] {
        &self.draws[index]
    }

    pub fn term(&self, name: &str) -> Option<&ScalarSummary> {
        self.terms.iter().find(|t| t.name == name)
    }
}

struct ChainDraws {
    mu: Vec<f64>,
    /// `sigma2[term][draw]`.
    sigma2: Vec<Vec<f64>>,
}

/// Run the sampler and summarize. Fails loudly when any scalar's split
/// R-hat exceeds the ceiling, unless the config allows nonconvergence.
pub fn bayes_components(data: &CrossedData, cfg: &GibbsConfig) -> Result<PosteriorSummary> {
    if cfg.chains < 2 {
        return Err(Error::InvalidParameter("need at least 2 chains".into()));
    }
    if cfg.warmup >= cfg.iterations {
        return Err(Error::InvalidParameter(
            "warmup must be below total iterations".into(),
        ));
    }
    if !(cfg.prior_df > 0.0 && cfg.prior_scale > 0.0) {
        return Err(Error::InvalidParameter("prior df and scale must be positive".into()));
    }
    let design = data.design();
    // With one observation per cell, the full interaction is confounded with
    // the residual; exclude it from the modeled terms.
    let modeled: Vec<usize> = data
        .term_masks()
        .iter()
        .enumerate()
        .filter(|(_, &mask)| data.balance() != Some(1) || mask != design.full_mask())
        .map(|(pos, _)| pos)
        .collect();
    let n_terms = modeled.len();

    let chains: Vec<ChainDraws> = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|chain| run_chain(data, &modeled, cfg, stream_rng(cfg.seed, "gibbs-chain", chain)))
        .collect();

    let kept = cfg.iterations - cfg.warmup;
    let mut summaries = Vec::with_capacity(n_terms + 1);
    let mut draws_out = Vec::with_capacity(n_terms + 1);
    let mut term_factors = Vec::with_capacity(n_terms + 1);
    let mut max_rhat = f64::MIN;

    let mu_chains: Vec<Vec<f64>> = chains.iter().map(|c| c.mu.clone()).collect();
    let mu_summary = summarize("mu", &mu_chains, &mut max_rhat);

    for (out_idx, &pos) in modeled.iter().enumerate() {
        let mask = data.term_masks()[pos];
        let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.sigma2[out_idx].clone()).collect();
        let name = design.term_name(mask);
        summaries.push(summarize(&name, &per_chain, &mut max_rhat));
        draws_out.push(per_chain.into_iter().flatten().collect());
        term_factors.push(design.factor_names_of(mask));
    }
    // Residual is stored after the modeled terms inside each chain.
    let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.sigma2[n_terms].clone()).collect();
    summaries.push(summarize("residual", &per_chain, &mut max_rhat));
    draws_out.push(per_chain.into_iter().flatten().collect());
    term_factors.push(Vec::new());

    let converged = max_rhat <= cfg.rhat_threshold;
    if !converged && !cfg.allow_nonconverged {
        return Err(Error::NotConverged {
            max_rhat,
            threshold: cfg.rhat_threshold,
        });
    }
    Ok(PosteriorSummary {
        mu: mu_summary,
        terms: summaries,
        term_factors,
        max_rhat,
        converged,
        rhat_threshold: cfg.rhat_threshold,
        chains: cfg.chains,
        kept_per_chain: kept,
        draws: draws_out,
    })
}

fn summarize(name: &str, per_chain: &[Vec<f64>], max_rhat: &mut f64) -> ScalarSummary {
    let rhat = split_rank_normalized_rhat(per_chain);
    if rhat > *max_rhat {
        *max_rhat = rhat;
    }
    let mut pooled: Vec<f64> = per_chain.iter().flatten().copied().collect();
    pooled.sort_by(|a, b| a.total_cmp(b));
    ScalarSummary {
        name: name.to_owned(),
        mean: pooled.iter().sum::<f64>() / pooled.len() as f64,
        median: median_of_sorted(&pooled),
        ci_low: quantile(&pooled, 0.025),
        ci_high: quantile(&pooled, 0.975),
        rhat,
    }
}

fn run_chain(
    data: &CrossedData,
    modeled: &[usize],
    cfg: &GibbsConfig,
    mut rng: ChaCha8Rng,
) -> ChainDraws {
    let design = data.design();
    let values = data.values();
    let n = values.len() as f64;
    let nu = cfg.prior_df;
    let scale_sq = cfg.prior_scale * cfg.prior_scale;
    let normal = StandardNormal;

    // Per modeled term: group count, per-group observation counts.
    let sizes: Vec<usize> = modeled
        .iter()
        .map(|&pos| design.term_size(data.term_masks()[pos]))
        .collect();
    let group_counts: Vec<Vec<f64>> = modeled
        .iter()
        .zip(&sizes)
        .map(|(&pos, &size)| {
            let mut counts = vec![0.0f64; size];
            for &g in data.obs_groups(pos) {
                counts[g as usize] += 1.0;
            }
            counts
        })
        .collect();

    let data_mean = values.iter().sum::<f64>() / n;
    let data_var = values
        .iter()
        .map(|v| (v - data_mean) * (v - data_mean))
        .sum::<f64>()
        / (n - 1.0).max(1.0);

    // Non-centered parameter expansion: each term's effect is xi * eta[g]
    // with eta ~ N(0, 1) fixed and xi | q ~ N(0, scale^2 q),
    // q ~ InvGamma(nu/2, nu/2), so |xi| carries the half-t(nu, scale) prior
    // and the component variance is xi^2. The coefficient xi crosses zero
    // like any regression coefficient, which is what lets near-zero
    // components mix instead of sticking at the boundary.
    let mut mu = data_mean;
    let mut eta: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut xi: Vec<f64> = vec![0.1 * data_var.sqrt().max(1e-3); modeled.len()];
    let mut q_aux: Vec<f64> = vec![1.0; modeled.len()];
    let mut sigma2_eps = data_var.max(1e-6);
    let mut aux_eps = 1.0;

    // Residual after subtracting mu and every xi * eta contribution.
    let mut res: Vec<f64> = values.iter().map(|v| v - mu).collect();

    let draw_inv_gamma = |rng: &mut ChaCha8Rng, shape: f64, rate: f64| -> f64 {
        // InvGamma(shape, rate) = 1 / Gamma(shape, scale = 1/rate).
        let g = Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters");
        (1.0 / g.sample(rng)).clamp(1e-300, 1e300)
    };

    let kept = cfg.iterations - cfg.warmup;
    let mut out = ChainDraws {
        mu: Vec::with_capacity(kept),
        sigma2: vec![Vec::with_capacity(kept); modeled.len() + 1],
    };

    for iter in 0..cfg.iterations {
        // mu | rest ~ N(mean(y - effects), sigma2_eps / n), flat prior.
        let res_mean = res.iter().sum::<f64>() / n;
        let z: f64 = normal.sample(&mut rng);
        let mu_new = (mu + res_mean) + (sigma2_eps / n).sqrt() * z;
        let shift = mu_new - mu;
        for r in res.iter_mut() {
            *r -= shift;
        }
        mu = mu_new;

        for (t, &pos) in modeled.iter().enumerate() {
            let groups = data.obs_groups(pos);
            let e = &mut eta[t];
            let k = e.len() as f64;
            // Add the current contribution back into the residual.
            for (obs, &g) in groups.iter().enumerate() {
                res[obs] += xi[t] * e[g as usize];
            }
            let mut sums = vec![0.0f64; e.len()];
            for (obs, &g) in groups.iter().enumerate() {
                sums[g as usize] += res[obs];
            }

            // eta levels | xi: unit-variance prior.
            for (g, level) in e.iter_mut().enumerate() {
                let c = group_counts[t][g];
                let post_var = 1.0 / (xi[t] * xi[t] * c / sigma2_eps + 1.0);
                let post_mean = post_var * xi[t] * sums[g] / sigma2_eps;
                let z: f64 = normal.sample(&mut rng);
                *level = post_mean + post_var.sqrt() * z;
            }

            // xi | eta, q: scalar regression coefficient of the residual on
            // the expanded effect, prior N(0, scale^2 q).
            let pred_ss: f64 = e
                .iter()
                .enumerate()
                .map(|(g, v)| group_counts[t][g] * v * v)
                .sum();
            let pred_dot: f64 = e.iter().zip(&sums).map(|(v, s)| v * s).sum();
            let post_var = 1.0 / (pred_ss / sigma2_eps + 1.0 / (scale_sq * q_aux[t]));
            let post_mean = post_var * pred_dot / sigma2_eps;
            let z: f64 = normal.sample(&mut rng);
            xi[t] = post_mean + post_var.sqrt() * z;

            // q | xi.
            q_aux[t] = draw_inv_gamma(
                &mut rng,
                (nu + 1.0) / 2.0,
                (nu + xi[t] * xi[t] / scale_sq) / 2.0,
            );

            // Interweave the location split with mu: shifting eta by delta
            // and mu by xi * delta leaves the likelihood unchanged, so delta
            // has the exact conditional N(mean(eta), 1 / k).
            let ebar = e.iter().sum::<f64>() / k;
            let z: f64 = normal.sample(&mut rng);
            let delta = ebar + (1.0 / k).sqrt() * z;
            for level in e.iter_mut() {
                *level -= delta;
            }
            let mu_shift = xi[t] * delta;
            mu += mu_shift;
            for r in res.iter_mut() {
                *r -= mu_shift;
            }

            // Scale interweave: with the centered effect u = xi * eta held
            // fixed, the likelihood drops out and the conditional of the
            // scale is the centered conjugate pair; redrawing it breaks the
            // slow walk along the xi / |eta| ridge. The product is preserved
            // exactly, so the residual needs no correction.
            if xi[t] != 0.0 {
                let u: Vec<f64> = e.iter().map(|v| xi[t] * v).collect();
                let sum_u_sq: f64 = u.iter().map(|v| v * v).sum();
                let sigma2_cur = xi[t] * xi[t];
                let a = draw_inv_gamma(
                    &mut rng,
                    (nu + 1.0) / 2.0,
                    nu / sigma2_cur + 1.0 / scale_sq,
                );
                let sigma2_new =
                    draw_inv_gamma(&mut rng, (nu + k) / 2.0, nu / a + sum_u_sq / 2.0);
                let xi_new = xi[t].signum() * sigma2_new.sqrt();
                for (level, uv) in e.iter_mut().zip(&u) {
                    *level = uv / xi_new;
                }
                xi[t] = xi_new;
            }

            for (obs, &g) in groups.iter().enumerate() {
                res[obs] -= xi[t] * e[g as usize];
            }
        }

        // Residual variance: half-t through the inverse-gamma mixture.
        let rss: f64 = res.iter().map(|r| r * r).sum();
        sigma2_eps = draw_inv_gamma(&mut rng, (nu + n) / 2.0, nu / aux_eps + rss / 2.0);
        aux_eps = draw_inv_gamma(&mut rng, (nu + 1.0) / 2.0, nu / sigma2_eps + 1.0 / scale_sq);

        if iter >= cfg.warmup {
            out.mu.push(mu);
            for t in 0..modeled.len() {
                out.sigma2[t].push(xi[t] * xi[t]);
            }
            out.sigma2[modeled.len()].push(sigma2_eps);
        }
    }
    out
}
