//! Brute-force reference implementations used to cross-check `concordia`.
//!
//! Everything in this crate is written as a literal transcription of the
//! defining formula, with no shared code or algebraic shortcuts from the main
//! library. Tests compare the two routes; this crate is never a dependency of
//! production code.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tau-b by explicit concordant/discordant pair counting.
///
/// `tau = (C - D) / sqrt((n0 - Tx) * (n0 - Ty))` with `n0 = n(n-1)/2` and
/// `Tx`, `Ty` the tied-pair counts in each vector. Returns `None` when either
/// vector is all ties.
pub fn tau_b_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut tied_x = 0i64;
    let mut tied_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[j] - x[i];
            let dy = y[j] - y[i];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let nx = n0 - tied_x;
    let ny = n0 - tied_y;
    if nx == 0 || ny == 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((nx as f64) * (ny as f64)).sqrt())
}

/// Tau-b of a two-way contingency table of counts (rows = x bins, cols = y bins).
pub fn tau_b_from_table(counts: &[Vec<u64>]) -> Option<f64> {
    let rows = counts.len();
    let cols = counts[0].len();
    let total: u64 = counts.iter().flatten().sum();
    let mut concordant = 0f64;
    let mut discordant = 0f64;
    for r1 in 0..rows {
        for c1 in 0..cols {
            let n1 = counts[r1][c1] as f64;
            if n1 == 0.0 {
                continue;
            }
            for r2 in (r1 + 1)..rows {
                for c2 in 0..cols {
                    let n2 = counts[r2][c2] as f64;
                    if c2 > c1 {
                        concordant += n1 * n2;
                    } else if c2 < c1 {
                        discordant += n1 * n2;
                    }
                }
            }
        }
    }
    let n0 = (total * (total - 1) / 2) as f64;
    let row_tot: Vec<f64> = (0..rows)
        .map(|r| counts[r].iter().sum::<u64>() as f64)
        .collect();
    let col_tot: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|r| counts[r][c] as f64).sum())
        .collect();
    let tied_x: f64 = row_tot.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    let tied_y: f64 = col_tot.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    let nx = n0 - tied_x;
    let ny = n0 - tied_y;
    if nx <= 0.0 || ny <= 0.0 {
        return None;
    }
    Some((concordant - discordant) / (nx * ny).sqrt())
}

/// U-centered distance matrix built entry by entry from the definition:
/// `A~[i][j] = a[i][j] - a[i.]/(n-2) - a[.j]/(n-2) + a[..]/((n-1)(n-2))`,
/// zero diagonal.
pub fn ucentered_naive(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    assert!(n >= 4);
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (v[i] - v[j]).abs()).collect())
        .collect();
    let rows: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..n).map(|j| (0..n).map(|k| a[k][j]).sum()).collect();
    let grand: f64 = rows.iter().sum();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            out[i][j] = a[i][j] - rows[i] / (n as f64 - 2.0) - cols[j] / (n as f64 - 2.0)
                + grand / ((n as f64 - 1.0) * (n as f64 - 2.0));
        }
    }
    out
}

/// Bias-corrected squared distance correlation via the literal double sum
/// over materialized U-centered matrices.
pub fn dcor2_naive(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    assert_eq!(n, y.len());
    let ax = ucentered_naive(x);
    let by = ucentered_naive(y);
    let inner = |p: &[Vec<f64>], q: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += p[i][j] * q[i][j];
                }
            }
        }
        s / (n as f64 * (n as f64 - 3.0))
    };
    let vxy = inner(&ax, &by);
    let vxx = inner(&ax, &ax);
    let vyy = inner(&by, &by);
    // Uncentered magnitude as the zero-variance reference scale: a vector of
    // n-1 equal values plus one outlier U-centers to exactly zero.
    let raw = |v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ((v[i] - v[j]).abs()).powi(2);
            }
        }
        s / (n as f64 * (n as f64 - 3.0))
    };
    if vxx <= raw(x) * 1e-12 || vyy <= raw(y) * 1e-12 {
        return None;
    }
    Some(vxy / (vxx * vyy).sqrt())
}

/// Theil-Sen by exhaustive pair enumeration: median of all defined pairwise
/// slopes, midpoint rule for even counts.
pub fn theil_sen_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let mut slopes = Vec::new();
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    median_brute(&slopes)
}

/// Repeated median by literal nested medians.
pub fn repeated_median_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let mut inner = Vec::new();
    for i in 0..x.len() {
        let mut slopes = Vec::new();
        for j in 0..x.len() {
            if j != i && x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
        inner.push(median_brute(&slopes)?);
    }
    median_brute(&inner)
}

/// Sort-based median, midpoint of the middle two for even lengths.
pub fn median_brute(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Quartile gap by direct arithmetic: sort units by (rating, index), take the
/// bottom and top floor(n/4) blocks, difference of outcome means.
pub fn quartile_gap_direct(ratings: &[f64], outcomes: &[f64]) -> f64 {
    let n = ratings.len();
    let q = n / 4;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| ratings[a].total_cmp(&ratings[b]).then(a.cmp(&b)));
    let bottom: f64 = idx[..q].iter().map(|&i| outcomes[i]).sum::<f64>() / q as f64;
    let top: f64 = idx[n - q..].iter().map(|&i| outcomes[i]).sum::<f64>() / q as f64;
    top - bottom
}

/// Closed-form simple OLS: returns (intercept, slope).
pub fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Textbook balanced one-way random-effects ANOVA.
///
/// `groups` is a rectangular group-by-replicate layout. Returns
/// `(sigma2_between, sigma2_within)` from `MS_between`/`MS_within`, without
/// truncation of negative solutions.
pub fn oneway_anova(groups: &[Vec<f64>]) -> (f64, f64) {
    let k = groups.len();
    let r = groups[0].len();
    assert!(groups.iter().all(|g| g.len() == r));
    let grand: f64 = groups.iter().flatten().sum::<f64>() / (k * r) as f64;
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / r as f64)
        .collect();
    let ss_between: f64 = means.iter().map(|m| r as f64 * (m - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let ms_between = ss_between / (k as f64 - 1.0);
    let ms_within = ss_within / (k as f64 * (r as f64 - 1.0));
    ((ms_between - ms_within) / r as f64, ms_within)
}

/// Fieller-corrected interval recomputed from the formula with frozen normal
/// quantiles: `tanh(arctanh(tau) +/- z * sqrt(0.437 / (n - 4)))`.
pub fn fieller_reference(tau: f64, n: usize, z_crit: f64) -> (f64, f64) {
    let z = tau.atanh();
    let half = z_crit * (0.437 / (n as f64 - 4.0)).sqrt();
    ((z - half).tanh(), (z + half).tanh())
}

/// Two-sided standard normal quantiles frozen from tables.
pub mod zcrit {
    /// 95% two-sided.
    pub const Z95: f64 = 1.959963984540054;
    /// 90% two-sided.
    pub const Z90: f64 = 1.6448536269514722;
    /// 80% two-sided (used for one-sided 90% bounds).
    pub const Z80: f64 = 1.2815515655446004;
}

/// Deterministic generator of tie-rich test vectors.
pub struct CaseGen {
    rng: ChaCha8Rng,
}

impl CaseGen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A vector of `n` values drawn from `levels` equally likely ordinal
    /// levels, so ties are frequent for small `levels`.
    pub fn ordinal(&mut self, n: usize, levels: u32) -> Vec<f64> {
        (0..n)
            .map(|_| self.rng.random_range(1..=levels) as f64)
            .collect()
    }

    /// A vector of `n` continuous uniform values in [0, 1).
    pub fn uniform(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.random::<f64>()).collect()
    }

    /// Mixed case: ordinal with probability 1/2, else continuous.
    pub fn mixed(&mut self, n: usize) -> Vec<f64> {
        if self.rng.random::<bool>() {
            let levels = self.rng.random_range(2..=8);
            self.ordinal(n, levels)
        } else {
            self.uniform(n)
        }
    }

    pub fn len_in(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }
}
