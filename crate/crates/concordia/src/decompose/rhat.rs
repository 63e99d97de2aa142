//! Split-chain rank-normalized R-hat.

use crate::util::normal::inverse_phi;

/// Potential scale reduction on rank-normalized split chains.
///
/// Each chain is split in half, all draws are jointly ranked (average ranks
/// on ties), ranks map to normal scores through
/// `z = inverse_phi((rank - 3/8) / (S + 1/4))`, and the classic R-hat is
/// taken on the scores. Returns 1.0 when every draw is identical.
pub fn split_rank_normalized_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut split: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        let half = chain.len() / 2;
        if half == 0 {
            return f64::NAN;
        }
        split.push(&chain[..half]);
        split.push(&chain[chain.len() - half..]);
    }
    let n = split[0].len();
    if split.iter().any(|c| c.len() != n) || n < 2 {
        return f64::NAN;
    }
    let total = split.len() * n;

    // Average ranks over the pooled draws.
    let mut indexed: Vec<(f64, usize)> = split
        .iter()
        .flat_map(|c| c.iter().copied())
        .zip(0..)
        .collect();
    indexed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0f64; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && indexed[j + 1].0 == indexed[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[indexed[k].1] = avg;
        }
        i = j + 1;
    }
    if ranks.iter().all(|&r| r == ranks[0]) {
        return 1.0;
    }
    let s = total as f64;
    let z: Vec<f64> = ranks
        .iter()
        .map(|&r| inverse_phi((r - 0.375) / (s + 0.25)))
        .collect();

    let m = split.len();
    let chain_z: Vec<&[f64]> = (0..m).map(|c| &z[c * n..(c + 1) * n]).collect();
    let means: Vec<f64> = chain_z
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 / (m as f64 - 1.0)
        * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = chain_z
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0))
        .sum::<f64>()
        / m as f64;
    if w <= 0.0 {
        return 1.0;
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}
