//! Two-sided Wilcoxon signed-rank test for paired samples.

use serde::{Deserialize, Serialize};

use crate::certificate::std_normal_cdf;
use crate::error::{invalid, Result};

/// Largest number of nonzero differences handled by the exact null
/// distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub method: WilcoxonMethod,
    pub warning: Option<String>,
}

/// Midranks of `|d|`, doubled so ties stay integral.
fn doubled_ranks(d: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        // Positions i..=j share rank (i + j + 2) / 2; doubled: i + j + 2.
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

/// Null distribution of the doubled positive-rank sum: `counts[s]` sign
/// patterns out of `2^n` give sum `s`.
fn null_counts(ranks: &[u64]) -> Vec<f64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Zero differences are dropped; the exact null distribution (ties by
/// midranks) is used for up to [`EXACT_MAX_N`] remaining pairs, the normal
/// approximation with tie and continuity corrections beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 5 {
        return Err(invalid("signed-rank test needs at least 5 pairs"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("signed-rank test needs finite samples"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            statistic: 0.0,
            n: 0,
            method: WilcoxonMethod::Degenerate,
            warning: Some("all paired differences are zero".into()),
        });
    }
    let ranks = doubled_ranks(&d);
    let s_obs: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| *r).sum();
    let statistic = s_obs as f64 / 2.0;
    if n <= EXACT_MAX_N {
        let counts = null_counts(&ranks);
        let total = 2f64.powi(n as i32);
        let lower: f64 = counts[..=s_obs as usize].iter().sum::<f64>() / total;
        let upper: f64 = counts[s_obs as usize..].iter().sum::<f64>() / total;
        return Ok(WilcoxonResult {
            p_value: (2.0 * lower.min(upper)).min(1.0),
            statistic,
            n,
            method: WilcoxonMethod::Exact,
            warning: None,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for g in sorted.chunk_by(|x, y| x == y) {
        let t = g.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(WilcoxonResult {
        p_value: (2.0 * (1.0 - std_normal_cdf(z))).min(1.0),
        statistic,
        n,
        method: WilcoxonMethod::Normal,
        warning: None,
    })
}
