//! Rank-based comparison statistics: the Friedman test with the
//! Iman-Davenport F correction and the Bonferroni-Dunn critical difference.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Friedman test over a methods×datasets score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanTest {
    /// Average rank per method (1 is best), mid-ranks on ties.
    pub avg_ranks: Vec<f64>,
    /// χ²_F statistic.
    pub chi_squared: f64,
    /// Iman-Davenport F_F = (N−1)χ²_F / (N(k−1) − χ²_F); +∞ when the
    /// rankings are perfectly consistent (zero denominator).
    pub f_statistic: f64,
    pub methods: usize,
    pub datasets: usize,
}

/// Ranks per dataset column with mid-rank tie handling.
fn column_ranks(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let k = scores.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let cmp = scores[a].partial_cmp(&scores[b]).expect("finite scores");
        if higher_is_better { cmp.reverse() } else { cmp }
    });
    let mut ranks = vec![0.0; k];
    let mut pos = 0;
    while pos < k {
        let mut end = pos + 1;
        while end < k && scores[order[end]] == scores[order[pos]] {
            end += 1;
        }
        // Positions pos..end share the mid-rank.
        let mid = (pos + 1 + end) as f64 / 2.0;
        for &idx in &order[pos..end] {
            ranks[idx] = mid;
        }
        pos = end;
    }
    ranks
}

/// Computes average ranks and the Friedman/Iman-Davenport statistics from
/// a methods×datasets table of one metric.
pub fn friedman_ranks(scores: ArrayView2<'_, f64>, higher_is_better: bool) -> Result<FriedmanTest> {
    let (k, n) = scores.dim();
    if k < 2 {
        return Err(Error::invalid("need at least 2 methods"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least 2 datasets"));
    }
    let mut avg_ranks = vec![0.0; k];
    for j in 0..n {
        let col: Vec<f64> = scores.column(j).to_vec();
        for (m, r) in column_ranks(&col, higher_is_better).into_iter().enumerate() {
            avg_ranks[m] += r;
        }
    }
    for r in &mut avg_ranks {
        *r /= n as f64;
    }
    let kf = k as f64;
    let nf = n as f64;
    let rank_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let chi_squared = 12.0 * nf / (kf * (kf + 1.0)) * (rank_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let denom = nf * (kf - 1.0) - chi_squared;
    let f_statistic = if denom <= 1e-12 {
        f64::INFINITY
    } else {
        (nf - 1.0) * chi_squared / denom
    };
    Ok(FriedmanTest { avg_ranks, chi_squared, f_statistic, methods: k, datasets: n })
}

/// Bonferroni-Dunn critical difference q_α · √(k(k+1) / (6N)): two average
/// ranks further apart than this differ significantly.
pub fn bonferroni_dunn_cd(methods: usize, datasets: usize, q_alpha: f64) -> f64 {
    let k = methods as f64;
    let n = datasets as f64;
    q_alpha * (k * (k + 1.0) / (6.0 * n)).sqrt()
}
