//! Evaluation of selected feature subsets: the multi-label classifier, the
//! four ranking/classification metrics, cross-validated scoring, and the
//! rank-based statistical tests.

pub mod mlknn;
pub mod stats;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{make_folds, MultiViewDataset};
use crate::error::{Error, Result};

pub use mlknn::{mlknn_fit, mlknn_predict, MLkNNModel};

/// Metrics of one train/test split. AP is higher-better; Cov, HL, RL are
/// lower-better. Coverage is normalized by the label count so it lies in
/// [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub ap: f64,
    pub cov: f64,
    pub hl: f64,
    pub rl: f64,
    /// Samples contributing to the rank metrics.
    pub evaluated: usize,
    /// Samples without any positive label, excluded from AP/Cov/RL.
    pub skipped: usize,
}

/// Label ranks per sample: descending score, ties broken by ascending
/// label index. rank[l] is 1-based.
fn score_ranks(scores: &[f64]) -> Vec<usize> {
    let q = scores.len();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b)));
    let mut rank = vec![0usize; q];
    for (pos, &l) in order.iter().enumerate() {
        rank[l] = pos + 1;
    }
    rank
}

/// Average precision, coverage, Hamming loss, and ranking loss from score
/// and prediction matrices against the true labels.
pub fn compute_metrics(
    scores: ArrayView2<'_, f64>,
    predictions: ArrayView2<'_, f64>,
    y_true: ArrayView2<'_, f64>,
) -> Result<SplitMetrics> {
    let (n, q) = y_true.dim();
    if scores.dim() != (n, q) || predictions.dim() != (n, q) {
        return Err(Error::shape(format!(
            "scores {:?} / predictions {:?} vs labels {:?}",
            scores.dim(),
            predictions.dim(),
            y_true.dim()
        )));
    }

    let mismatches = predictions
        .iter()
        .zip(y_true.iter())
        .filter(|(p, t)| (**p == 1.0) != (**t == 1.0))
        .count();
    let hl = mismatches as f64 / (n * q) as f64;

    let mut ap_sum = 0.0;
    let mut cov_sum = 0.0;
    let mut rl_sum = 0.0;
    let mut rl_samples = 0usize;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;

    for i in 0..n {
        let positives: Vec<usize> = (0..q).filter(|&l| y_true[[i, l]] == 1.0).collect();
        if positives.is_empty() {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        let row: Vec<f64> = scores.row(i).to_vec();
        let rank = score_ranks(&row);

        let mut ap_i = 0.0;
        for &l in &positives {
            let better = positives.iter().filter(|&&p| rank[p] <= rank[l]).count();
            ap_i += better as f64 / rank[l] as f64;
        }
        ap_sum += ap_i / positives.len() as f64;

        let max_rank = positives.iter().map(|&l| rank[l]).max().expect("non-empty");
        cov_sum += (max_rank - 1) as f64 / q as f64;

        let negatives: Vec<usize> = (0..q).filter(|&l| y_true[[i, l]] == 0.0).collect();
        if !negatives.is_empty() {
            let mut wrong = 0usize;
            for &p in &positives {
                for &m in &negatives {
                    if rank[m] < rank[p] {
                        wrong += 1;
                    }
                }
            }
            rl_sum += wrong as f64 / (positives.len() * negatives.len()) as f64;
            rl_samples += 1;
        }
    }

    if evaluated == 0 {
        return Err(Error::invalid("no sample has a positive label"));
    }
    Ok(SplitMetrics {
        ap: ap_sum / evaluated as f64,
        cov: cov_sum / evaluated as f64,
        hl,
        rl: if rl_samples > 0 { rl_sum / rl_samples as f64 } else { 0.0 },
        evaluated,
        skipped,
    })
}

/// Mean, cross-fold sample standard deviation, and the per-fold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub per_fold: Vec<f64>,
}

impl MetricSummary {
    fn from_folds(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std, per_fold: values }
    }
}

/// Cross-validated metrics of a feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: MetricSummary,
    pub cov: MetricSummary,
    pub hl: MetricSummary,
    pub rl: MetricSummary,
    pub selected_features: Vec<usize>,
    pub folds: usize,
    pub skipped_samples: usize,
}

/// Restricts the dataset to the top ⌈fraction·d⌉ ranked features and
/// scores them with cross-validated MLkNN (smoothing 1.0). Folds run in
/// parallel and the report is deterministic given the seed.
pub fn evaluate_selection(
    data: &MultiViewDataset,
    ranked_features: &[usize],
    top_fraction: f64,
    folds: usize,
    knn: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::invalid(format!("top_fraction {top_fraction} outside (0, 1]")));
    }
    if ranked_features.is_empty() {
        return Err(Error::invalid("empty feature selection"));
    }
    let d = data.total_features();
    let m = ((top_fraction * d as f64).ceil() as usize).clamp(1, d).min(ranked_features.len());
    let selected = &ranked_features[..m];
    if let Some(&bad) = selected.iter().find(|&&f| f >= d) {
        return Err(Error::invalid(format!("feature index {bad} out of range for d = {d}")));
    }

    let full = data.concatenated();
    let mut x = Array2::zeros((data.samples(), m));
    for (c, &f) in selected.iter().enumerate() {
        x.column_mut(c).assign(&full.column(f));
    }
    let y = data.labels();

    let plan = make_folds(data.samples(), folds, seed)?;
    let splits: Vec<SplitMetrics> = (0..folds)
        .into_par_iter()
        .map(|fold| -> Result<SplitMetrics> {
            let (train, test) = plan.split(fold);
            let take = |rows: &[usize], m: ArrayView2<'_, f64>| -> Array2<f64> {
                let mut out = Array2::zeros((rows.len(), m.ncols()));
                for (i, &r) in rows.iter().enumerate() {
                    out.row_mut(i).assign(&m.row(r));
                }
                out
            };
            let model = mlknn_fit(
                take(&train, x.view()).view(),
                take(&train, y.view()).view(),
                knn,
                1.0,
            )?;
            let test_x = take(&test, x.view());
            let test_y = take(&test, y.view());
            let (pred, scores) = mlknn_predict(&model, test_x.view())?;
            compute_metrics(scores.view(), pred.view(), test_y.view())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MetricsReport {
        ap: MetricSummary::from_folds(splits.iter().map(|s| s.ap).collect()),
        cov: MetricSummary::from_folds(splits.iter().map(|s| s.cov).collect()),
        hl: MetricSummary::from_folds(splits.iter().map(|s| s.hl).collect()),
        rl: MetricSummary::from_folds(splits.iter().map(|s| s.rl).collect()),
        selected_features: selected.to_vec(),
        folds,
        skipped_samples: splits.iter().map(|s| s.skipped).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_evaluated_single_sample() {
        let y = array![[1.0, 0.0, 0.0]];
        let scores = array![[0.1, 0.9, 0.5]];
        let pred = array![[0.0, 1.0, 0.0]];
        let m = compute_metrics(scores.view(), pred.view(), y.view()).unwrap();
        // The positive label ranks last: both (pos, neg) pairs are wrong.
        assert_abs_diff_eq!(m.rl, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.ap, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cov, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.hl, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn perfect_ranking_and_predictions() {
        let y = array![[1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let scores = array![[0.9, 0.8, 0.1], [0.2, 0.7, 0.1]];
        let m = compute_metrics(scores.view(), y.view(), y.view()).unwrap();
        assert_eq!(m.ap, 1.0);
        assert_eq!(m.rl, 0.0);
        assert_eq!(m.hl, 0.0);
    }

    #[test]
    fn zero_positive_samples_are_skipped_and_counted() {
        let y = array![[0.0, 0.0], [1.0, 0.0]];
        let scores = array![[0.5, 0.5], [0.9, 0.1]];
        let m = compute_metrics(scores.view(), y.view(), y.view()).unwrap();
        assert_eq!(m.skipped, 1);
        assert_eq!(m.evaluated, 1);
    }

    #[test]
    fn hamming_loss_two_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(1..10);
            let q = rng.random_range(1..6);
            let y = Array2::from_shape_fn((n, q), |_| {
                if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { 0.0 }
            });
            let pred = Array2::from_shape_fn((n, q), |_| {
                if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { 0.0 }
            });
            let scores = Array2::from_shape_fn((n, q), |_| rng.random_range(0.0..1.0));
            // Make sure at least one sample counts for the rank metrics.
            let mut y = y;
            y[[0, 0]] = 1.0;
            let m = compute_metrics(scores.view(), pred.view(), y.view()).unwrap();
            let mut cell_loop = 0usize;
            for i in 0..n {
                for l in 0..q {
                    if pred[[i, l]] != y[[i, l]] {
                        cell_loop += 1;
                    }
                }
            }
            assert_eq!(m.hl, cell_loop as f64 / (n * q) as f64);
        }
    }

    #[test]
    fn evaluate_selection_full_fraction_equals_all_features() {
        let data = planted(60, 4);
        let ranked: Vec<usize> = (0..data.total_features()).collect();
        let all = evaluate_selection(&data, &ranked, 1.0, 5, 3, 7).unwrap();
        let again = evaluate_selection(&data, &ranked, 1.0, 5, 3, 7).unwrap();
        assert_eq!(all, again);
        assert_eq!(all.selected_features.len(), data.total_features());
    }

    fn planted(n: usize, d: usize) -> MultiViewDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
        let mut y = Array2::zeros((n, 2));
        for i in 0..n {
            y[[i, 0]] = if x[[i, 0]] > 0.5 { 1.0 } else { 0.0 };
            y[[i, 1]] = if x[[i, 1]] > 0.5 { 1.0 } else { 0.0 };
        }
        MultiViewDataset::new("planted", vec![x], y, vec!["v".into()]).unwrap()
    }

    #[test]
    fn informative_features_score_higher() {
        let data = planted(80, 4);
        let good = evaluate_selection(&data, &[0, 1], 1.0, 5, 5, 1).unwrap();
        let bad = evaluate_selection(&data, &[2, 3], 1.0, 5, 5, 1).unwrap();
        assert!(good.ap.mean > bad.ap.mean, "{} <= {}", good.ap.mean, bad.ap.mean);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let data = planted(10, 3);
        assert!(evaluate_selection(&data, &[], 0.5, 2, 2, 0).is_err());
        assert!(evaluate_selection(&data, &[0], 0.0, 2, 2, 0).is_err());
        assert!(evaluate_selection(&data, &[9], 1.0, 2, 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn rank_metrics_invariant_under_monotone_transforms(
            seed in 0u64..500,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..6);
            let q = rng.random_range(2..6);
            let scores = Array2::from_shape_fn((n, q), |_| rng.random_range(0.0..1.0));
            let mut y = Array2::from_shape_fn((n, q), |_| {
                if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { 0.0 }
            });
            y[[0, 0]] = 1.0;
            let pred = y.clone();
            let base = compute_metrics(scores.view(), pred.view(), y.view()).unwrap();
            // Strictly monotone transform: 3x + exp(x).
            let transformed = scores.mapv(|v| 3.0 * v + v.exp());
            let t = compute_metrics(transformed.view(), pred.view(), y.view()).unwrap();
            prop_assert!((base.ap - t.ap).abs() < 1e-12);
            prop_assert!((base.cov - t.cov).abs() < 1e-12);
            prop_assert!((base.rl - t.rl).abs() < 1e-12);
        }
    }
}
