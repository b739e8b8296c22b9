//! Multi-label k-nearest-neighbor classifier with MAP label decisions from
//! smoothed prior/posterior neighbor-count statistics.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Fitted model: per-label priors and the (k+1)-row posterior count tables
/// estimated leave-one-out on the training set, plus the stored training
/// matrix for neighbor queries at prediction time.
#[derive(Debug, Clone)]
pub struct MLkNNModel {
    k: usize,
    prior_pos: Vec<f64>,
    cond_pos: Vec<Vec<f64>>,
    cond_neg: Vec<Vec<f64>>,
    train_x: Array2<f64>,
    train_y: Array2<f64>,
}

impl MLkNNModel {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Smoothed P(label l present).
    pub fn prior(&self, label: usize) -> f64 {
        self.prior_pos[label]
    }
}

fn k_nearest(
    train: ArrayView2<'_, f64>,
    query: ArrayView1<'_, f64>,
    k: usize,
    exclude: Option<usize>,
) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..train.nrows())
        .filter(|&i| Some(i) != exclude)
        .map(|i| {
            let d2: f64 = train
                .row(i)
                .iter()
                .zip(query.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    order.truncate(k);
    order.into_iter().map(|(_, i)| i).collect()
}

fn neighbor_label_counts(y: ArrayView2<'_, f64>, neighbors: &[usize], label: usize) -> usize {
    neighbors.iter().filter(|&&i| y[[i, label]] == 1.0).count()
}

/// Fits the classifier with smoothing `s` (Laplace smoothing of both the
/// priors and the neighbor-count posteriors).
pub fn mlknn_fit(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    k: usize,
    s: f64,
) -> Result<MLkNNModel> {
    let n = x.nrows();
    let q = y.ncols();
    if y.nrows() != n {
        return Err(Error::shape(format!("{n} feature rows vs {} label rows", y.nrows())));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} out of range [1, {n})")));
    }

    let prior_pos: Vec<f64> = (0..q)
        .map(|l| (s + y.column(l).sum()) / (2.0 * s + n as f64))
        .collect();

    // Leave-one-out neighbor label counts over the training set.
    let mut counts = Array2::zeros((n, q));
    for i in 0..n {
        let neighbors = k_nearest(x, x.row(i), k, Some(i));
        for l in 0..q {
            counts[[i, l]] = neighbor_label_counts(y, &neighbors, l);
        }
    }

    let mut cond_pos = Vec::with_capacity(q);
    let mut cond_neg = Vec::with_capacity(q);
    for l in 0..q {
        let mut hist_pos = vec![0usize; k + 1];
        let mut hist_neg = vec![0usize; k + 1];
        for i in 0..n {
            if y[[i, l]] == 1.0 {
                hist_pos[counts[[i, l]]] += 1;
            } else {
                hist_neg[counts[[i, l]]] += 1;
            }
        }
        let total_pos: usize = hist_pos.iter().sum();
        let total_neg: usize = hist_neg.iter().sum();
        cond_pos.push(
            hist_pos
                .iter()
                .map(|&c| (s + c as f64) / (s * (k + 1) as f64 + total_pos as f64))
                .collect(),
        );
        cond_neg.push(
            hist_neg
                .iter()
                .map(|&c| (s + c as f64) / (s * (k + 1) as f64 + total_neg as f64))
                .collect(),
        );
    }

    Ok(MLkNNModel {
        k,
        prior_pos,
        cond_pos,
        cond_neg,
        train_x: x.to_owned(),
        train_y: y.to_owned(),
    })
}

/// Predicts binary labels and posterior scores for each test row. The MAP
/// decision is positive when P(H1)·P(c|H1) strictly exceeds the negative
/// hypothesis; scores are the normalized posteriors in [0, 1].
pub fn mlknn_predict(
    model: &MLkNNModel,
    x_test: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x_test.ncols() != model.train_x.ncols() {
        return Err(Error::shape(format!(
            "test has {} feature columns, model expects {}",
            x_test.ncols(),
            model.train_x.ncols()
        )));
    }
    let q = model.prior_pos.len();
    let mut predictions = Array2::zeros((x_test.nrows(), q));
    let mut scores = Array2::zeros((x_test.nrows(), q));
    for (r, row) in x_test.rows().into_iter().enumerate() {
        let neighbors = k_nearest(model.train_x.view(), row, model.k, None);
        for l in 0..q {
            let c = neighbor_label_counts(model.train_y.view(), &neighbors, l);
            let p_pos = model.prior_pos[l] * model.cond_pos[l][c];
            let p_neg = (1.0 - model.prior_pos[l]) * model.cond_neg[l][c];
            predictions[[r, l]] = if p_pos > p_neg { 1.0 } else { 0.0 };
            scores[[r, l]] = p_pos / (p_pos + p_neg);
        }
    }
    Ok((predictions, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_clusters() -> (Array2<f64>, Array2<f64>) {
        let x = array![
            [0.0, 0.1],
            [0.1, 0.0],
            [0.05, 0.05],
            [10.0, 10.1],
            [10.1, 10.0],
            [10.05, 10.05]
        ];
        let y = array![
            [1.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.0, 1.0]
        ];
        (x, y)
    }

    #[test]
    fn reproduces_labels_on_separated_clusters() {
        let (x, y) = two_clusters();
        let model = mlknn_fit(x.view(), y.view(), 1, 1.0).unwrap();
        let (pred, _) = mlknn_predict(&model, x.view()).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn always_present_label_prior_and_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0));
        let mut y = Array2::zeros((n, 2));
        for i in 0..n {
            y[[i, 0]] = 1.0;
            y[[i, 1]] = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { 0.0 };
        }
        let model = mlknn_fit(x.view(), y.view(), 3, 1.0).unwrap();
        assert_abs_diff_eq!(model.prior(0), (1.0 + n as f64) / (2.0 + n as f64), epsilon = 1e-15);
        let (pred, scores) = mlknn_predict(&model, x.view()).unwrap();
        assert!(pred.column(0).iter().all(|&p| p == 1.0));
        assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let (x, y) = two_clusters();
        assert!(mlknn_fit(x.view(), y.view(), 6, 1.0).is_err());
        assert!(mlknn_fit(x.view(), y.view(), 0, 1.0).is_err());
    }

    #[test]
    fn neighbor_ties_break_by_index() {
        let x = array![[0.0], [1.0], [1.0], [2.0]];
        let neighbors = k_nearest(x.view(), x.row(0), 1, Some(0));
        assert_eq!(neighbors, vec![1]);
    }
}
