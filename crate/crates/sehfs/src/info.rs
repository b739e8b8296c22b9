//! Discrete information-theoretic estimators: per-column discretization,
//! Shannon entropy, pairwise mutual information, the feature graph built
//! from it, and exact joint-entropy references used to validate the
//! structural-entropy machinery.
//!
//! All entropies are in bits (log base 2) over empirical distributions,
//! with the 0·log 0 := 0 convention.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Threshold below which a negative MI estimate is treated as an internal
/// inconsistency rather than floating-point noise.
const MI_NEGATIVE_GUARD: f64 = -1e-12;

/// Per-column binning strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    EqualWidth,
    /// Quantile cut points with ties merged.
    EqualFrequency,
}

/// Integer codes per cell, one bin count per column. A constant column
/// discretizes to a single bin.
#[derive(Debug, Clone)]
pub struct DiscretizedMatrix {
    codes: Array2<usize>,
    bins: Vec<usize>,
}

impl DiscretizedMatrix {
    pub fn codes(&self) -> &Array2<usize> {
        &self.codes
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn samples(&self) -> usize {
        self.codes.nrows()
    }

    pub fn columns(&self) -> usize {
        self.codes.ncols()
    }

    pub fn column(&self, c: usize) -> Vec<usize> {
        self.codes.column(c).to_vec()
    }

    /// Wraps a pre-coded matrix (used by the synthetic scenarios).
    pub fn from_codes(codes: Array2<usize>) -> Self {
        let bins = codes
            .columns()
            .into_iter()
            .map(|c| c.iter().max().map_or(1, |&m| m + 1))
            .collect();
        Self { codes, bins }
    }
}

/// Default bin count for MI estimation: min(10, ⌈√n⌉).
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(2, 10)
}

fn discretize_column(col: &[f64], bins: usize, strategy: Discretization) -> Vec<usize> {
    let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return vec![0; col.len()];
    }
    match strategy {
        Discretization::EqualWidth => {
            let width = (max - min) / bins as f64;
            col.iter()
                .map(|&v| (((v - min) / width) as usize).min(bins - 1))
                .collect()
        }
        Discretization::EqualFrequency => {
            let mut sorted = col.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len();
            let mut cuts: Vec<f64> = (1..bins)
                .map(|k| {
                    // Upper-value quantile; keeps Codes stable under ties.
                    let idx = (k * n) / bins;
                    sorted[idx.min(n - 1)]
                })
                .collect();
            cuts.dedup();
            cuts.retain(|&c| c > min); // an all-min cut would create an empty first bin
            col.iter()
                .map(|&v| cuts.iter().take_while(|&&c| v >= c).count())
                .collect()
        }
    }
}

/// Independently bins every column of `x`. Codes are compacted so that the
/// per-column bin count equals the number of occupied leading bins.
pub fn discretize(x: ArrayView2<'_, f64>, bins: usize, strategy: Discretization) -> DiscretizedMatrix {
    assert!(bins >= 2, "need at least two bins");
    assert!(x.nrows() >= 1, "need at least one sample");
    let mut codes = Array2::zeros((x.nrows(), x.ncols()));
    let mut effective = Vec::with_capacity(x.ncols());
    for (c, col) in x.columns().into_iter().enumerate() {
        let col_vec: Vec<f64> = col.to_vec();
        let coded = discretize_column(&col_vec, bins, strategy);
        let max_code = coded.iter().max().copied().unwrap_or(0);
        effective.push(max_code + 1);
        for (r, code) in coded.into_iter().enumerate() {
            codes[[r, c]] = code;
        }
    }
    DiscretizedMatrix { codes, bins: effective }
}

/// Entropy from a list of occurrence counts. Counts are sorted first so
/// the floating-point sum does not depend on table traversal order; this
/// makes I(a;b) = I(b;a) hold exactly.
fn entropy_from_counts(mut counts: Vec<usize>, n: usize) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let n = n as f64;
    counts
        .into_iter()
        .map(|k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Shannon entropy in bits of the empirical distribution of `codes`.
pub fn entropy(codes: &[usize]) -> f64 {
    assert!(!codes.is_empty(), "entropy of an empty sample");
    let width = codes.iter().max().unwrap() + 1;
    let mut counts = vec![0usize; width];
    for &c in codes {
        counts[c] += 1;
    }
    entropy_from_counts(counts, codes.len())
}

/// Empirical mutual information I(a;b) = H(a) + H(b) − H(a,b) in bits.
/// Tiny negative rounding (> −1e−12) is clamped to zero.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "mutual_information on vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let wa = a.iter().max().map_or(1, |&m| m + 1);
    let wb = b.iter().max().map_or(1, |&m| m + 1);
    let mut joint = vec![0usize; wa * wb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * wb + y] += 1;
    }
    let h_joint = entropy_from_counts(joint, a.len());
    let mi = entropy(a) + entropy(b) - h_joint;
    if mi < MI_NEGATIVE_GUARD {
        return Err(Error::Numerical {
            iteration: 0,
            context: format!("mutual information estimate {mi} below rounding guard"),
        });
    }
    Ok(mi.max(0.0))
}

/// What to place on the diagonal of the feature graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalPolicy {
    /// Self-edges excluded so they cannot inflate volumes (default).
    #[default]
    Zero,
    /// Diagonal carries each feature's own entropy H(x_i) = I(x_i; x_i).
    SelfEntropy,
}

/// Symmetric non-negative feature adjacency: entry (i, j) is the pairwise
/// mutual information between features i and j.
#[derive(Debug, Clone)]
pub struct FeatureGraph {
    adjacency: Array2<f64>,
    diagonal: DiagonalPolicy,
}

impl FeatureGraph {
    /// Validates symmetry (within 1e−12) and non-negativity.
    pub fn new(adjacency: Array2<f64>, diagonal: DiagonalPolicy) -> Result<Self> {
        if adjacency.nrows() != adjacency.ncols() {
            return Err(Error::shape(format!(
                "feature graph adjacency is {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for i in 0..adjacency.nrows() {
            for j in (i + 1)..adjacency.ncols() {
                if (adjacency[[i, j]] - adjacency[[j, i]]).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "adjacency not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if adjacency.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::invalid("adjacency has negative or non-finite weights"));
        }
        Ok(Self { adjacency, diagonal })
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn diagonal_policy(&self) -> DiagonalPolicy {
        self.diagonal
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    /// sum(A) over all entries.
    pub fn total_weight(&self) -> f64 {
        self.adjacency.sum()
    }

    /// Node degrees as off-diagonal row sums (self-edges never count
    /// toward volume bookkeeping).
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| {
                self.adjacency
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &w)| w)
                    .sum()
            })
            .collect()
    }

    /// Writes the d×d adjacency as header-free CSV for inspection.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for row in self.adjacency.rows() {
            let record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Builds the feature graph of `x` by discretizing every column and filling
/// the pairwise MI matrix. Pairs are independent and computed in parallel.
pub fn build_feature_graph(
    x: ArrayView2<'_, f64>,
    bins: usize,
    strategy: Discretization,
    diagonal: DiagonalPolicy,
) -> Result<FeatureGraph> {
    let d = x.ncols();
    if d < 2 {
        return Err(Error::invalid("feature graph needs at least two features"));
    }
    let disc = discretize(x, bins, strategy);
    feature_graph_from_codes(&disc, diagonal)
}

/// Same as [`build_feature_graph`] on an already-discretized matrix.
pub fn feature_graph_from_codes(
    disc: &DiscretizedMatrix,
    diagonal: DiagonalPolicy,
) -> Result<FeatureGraph> {
    let d = disc.columns();
    let columns: Vec<Vec<usize>> = (0..d).map(|c| disc.column(c)).collect();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let weights = pairs
        .par_iter()
        .map(|&(i, j)| mutual_information(&columns[i], &columns[j]))
        .collect::<Result<Vec<f64>>>()?;

    let mut a = Array2::zeros((d, d));
    for (&(i, j), &w) in pairs.iter().zip(&weights) {
        a[[i, j]] = w;
        a[[j, i]] = w;
    }
    if diagonal == DiagonalPolicy::SelfEntropy {
        for i in 0..d {
            a[[i, i]] = entropy(&columns[i]);
        }
    }
    FeatureGraph::new(a, diagonal)
}

/// Exact joint entropy of the selected columns, computed as the Shannon
/// entropy of the empirical tuple distribution.
pub fn joint_entropy_exact(disc: &DiscretizedMatrix, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::invalid("joint entropy of an empty subset"));
    }
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for r in 0..disc.samples() {
        let key: Vec<usize> = subset.iter().map(|&c| disc.codes[[r, c]]).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    Ok(entropy_from_counts(counts.into_values().collect(), disc.samples()))
}

/// Second-order joint-entropy approximation ΣH(X_i) − Σ_{i<j} I(X_i;X_j).
/// May be negative for highly redundant subsets.
pub fn second_order_approx(disc: &DiscretizedMatrix, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::invalid("second-order approximation of an empty subset"));
    }
    let columns: Vec<Vec<usize>> = subset.iter().map(|&c| disc.column(c)).collect();
    let singles: f64 = columns.iter().map(|c| entropy(c)).sum();
    let mut pairwise = 0.0;
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            pairwise += mutual_information(&columns[i], &columns[j])?;
        }
    }
    Ok(singles - pairwise)
}
