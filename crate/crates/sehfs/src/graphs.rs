//! Per-view sample-similarity graphs, the label-graph Laplacian, and the
//! view placement operators that embed each view's columns into the global
//! feature dimension.

use ndarray::{Array2, ArrayView2, s};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel bandwidth choice for [`semantic_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sigma {
    /// Mean pairwise Euclidean distance of the view.
    Auto,
    Fixed(f64),
}

/// Symmetric kNN Gaussian similarity over samples of one view. Entries lie
/// in [0, 1]; the diagonal is 1 (a point is within distance 0 of itself).
#[derive(Debug, Clone)]
pub struct SemanticGraph {
    matrix: Array2<f64>,
    sigma: f64,
    k: usize,
}

impl SemanticGraph {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// s_ij = exp(−‖x_i − x_j‖² / σ²) when i and j are k-neighbors under the
/// or-rule, 0 otherwise. Neighbor ties are broken by sample index.
pub fn semantic_graph(x: ArrayView2<'_, f64>, k: usize, sigma: Sigma) -> Result<SemanticGraph> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} out of range [1, {})", n)));
    }
    let mut dist2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist2[[i, j]] = d2;
            dist2[[j, i]] = d2;
        }
    }
    let sigma = match sigma {
        Sigma::Fixed(s) if s > 0.0 => s,
        Sigma::Fixed(s) => {
            return Err(Error::invalid(format!("sigma must be positive, got {s}")));
        }
        Sigma::Auto => {
            let mut sum = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    sum += dist2[[i, j]].sqrt();
                }
            }
            let mean = sum / (n * (n - 1) / 2) as f64;
            if mean == 0.0 {
                return Err(Error::invalid(
                    "all samples identical; auto sigma would be zero",
                ));
            }
            mean
        }
    };

    // k nearest neighbors of each sample, self excluded.
    let mut neighbor = Array2::from_elem((n, n), false);
    for j in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        order.sort_by(|&a, &b| {
            dist2[[a, j]]
                .partial_cmp(&dist2[[b, j]])
                .unwrap()
                .then(a.cmp(&b))
        });
        for &i in order.iter().take(k) {
            neighbor[[i, j]] = true;
        }
    }

    let mut matrix = Array2::zeros((n, n));
    for i in 0..n {
        matrix[[i, i]] = 1.0;
        for j in (i + 1)..n {
            if neighbor[[i, j]] || neighbor[[j, i]] {
                let w = (-dist2[[i, j]] / (sigma * sigma)).exp();
                matrix[[i, j]] = w;
                matrix[[j, i]] = w;
            }
        }
    }
    Ok(SemanticGraph { matrix, sigma, k })
}

/// Laplacian of the sample-wise cosine-similarity graph of the labels:
/// L_Y = D_Y − S_Y with D_Y = diag(row sums of S_Y). All-zero label rows
/// have zero similarity to everything.
#[derive(Debug, Clone)]
pub struct LabelLaplacian {
    similarity: Array2<f64>,
    laplacian: Array2<f64>,
}

impl LabelLaplacian {
    pub fn similarity(&self) -> &Array2<f64> {
        &self.similarity
    }

    pub fn laplacian(&self) -> &Array2<f64> {
        &self.laplacian
    }
}

pub fn label_laplacian(y: ArrayView2<'_, f64>) -> LabelLaplacian {
    let n = y.nrows();
    let norms: Vec<f64> = (0..n)
        .map(|i| y.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut similarity = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let s = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                y.row(i).dot(&y.row(j)) / (norms[i] * norms[j])
            };
            similarity[[i, j]] = s;
            similarity[[j, i]] = s;
        }
    }
    let mut laplacian = -&similarity;
    for i in 0..n {
        let degree: f64 = similarity.row(i).sum();
        laplacian[[i, i]] += degree;
    }
    LabelLaplacian { similarity, laplacian }
}

/// Column offsets of each view inside the concatenated n×d matrix. The
/// placement operator P_v is never materialized; placing and extracting are
/// column-slice moves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewPlacement {
    offsets: Vec<usize>,
    dims: Vec<usize>,
    total: usize,
}

impl ViewPlacement {
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("placements need one or more non-empty views"));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for &d in dims {
            offsets.push(total);
            total += d;
        }
        Ok(Self { offsets, dims: dims.to_vec(), total })
    }

    pub fn view_count(&self) -> usize {
        self.dims.len()
    }

    pub fn total_features(&self) -> usize {
        self.total
    }

    pub fn offset(&self, v: usize) -> usize {
        self.offsets[v]
    }

    pub fn dim(&self, v: usize) -> usize {
        self.dims[v]
    }

    /// Embeds an n×d(v) matrix at view v's column block of an n×d matrix,
    /// zero elsewhere (M · P_v).
    pub fn place(&self, m: ArrayView2<'_, f64>, v: usize) -> Result<Array2<f64>> {
        self.check_view(v)?;
        if m.ncols() != self.dims[v] {
            return Err(Error::shape(format!(
                "placing {} columns into view {v} of width {}",
                m.ncols(),
                self.dims[v]
            )));
        }
        let mut out = Array2::zeros((m.nrows(), self.total));
        out.slice_mut(s![.., self.offsets[v]..self.offsets[v] + self.dims[v]])
            .assign(&m);
        Ok(out)
    }

    /// Slices view v's column block out of an n×d matrix (M · P_vᵀ).
    pub fn extract(&self, m: ArrayView2<'_, f64>, v: usize) -> Result<Array2<f64>> {
        self.check_view(v)?;
        if m.ncols() != self.total {
            return Err(Error::shape(format!(
                "extracting view {v} from a matrix with {} columns, expected {}",
                m.ncols(),
                self.total
            )));
        }
        Ok(m
            .slice(s![.., self.offsets[v]..self.offsets[v] + self.dims[v]])
            .to_owned())
    }

    fn check_view(&self, v: usize) -> Result<()> {
        if v >= self.dims.len() {
            return Err(Error::invalid(format!(
                "view {v} out of range for {} views",
                self.dims.len()
            )));
        }
        Ok(())
    }
}
