//! Multi-view multi-label dataset container, on-disk format, normalization
//! and cross-validation fold planning.
//!
//! The on-disk container is a directory holding a `manifest.json` plus one
//! header-free CSV per view and one for the labels. This keeps datasets
//! language-neutral, diffable, and trivial to generate from MULAN-style
//! sources.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-view multi-label dataset: `V` feature matrices sharing `n` rows
/// and one binary label matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Array2<f64>>,
    labels: Array2<f64>,
    view_names: Vec<String>,
    feature_offsets: Vec<usize>,
    name: String,
}

impl MultiViewDataset {
    /// Builds a validated dataset. Labels must be exactly 0 or 1.
    pub fn new(
        name: impl Into<String>,
        views: Vec<Array2<f64>>,
        labels: Array2<f64>,
        view_names: Vec<String>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("dataset needs at least one view"));
        }
        if view_names.len() != views.len() {
            return Err(Error::invalid(format!(
                "{} view names for {} views",
                view_names.len(),
                views.len()
            )));
        }
        let n = views[0].nrows();
        if n == 0 {
            return Err(Error::invalid("dataset has zero samples"));
        }
        for (v, x) in views.iter().enumerate() {
            if x.ncols() == 0 {
                return Err(Error::invalid(format!("view {v} is empty")));
            }
            if x.nrows() != n {
                return Err(Error::shape(format!(
                    "view {v} has {} rows, expected {n}",
                    x.nrows()
                )));
            }
            if x.iter().any(|e| !e.is_finite()) {
                return Err(Error::invalid(format!("view {v} contains non-finite values")));
            }
        }
        if labels.nrows() != n {
            return Err(Error::shape(format!(
                "label matrix has {} rows, expected {n}",
                labels.nrows()
            )));
        }
        if labels.ncols() == 0 {
            return Err(Error::invalid("label matrix has zero columns"));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid(format!("non-binary label value {bad}")));
        }
        let mut feature_offsets = Vec::with_capacity(views.len());
        let mut off = 0;
        for x in &views {
            feature_offsets.push(off);
            off += x.ncols();
        }
        Ok(Self { views, labels, view_names, feature_offsets, name: name.into() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of samples shared across all views.
    pub fn samples(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    /// Total feature dimension d = Σ_v d(v).
    pub fn total_features(&self) -> usize {
        self.feature_offsets.last().unwrap() + self.views.last().unwrap().ncols()
    }

    pub fn label_count(&self) -> usize {
        self.labels.ncols()
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Array2<f64> {
        &self.views[v]
    }

    pub fn labels(&self) -> &Array2<f64> {
        &self.labels
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    /// Column offset of view `v` in the concatenated matrix.
    pub fn feature_offsets(&self) -> &[usize] {
        &self.feature_offsets
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.ncols()).collect()
    }

    /// Column-wise concatenation of the views in manifest order, n×d.
    pub fn concatenated(&self) -> Array2<f64> {
        let n = self.samples();
        let d = self.total_features();
        let mut out = Array2::zeros((n, d));
        for (x, &off) in self.views.iter().zip(&self.feature_offsets) {
            out.slice_mut(ndarray::s![.., off..off + x.ncols()]).assign(x);
        }
        out
    }

    /// Restricts the dataset to a subset of rows (used by fold evaluation).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let take = |m: &Array2<f64>| -> Array2<f64> {
            let mut out = Array2::zeros((rows.len(), m.ncols()));
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(i).assign(&m.row(r));
            }
            out
        };
        Self::new(
            self.name.clone(),
            self.views.iter().map(take).collect(),
            take(&self.labels),
            self.view_names.clone(),
        )
    }
}

/// Per-column normalization applied within each view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    None,
    MinMax,
    ZScore,
}

/// Applies a per-column transform within each view; labels are untouched.
/// Constant columns map to all-zeros under both non-trivial modes.
pub fn normalize_features(data: &MultiViewDataset, mode: NormalizeMode) -> MultiViewDataset {
    if mode == NormalizeMode::None {
        return data.clone();
    }
    let views = data
        .views
        .iter()
        .map(|x| {
            let mut out = x.clone();
            for mut col in out.columns_mut() {
                match mode {
                    NormalizeMode::MinMax => {
                        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
                        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let range = max - min;
                        if range == 0.0 {
                            col.fill(0.0);
                        } else {
                            col.mapv_inplace(|v| (v - min) / range);
                        }
                    }
                    NormalizeMode::ZScore => {
                        let n = col.len() as f64;
                        let mean = col.sum() / n;
                        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        if var == 0.0 {
                            col.fill(0.0);
                        } else {
                            let std = var.sqrt();
                            col.mapv_inplace(|v| (v - mean) / std);
                        }
                    }
                    NormalizeMode::None => unreachable!(),
                }
            }
            out
        })
        .collect();
    MultiViewDataset {
        views,
        labels: data.labels.clone(),
        view_names: data.view_names.clone(),
        feature_offsets: data.feature_offsets.clone(),
        name: data.name.clone(),
    }
}

/// A balanced assignment of `n` samples to `fold_count` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    fold_count: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// (train, test) row indices for fold `fold`, in ascending order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Shuffles sample indices with a seeded generator and deals them
/// round-robin, so fold sizes differ by at most one and the plan is
/// reproducible from `(n, fold_count, seed)`.
pub fn make_folds(n: usize, fold_count: usize, seed: u64) -> Result<FoldPlan> {
    if fold_count < 2 || fold_count > n {
        return Err(Error::invalid(format!(
            "fold_count {fold_count} out of range [2, {n}]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (i, &sample) in order.iter().enumerate() {
        assignments[sample] = i % fold_count;
    }
    Ok(FoldPlan { fold_count, assignments })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    views: Vec<ManifestView>,
    labels: ManifestLabels,
    samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestView {
    name: String,
    file: String,
    dims: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLabels {
    file: String,
    dims: usize,
}

fn read_csv_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::manifest(format!("missing file {}", path.display())),
            _ => Error::Csv(e),
        })?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut row_count = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != cols {
            return Err(Error::shape(format!(
                "{}: row {row_count} has {} columns, expected {cols}",
                path.display(),
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::manifest(format!("{}: unparseable cell '{field}'", path.display()))
            })?;
            values.push(v);
        }
        row_count += 1;
    }
    if row_count != rows {
        return Err(Error::shape(format!(
            "{}: has {row_count} rows, manifest declares {rows}",
            path.display()
        )));
    }
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::shape(format!("{}: {e}", path.display())))
}

/// Loads a dataset directory through its `manifest.json`, cross-checking
/// every declared shape against the CSV payloads.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let manifest_path = manifest_path.as_ref();
    let raw = fs::read_to_string(manifest_path)
        .map_err(|e| Error::manifest(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&raw)
        .map_err(|e| Error::manifest(format!("{}: {e}", manifest_path.display())))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    if manifest.views.is_empty() {
        return Err(Error::manifest("manifest declares no views"));
    }
    let n = manifest.samples;
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut view_names = Vec::with_capacity(manifest.views.len());
    for mv in &manifest.views {
        let x = read_csv_matrix(&dir.join(&mv.file), n, mv.dims)?;
        views.push(x);
        view_names.push(mv.name.clone());
    }
    let labels = read_csv_matrix(&dir.join(&manifest.labels.file), n, manifest.labels.dims)?;
    MultiViewDataset::new(manifest.name, views, labels, view_names)
}

fn write_csv_matrix(path: &Path, m: ArrayView2<'_, f64>, as_int: bool) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.rows() {
        let record: Vec<String> = row
            .iter()
            .map(|&v| if as_int { format!("{}", v as i64) } else { format!("{v}") })
            .collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the dataset in the container format under `dir`, returning the
/// manifest path. Floats round-trip exactly (shortest-representation
/// formatting); labels are written as 0/1 integers.
pub fn write_dataset(data: &MultiViewDataset, dir: impl AsRef<Path>) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut views = Vec::with_capacity(data.view_count());
    for (v, x) in data.views.iter().enumerate() {
        let file = format!("view_{v}.csv");
        write_csv_matrix(&dir.join(&file), x.view(), false)?;
        views.push(ManifestView { name: data.view_names[v].clone(), file, dims: x.ncols() });
    }
    write_csv_matrix(&dir.join("labels.csv"), data.labels.view(), true)?;
    let manifest = Manifest {
        name: data.name.clone(),
        views,
        labels: ManifestLabels { file: "labels.csv".into(), dims: data.label_count() },
        samples: data.samples(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> MultiViewDataset {
        MultiViewDataset::new(
            "toy",
            vec![
                array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
                array![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9]],
            ],
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn shape_bookkeeping() {
        let d = toy();
        assert_eq!(d.samples(), 3);
        assert_eq!(d.view_count(), 2);
        assert_eq!(d.total_features(), 5);
        assert_eq!(d.label_count(), 2);
        assert_eq!(d.feature_offsets(), &[0, 2]);
    }

    #[test]
    fn row_count_mismatch_rejected() {
        let err = MultiViewDataset::new(
            "bad",
            vec![Array2::zeros((3, 2)), Array2::zeros((4, 3))],
            Array2::zeros((3, 1)),
            vec!["a".into(), "b".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn non_binary_label_rejected() {
        let err = MultiViewDataset::new(
            "bad",
            vec![Array2::zeros((2, 2))],
            array![[0.0, 0.5], [1.0, 1.0]],
            vec!["a".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn empty_view_rejected() {
        let err = MultiViewDataset::new(
            "bad",
            vec![Array2::zeros((2, 0))],
            Array2::zeros((2, 1)),
            vec!["a".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn minmax_rescales_affinely() {
        let d = MultiViewDataset::new(
            "m",
            vec![array![[1.0], [2.0], [3.0]]],
            array![[0.0], [1.0], [0.0]],
            vec!["a".into()],
        )
        .unwrap();
        let out = normalize_features(&d, NormalizeMode::MinMax);
        let col: Vec<f64> = out.view(0).column(0).to_vec();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let d = MultiViewDataset::new(
            "m",
            vec![array![[5.0], [5.0], [5.0]]],
            array![[0.0], [1.0], [0.0]],
            vec!["a".into()],
        )
        .unwrap();
        for mode in [NormalizeMode::MinMax, NormalizeMode::ZScore] {
            let out = normalize_features(&d, mode);
            assert!(out.view(0).column(0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zscore_uses_population_std() {
        let d = MultiViewDataset::new(
            "m",
            vec![array![[0.0], [2.0]]],
            array![[0.0], [1.0]],
            vec!["a".into()],
        )
        .unwrap();
        let out = normalize_features(&d, NormalizeMode::ZScore);
        let col: Vec<f64> = out.view(0).column(0).to_vec();
        assert_eq!(col, vec![-1.0, 1.0]);
    }

    #[test]
    fn folds_are_balanced() {
        let plan = make_folds(10, 10, 0).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in plan.assignments() {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 1));

        let plan = make_folds(7, 3, 0).unwrap();
        let mut sizes = vec![0usize; 3];
        for &f in plan.assignments() {
            sizes[f] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 3]);
    }

    #[test]
    fn folds_are_deterministic() {
        let a = make_folds(100, 10, 1).unwrap();
        let b = make_folds(100, 10, 1).unwrap();
        assert_eq!(a, b);
        let c = make_folds(100, 10, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fold_count_out_of_range() {
        assert!(make_folds(5, 1, 0).is_err());
        assert!(make_folds(5, 6, 0).is_err());
    }

    #[test]
    fn concatenation_places_view_blocks() {
        let d = toy();
        let cat = d.concatenated();
        assert_eq!(cat.ncols(), 5);
        for v in 0..d.view_count() {
            let off = d.feature_offsets()[v];
            let w = d.view(v).ncols();
            assert_eq!(cat.slice(ndarray::s![.., off..off + w]), d.view(v).view());
        }
    }

    #[test]
    fn container_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let d = toy();
        let manifest = write_dataset(&d, dir.path()).unwrap();
        let re = load_dataset(&manifest).unwrap();
        assert_eq!(d, re);
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.json");
        fs::write(
            &manifest,
            r#"{"name":"x","views":[{"name":"a","file":"nope.csv","dims":2}],
               "labels":{"file":"labels.csv","dims":1},"samples":3}"#,
        )
        .unwrap();
        assert!(matches!(load_dataset(&manifest), Err(Error::Manifest(_))));
    }

    #[test]
    fn select_rows_keeps_alignment() {
        let d = toy();
        let sub = d.select_rows(&[0, 2]).unwrap();
        assert_eq!(sub.samples(), 2);
        assert_eq!(sub.view(0).row(1), d.view(0).row(2));
        assert_eq!(sub.labels().row(1), d.labels().row(2));
    }
}
