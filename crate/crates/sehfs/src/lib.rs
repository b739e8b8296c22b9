//! Structural-entropy-guided feature selection for multi-view multi-label
//! data.
//!
//! The pipeline: build a feature graph from pairwise mutual information,
//! regularize a row-stochastic selection matrix by the soft structural
//! entropy of its induced encoding-tree cluster layer, reconstruct a global
//! view matrix from per-view semantic graphs and view-specific contribution
//! matrices, and alternate block updates until the objective stabilizes.
//! Features are ranked by the L2 norms of the selection matrix rows and
//! scored with cross-validated MLkNN.

pub mod dataset;
mod error;
pub mod eval;
pub mod graphs;
pub mod info;
pub mod optim;
pub mod report;
pub mod structural_entropy;

pub use error::{Error, Result};

pub use dataset::{load_dataset, make_folds, normalize_features, write_dataset};
pub use dataset::{FoldPlan, MultiViewDataset, NormalizeMode};
pub use eval::{compute_metrics, evaluate_selection, MetricsReport, SplitMetrics};
pub use eval::stats::{bonferroni_dunn_cd, friedman_ranks, FriedmanTest};
pub use graphs::{label_laplacian, semantic_graph, Sigma, ViewPlacement};
pub use info::{
    build_feature_graph, default_bins, discretize, entropy, joint_entropy_exact,
    mutual_information, second_order_approx, DiagonalPolicy, Discretization, DiscretizedMatrix,
    FeatureGraph,
};
pub use optim::simplex::project_row_simplex;
pub use optim::{
    fit, Hyperparams, ModelState, ObjectiveBreakdown, Problem, SelectionResult, Solver, Variant,
};
pub use report::{scenario_report, ScenarioReport, ScenarioRow};
pub use structural_entropy::{
    build_scenario, soft_structural_entropy, soft_structural_entropy_grad,
    structural_entropy_discrete, EncodingTree, Scenario, SoftAssignment,
};
