//! Alternating optimization for the feature-selection objective:
//! multiplicative updates for the global view matrix, the shared semantic
//! matrix, and the per-view contribution matrices; simplex-projected
//! gradient descent with Armijo backtracking for the selection matrix; and
//! a non-negative quadratic program for the view weights.

pub mod simplex;
mod updates;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_features, MultiViewDataset, NormalizeMode};
use crate::error::{Error, Result};
use crate::graphs::{label_laplacian, semantic_graph, LabelLaplacian, Sigma, ViewPlacement};
use crate::info::{build_feature_graph, default_bins, DiagonalPolicy, Discretization, FeatureGraph};
use crate::structural_entropy::se_value_raw;

/// Regularization weights and solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of the structural-entropy term.
    pub alpha: f64,
    /// Weight of the two reconstruction terms.
    pub beta: f64,
    /// Weight of the view-specific alignment term.
    pub gamma: f64,
    /// Weight of the label-Laplacian term.
    pub lambda: f64,
    pub max_outer_iters: usize,
    /// Relative-decrease tolerance for the outer loop.
    pub tol: f64,
    /// Relative-decrease tolerance for the inner W subproblem.
    pub w_tol: f64,
    pub max_inner_iters: usize,
    /// Take exactly one projected step per outer iteration instead of
    /// running the W subproblem to its own tolerance.
    pub w_single_step: bool,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Division/log guard.
    pub eps: f64,
    pub seed: u64,
    /// Neighbor count for the per-view semantic graphs.
    pub knn: usize,
    /// Bins for the mutual-information matrix; `None` uses min(10, ⌈√n⌉).
    pub bins: Option<usize>,
    /// Rebuild the feature graph from the current global view matrix every
    /// this many outer iterations. Off by default: the graph is computed
    /// once from the normalized input features.
    pub recompute_graph_every: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            lambda: 1.0,
            max_outer_iters: 100,
            tol: 1e-5,
            w_tol: 1e-5,
            max_inner_iters: 50,
            w_single_step: false,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            eps: 1e-12,
            seed: 0,
            knn: 5,
            bins: None,
            recompute_graph_every: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tol > 0.0) || !(self.w_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid("armijo_c must lie in (0, 1)"));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::invalid("armijo_shrink must lie in (0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::invalid("iteration budgets must be at least 1"));
        }
        if self.knn == 0 {
            return Err(Error::invalid("knn must be at least 1"));
        }
        Ok(())
    }
}

/// Which objective terms stay active (the ablation variants).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// All terms.
    Full,
    /// Drops the structural-entropy term; W comes from the classifier fit
    /// alone.
    NoSe,
    /// Drops the shared semantic matrix: both reconstruction terms and the
    /// label-Laplacian term vanish, S and the view weights stay frozen.
    NoShared,
    /// Drops the label-Laplacian term.
    NoLap,
    /// Drops the view-specific contribution matrices.
    NoSpecific,
}

impl Variant {
    pub(crate) fn weights(self, hp: &Hyperparams) -> Weights {
        let (alpha, beta, gamma, lambda) = match self {
            Variant::Full => (hp.alpha, hp.beta, hp.gamma, hp.lambda),
            Variant::NoSe => (0.0, hp.beta, hp.gamma, hp.lambda),
            Variant::NoShared => (hp.alpha, 0.0, hp.gamma, 0.0),
            Variant::NoLap => (hp.alpha, hp.beta, hp.gamma, 0.0),
            Variant::NoSpecific => (hp.alpha, hp.beta, 0.0, hp.lambda),
        };
        Weights { alpha, beta, gamma, lambda, eps: hp.eps }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSe => "no_se",
            Variant::NoShared => "no_shared",
            Variant::NoLap => "no_lap",
            Variant::NoSpecific => "no_specific",
        }
    }
}

/// Effective per-term weights after variant masking.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub eps: f64,
}

/// One additive term per objective component; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub fit: f64,
    pub se: f64,
    pub recon_xf: f64,
    pub recon_s: f64,
    pub lap: f64,
    pub specific: f64,
}

/// Everything that stays constant across outer iterations: the normalized
/// views, labels, placements, per-view semantic graphs, the label
/// Laplacian (with the element-wise sign split of L_Y·L_Yᵀ used by the S
/// update), the feature graph, and a few cached Gram matrices.
pub struct Problem {
    views: Vec<Array2<f64>>,
    y: Array2<f64>,
    placement: ViewPlacement,
    semantic: Vec<Array2<f64>>,
    label_lap: LabelLaplacian,
    graph: FeatureGraph,
    b0: Array2<f64>,
    b0_pos: Array2<f64>,
    b0_neg: Array2<f64>,
    xtx: Vec<Array2<f64>>,
    gram_semantic: Array2<f64>,
}

impl Problem {
    /// Precomputes all constants. The input is min-max normalized per
    /// column first, which also guarantees the non-negative starting point
    /// the multiplicative updates require.
    pub fn new(data: &MultiViewDataset, hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        let data = normalize_features(data, NormalizeMode::MinMax);
        let n = data.samples();
        let semantic = data
            .views()
            .iter()
            .map(|x| Ok(semantic_graph(x.view(), hp.knn, Sigma::Auto)?.matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        let bins = hp.bins.unwrap_or_else(|| default_bins(n));
        let graph = build_feature_graph(
            data.concatenated().view(),
            bins,
            Discretization::EqualFrequency,
            DiagonalPolicy::Zero,
        )?;
        let label_lap = label_laplacian(data.labels().view());
        Self::from_parts(
            data.views().to_vec(),
            data.labels().clone(),
            semantic,
            label_lap,
            graph,
        )
    }

    /// Assembles a problem from already-prepared parts (besides `new`,
    /// exercised directly by tests that need full control of each matrix).
    pub fn from_parts(
        views: Vec<Array2<f64>>,
        y: Array2<f64>,
        semantic: Vec<Array2<f64>>,
        label_lap: LabelLaplacian,
        graph: FeatureGraph,
    ) -> Result<Self> {
        if views.is_empty() || semantic.len() != views.len() {
            return Err(Error::invalid("views and semantic graphs are misaligned"));
        }
        let n = y.nrows();
        for (v, x) in views.iter().enumerate() {
            if x.nrows() != n {
                return Err(Error::shape(format!("view {v} disagrees with labels on rows")));
            }
            if semantic[v].dim() != (n, n) {
                return Err(Error::shape(format!("semantic graph {v} is not {n}x{n}")));
            }
        }
        let dims: Vec<usize> = views.iter().map(|x| x.ncols()).collect();
        let placement = ViewPlacement::from_dims(&dims)?;
        if graph.node_count() != placement.total_features() {
            return Err(Error::shape(format!(
                "feature graph has {} nodes for {} features",
                graph.node_count(),
                placement.total_features()
            )));
        }

        let b0 = label_lap.laplacian().dot(&label_lap.laplacian().t());
        let b0_pos = b0.mapv(|v| v.max(0.0));
        let b0_neg = b0.mapv(|v| (-v).max(0.0));
        let xtx = views.iter().map(|x| x.t().dot(x)).collect();
        let v_count = views.len();
        let mut gram_semantic = Array2::zeros((v_count, v_count));
        for u in 0..v_count {
            for v in u..v_count {
                let g = frob_inner(&semantic[u], &semantic[v]);
                gram_semantic[[u, v]] = g;
                gram_semantic[[v, u]] = g;
            }
        }
        Ok(Self {
            views,
            y,
            placement,
            semantic,
            label_lap,
            graph,
            b0,
            b0_pos,
            b0_neg,
            xtx,
            gram_semantic,
        })
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    pub fn labels(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn placement(&self) -> &ViewPlacement {
        &self.placement
    }

    pub fn semantic_graphs(&self) -> &[Array2<f64>] {
        &self.semantic
    }

    pub fn label_laplacian(&self) -> &LabelLaplacian {
        &self.label_lap
    }

    pub fn feature_graph(&self) -> &FeatureGraph {
        &self.graph
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn samples(&self) -> usize {
        self.y.nrows()
    }

    pub fn total_features(&self) -> usize {
        self.placement.total_features()
    }

    pub fn label_count(&self) -> usize {
        self.y.ncols()
    }

    /// Σ_v α_v X_v P_v as one n×d matrix (the placement is a column-block
    /// assignment, never a dense operator).
    pub(crate) fn weighted_concat(&self, alpha: &Array1<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.samples(), self.total_features()));
        for (v, x) in self.views.iter().enumerate() {
            let off = self.placement.offset(v);
            out.slice_mut(ndarray::s![.., off..off + x.ncols()])
                .assign(&(x * alpha[v]));
        }
        out
    }

    /// Σ_v α_v S_v.
    pub(crate) fn weighted_semantic(&self, alpha: &Array1<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(self.semantic[0].dim());
        for (v, s) in self.semantic.iter().enumerate() {
            out.scaled_add(alpha[v], s);
        }
        out
    }

    /// A feasible, meaningful starting point: X^f is the normalized
    /// concatenation, W rows start uniform with seeded jitter re-projected
    /// onto the simplex, contribution matrices start at identity, view
    /// weights at 1/V, and S at the weight-averaged semantic graph.
    pub fn init_state(&self, hp: &Hyperparams) -> ModelState {
        let q = self.label_count();
        let d = self.total_features();
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let jitter = 0.01 / q as f64;
        let mut w = Array2::from_shape_fn((d, q), |_| {
            1.0 / q as f64 + rng.random_range(-jitter..jitter)
        });
        simplex::project_rows(&mut w);

        let mut xf = Array2::zeros((self.samples(), d));
        for (v, x) in self.views.iter().enumerate() {
            let off = self.placement.offset(v);
            xf.slice_mut(ndarray::s![.., off..off + x.ncols()]).assign(x);
        }
        let h = self.views.iter().map(|x| Array2::eye(x.ncols())).collect();
        let v_count = self.view_count();
        let alpha_view = Array1::from_elem(v_count, 1.0 / v_count as f64);
        let s = self.weighted_semantic(&alpha_view);
        ModelState { xf, w, s, h, alpha_view }
    }

    /// Evaluates every objective term exactly as written, with the
    /// variant's removed terms reported as zero.
    pub fn objective(
        &self,
        state: &ModelState,
        hp: &Hyperparams,
        variant: Variant,
    ) -> ObjectiveBreakdown {
        let wts = variant.weights(hp);
        let fit = frob_sq(&(&state.xf.dot(&state.w) - &self.y));
        let se = if wts.alpha > 0.0 {
            wts.alpha * se_value_raw(self.graph.adjacency(), &state.w)
        } else {
            0.0
        };
        let (recon_xf, recon_s) = if wts.beta > 0.0 {
            let k = self.weighted_concat(&state.alpha_view);
            let mixed = self.weighted_semantic(&state.alpha_view);
            (
                wts.beta * frob_sq(&(&state.xf - &state.s.dot(&k))),
                wts.beta * frob_sq(&(&state.s - &mixed)),
            )
        } else {
            (0.0, 0.0)
        };
        let lap = if wts.lambda > 0.0 {
            wts.lambda * frob_inner(&state.s, &self.b0)
        } else {
            0.0
        };
        let specific = if wts.gamma > 0.0 {
            let mut sum = 0.0;
            for (v, x) in self.views.iter().enumerate() {
                let block = self
                    .placement
                    .extract(state.xf.view(), v)
                    .expect("state matches placement");
                sum += frob_sq(&(&block - &x.dot(&state.h[v])));
            }
            wts.gamma * sum
        } else {
            0.0
        };
        ObjectiveBreakdown {
            total: fit + se + recon_xf + recon_s + lap + specific,
            fit,
            se,
            recon_xf,
            recon_s,
            lap,
            specific,
        }
    }
}

/// The five optimization variables.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// Global view matrix, n×d, non-negative.
    pub xf: Array2<f64>,
    /// Selection matrix, d×q, non-negative with unit row sums.
    pub w: Array2<f64>,
    /// Shared semantic matrix, n×n, non-negative.
    pub s: Array2<f64>,
    /// Per-view contribution matrices, d(v)×d(v), non-negative.
    pub h: Vec<Array2<f64>>,
    /// Non-negative view weights, length V.
    pub alpha_view: Array1<f64>,
}

/// Final artifact of a fit: features ranked by descending L2 row norm of
/// W, the W snapshot, the per-iteration objective trace, and run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub ranked_features: Vec<usize>,
    pub w_row_norms: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub alpha_view: Vec<f64>,
    pub variant: Variant,
    pub hyperparams: Hyperparams,
    pub converged: bool,
    pub iterations: usize,
    /// Outer iterations whose W line search could not find an acceptable
    /// step (W was kept unchanged there).
    pub w_stall_count: usize,
    pub trace: Vec<ObjectiveBreakdown>,
}

impl SelectionResult {
    /// The first ⌈fraction·d⌉ ranked features.
    pub fn top_fraction(&self, fraction: f64) -> Vec<usize> {
        let d = self.ranked_features.len();
        let m = ((fraction * d as f64).ceil() as usize).clamp(1, d);
        self.ranked_features[..m].to_vec()
    }
}

/// Drives the alternating optimization one outer iteration at a time so
/// callers can inspect the state between iterations.
pub struct Solver {
    problem: Problem,
    state: ModelState,
    hp: Hyperparams,
    variant: Variant,
    trace: Vec<ObjectiveBreakdown>,
    iterations: usize,
    converged: bool,
    w_stalls: usize,
}

impl Solver {
    pub fn new(data: &MultiViewDataset, hp: Hyperparams, variant: Variant) -> Result<Self> {
        let problem = Problem::new(data, &hp)?;
        let state = problem.init_state(&hp);
        let first = problem.objective(&state, &hp, variant);
        Ok(Self {
            problem,
            state,
            hp,
            variant,
            trace: vec![first],
            iterations: 0,
            converged: false,
            w_stalls: 0,
        })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn trace(&self) -> &[ObjectiveBreakdown] {
        &self.trace
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Runs one outer iteration: X^f, W, S, {H_v}, α, in that order, then
    /// records the objective and checks the relative-decrease stop rule.
    pub fn step(&mut self) -> Result<ObjectiveBreakdown> {
        let wts = self.variant.weights(&self.hp);
        let iteration = self.iterations + 1;

        if let Some(every) = self.hp.recompute_graph_every {
            if every > 0 && wts.alpha > 0.0 && self.iterations > 0 && self.iterations % every == 0
            {
                let bins = self.hp.bins.unwrap_or_else(|| default_bins(self.problem.samples()));
                self.problem.graph = build_feature_graph(
                    self.state.xf.view(),
                    bins,
                    Discretization::EqualFrequency,
                    DiagonalPolicy::Zero,
                )?;
            }
        }

        updates::update_xf(&self.problem, &mut self.state, &wts, iteration)?;
        let stalled = updates::update_w(&self.problem, &mut self.state, &self.hp, &wts, iteration)?;
        if stalled {
            self.w_stalls += 1;
        }
        if self.variant != Variant::NoShared {
            updates::update_s(&self.problem, &mut self.state, &wts, iteration)?;
        }
        if self.variant != Variant::NoSpecific {
            for v in 0..self.problem.view_count() {
                updates::update_h(&self.problem, &mut self.state, &wts, iteration, v)?;
            }
        }
        if self.variant != Variant::NoShared {
            updates::update_alpha(&self.problem, &mut self.state, iteration)?;
        }

        let breakdown = self.problem.objective(&self.state, &self.hp, self.variant);
        let prev = self.trace.last().expect("trace starts populated").total;
        if (breakdown.total - prev).abs() / (prev + self.hp.eps) < self.hp.tol {
            self.converged = true;
        }
        self.trace.push(breakdown);
        self.iterations = iteration;
        Ok(breakdown)
    }

    /// Iterates until the stop rule fires or the outer budget is spent.
    pub fn run(&mut self) -> Result<()> {
        while !self.converged && self.iterations < self.hp.max_outer_iters {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_result(self) -> SelectionResult {
        let d = self.state.w.nrows();
        let w_row_norms: Vec<f64> = self
            .state
            .w
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .collect();
        let mut ranked: Vec<usize> = (0..d).collect();
        ranked.sort_by(|&a, &b| {
            w_row_norms[b]
                .partial_cmp(&w_row_norms[a])
                .expect("finite norms")
                .then(a.cmp(&b))
        });
        SelectionResult {
            ranked_features: ranked,
            w_row_norms,
            w: self.state.w.rows().into_iter().map(|r| r.to_vec()).collect(),
            alpha_view: self.state.alpha_view.to_vec(),
            variant: self.variant,
            hyperparams: self.hp,
            converged: self.converged,
            iterations: self.iterations,
            w_stall_count: self.w_stalls,
            trace: self.trace,
        }
    }
}

/// Runs the full pipeline: precomputation, alternating optimization until
/// convergence or the iteration budget, and feature ranking.
pub fn fit(data: &MultiViewDataset, hp: Hyperparams, variant: Variant) -> Result<SelectionResult> {
    let mut solver = Solver::new(data, hp, variant)?;
    solver.run()?;
    Ok(solver.into_result())
}

pub(crate) fn frob_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub(crate) fn frob_inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
