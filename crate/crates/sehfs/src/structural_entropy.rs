//! Structural entropy over encoding trees, its soft differentiable
//! relaxation for cluster-assignment matrices, and the two limiting-case
//! scenarios (maximum synergy via XOR, maximum redundancy via identical
//! features) used to validate the whole construction.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::info::{DiscretizedMatrix, FeatureGraph};

/// Log/division guard for near-empty soft clusters.
pub(crate) const SE_GUARD: f64 = 1e-12;

/// Default edge weight for the vanishing-MI synergy scenario.
pub const SCENARIO_SYNERGY_EPSILON: f64 = 1e-6;

/// A hierarchical partition of graph nodes. The root holds every node and
/// each non-leaf node's children partition its member set. Leaves are
/// usually singletons; coarser leaves are accepted so partial trees (e.g.
/// a cluster layer without leaf expansion) can be scored directly.
#[derive(Debug, Clone)]
pub struct EncodingTree {
    parent: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
    root: usize,
}

impl EncodingTree {
    pub fn new(parent: Vec<Option<usize>>, mut members: Vec<Vec<usize>>) -> Result<Self> {
        if parent.is_empty() || parent.len() != members.len() {
            return Err(Error::invalid("encoding tree node lists are empty or misaligned"));
        }
        let n = parent.len();
        let roots: Vec<usize> =
            (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::invalid(format!(
                "encoding tree must have exactly one root, found {}",
                roots.len()
            )));
        }
        let root = roots[0];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p >= n || *p == i {
                    return Err(Error::invalid(format!("node {i} has invalid parent {p}")));
                }
            }
        }
        // Every node must reach the root without cycling.
        for mut cur in 0..n {
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::invalid("encoding tree contains a parent cycle"));
                }
            }
            if cur != root {
                return Err(Error::invalid("encoding tree is not connected to the root"));
            }
        }
        for (i, m) in members.iter_mut().enumerate() {
            m.sort_unstable();
            m.dedup();
            if m.is_empty() {
                return Err(Error::invalid(format!("node {i} has no members")));
            }
        }
        // Children partition their parent's member set.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        for i in 0..n {
            if children[i].is_empty() {
                continue;
            }
            let mut union: Vec<usize> =
                children[i].iter().flat_map(|&c| members[c].iter().copied()).collect();
            let total: usize = children[i].iter().map(|&c| members[c].len()).sum();
            union.sort_unstable();
            union.dedup();
            if union.len() != total || union != members[i] {
                return Err(Error::invalid(format!(
                    "children of node {i} do not partition its member set"
                )));
            }
        }
        Ok(Self { parent, members, root })
    }

    /// Root plus one singleton leaf per graph node.
    pub fn two_layer(d: usize) -> Self {
        let mut parent = vec![None];
        let mut members = vec![(0..d).collect::<Vec<_>>()];
        for i in 0..d {
            parent.push(Some(0));
            members.push(vec![i]);
        }
        Self { parent, members, root: 0 }
    }

    /// Root plus one node per non-empty cluster of `assignment` (no leaf
    /// layer). Scoring this tree yields exactly the intermediate-layer sum
    /// of the corresponding three-layer tree.
    pub fn cluster_layer(assignment: &[usize], clusters: usize) -> Result<Self> {
        let groups = group_by_cluster(assignment, clusters)?;
        let mut parent = vec![None];
        let mut members = vec![(0..assignment.len()).collect::<Vec<_>>()];
        for g in groups.into_iter().filter(|g| !g.is_empty()) {
            parent.push(Some(0));
            members.push(g);
        }
        Self::new(parent, members)
    }

    /// Root, one node per non-empty cluster, one singleton leaf per graph
    /// node under its cluster.
    pub fn three_layer(assignment: &[usize], clusters: usize) -> Result<Self> {
        let groups = group_by_cluster(assignment, clusters)?;
        let mut parent = vec![None];
        let mut members = vec![(0..assignment.len()).collect::<Vec<_>>()];
        for g in groups.into_iter().filter(|g| !g.is_empty()) {
            parent.push(Some(0));
            let cluster_id = parent.len() - 1;
            members.push(g.clone());
            for i in g {
                parent.push(Some(cluster_id));
                members.push(vec![i]);
            }
        }
        Self::new(parent, members)
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn members(&self, node: usize) -> &[usize] {
        &self.members[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        !self.parent.iter().any(|p| *p == Some(node))
    }

    /// True when every leaf is a singleton (a complete encoding tree).
    pub fn is_complete(&self) -> bool {
        (0..self.node_count()).all(|i| !self.is_leaf(i) || self.members[i].len() == 1)
    }
}

fn group_by_cluster(assignment: &[usize], clusters: usize) -> Result<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); clusters];
    for (i, &c) in assignment.iter().enumerate() {
        if c >= clusters {
            return Err(Error::invalid(format!(
                "assignment {c} for feature {i} exceeds cluster count {clusters}"
            )));
        }
        groups[c].push(i);
    }
    Ok(groups)
}

/// Discrete structural entropy H^T(G) in bits: for every non-root node α,
/// −(g_α / vol(λ)) · log2(vol(α) / vol(α⁻)), where g_α is the total weight
/// of edges crossing the boundary of α's member set and volumes are
/// off-diagonal degree sums. Zero-volume nodes contribute nothing.
pub fn structural_entropy_discrete(g: &FeatureGraph, tree: &EncodingTree) -> Result<f64> {
    let d = g.node_count();
    let expected: Vec<usize> = (0..d).collect();
    if tree.members(tree.root()) != expected.as_slice() {
        return Err(Error::shape(format!(
            "tree root covers {:?} nodes, graph has {d}",
            tree.members(tree.root()).len()
        )));
    }
    let deg = g.degrees();
    let vol_total: f64 = deg.iter().sum();
    if vol_total <= 0.0 {
        return Err(Error::invalid("graph has zero total volume"));
    }
    let a = g.adjacency();
    let vol = |node: usize| -> f64 { tree.members(node).iter().map(|&i| deg[i]).sum() };

    let mut h = 0.0;
    for node in 0..tree.node_count() {
        if node == tree.root() {
            continue;
        }
        let v = vol(node);
        if v <= 0.0 {
            continue;
        }
        let parent_vol = vol(tree.parent(node).expect("non-root has a parent"));
        let mut inside = vec![false; d];
        for &i in tree.members(node) {
            inside[i] = true;
        }
        let mut cut = 0.0;
        for &i in tree.members(node) {
            for (j, flag) in inside.iter().enumerate() {
                if !flag && j != i {
                    cut += a[[i, j]];
                }
            }
        }
        h += -(cut / vol_total) * (v / parent_vol).log2();
    }
    Ok(h)
}

/// A d×q cluster-membership matrix with non-negative entries and unit row
/// sums.
#[derive(Debug, Clone)]
pub struct SoftAssignment {
    w: Array2<f64>,
}

impl SoftAssignment {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("assignment has negative or non-finite entries"));
        }
        for (i, row) in w.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("assignment row {i} sums to {sum}")));
            }
        }
        Ok(Self { w })
    }

    /// One-hot assignment of each feature to its cluster id.
    pub fn from_hard(assignment: &[usize], clusters: usize) -> Result<Self> {
        let mut w = Array2::zeros((assignment.len(), clusters));
        for (i, &c) in assignment.iter().enumerate() {
            if c >= clusters {
                return Err(Error::invalid(format!(
                    "assignment {c} for feature {i} exceeds cluster count {clusters}"
                )));
            }
            w[[i, c]] = 1.0;
        }
        Ok(Self { w })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.w
    }
}

/// Soft structural entropy of the cluster layer:
/// −(1/S) Σ_j g_j · log2(q_j / S) with S = sum(A), q_j = 1ᵀA w_j (guarded
/// below by 1e−12 inside the log), g_j = (1 − w_j)ᵀ A w_j.
///
/// `w` need not have simplex rows; the expression is defined for any real
/// matrix, which is what the finite-difference checks rely on.
pub fn soft_structural_entropy(g: &FeatureGraph, w: &Array2<f64>) -> Result<f64> {
    check_assignment_shape(g, w)?;
    if g.total_weight() <= 0.0 {
        return Err(Error::invalid("soft structural entropy of a zero-weight graph"));
    }
    Ok(se_value_raw(g.adjacency(), w))
}

/// Analytic gradient of [`soft_structural_entropy`] with respect to `w`:
/// column j is −(1/S)[h_j (a − (A + Aᵀ) w_j) + (g_j / (ln2 · q_j)) a] with
/// a = Aᵀ1 and h_j = log2(q_j / S). A zero-weight graph yields an all-zero
/// gradient (the guard limit), never NaN/Inf.
pub fn soft_structural_entropy_grad(g: &FeatureGraph, w: &Array2<f64>) -> Result<Array2<f64>> {
    check_assignment_shape(g, w)?;
    Ok(se_grad_raw(g.adjacency(), w))
}

fn check_assignment_shape(g: &FeatureGraph, w: &Array2<f64>) -> Result<()> {
    if w.nrows() != g.node_count() {
        return Err(Error::shape(format!(
            "assignment has {} rows for a graph of {} nodes",
            w.nrows(),
            g.node_count()
        )));
    }
    Ok(())
}

pub(crate) fn se_value_raw(a: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let s = a.sum();
    if s <= 0.0 {
        return 0.0;
    }
    let aw = a.dot(w);
    let mut total = 0.0;
    for j in 0..w.ncols() {
        let awj = aw.column(j);
        let qj = awj.sum();
        let gj = qj - w.column(j).dot(&awj);
        total += gj * (qj.max(SE_GUARD) / s).log2();
    }
    -total / s
}

pub(crate) fn se_grad_raw(a: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let (d, q) = w.dim();
    let s = a.sum();
    let mut grad = Array2::zeros((d, q));
    if s <= 0.0 {
        return grad;
    }
    let col_sums = a.sum_axis(Axis(0)); // a = Aᵀ1
    let aw = a.dot(w);
    let atw = a.t().dot(w);
    for j in 0..q {
        let awj = aw.column(j);
        let qj = awj.sum();
        let gj = qj - w.column(j).dot(&awj);
        let qj_guarded = qj.max(SE_GUARD);
        let hj = (qj_guarded / s).log2();
        let coeff = gj / (std::f64::consts::LN_2 * qj_guarded);
        for i in 0..d {
            let sym = awj[i] + atw[[i, j]];
            grad[[i, j]] = -(hj * (col_sums[i] - sym) + coeff * col_sums[i]) / s;
        }
    }
    grad
}

/// The two limiting dependency structures on three binary features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Maximum synergy: X3 = X1 ⊕ X2 over the exhaustive 4-row design;
    /// every pairwise MI vanishes, so the graph carries ε-weight edges and
    /// the minimizing tree keeps three singleton clusters.
    SynergyXor,
    /// Maximum redundancy: three identical uniform binary features; every
    /// pairwise MI is 1 and the minimizing tree uses a single cluster.
    RedundancyEqual,
}

/// Builds the scenario's discretized design matrix, its feature graph in
/// the limiting weights, and the structural-entropy-minimizing tree.
pub fn build_scenario(which: Scenario) -> (DiscretizedMatrix, FeatureGraph, EncodingTree) {
    build_scenario_with_epsilon(which, SCENARIO_SYNERGY_EPSILON)
}

/// As [`build_scenario`], with a configurable ε for the synergy graph.
pub fn build_scenario_with_epsilon(
    which: Scenario,
    epsilon: f64,
) -> (DiscretizedMatrix, FeatureGraph, EncodingTree) {
    match which {
        Scenario::SynergyXor => {
            let codes = Array2::from_shape_vec(
                (4, 3),
                vec![0, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 0],
            )
            .expect("static shape");
            let disc = DiscretizedMatrix::from_codes(codes);
            let graph = off_diagonal_graph(3, epsilon);
            let tree = EncodingTree::three_layer(&[0, 1, 2], 3).expect("static tree");
            (disc, graph, tree)
        }
        Scenario::RedundancyEqual => {
            let codes = Array2::from_shape_vec((2, 3), vec![0, 0, 0, 1, 1, 1]).expect("static shape");
            let disc = DiscretizedMatrix::from_codes(codes);
            let graph = off_diagonal_graph(3, 1.0);
            let tree = EncodingTree::three_layer(&[0, 0, 0], 1).expect("static tree");
            (disc, graph, tree)
        }
    }
}

fn off_diagonal_graph(d: usize, weight: f64) -> FeatureGraph {
    let mut a = Array2::from_elem((d, d), weight);
    for i in 0..d {
        a[[i, i]] = 0.0;
    }
    FeatureGraph::new(a, crate::info::DiagonalPolicy::Zero).expect("constructed symmetric")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::DiagonalPolicy;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complete_graph(d: usize) -> FeatureGraph {
        off_diagonal_graph(d, 1.0)
    }

    fn random_graph(rng: &mut ChaCha8Rng, d: usize) -> FeatureGraph {
        let mut a = Array2::zeros((d, d));
        for i in 0..d {
            for j in (i + 1)..d {
                let w = rng.random_range(0.0..1.0);
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
        FeatureGraph::new(a, DiagonalPolicy::Zero).unwrap()
    }

    #[test]
    fn complete_triangle_two_layer_value() {
        let g = complete_graph(3);
        let t = EncodingTree::two_layer(3);
        let h = structural_entropy_discrete(&g, &t).unwrap();
        assert_abs_diff_eq!(h, 3.0f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn single_coarse_child_has_zero_entropy() {
        let g = complete_graph(4);
        // Root over one child holding all nodes; the child's cut is empty.
        let t = EncodingTree::new(
            vec![None, Some(0)],
            vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]],
        )
        .unwrap();
        assert!(!t.is_complete());
        let h = structural_entropy_discrete(&g, &t).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn disconnected_edge_pairs() {
        let mut a = Array2::zeros((4, 4));
        a[[0, 1]] = 1.0;
        a[[1, 0]] = 1.0;
        a[[2, 3]] = 1.0;
        a[[3, 2]] = 1.0;
        let g = FeatureGraph::new(a, DiagonalPolicy::Zero).unwrap();
        let t = EncodingTree::three_layer(&[0, 0, 1, 1], 2).unwrap();
        let h = structural_entropy_discrete(&g, &t).unwrap();
        // Cluster cuts are zero; each of the 4 leaves adds (1/4)·log2(2/1).
        assert_abs_diff_eq!(h, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tree_validation_rejects_bad_partitions() {
        assert!(EncodingTree::new(vec![None, None], vec![vec![0], vec![0]]).is_err());
        assert!(EncodingTree::new(
            vec![None, Some(0), Some(0)],
            vec![vec![0, 1], vec![0], vec![0]],
        )
        .is_err());
        assert!(EncodingTree::new(vec![Some(1), Some(0)], vec![vec![0], vec![0]]).is_err());
    }

    #[test]
    fn graph_mismatch_is_rejected() {
        let g = complete_graph(3);
        let t = EncodingTree::two_layer(4);
        assert!(structural_entropy_discrete(&g, &t).is_err());
    }

    #[test]
    fn scenario_graphs_and_trees() {
        let (disc, graph, tree) = build_scenario(Scenario::SynergyXor);
        assert_eq!(disc.samples(), 4);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { SCENARIO_SYNERGY_EPSILON };
                assert_eq!(graph.adjacency()[[i, j]], expected);
            }
        }
        // Three singleton clusters under the root.
        let clusters: Vec<usize> =
            (0..tree.node_count()).filter(|&n| tree.parent(n) == Some(tree.root())).collect();
        assert_eq!(clusters.len(), 3);
        assert!(clusters.iter().all(|&c| tree.members(c).len() == 1));

        let (disc, graph, tree) = build_scenario(Scenario::RedundancyEqual);
        assert_eq!(disc.samples(), 2);
        assert!(graph
            .adjacency()
            .indexed_iter()
            .all(|((i, j), &w)| w == if i == j { 0.0 } else { 1.0 }));
        let clusters: Vec<usize> =
            (0..tree.node_count()).filter(|&n| tree.parent(n) == Some(tree.root())).collect();
        assert_eq!(clusters.len(), 1);
        assert_eq!(tree.members(clusters[0]), &[0, 1, 2]);
    }

    #[test]
    fn scenario_tree_entropy_is_log2_3_under_this_convention() {
        for which in [Scenario::SynergyXor, Scenario::RedundancyEqual] {
            let (_, graph, tree) = build_scenario(which);
            let h = structural_entropy_discrete(&graph, &tree).unwrap();
            assert_abs_diff_eq!(h, 3.0f64.log2(), epsilon = 1e-9);
        }
    }

    #[test]
    fn single_cluster_soft_entropy_is_zero() {
        let g = complete_graph(4);
        let w = Array2::from_elem((4, 1), 1.0);
        assert_abs_diff_eq!(soft_structural_entropy(&g, &w).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_feature_identity_soft_entropy() {
        let g = complete_graph(2);
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        assert_abs_diff_eq!(soft_structural_entropy(&g, &w).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_weight_graph_value_errors_but_gradient_is_finite() {
        let g = FeatureGraph::new(Array2::zeros((3, 3)), DiagonalPolicy::Zero).unwrap();
        let w = Array2::from_elem((3, 2), 0.5);
        assert!(soft_structural_entropy(&g, &w).is_err());
        let grad = soft_structural_entropy_grad(&g, &w).unwrap();
        assert!(grad.iter().all(|v| v.is_finite()));
        assert_eq!(grad, Array2::<f64>::zeros((3, 2)));
    }

    #[test]
    fn hard_assignments_match_discrete_cluster_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 5);
            let assignment: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
            let soft = SoftAssignment::from_hard(&assignment, 3).unwrap();
            let value = soft_structural_entropy(&g, soft.matrix()).unwrap();
            let tree = EncodingTree::cluster_layer(&assignment, 3).unwrap();
            let discrete = structural_entropy_discrete(&g, &tree).unwrap();
            assert_abs_diff_eq!(value, discrete, epsilon = 1e-9);
        }
    }

    #[test]
    fn soft_entropy_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_graph(&mut rng, 6);
        let mut w = Array2::zeros((6, 3));
        for mut row in w.rows_mut() {
            let vals: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = vals.iter().sum();
            for (slot, v) in row.iter_mut().zip(vals) {
                *slot = v / sum;
            }
        }
        let base = soft_structural_entropy(&g, &w).unwrap();
        for c in [0.25, 3.0, 1e4] {
            let scaled = FeatureGraph::new(g.adjacency() * c, DiagonalPolicy::Zero).unwrap();
            let v = soft_structural_entropy(&scaled, &w).unwrap();
            assert_abs_diff_eq!(v, base, epsilon = 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = random_graph(&mut rng, 6);
        let mut w = Array2::zeros((6, 3));
        for mut row in w.rows_mut() {
            let vals: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = vals.iter().sum();
            for (slot, v) in row.iter_mut().zip(vals) {
                *slot = v / sum;
            }
        }
        let analytic = soft_structural_entropy_grad(&g, &w).unwrap();
        let h = 1e-6;
        let mut max_abs = 0.0f64;
        let mut fd = Array2::zeros(w.dim());
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                let mut plus = w.clone();
                plus[[i, j]] += h;
                let mut minus = w.clone();
                minus[[i, j]] -= h;
                fd[[i, j]] = (se_value_raw(g.adjacency(), &plus)
                    - se_value_raw(g.adjacency(), &minus))
                    / (2.0 * h);
                max_abs = max_abs.max(analytic[[i, j]].abs());
            }
        }
        let err = (&fd - &analytic).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err / max_abs.max(1e-12) < 1e-5, "relative error {}", err / max_abs);
    }

    #[test]
    fn planted_blocks_prefer_block_aligned_assignment() {
        // Two dense blocks of 4 nodes, weak cross edges. The block-aligned
        // hard assignment must beat every assignment that splits a block.
        let d = 8;
        let mut a = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let same_block = (i < 4) == (j < 4);
                a[[i, j]] = if same_block { 1.0 } else { 0.01 };
            }
        }
        let g = FeatureGraph::new(a, DiagonalPolicy::Zero).unwrap();
        let aligned = SoftAssignment::from_hard(&[0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let aligned_value = soft_structural_entropy(&g, aligned.matrix()).unwrap();

        for code in 0..(1usize << d) {
            let assignment: Vec<usize> = (0..d).map(|i| (code >> i) & 1).collect();
            let splits_a_block = assignment[..4].iter().any(|&c| c != assignment[0])
                || assignment[4..].iter().any(|&c| c != assignment[4]);
            if !splits_a_block {
                continue;
            }
            let w = SoftAssignment::from_hard(&assignment, 2).unwrap();
            let v = soft_structural_entropy(&g, w.matrix()).unwrap();
            assert!(
                v > aligned_value,
                "splitting assignment {assignment:?} scored {v} <= {aligned_value}"
            );
        }
    }

    #[test]
    fn soft_assignment_validation() {
        assert!(SoftAssignment::new(array![[0.5, 0.5], [1.0, 0.0]]).is_ok());
        assert!(SoftAssignment::new(array![[0.6, 0.5]]).is_err());
        assert!(SoftAssignment::new(array![[-0.1, 1.1]]).is_err());
    }
}
