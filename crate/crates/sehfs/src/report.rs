//! Side-by-side validation report for the two limiting dependency
//! scenarios: exact joint entropy, its second-order approximation, and the
//! encoding-tree entropy, with both the computed value and the reference
//! constants.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::info::{joint_entropy_exact, second_order_approx};
use crate::structural_entropy::{build_scenario, structural_entropy_discrete, Scenario};

/// One scenario's oracle values and deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub name: String,
    /// Exact joint entropy H* of the three-feature design.
    pub joint_entropy: f64,
    /// Second-order approximation H^(2).
    pub second_order: f64,
    /// Δ^(2) = |H^(2) − H*|.
    pub delta_second_order: f64,
    /// Encoding-tree entropy H^T under this crate's volume/cut convention.
    pub tree_entropy: f64,
    /// Δ^T = |H^T − H*|.
    pub delta_tree: f64,
    /// Reference tree-entropy constant for this scenario.
    pub tree_entropy_reference: f64,
    /// Deviation of the reference constant from H*.
    pub delta_tree_reference: f64,
    /// Whether Δ^T < Δ^(2) under the implemented convention.
    pub comparative_holds: bool,
}

/// Both scenario rows plus the convention note explaining the gap between
/// the computed tree entropy and the reference constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub rows: Vec<ScenarioRow>,
    pub convention_note: String,
}

/// The documented volume/cut convention and why the reference tree-entropy
/// constants are reported but not reproduced.
pub const CONVENTION_NOTE: &str = "Volume/cut convention: node degree = off-diagonal row sum \
of A; vol(root) = sum(A); cut = total weight of boundary-crossing edges. Direct evaluation of \
the encoding-tree entropy under this convention yields log2(3) ~= 1.585 in both limiting \
scenarios. The reference constants 4*log2(3)-4 ~= 2.338 and 2*log2(3)-2 ~= 1.169 correspond \
to an alternative volume/cut convention that is not recoverable from the available \
description (possibly involving self-loop weights or a different volume normalization). Both \
values are reported side by side; conventions are never tuned to force a match.";

pub fn scenario_report() -> Result<ScenarioReport> {
    let log3 = 3.0f64.log2();
    let spec = [
        (Scenario::SynergyXor, "S1 (maximum synergy, xor)", 4.0 * log3 - 4.0),
        (Scenario::RedundancyEqual, "S2 (maximum redundancy, equal)", 2.0 * log3 - 2.0),
    ];
    let mut rows = Vec::with_capacity(2);
    for (which, name, reference) in spec {
        let (disc, graph, tree) = build_scenario(which);
        let subset = [0, 1, 2];
        let joint_entropy = joint_entropy_exact(&disc, &subset)?;
        let second_order = second_order_approx(&disc, &subset)?;
        let tree_entropy = structural_entropy_discrete(&graph, &tree)?;
        let delta_second_order = (second_order - joint_entropy).abs();
        let delta_tree = (tree_entropy - joint_entropy).abs();
        rows.push(ScenarioRow {
            name: name.to_string(),
            joint_entropy,
            second_order,
            delta_second_order,
            tree_entropy,
            delta_tree,
            tree_entropy_reference: reference,
            delta_tree_reference: (reference - joint_entropy).abs(),
            comparative_holds: delta_tree < delta_second_order,
        });
    }
    Ok(ScenarioReport { rows, convention_note: CONVENTION_NOTE.to_string() })
}
