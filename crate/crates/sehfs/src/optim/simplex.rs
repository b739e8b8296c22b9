//! Euclidean projection onto the probability simplex.

use ndarray::Array2;

/// Projects `v` onto {w : w ≥ 0, Σw = 1} by the sort/threshold rule:
/// sort descending, ρ = max{k : u_k − (c_k − 1)/k > 0}, θ = (c_ρ − 1)/ρ,
/// output max(v_i − θ, 0).
pub fn project_row_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "projection of an empty vector");
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t; // k = 0 always qualifies, so θ is always set
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Row-wise simplex projection, in place.
pub(crate) fn project_rows(w: &mut Array2<f64>) {
    for mut row in w.rows_mut() {
        let projected = project_row_simplex(row.as_slice().expect("contiguous row"));
        for (slot, v) in row.iter_mut().zip(projected) {
            *slot = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feasible_points_are_unchanged() {
        assert_eq!(project_row_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_row_simplex(&[1.0]), vec![1.0]);
    }

    #[test]
    fn hand_executed_cases() {
        // u = [2, 0]: ρ = 1, θ = 1.
        assert_eq!(project_row_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        // Symmetric overweight point splits evenly.
        assert_eq!(project_row_simplex(&[1.0, 1.0]), vec![0.5, 0.5]);
        // u = [0.3, 0.2, −0.1]: every prefix keeps u_k − (c_k−1)/k > 0,
        // so ρ = 3 and θ = (0.4 − 1)/3 = −0.2.
        let p = project_row_simplex(&[0.3, -0.1, 0.2]);
        let expected = [0.5, 0.1, 0.4];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn single_entry_is_pinned_to_one() {
        assert_eq!(project_row_simplex(&[-3.7]), vec![1.0]);
        assert_eq!(project_row_simplex(&[42.0]), vec![1.0]);
    }

    proptest! {
        #[test]
        fn output_is_on_the_simplex(v in prop::collection::vec(-10.0f64..10.0, 1..8)) {
            let p = project_row_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_row_simplex(&v);
            let pp = project_row_simplex(&p);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
