use crate::error::{Error, Result};
use crate::problem::{AffinityDecomposition, MatchingState, PermutationMatching};

/// `xᵀ M x = uᵀ x + xᵀ P x` for the 0/1 encoding `x` of a permutation.
pub fn qap_objective(aff: &AffinityDecomposition, x: &PermutationMatching) -> Result<f64> {
    let n = aff.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let a = x.assignment();
    let selected = |k: usize| a[k / n] == k % n;
    let unary: f64 = a.iter().enumerate().map(|(i, &j)| aff.u()[i * n + j]).sum();
    let pairwise: f64 = aff
        .entries()
        .iter()
        .filter(|e| selected(e.first) && selected(e.second))
        .map(|e| 2.0 * e.weight)
        .sum();
    Ok(unary + pairwise)
}

/// The entropy-regularized relaxation `−uᵀz − zᵀPz + λ zᵀ log z`, with
/// `0 · log 0 = 0`.
pub fn relaxed_objective(aff: &AffinityDecomposition, z: &MatchingState, lambda: f64) -> Result<f64> {
    if z.n() != aff.n() {
        return Err(Error::DimensionMismatch { expected: aff.n(), found: z.n() });
    }
    let zs = z.as_slice();
    if let Some(bad) = zs.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("relaxed assignment entry {bad} is not finite and nonnegative")));
    }
    Ok(-aff.energy(zs) + lambda * entropy_term(zs))
}

/// `Σ z log z` with `0 log 0 = 0`.
pub(crate) fn entropy_term(z: &[f64]) -> f64 {
    z.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
}

#[cfg(test)]
mod tests {
    use ndarray::Array1;

    use super::*;
    use crate::problem::GraphInstance;

    fn triangle() -> GraphInstance {
        GraphInstance::new(vec![vec![0.0]; 3], vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn unary_only_counts_one_per_row() {
        let aff = AffinityDecomposition::new(3, Array1::ones(9), vec![]).unwrap();
        for p in [vec![0, 1, 2], vec![2, 0, 1], vec![1, 0, 2]] {
            let x = PermutationMatching::new(p).unwrap();
            assert_eq!(qap_objective(&aff, &x).unwrap(), 3.0);
        }
    }

    #[test]
    fn triangles_count_each_edge_twice() {
        let aff = AffinityDecomposition::koopman_beckmann(&triangle(), &triangle()).unwrap();
        let x = PermutationMatching::identity(3);
        assert_eq!(qap_objective(&aff, &x).unwrap(), 6.0);
    }

    #[test]
    fn dimension_mismatch() {
        let aff = AffinityDecomposition::koopman_beckmann(&triangle(), &triangle()).unwrap();
        let x = PermutationMatching::identity(4);
        assert!(matches!(qap_objective(&aff, &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn uniform_entropy_closed_form() {
        let aff = AffinityDecomposition::new(2, Array1::zeros(4), vec![]).unwrap();
        let z = MatchingState::uniform(2);
        for lambda in [0.5, 1.0, 3.0] {
            let v = relaxed_objective(&aff, &z, lambda).unwrap();
            assert!((v - (-2.0 * lambda * 2f64.ln())).abs() < 1e-14);
        }
    }

    #[test]
    fn binary_points_negate_the_qap_value() {
        let aff = AffinityDecomposition::koopman_beckmann(&triangle(), &triangle())
            .unwrap()
            .with_unary(Array1::from_iter((0..9).map(|k| k as f64 * 0.25)))
            .unwrap();
        let x = PermutationMatching::new(vec![1, 2, 0]).unwrap();
        let z = MatchingState::from_permutation(&x);
        assert_eq!(relaxed_objective(&aff, &z, 1.7).unwrap(), -qap_objective(&aff, &x).unwrap());
    }

    #[test]
    fn negative_entries_rejected() {
        let aff = AffinityDecomposition::new(2, Array1::zeros(4), vec![]).unwrap();
        let z = MatchingState::from_vec(2, vec![0.5, 0.5, -0.1, 1.1]).unwrap();
        assert!(matches!(relaxed_objective(&aff, &z, 1.0), Err(Error::InvalidInput(_))));
    }
}
