use crate::error::{Error, Result};
use crate::problem::{qap_objective, AffinityDecomposition, PermutationMatching};

/// Largest instance the exhaustive search accepts.
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Global maximizer of `xᵀ M x` by enumerating all permutations in
/// lexicographic order; the first optimum found is kept.
///
/// The search ranks permutations by incrementally accumulated gains, then
/// rescores near-ties with [`qap_objective`], so the returned value is
/// never below `qap_objective` of any permutation, rounding included.
pub fn brute_force_qap(aff: &AffinityDecomposition) -> Result<(PermutationMatching, f64)> {
    let n = aff.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit { n, max: BRUTE_FORCE_LIMIT });
    }
    // pair[(i*n + j) * n² + (i2*n + j2)]: joint gain of both positions, P + Pᵀ.
    let nn = n * n;
    let mut pair = vec![0.0; nn * nn];
    for e in aff.entries() {
        pair[e.first * nn + e.second] += 2.0 * e.weight;
        pair[e.second * nn + e.first] += 2.0 * e.weight;
    }
    let mut search = Search {
        aff,
        n,
        u: aff.u().as_slice().expect("contiguous"),
        pair: &pair,
        current: Vec::with_capacity(n),
        used: vec![false; n],
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
        best_partial: f64::NEG_INFINITY,
    };
    search.descend(0.0);
    let value = search.best_value;
    let best = std::mem::take(&mut search.best);
    Ok((PermutationMatching::new(best)?, value))
}

struct Search<'a> {
    aff: &'a AffinityDecomposition,
    n: usize,
    u: &'a [f64],
    pair: &'a [f64],
    current: Vec<usize>,
    used: Vec<bool>,
    best: Vec<usize>,
    best_value: f64,
    best_partial: f64,
}

impl Search<'_> {
    fn descend(&mut self, partial: f64) {
        let n = self.n;
        let row = self.current.len();
        if row == n {
            let slack = 1e-9 * (1.0 + self.best_partial.abs());
            if partial >= self.best_partial - slack {
                let perm = PermutationMatching::new(self.current.clone()).expect("search builds permutations");
                let value = qap_objective(self.aff, &perm).expect("sizes agree");
                if value > self.best_value {
                    self.best_value = value;
                    self.best = self.current.clone();
                }
                self.best_partial = self.best_partial.max(partial);
            }
            return;
        }
        for col in 0..n {
            if self.used[col] {
                continue;
            }
            let k = row * n + col;
            // Each unordered pair is counted once, when its later row is placed.
            let gain = self.u[k]
                + self
                    .current
                    .iter()
                    .enumerate()
                    .map(|(r, &c)| self.pair[k * n * n + r * n + c])
                    .sum::<f64>();
            self.used[col] = true;
            self.current.push(col);
            self.descend(partial + gain);
            self.current.pop();
            self.used[col] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::Array1;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::random_affinity;
    use crate::problem::{qap_objective, GraphInstance};

    #[test]
    fn single_node() {
        let aff = AffinityDecomposition::new(1, Array1::from_elem(1, 2.5), vec![]).unwrap();
        let (p, v) = brute_force_qap(&aff).unwrap();
        assert_eq!(p, PermutationMatching::identity(1));
        assert_eq!(v, 2.5);
    }

    #[test]
    fn size_guard() {
        let n = BRUTE_FORCE_LIMIT + 1;
        let aff = AffinityDecomposition::new(n, Array1::zeros(n * n), vec![]).unwrap();
        assert!(matches!(brute_force_qap(&aff), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn isomorphic_graphs_reach_twice_the_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g1 = crate::data::erdos_renyi(6, 0.5, 1, &mut rng);
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let g2 = g1.permuted(&perm).unwrap();
        let aff = AffinityDecomposition::koopman_beckmann(&g1, &g2).unwrap();
        let (p, v) = brute_force_qap(&aff).unwrap();
        assert_eq!(v, 2.0 * g1.edges().len() as f64);
        // The optimum is an isomorphism.
        for &(a, b) in g1.edges() {
            assert!(g2.has_edge(p.target(a), p.target(b)));
        }
    }

    #[test]
    fn value_agrees_with_objective_and_dominates_random_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5 {
            let aff = random_affinity(5, 0.8, seed);
            let (p, v) = brute_force_qap(&aff).unwrap();
            assert!((qap_objective(&aff, &p).unwrap() - v).abs() < 1e-12);
            for _ in 0..50 {
                let mut perm: Vec<usize> = (0..5).collect();
                perm.shuffle(&mut rng);
                let x = PermutationMatching::new(perm).unwrap();
                assert!(qap_objective(&aff, &x).unwrap() <= v + 1e-12);
            }
        }
    }

    #[test]
    fn empty_graphs_prefer_identity() {
        let g = GraphInstance::isolated(vec![vec![0.0]; 4]).unwrap();
        let aff = AffinityDecomposition::koopman_beckmann(&g, &g).unwrap();
        let (p, v) = brute_force_qap(&aff).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(p, PermutationMatching::identity(4));
    }
}
