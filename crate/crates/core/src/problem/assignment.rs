//! Maximum-weight perfect assignment (Hungarian method with potentials).
//!
//! Among all optimal assignments the lexicographically smallest one is
//! returned, so rounding a uniform matrix yields the identity.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::problem::{MatchingState, PermutationMatching};

/// Rounds a relaxed state to the permutation maximizing `Σ_i z[i, σ(i)]`.
pub fn discretize(z: &MatchingState) -> Result<PermutationMatching> {
    if let Some(bad) = z.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!("cannot discretize entry {bad}")));
    }
    max_weight_assignment(z.matrix())
}

/// Maximum-weight assignment of an arbitrary finite square score matrix.
pub fn max_weight_assignment(w: &Array2<f64>) -> Result<PermutationMatching> {
    let (n, m) = w.dim();
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, found: m });
    }
    if let Some(bad) = w.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("assignment score {bad} is not finite")));
    }
    if n == 0 {
        return Ok(PermutationMatching::identity(0));
    }
    let cost = w.mapv(|v| -v);
    let (mut row_to_col, pu, pv) = hungarian(&cost);
    let scale = 1.0 + cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let tol = 1e-11 * scale * n as f64;
    let tight = Array2::from_shape_fn((n, n), |(i, j)| cost[[i, j]] - pu[i] - pv[j] <= tol);
    lexicographic_fix(&tight, &mut row_to_col);
    PermutationMatching::new(row_to_col)
}

/// Min-cost assignment. Returns the row→column matching and dual potentials
/// with `cost[i][j] − u[i] − v[j] ≥ 0`, tight on matched pairs.
fn hungarian(cost: &Array2<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewrites a perfect matching of the tight graph into the lexicographically
/// smallest perfect matching of that graph, row by row.
fn lexicographic_fix(tight: &Array2<bool>, row_to_col: &mut [usize]) {
    let n = row_to_col.len();
    let mut col_to_row = vec![0; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut locked_col = vec![false; n];
    for i in 0..n {
        for j in 0..row_to_col[i] {
            if locked_col[j] || !tight[[i, j]] {
                continue;
            }
            // Give column j to row i; its previous owner must reach the
            // column that row i releases along an alternating path.
            let freed = row_to_col[i];
            let displaced = col_to_row[j];
            let mut visited = vec![false; n];
            visited[j] = true;
            if let Some(path) = augment(tight, displaced, freed, &locked_col, &col_to_row, &mut visited) {
                for &(r, c) in &path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
        locked_col[row_to_col[i]] = true;
    }
}

/// Depth-first search for an alternating path from `row` to column `target`
/// through unlocked tight edges. Returns the new (row, col) pairs.
fn augment(
    tight: &Array2<bool>,
    row: usize,
    target: usize,
    locked: &[bool],
    col_to_row: &[usize],
    visited: &mut [bool],
) -> Option<Vec<(usize, usize)>> {
    let n = locked.len();
    for c in 0..n {
        if locked[c] || visited[c] || !tight[[row, c]] {
            continue;
        }
        visited[c] = true;
        if c == target {
            return Some(vec![(row, c)]);
        }
        if let Some(mut path) = augment(tight, col_to_row[c], target, locked, col_to_row, visited) {
            path.push((row, c));
            return Some(path);
        }
    }
    None
}
