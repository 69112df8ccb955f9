//! Cluster correspondence between two sets of centres.

use crate::matrix::Centres;
use crate::scalar::{sq_dist, Scalar};

/// Solves the square assignment problem for a row-major `n x n` cost matrix.
/// Returns `col_of_row` minimising the total cost (O(n^3) Hungarian method
/// with row/column potentials).
pub fn hungarian<T: Scalar>(cost: &[T], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    col_of_row
}

/// Row order for `other` that best matches `reference`:
/// `other.permute_rows(&order)` has row `k` paired with `reference` row `k`,
/// minimising the total squared distance.
pub fn align_centres<T: Scalar>(reference: &Centres<T>, other: &Centres<T>) -> Vec<usize> {
    let k = reference.rows();
    assert_eq!(k, other.rows(), "centre sets differ in K");
    let mut cost = Vec::with_capacity(k * k);
    for a in reference.iter_rows() {
        for b in other.iter_rows() {
            cost.push(sq_dist(a, b));
        }
    }
    hungarian(&cost, k)
}

/// Euclidean distance between two centre sets after optimal alignment.
pub fn aligned_distance<T: Scalar>(a: &Centres<T>, b: &Centres<T>) -> T {
    let order = align_centres(a, b);
    a.distance(&b.permute_rows(&order))
}
