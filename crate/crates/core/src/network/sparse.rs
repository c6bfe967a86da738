//! Compressed-sparse-column complex matrices with an LU factorization
//! preceded by a fill-reducing minimum-degree permutation.
//!
//! Admittance matrices are structurally symmetric with nonzero diagonals
//! once device shunts are stamped, so the factorization pivots down the
//! permuted diagonal and flags small pivots instead of reordering rows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::math;

/// Sparse complex matrix in compressed-sparse-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct CscComplex {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CscComplex {
    /// Builds from triplets, summing duplicates. Accumulation order is the
    /// stable (col, row) sort of the input, so identical triplet lists
    /// produce bit-identical matrices.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].1, triplets[i].0));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::new();
        let mut values: Vec<Complex64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Entry accessor; zero when absent from the pattern.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        match self.row_idx[lo..hi].binary_search(&row) {
            Ok(k) => self.values[lo + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for c in 0..self.n {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|v| math::cabs(*v))
            .fold(0.0, f64::max)
    }

    fn iter_col(&self, col: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.col_ptr[col]..self.col_ptr[col + 1]).map(move |k| (self.row_idx[k], self.values[k]))
    }
}

/// Factorization failure with a crude conditioning diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularMatrix {
    pub stage: usize,
    pub pivot_magnitude: f64,
    pub max_entry: f64,
}

impl fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "singular or near-singular matrix at elimination stage {} \
             (|pivot| = {:.3e}, max |entry| = {:.3e})",
            self.stage, self.pivot_magnitude, self.max_entry
        )
    }
}

impl core::error::Error for SingularMatrix {}

/// Greedy minimum-degree ordering on the symmetrized pattern. Ties resolve
/// to the lowest node index for determinism.
pub fn min_degree_order(n: usize, pattern: &CscComplex) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for c in 0..n {
        for (r, _) in pattern.iter_col(c) {
            if r != c {
                adj[r].insert(c);
                adj[c].insert(r);
            }
        }
    }
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    while !alive.is_empty() {
        let pick = alive
            .iter()
            .copied()
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap();
        order.push(pick);
        alive.remove(&pick);
        let neighbors: Vec<usize> = adj[pick].iter().copied().collect();
        for &u in &neighbors {
            adj[u].remove(&pick);
        }
        for i in 0..neighbors.len() {
            for j in (i + 1)..neighbors.len() {
                adj[neighbors[i]].insert(neighbors[j]);
                adj[neighbors[j]].insert(neighbors[i]);
            }
        }
        adj[pick].clear();
    }
    order
}

/// LU factors of a permuted matrix: `P A P^T = L U` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// `perm[k]` = original index eliminated at stage `k`.
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
    /// Column k of L below the diagonal: (row, multiplier).
    l_cols: Vec<Vec<(usize, Complex64)>>,
    /// Row k of U strictly right of the diagonal: (col, value).
    u_rows: Vec<Vec<(usize, Complex64)>>,
    u_diag: Vec<Complex64>,
}

/// Relative pivot floor: pivots below `max_entry * PIVOT_FLOOR` abort.
const PIVOT_FLOOR: f64 = 1e-13;

impl SparseLu {
    /// Factors `a` after applying a minimum-degree permutation.
    pub fn factor(a: &CscComplex) -> Result<Self, SingularMatrix> {
        let n = a.size();
        let perm = min_degree_order(n, a);
        let mut perm_inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            perm_inv[p] = k;
        }

        // Permuted working rows plus a column-to-rows map for elimination.
        let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
        let mut col_users: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in 0..n {
            for (r, v) in a.iter_col(c) {
                let pr = perm_inv[r];
                let pc = perm_inv[c];
                rows[pr].insert(pc, v);
                col_users[pc].push(pr);
            }
        }
        let max_entry = a.max_abs();
        let floor = max_entry * PIVOT_FLOOR;

        let mut l_cols: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        let mut u_rows: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(n);
        let mut u_diag = vec![Complex64::new(0.0, 0.0); n];

        for k in 0..n {
            let pivot_row = core::mem::take(&mut rows[k]);
            let pivot = match pivot_row.get(&k) {
                Some(&p) if math::cabs(p) > floor && math::cabs(p) > 0.0 => p,
                other => {
                    return Err(SingularMatrix {
                        stage: k,
                        pivot_magnitude: other.map(|p| math::cabs(*p)).unwrap_or(0.0),
                        max_entry,
                    });
                }
            };
            u_diag[k] = pivot;
            let upper: Vec<(usize, Complex64)> = pivot_row
                .range((k + 1)..)
                .map(|(&c, &v)| (c, v))
                .collect();

            let mut users = core::mem::take(&mut col_users[k]);
            users.sort_unstable();
            users.dedup();
            for i in users {
                if i <= k {
                    continue;
                }
                let Some(aik) = rows[i].remove(&k) else {
                    continue;
                };
                let m = aik / pivot;
                l_cols[k].push((i, m));
                for &(j, ukj) in &upper {
                    let slot = rows[i].entry(j).or_insert_with(|| {
                        col_users[j].push(i);
                        Complex64::new(0.0, 0.0)
                    });
                    *slot -= m * ukj;
                }
            }
            u_rows.push(upper);
        }

        Ok(Self {
            n,
            perm,
            perm_inv,
            l_cols,
            u_rows,
            u_diag,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(b.len(), self.n);
        let mut y: Vec<Complex64> = (0..self.n).map(|k| b[self.perm[k]]).collect();
        for k in 0..self.n {
            let yk = y[k];
            for &(i, m) in &self.l_cols[k] {
                y[i] -= m * yk;
            }
        }
        for k in (0..self.n).rev() {
            let mut acc = y[k];
            for &(j, u) in &self.u_rows[k] {
                acc -= u * y[j];
            }
            y[k] = acc / self.u_diag[k];
        }
        let mut x = vec![Complex64::new(0.0, 0.0); self.n];
        for k in 0..self.n {
            x[self.perm[k]] = y[k];
        }
        let _ = &self.perm_inv;
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CscComplex::from_triplets(
            2,
            &[
                (0, 0, c(1.0, 0.0)),
                (0, 0, c(2.0, 0.5)),
                (1, 0, c(-1.0, 0.0)),
                (1, 1, c(4.0, 0.0)),
            ],
        );
        assert_eq!(m.get(0, 0), c(3.0, 0.5));
        assert_eq!(m.get(1, 0), c(-1.0, 0.0));
        assert_eq!(m.get(0, 1), c(0.0, 0.0));
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn identity_solve() {
        let n = 4;
        let trips: Vec<_> = (0..n).map(|i| (i, i, c(1.0, 0.0))).collect();
        let m = CscComplex::from_triplets(n, &trips);
        let lu = SparseLu::factor(&m).unwrap();
        let mut b = vec![c(0.0, 0.0); n];
        b[2] = c(1.0, -1.0);
        let x = lu.solve(&b);
        assert_eq!(x, b);
    }

    #[test]
    fn ladder_network_solve() {
        // 1D chain of admittances; compare against matvec round trip.
        let n = 12;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, c(3.0, -8.0)));
            if i + 1 < n {
                let y = c(-1.0, 2.5);
                trips.push((i, i + 1, y));
                trips.push((i + 1, i, y));
            }
        }
        let m = CscComplex::from_triplets(n, &trips);
        let lu = SparseLu::factor(&m).unwrap();
        let b: Vec<_> = (0..n).map(|i| c(i as f64, -0.5 * i as f64)).collect();
        let x = lu.solve(&b);
        let r = m.matvec(&x);
        for i in 0..n {
            assert!(math::cabs(r[i] - b[i]) < 1e-10, "residual at {i}");
        }
    }

    #[test]
    fn singular_reports_stage() {
        let m = CscComplex::from_triplets(2, &[(0, 0, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        let err = SparseLu::factor(&m).unwrap_err();
        assert_eq!(err.pivot_magnitude, 0.0);
    }

    #[test]
    fn min_degree_eliminates_leaves_before_hub() {
        let n = 5;
        let mut trips = vec![];
        for i in 0..n {
            trips.push((i, i, c(1.0, 0.0)));
        }
        for i in 1..n {
            trips.push((0, i, c(-1.0, 0.0)));
            trips.push((i, 0, c(-1.0, 0.0)));
        }
        let m = CscComplex::from_triplets(n, &trips);
        let order = min_degree_order(n, &m);
        // hub 0 starts at degree 4 and cannot be eliminated while more than
        // one leaf remains
        assert_eq!(&order[..3], &[1, 2, 3]);
    }
}
