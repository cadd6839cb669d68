use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::SparseSymmetricMatrix;
use crate::error::{Error, Result};

/// `A = P L Lᵀ Pᵀ` with `L` stored row-wise over its envelope.
///
/// Rows are permuted by reverse Cuthill–McKee, which keeps the envelope of
/// mesh Laplacians narrow (roughly `O(sqrt N)` per row on surfaces).
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// first stored column of each (permuted) row
    first: Vec<usize>,
    /// start of each row in `data`
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSymmetricMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first = vec![0usize; n];
        for new in 0..n {
            first[new] = a
                .row(perm[new])
                .map(|(j, _)| inv[j])
                .filter(|&j| j <= new)
                .min()
                .unwrap_or(new);
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for new in 0..n {
            for (j, v) in a.row(perm[new]) {
                let jn = inv[j];
                if jn <= new {
                    data[offset[new] + jn - first[new]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[offset[i] + j - fi];
                let ri = &data[offset[i] + k0 - fi..offset[i] + j - fi];
                let rj = &data[offset[j] + k0 - fj..offset[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                let djj = data[offset[j + 1] - 1];
                data[offset[i] + j - fi] = s / djj;
            }
            let row = &data[offset[i]..offset[i + 1] - 1];
            let d = data[offset[i + 1] - 1] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[i] });
            }
            data[offset[i + 1] - 1] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "solve dimension");
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.data[self.offset[i + 1] - 1];
        }
        // Lᵀ x = y, column sweep
        for i in (0..n).rev() {
            y[i] /= self.data[self.offset[i + 1] - 1];
            let xi = y[i];
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1] - 1];
            for (yk, l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "solve dimension");
        let cols: Vec<Vec<f64>> = (0..b.ncols())
            .into_par_iter()
            .map(|c| self.solve(b.column(c).as_slice()))
            .collect();
        let mut out = DMatrix::zeros(n, b.ncols());
        for (c, col) in cols.into_iter().enumerate() {
            out.column_mut(c).copy_from_slice(&col);
        }
        out
    }
}

/// Reverse Cuthill–McKee ordering, one BFS per connected component started
/// from a pseudo-peripheral vertex. Returns `perm[new] = old`.
pub(crate) fn reverse_cuthill_mckee(a: &SparseSymmetricMatrix) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).filter(|&(j, v)| j != i && v != 0.0).map(|(j, _)| j).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (usize, usize) {
        // (min-degree vertex of the deepest level, depth)
        let mut depth = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        depth[start] = 0;
        let mut far = start;
        while let Some(v) = queue.pop_front() {
            if depth[v] > depth[far] || (depth[v] == depth[far] && degree[v] < degree[far]) {
                far = v;
            }
            for &w in &adj[v] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (far, depth[far])
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: walk to the far end a few times
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..4 {
            let (far, d) = bfs_levels(start);
            if d <= depth {
                break;
            }
            start = far;
            depth = d;
        }
        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path_laplacian_plus_identity(n: usize) -> SparseSymmetricMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, if i == 0 || i == n - 1 { 2.0 } else { 3.0 }));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseSymmetricMatrix::from_triplets(n, t).unwrap()
    }

    #[test]
    fn solves_against_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        // random sparse SPD: random graph Laplacian + diagonal shift
        let mut t = Vec::new();
        for _ in 0..120 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                let w: f64 = rng.random_range(0.1..2.0);
                t.push((i, j, -w));
                t.push((i, i, w));
                t.push((j, j, w));
            }
        }
        for i in 0..n {
            t.push((i, i, 0.5));
        }
        let a = SparseSymmetricMatrix::from_triplets(n, t).unwrap();
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let dense = a.to_dense().cholesky().unwrap();
        let xd = dense.solve(&nalgebra::DVector::from_column_slice(&b));
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10, "{i}: {} vs {}", x[i], xd[i]);
        }
    }

    #[test]
    fn rcm_keeps_path_banded() {
        let a = path_laplacian_plus_identity(50);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        assert!(f.envelope_size() <= 2 * 50);
    }

    #[test]
    fn rejects_indefinite() {
        let a = SparseSymmetricMatrix::from_dense(
            &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            0.0,
        )
        .unwrap();
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn handles_disconnected_blocks() {
        let a = SparseSymmetricMatrix::from_diagonal(&[2.0, 4.0, 8.0]).unwrap();
        let f = EnvelopeCholesky::factor(&a).unwrap();
        for x in f.solve(&[2.0, 4.0, 8.0]) {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }
}
