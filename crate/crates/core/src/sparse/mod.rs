//! Symmetric sparse matrices in compressed-row form, with both triangles
//! stored, and a profile (envelope) Cholesky factorization under reverse
//! Cuthill–McKee ordering for the SPD systems that appear in the Laplacian
//! solvers.

mod cholesky;

pub use cholesky::EnvelopeCholesky;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Assembles from `(row, col, value)` triplets. Each off-diagonal triplet
    /// is mirrored to its transposed position, so an unordered pair should be
    /// listed once (in either orientation). Duplicates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::ShapeMismatch(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
            }
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, v));
            }
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, row_ptr, cols, vals })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Converts a dense table, rejecting it unless `|a_ij - a_ji| <= tol`.
    pub fn from_dense(a: &DMatrix<f64>, tol: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch(format!("{}x{} is not square", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let mut trip = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let (x, y) = (a[(i, j)], a[(j, i)]);
                if (x - y).abs() > tol {
                    return Err(Error::Asymmetric { row: i, col: j });
                }
                if x != 0.0 {
                    trip.push((i, j, 0.5 * (x + y)));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries, counting both triangles.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| j == i || v == 0.0))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension");
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self * x` for a dense `n x k` block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n, "mul_dense dimension");
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for i in 0..self.n {
                out[(i, c)] = self.row(i).map(|(j, v)| v * col[j]).sum();
            }
        }
        out
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Restriction to the rows and columns in `keep`, in that order.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Result<Self> {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n {
                return Err(Error::ShapeMismatch(format!("index {old} outside dimension {}", self.n)));
            }
            map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (old_j, v) in self.row(old_i) {
                let new_j = map[old_j];
                if new_j != usize::MAX && new_j >= new_i {
                    trip.push((new_i, new_j, v));
                }
            }
        }
        Self::from_triplets(keep.len(), trip)
    }

    /// `a * self + b * other`, entrywise over the union pattern.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch(format!("{} vs {}", self.n, other.n)));
        }
        let upper = |m: &Self, s: f64| {
            (0..m.n)
                .flat_map(move |i| m.row(i).filter(move |&(j, _)| j >= i).map(move |(j, v)| (i, j, s * v)))
                .collect::<Vec<_>>()
        };
        let mut trip = upper(self, a);
        trip.extend(upper(other, b));
        Self::from_triplets(self.n, trip)
    }

    /// Largest `|a_ij - a_ji|`; zero by construction unless entries were
    /// edited after assembly.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}
