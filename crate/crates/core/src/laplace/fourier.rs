use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::EigenBasis;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetricMatrix;

/// Closed-form Laplacian eigenbasis of a `rows x cols` lattice spanning
/// `[0, length_x] x [0, length_y]`, with the horizontal component pinned on
/// the left/right edges and free (zero normal derivative) on the top/bottom
/// edges:
///
/// `φ_{k,l}(x, y) = c_{k,l} sin(kπx / Lx) cos(lπy / Ly)`, `k >= 1`, `l >= 0`,
/// eigenvalue `(kπ/Lx)² + (lπ/Ly)²`.
///
/// Vertex `(i, j)` has index `i * cols + j`. Columns are normalized against
/// the trapezoidal dual-cell areas of the lattice, under which the sampled
/// modes are exactly orthogonal.
#[derive(Debug, Clone)]
pub struct FourierGridBasis {
    rows: usize,
    cols: usize,
    length_x: f64,
    length_y: f64,
    modes: Vec<(usize, usize)>,
    eigenvalues: Vec<f64>,
    norms: Vec<f64>,
}

impl FourierGridBasis {
    pub fn new(rows: usize, cols: usize, length_x: f64, length_y: f64, p: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidArgument(format!("grid must be at least 2x2, got {rows}x{cols}")));
        }
        if !(length_x > 0.0 && length_y > 0.0) {
            return Err(Error::InvalidArgument("grid lengths must be positive".into()));
        }
        // sin(kπ j/(cols-1)) vanishes identically for k = cols - 1
        let available = (cols - 2) * rows;
        if p == 0 || p > available {
            return Err(Error::InvalidArgument(format!(
                "p = {p} but a {rows}x{cols} grid supports 1..={available} modes"
            )));
        }
        let mut modes: Vec<(usize, usize)> = (1..cols - 1)
            .flat_map(|k| (0..rows).map(move |l| (k, l)))
            .collect();
        let eig = |&(k, l): &(usize, usize)| (k as f64 * PI / length_x).powi(2) + (l as f64 * PI / length_y).powi(2);
        modes.sort_by(|a, b| eig(a).total_cmp(&eig(b)).then(a.cmp(b)));
        modes.truncate(p);
        let eigenvalues = modes.iter().map(eig).collect();
        let norms = modes
            .iter()
            .map(|&(_, l)| {
                let y_norm = if l == 0 || l == rows - 1 { length_y } else { 0.5 * length_y };
                1.0 / (0.5 * length_x * y_norm).sqrt()
            })
            .collect();
        Ok(Self {
            rows,
            cols,
            length_x,
            length_y,
            modes,
            eigenvalues,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.rows * self.cols
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `(k, l)` wave numbers of each column.
    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    #[inline]
    pub fn value(&self, vertex: usize, mode: usize) -> f64 {
        let (i, j) = (vertex / self.cols, vertex % self.cols);
        let (k, l) = self.modes[mode];
        let sx = (k as f64 * PI * j as f64 / (self.cols - 1) as f64).sin();
        let cy = (l as f64 * PI * i as f64 / (self.rows - 1) as f64).cos();
        self.norms[mode] * sx * cy
    }

    /// Basis rows at the given vertices (`indices.len() x p`).
    pub fn rows_at(&self, indices: &[usize]) -> DMatrix<f64> {
        let (sin_table, cos_table) = self.tables();
        let (rows, cols) = (self.rows, self.cols);
        DMatrix::from_fn(indices.len(), self.len(), |r, m| {
            let (i, j) = (indices[r] / cols, indices[r] % cols);
            let (k, l) = self.modes[m];
            self.norms[m] * sin_table[k * cols + j] * cos_table[l * rows + i]
        })
    }

    /// `sin(kπj/(cols-1))` indexed `k * cols + j` and `cos(lπi/(rows-1))`
    /// indexed `l * rows + i`, up to the largest wave numbers in use.
    fn tables(&self) -> (Vec<f64>, Vec<f64>) {
        let (rows, cols) = (self.rows, self.cols);
        let k_max = self.modes.iter().map(|m| m.0).max().unwrap_or(0);
        let l_max = self.modes.iter().map(|m| m.1).max().unwrap_or(0);
        let sin_table = (0..=k_max)
            .flat_map(|k| (0..cols).map(move |j| (k as f64 * PI * j as f64 / (cols - 1) as f64).sin()))
            .collect();
        let cos_table = (0..=l_max)
            .flat_map(|l| (0..rows).map(move |i| (l as f64 * PI * i as f64 / (rows - 1) as f64).cos()))
            .collect();
        (sin_table, cos_table)
    }

    /// `Φᵀ v` for a vertex vector `v`, evaluated separably.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.num_vertices(), "vertex count");
        let (rows, cols) = (self.rows, self.cols);
        let (sin_table, cos_table) = self.tables();
        let mut by_l: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for (m, &(_, l)) in self.modes.iter().enumerate() {
            by_l[l].push(m);
        }
        let mut out = vec![0.0; self.len()];
        for (l, ms) in by_l.iter().enumerate() {
            if ms.is_empty() {
                continue;
            }
            let c = &cos_table[l * rows..(l + 1) * rows];
            let mut profile = vec![0.0; cols];
            for (i, ci) in c.iter().enumerate() {
                for (pj, vj) in profile.iter_mut().zip(&values[i * cols..(i + 1) * cols]) {
                    *pj += ci * vj;
                }
            }
            for &m in ms {
                let k = self.modes[m].0;
                let s = &sin_table[k * cols..(k + 1) * cols];
                out[m] = self.norms[m] * s.iter().zip(&profile).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }

    /// `Φ α` at every vertex, evaluated separably without forming `Φ`.
    pub fn synthesize(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.len(), "coefficient count");
        let (rows, cols) = (self.rows, self.cols);
        let mut out = vec![0.0; rows * cols];
        let sin_table = |k: usize| -> Vec<f64> {
            (0..cols).map(|j| (k as f64 * PI * j as f64 / (cols - 1) as f64).sin()).collect()
        };
        let cos_table = |l: usize| -> Vec<f64> {
            (0..rows).map(|i| (l as f64 * PI * i as f64 / (rows - 1) as f64).cos()).collect()
        };
        // group modes by l so each cos column is computed once
        let mut by_l: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for (m, &(_, l)) in self.modes.iter().enumerate() {
            by_l[l].push(m);
        }
        for (l, ms) in by_l.iter().enumerate() {
            if ms.is_empty() {
                continue;
            }
            let mut profile = vec![0.0; cols];
            for &m in ms {
                let s = sin_table(self.modes[m].0);
                let a = alpha[m] * self.norms[m];
                for (pj, sj) in profile.iter_mut().zip(&s) {
                    *pj += a * sj;
                }
            }
            let c = cos_table(l);
            for i in 0..rows {
                let row = &mut out[i * cols..(i + 1) * cols];
                for (o, pj) in row.iter_mut().zip(&profile) {
                    *o += c[i] * pj;
                }
            }
        }
        out
    }

    /// Trapezoidal dual-cell areas, the mass matrix under which the columns
    /// are orthonormal.
    pub fn mass_diagonal(&self) -> Vec<f64> {
        let hx = self.length_x / (self.cols - 1) as f64;
        let hy = self.length_y / (self.rows - 1) as f64;
        let edge = |idx: usize, n: usize| if idx == 0 || idx == n - 1 { 0.5 } else { 1.0 };
        (0..self.rows * self.cols)
            .map(|v| hx * hy * edge(v / self.cols, self.rows) * edge(v % self.cols, self.cols))
            .collect()
    }

    pub fn to_eigenbasis(&self) -> Result<EigenBasis> {
        let n = self.num_vertices();
        let all: Vec<usize> = (0..n).collect();
        Ok(EigenBasis {
            phi: self.rows_at(&all),
            eigenvalues: self.eigenvalues.clone(),
            mass: SparseSymmetricMatrix::from_diagonal(&self.mass_diagonal())?,
        })
    }
}

/// Dense form of [`FourierGridBasis`].
pub fn fourier_basis_grid(rows: usize, cols: usize, length_x: f64, length_y: f64, p: usize) -> Result<EigenBasis> {
    FourierGridBasis::new(rows, cols, length_x, length_y, p)?.to_eigenbasis()
}
