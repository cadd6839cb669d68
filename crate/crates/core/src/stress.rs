//! Kruskal stress `σ(X) = Σ_{i<j} w_ij (‖x_i − x_j‖ − d_ij)²`, the matrices
//! `V` and `B(X)` and the quadratic majorizer built from them.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// `N x m` point table, one point per row.
pub type Embedding = DMatrix<f64>;

/// Pair weights of a stress problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// `w_ij = 1` for every pair.
    Unit,
    /// Symmetric nonnegative table; zero entries mark missing pairs.
    Table(DMatrix<f64>),
}

impl Weights {
    /// `w_ij = 1 / d_ij²`, zero where `d_ij = 0`.
    pub fn relative(d: &DMatrix<f64>) -> Weights {
        Weights::Table(relative_weights(d))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Weights::Unit => 1.0,
            Weights::Table(w) => w[(i, j)],
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Weights::Unit)
    }
}

/// `w_ij = 1 / d_ij²` with the convention `w_ij = 0` for `d_ij = 0`.
pub fn relative_weights(d: &DMatrix<f64>) -> DMatrix<f64> {
    d.map(|x| if x > 0.0 { 1.0 / (x * x) } else { 0.0 })
}

/// Dense dissimilarities and weights on `N` points.
#[derive(Debug, Clone)]
pub struct StressProblem {
    d: DMatrix<f64>,
    weights: Weights,
}

impl StressProblem {
    /// Validates shape, symmetry (to `1e-9` relative), nonnegativity and,
    /// for weight tables, connectivity of the graph `w_ij > 0`. Diagonals
    /// are ignored.
    pub fn new(d: DMatrix<f64>, weights: Weights) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::ShapeMismatch(format!("dissimilarity table is {}x{}", n, d.ncols())));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("a stress problem needs at least 2 points".into()));
        }
        check_symmetric_nonnegative(&d, "dissimilarity")?;
        if let Weights::Table(w) = &weights {
            if w.shape() != d.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "weights are {}x{}, dissimilarities {n}x{n}",
                    w.nrows(),
                    w.ncols()
                )));
            }
            check_symmetric_nonnegative(w, "weight")?;
            check_connected(w)?;
        }
        Ok(Self { d, weights })
    }

    pub fn unit(d: DMatrix<f64>) -> Result<Self> {
        Self::new(d, Weights::Unit)
    }

    pub fn relative(d: DMatrix<f64>) -> Result<Self> {
        let w = Weights::relative(&d);
        Self::new(d, w)
    }

    pub fn num_points(&self) -> usize {
        self.d.nrows()
    }

    pub fn dissimilarities(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// The problem restricted to the given points, in the given order.
    pub fn restricted(&self, indices: &[usize]) -> Result<StressProblem> {
        let d = DMatrix::from_fn(indices.len(), indices.len(), |a, b| self.d[(indices[a], indices[b])]);
        let weights = match &self.weights {
            Weights::Unit => Weights::Unit,
            Weights::Table(w) => {
                Weights::Table(DMatrix::from_fn(indices.len(), indices.len(), |a, b| w[(indices[a], indices[b])]))
            }
        };
        StressProblem::new(d, weights)
    }

    fn check_embedding(&self, x: &Embedding) {
        assert_eq!(x.nrows(), self.num_points(), "embedding has {} rows, problem {}", x.nrows(), self.num_points());
    }

    /// `Σ_{i<j} w_ij d_ij²`, the constant term of the majorizer.
    pub fn weighted_norm(&self) -> f64 {
        let n = self.num_points();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..j {
                s += self.weights.get(i, j) * self.d[(i, j)].powi(2);
            }
        }
        s
    }

    pub fn stress(&self, x: &Embedding) -> f64 {
        self.check_embedding(x);
        let rows = RowMajor::new(x);
        let n = self.num_points();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in i + 1..n {
                    let w = self.weights.get(i, j);
                    if w != 0.0 {
                        let r = rows.distance(i, j) - self.d[(i, j)];
                        s += w * r * r;
                    }
                }
                s
            })
            .sum()
    }

    /// `V = Σ_{i<j} w_ij (e_i − e_j)(e_i − e_j)ᵀ`.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        let n = self.num_points();
        let mut v = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    let w = self.weights.get(i, j);
                    v[(i, j)] = -w;
                    v[(j, j)] += w;
                }
            }
        }
        v
    }

    /// `b_ij = −w_ij d_ij / ‖x_i − x_j‖` off the diagonal (zero when
    /// `x_i = x_j` exactly), `b_ii = −Σ_{j≠i} b_ij`.
    pub fn b_matrix(&self, x: &Embedding) -> DMatrix<f64> {
        self.check_embedding(x);
        let rows = RowMajor::new(x);
        let n = self.num_points();
        let mut b = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    let dist = rows.distance(i, j);
                    let bij = if dist == 0.0 { 0.0 } else { -self.weights.get(i, j) * self.d[(i, j)] / dist };
                    b[(i, j)] = bij;
                    b[(j, j)] -= bij;
                }
            }
        }
        b
    }

    /// `σ(X)` and `B(X) X` in one pass over the pairs.
    pub fn majorize(&self, x: &Embedding) -> (f64, DMatrix<f64>) {
        self.check_embedding(x);
        let n = self.num_points();
        let m = x.ncols();
        let rows = RowMajor::new(x);
        let chunk = 64;
        let partial: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let lo = c * chunk;
                let hi = (lo + chunk).min(n);
                let mut out = vec![0.0; (hi - lo) * m];
                let mut s = 0.0;
                let mut diff = vec![0.0; m];
                for i in lo..hi {
                    let xi = rows.row(i);
                    let acc = &mut out[(i - lo) * m..(i - lo + 1) * m];
                    for j in 0..n {
                        if j == i {
                            continue;
                        }
                        let w = self.weights.get(i, j);
                        if w == 0.0 {
                            continue;
                        }
                        let xj = rows.row(j);
                        let mut sq = 0.0;
                        for k in 0..m {
                            diff[k] = xi[k] - xj[k];
                            sq += diff[k] * diff[k];
                        }
                        let dist = sq.sqrt();
                        let dij = self.d[(i, j)];
                        if j > i {
                            s += w * (dist - dij) * (dist - dij);
                        }
                        if dist != 0.0 {
                            let f = w * dij / dist;
                            for k in 0..m {
                                acc[k] += f * diff[k];
                            }
                        }
                    }
                }
                (s, out)
            })
            .collect();
        let mut bx = DMatrix::zeros(n, m);
        let mut stress = 0.0;
        for (c, (s, out)) in partial.into_iter().enumerate() {
            stress += s;
            for (r, row) in out.chunks_exact(m).enumerate() {
                for k in 0..m {
                    bx[(c * chunk + r, k)] = row[k];
                }
            }
        }
        (stress, bx)
    }

    /// `h(X, Z) = tr(XᵀVX) − 2 tr(XᵀB(Z)Z) + Σ_{i<j} w_ij d_ij²`.
    pub fn majorizer_value(&self, x: &Embedding, z: &Embedding) -> f64 {
        self.check_embedding(x);
        self.check_embedding(z);
        let (_, bz) = self.majorize(z);
        let rows = RowMajor::new(x);
        let n = self.num_points();
        let mut quad = 0.0;
        for j in 0..n {
            for i in 0..j {
                let w = self.weights.get(i, j);
                if w != 0.0 {
                    quad += w * rows.distance(i, j).powi(2);
                }
            }
        }
        quad - 2.0 * x.dot(&bz) + self.weighted_norm()
    }
}

fn check_symmetric_nonnegative(a: &DMatrix<f64>, what: &str) -> Result<()> {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for j in 0..n {
        for i in 0..n {
            let v = a[(i, j)];
            if !v.is_finite() || (i != j && v < 0.0) {
                return Err(Error::InvalidArgument(format!("{what} entry ({i}, {j}) = {v} is not a finite nonnegative value")));
            }
            if i < j && (v - a[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::Asymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_connected(w: &DMatrix<f64>) -> Result<()> {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && j != i && w[(i, j)] > 0.0 {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    if count < n {
        let first = seen.iter().position(|s| !s).unwrap();
        return Err(Error::DisconnectedWeights(format!(
            "weight graph has unreachable points, e.g. point {first} ({} of {n} reachable from point 0)",
            count
        )));
    }
    Ok(())
}

/// Row-major copy of an embedding for cache-friendly pair loops.
pub(crate) struct RowMajor {
    data: Vec<f64>,
    m: usize,
}

impl RowMajor {
    pub(crate) fn new(x: &DMatrix<f64>) -> Self {
        let m = x.ncols();
        let mut data = vec![0.0; x.nrows() * m];
        for i in 0..x.nrows() {
            for k in 0..m {
                data[i * m + k] = x[(i, k)];
            }
        }
        Self { data, m }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub(crate) fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    }
}

/// Stress restricted to an explicit list of weighted pairs.
#[derive(Debug, Clone)]
pub struct EdgeStress {
    num_points: usize,
    pairs: Vec<[usize; 2]>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

impl EdgeStress {
    pub fn new(num_points: usize, pairs: Vec<[usize; 2]>, targets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if targets.len() != pairs.len() || weights.len() != pairs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} pairs, {} targets, {} weights",
                pairs.len(),
                targets.len(),
                weights.len()
            )));
        }
        for (e, &[i, j]) in pairs.iter().enumerate() {
            if i >= num_points || j >= num_points || i == j {
                return Err(Error::InvalidArgument(format!("pair {e} = ({i}, {j}) is invalid")));
            }
            if !(targets[e] >= 0.0 && weights[e] >= 0.0 && targets[e].is_finite() && weights[e].is_finite()) {
                return Err(Error::InvalidArgument(format!("pair {e} has invalid target or weight")));
            }
        }
        Ok(Self {
            num_points,
            pairs,
            targets,
            weights,
        })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn pairs(&self) -> &[[usize; 2]] {
        &self.pairs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The pairs whose endpoints both satisfy `keep`, as indices into
    /// [`pairs`](Self::pairs).
    pub fn select(&self, keep: impl Fn(usize, usize) -> bool) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&e| keep(self.pairs[e][0], self.pairs[e][1])).collect()
    }

    pub fn stress(&self, x: &Embedding) -> f64 {
        let all: Vec<usize> = (0..self.pairs.len()).collect();
        self.stress_on(x, &all)
    }

    pub fn stress_on(&self, x: &Embedding, subset: &[usize]) -> f64 {
        subset
            .iter()
            .map(|&e| {
                let [i, j] = self.pairs[e];
                let r = (x.row(i) - x.row(j)).norm() - self.targets[e];
                self.weights[e] * r * r
            })
            .sum()
    }
}
