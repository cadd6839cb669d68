use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EigenBasis;
use crate::error::{Error, Result};
use crate::sparse::{EnvelopeCholesky, SparseSymmetricMatrix};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual tolerance, relative to the eigenvalue magnitude.
    pub tol: f64,
    /// Krylov block size; `0` picks one from `p`.
    pub block_size: usize,
    /// Restart cap; `None` means `10 * p`.
    pub max_restarts: Option<usize>,
    /// Seed of the random starting block.
    pub seed: u64,
    /// Problems with at most this many vertices go to a dense solver.
    pub dense_threshold: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            block_size: 0,
            max_restarts: None,
            seed: 0x5eed,
            dense_threshold: 400,
        }
    }
}

/// The `p` smallest eigenpairs of `stiffness φ = λ mass φ` for a diagonal,
/// positive mass matrix.
pub fn eigenbasis(stiffness: &SparseSymmetricMatrix, mass: &SparseSymmetricMatrix, p: usize) -> Result<EigenBasis> {
    eigenbasis_with(stiffness, mass, p, &EigenOptions::default())
}

pub fn eigenbasis_with(
    stiffness: &SparseSymmetricMatrix,
    mass: &SparseSymmetricMatrix,
    p: usize,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let n = stiffness.dim();
    if mass.dim() != n {
        return Err(Error::ShapeMismatch(format!("stiffness {n}x{n}, mass {0}x{0}", mass.dim())));
    }
    if p == 0 || p >= n {
        return Err(Error::InvalidArgument(format!("need 1 <= p < N, got p = {p}, N = {n}")));
    }
    if !mass.is_diagonal() {
        return Err(Error::InvalidArgument("mass matrix must be diagonal (lumped)".into()));
    }
    let a = mass.diagonal();
    if let Some(i) = a.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(format!("mass entry {i} is not positive")));
    }
    let sqrt_a: Vec<f64> = a.iter().map(|x| x.sqrt()).collect();

    // Symmetric standard form M = A^{-1/2} W A^{-1/2}
    let scaled = (0..n).flat_map(|i| {
        let sa = &sqrt_a;
        stiffness
            .row(i)
            .filter(move |&(j, _)| j >= i)
            .map(move |(j, v)| (i, j, v / (sa[i] * sa[j])))
    });
    let m = SparseSymmetricMatrix::from_triplets(n, scaled)?;

    let (values, vectors) = if n <= opts.dense_threshold || 3 * p >= n {
        dense_smallest(&m, p)
    } else {
        krylov_smallest(&m, stiffness, mass, &sqrt_a, p, opts)?
    };

    let mut phi = vectors;
    for (i, mut row) in phi.row_iter_mut().enumerate() {
        row.scale_mut(1.0 / sqrt_a[i]);
    }
    fix_signs(&mut phi);
    let top = values.last().copied().unwrap_or(0.0).abs().max(1.0);
    let eigenvalues = values
        .into_iter()
        .map(|l| if l < 0.0 && l > -1e-10 * top { 0.0 } else { l })
        .collect();
    Ok(EigenBasis {
        phi,
        eigenvalues,
        mass: mass.clone(),
    })
}

/// Flips each column so that its first coordinate of non-negligible
/// magnitude is positive.
pub(crate) fn fix_signs(phi: &mut DMatrix<f64>) {
    for mut col in phi.column_iter_mut() {
        let big = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-8 * big) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dense_smallest(m: &SparseSymmetricMatrix, p: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (values, vectors) = sorted_eigen(m.to_dense());
    (values[..p].to_vec(), vectors.columns(0, p).into_owned())
}

/// Orthonormalizes the columns of `block` against `basis[.., ..*k]` and
/// against each other (two classical Gram–Schmidt passes), appends the
/// survivors to `basis` and returns them. Columns that collapse are dropped.
fn append_orthonormal(basis: &mut DMatrix<f64>, k: &mut usize, mut block: DMatrix<f64>) -> DMatrix<f64> {
    let room = basis.ncols() - *k;
    let norms0: Vec<f64> = block.column_iter().map(|c| c.norm()).collect();
    if *k > 0 {
        let q = basis.columns(0, *k);
        for _ in 0..2 {
            let c = q.tr_mul(&block);
            block.gemm(-1.0, &q, &c, 1.0);
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..block.ncols() {
        if kept.len() == room {
            break;
        }
        for _ in 0..2 {
            for &i in &kept {
                let d = block.column(i).dot(&block.column(j));
                let ci = block.column(i).clone_owned();
                block.column_mut(j).axpy(-d, &ci, 1.0);
            }
        }
        let nrm = block.column(j).norm();
        if nrm > 1e-10 * norms0[j].max(f64::MIN_POSITIVE) && nrm > 0.0 {
            block.column_mut(j).scale_mut(1.0 / nrm);
            kept.push(j);
        }
    }
    let out = block.select_columns(kept.iter());
    for c in 0..out.ncols() {
        basis.column_mut(*k + c).copy_from(&out.column(c));
    }
    *k += out.ncols();
    out
}

/// Block Krylov iteration on the shift-inverted operator
/// `(M + τI)^{-1} = A^{1/2} (W + τA)^{-1} A^{1/2}` with Rayleigh–Ritz on `M`
/// and thick restarts that keep the leading Ritz vectors and expand with
/// their residuals.
fn krylov_smallest(
    m: &SparseSymmetricMatrix,
    stiffness: &SparseSymmetricMatrix,
    mass: &SparseSymmetricMatrix,
    sqrt_a: &[f64],
    p: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.dim();
    let mean_diag = m.diagonal().iter().sum::<f64>() / n as f64;
    let shift = 1e-3 * mean_diag.abs().max(f64::MIN_POSITIVE);
    let shifted = stiffness.linear_combination(1.0, mass, shift)?;
    let factor = EnvelopeCholesky::factor(&shifted)?;
    let op = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut y = x.clone();
        for (i, mut row) in y.row_iter_mut().enumerate() {
            row.scale_mut(sqrt_a[i]);
        }
        let mut z = factor.solve_matrix(&y);
        for (i, mut row) in z.row_iter_mut().enumerate() {
            row.scale_mut(sqrt_a[i]);
        }
        z
    };

    let s = if opts.block_size > 0 { opts.block_size } else { (p / 8).clamp(8, 32) }.min(n);
    let kmax = (2 * p + 2 * s).max(p + 4 * s).min(n);
    let keep = (p + s).min(kmax.saturating_sub(s)).max(p);
    let max_restarts = opts.max_restarts.unwrap_or(10 * p).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = DMatrix::from_fn(n, s, |_, _| rng.random::<f64>() - 0.5);

    let mut basis = DMatrix::zeros(n, kmax);
    let mut k = 0usize;
    let mut next = start;
    let mut worst = f64::INFINITY;
    for restart in 0..max_restarts {
        loop {
            let added = append_orthonormal(&mut basis, &mut k, next);
            if k >= kmax || added.ncols() == 0 {
                break;
            }
            next = op(&added);
        }

        let q = basis.columns(0, k).into_owned();
        let mq = m.mul_dense(&q);
        let h = q.tr_mul(&mq);
        let (theta, u) = sorted_eigen(h);
        let kk = keep.min(k);
        let uk = u.columns(0, kk);
        let ritz = &q * uk;
        let mritz = &mq * uk;
        let mut resid = mritz;
        for j in 0..kk {
            let col = ritz.column(j).clone_owned();
            resid.column_mut(j).axpy(-theta[j], &col, 1.0);
        }
        let floor = (1e-2 * theta[kk - 1].abs()).max(f64::MIN_POSITIVE);
        let rel: Vec<f64> = (0..kk)
            .map(|j| resid.column(j).norm() / theta[j].abs().max(floor))
            .collect();
        worst = rel[..p].iter().copied().fold(0.0, f64::max);
        log::debug!("eigensolver restart {restart}: basis {k}, worst relative residual {worst:.3e}");
        if k >= p && worst <= opts.tol {
            return Ok((theta[..p].to_vec(), ritz.columns(0, p).into_owned()));
        }

        // thick restart: keep the Ritz vectors, expand with residuals of the
        // least converged wanted pairs
        let mut order: Vec<usize> = (0..kk).collect();
        order.sort_by(|&a, &b| rel[b].total_cmp(&rel[a]));
        let pick: Vec<usize> = order.into_iter().filter(|&j| rel[j] > opts.tol).take(s).collect();
        basis.fill(0.0);
        k = 0;
        append_orthonormal(&mut basis, &mut k, ritz);
        if pick.is_empty() {
            next = op(&basis.columns(k - s.min(k), s.min(k)).into_owned());
        } else {
            next = op(&resid.select_columns(pick.iter()));
        }
    }
    Err(Error::EigenNotConverged {
        iterations: max_restarts,
        residual: worst,
    })
}
