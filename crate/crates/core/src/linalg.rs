//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, SymmetricEigen};

/// Subtracts the column means in place.
pub fn center_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    if n == 0.0 {
        return;
    }
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

pub fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    center_columns(&mut y);
    y
}

/// Moore–Penrose inverse of a symmetric matrix. Eigenvalues with magnitude
/// at or below `rel_threshold * max |eigenvalue|` are treated as zero.
pub fn pinv_symmetric(a: &DMatrix<f64>, rel_threshold: f64) -> DMatrix<f64> {
    pinv_symmetric_scaled(a, rel_threshold, 0.0)
}

/// As [`pinv_symmetric`], with the cutoff measured against
/// `max(max |eigenvalue|, scale)` so that a matrix that is zero up to
/// rounding relative to `scale` inverts to zero.
pub fn pinv_symmetric_scaled(a: &DMatrix<f64>, rel_threshold: f64, scale: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_threshold * largest.max(scale);
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let inv = if lambda.abs() > cut { 1.0 / lambda } else { 0.0 };
        scaled.column_mut(j).scale_mut(inv);
    }
    &scaled * eig.eigenvectors.transpose()
}

/// Rotates/reflects the centered `x` onto the centered `target` (orthogonal
/// Procrustes) and returns the aligned copy of `x` translated to the
/// target's centroid.
pub fn procrustes_align(x: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(x.shape(), target.shape(), "procrustes shapes");
    let n = x.nrows() as f64;
    let xc = centered(x);
    let tc = centered(target);
    let cov = xc.transpose() * &tc;
    let svd = cov.svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    let mut aligned = xc * r;
    for (j, mut col) in aligned.column_iter_mut().enumerate() {
        let mean = target.column(j).sum() / n;
        col.add_scalar_mut(mean);
    }
    aligned
}

/// Root-mean-square distance between corresponding rows.
pub fn rms_row_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "rms shapes");
    ((a - b).norm_squared() / a.nrows().max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_laplacian_matches_rank_one_identity() {
        // unweighted Laplacian of K_4: V = 4I - 11ᵀ, V⁺ = (I - 11ᵀ/4)/4
        let n = 4;
        let v = DMatrix::from_fn(n, n, |i, j| if i == j { 3.0 } else { -1.0 });
        let p = pinv_symmetric(&v, 1e-10);
        let expect = DMatrix::from_fn(n, n, |i, j| {
            ((if i == j { 1.0 } else { 0.0 }) - 1.0 / n as f64) / n as f64
        });
        assert!((p - expect).amax() < 1e-12);
    }

    #[test]
    fn procrustes_undoes_rotation() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 1.0, 3.0]);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let y = &x * rot;
        let aligned = procrustes_align(&y, &x);
        assert!(rms_row_distance(&aligned, &x) < 1e-12);
    }
}
