use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::laplace::EigenBasis;
use crate::sparse::{EnvelopeCholesky, SparseSymmetricMatrix};

/// Displacement field `δ = Φα` on every vertex.
pub fn spectral_interpolate(basis: &EigenBasis, alpha: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if alpha.nrows() > basis.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coefficients for a basis of {} functions",
            alpha.nrows(),
            basis.len()
        )));
    }
    Ok(basis.phi.columns(0, alpha.nrows()) * alpha)
}

/// Smooth field matching `target` at the sampled vertices: minimizes
/// `‖Sδ − target‖² + λ⟨δ, Lδ⟩` by solving `(SᵀS + λL)δ = Sᵀ target`.
pub fn regularized_interpolate(
    samples: &[usize],
    target: &DMatrix<f64>,
    laplacian: &SparseSymmetricMatrix,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let n = laplacian.dim();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularization weight {lambda} must be positive")));
    }
    if samples.is_empty() {
        return Err(Error::Singular("no samples to interpolate from".into()));
    }
    if target.nrows() != samples.len() {
        return Err(Error::ShapeMismatch(format!("{} samples but {} target rows", samples.len(), target.nrows())));
    }
    if let Some(&s) = samples.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidArgument(format!("sample {s} out of range for {n} vertices")));
    }
    let data = SparseSymmetricMatrix::from_triplets(n, samples.iter().map(|&s| (s, s, 1.0)))?;
    let system = laplacian.linear_combination(lambda, &data, 1.0)?;
    let factor = EnvelopeCholesky::factor(&system).map_err(|_| {
        Error::Singular("interpolation system is singular; is the Laplacian's graph connected?".into())
    })?;
    let mut rhs = DMatrix::zeros(n, target.ncols());
    for (r, &s) in samples.iter().enumerate() {
        for c in 0..target.ncols() {
            rhs[(s, c)] += target[(r, c)];
        }
    }
    Ok(factor.solve_matrix(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::{cotan_matrices, graph_laplacian};

    #[test]
    fn zero_and_unit_coefficients() {
        let mesh = crate::mesh_io::generate_sphere_mesh(1);
        let (w, a) = cotan_matrices(&mesh).unwrap();
        let basis = crate::laplace::eigenbasis(&w, &a, 5).unwrap();
        let zero = spectral_interpolate(&basis, &DMatrix::zeros(5, 3)).unwrap();
        assert_eq!(zero.amax(), 0.0);
        let mut e = DMatrix::zeros(5, 1);
        e[(2, 0)] = 2.0;
        let d = spectral_interpolate(&basis, &e).unwrap();
        assert!((d - basis.phi.column(2) * 2.0).amax() < 1e-15);
        assert!(spectral_interpolate(&basis, &DMatrix::zeros(6, 1)).is_err());
    }

    #[test]
    fn all_samples_small_lambda_reproduces_target() {
        let d = DMatrix::from_fn(5, 5, |i, j| if (i as i64 - j as i64).abs() == 1 { 1.0 } else { 0.0 });
        let l = graph_laplacian(&d).unwrap();
        let target = DMatrix::from_column_slice(5, 1, &[1.0, -2.0, 0.5, 3.0, 0.0]);
        let samples: Vec<usize> = (0..5).collect();
        let out = regularized_interpolate(&samples, &target, &l, 1e-12).unwrap();
        assert!((out - target).amax() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = SparseSymmetricMatrix::from_diagonal(&[1.0, 1.0]).unwrap();
        let t = DMatrix::zeros(1, 1);
        assert!(regularized_interpolate(&[0], &t, &l, 0.0).is_err());
        assert!(regularized_interpolate(&[], &DMatrix::zeros(0, 1), &l, 1.0).is_err());
    }
}
