//! Discrete Laplace–Beltrami operators and their truncated eigenbases.

mod cache;
mod cotan;
mod eigen;
mod fourier;

pub use cache::{read_basis_cache, write_basis_cache};
pub use cotan::{cotan_matrices, graph_laplacian};
pub use eigen::{eigenbasis, eigenbasis_with, EigenOptions};
pub use fourier::{fourier_basis_grid, FourierGridBasis};

use nalgebra::DMatrix;

use crate::sparse::SparseSymmetricMatrix;

/// The `p` smallest generalized eigenpairs `W φ = λ A φ`, with `A`-orthonormal
/// columns and ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub phi: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub mass: SparseSymmetricMatrix,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.phi.nrows()
    }

    /// The leading `p` columns.
    pub fn truncated(&self, p: usize) -> EigenBasis {
        let p = p.min(self.len());
        EigenBasis {
            phi: self.phi.columns(0, p).into_owned(),
            eigenvalues: self.eigenvalues[..p].to_vec(),
            mass: self.mass.clone(),
        }
    }

    /// `max |ΦᵀAΦ - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let a_phi = self.mass.mul_dense(&self.phi);
        let gram = self.phi.transpose() * a_phi;
        let p = gram.nrows();
        (gram - DMatrix::identity(p, p)).amax()
    }

    /// `max |WΦ - AΦ diag(Λ)|`.
    pub fn residual(&self, stiffness: &SparseSymmetricMatrix) -> f64 {
        let w_phi = stiffness.mul_dense(&self.phi);
        let mut a_phi = self.mass.mul_dense(&self.phi);
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            a_phi.column_mut(j).scale_mut(l);
        }
        (w_phi - a_phi).amax()
    }
}
