//! Least-squares multidimensional scaling by stress majorization.
//!
//! The crate provides the classical SMACOF iteration on dense dissimilarity
//! tables together with a subspace variant that restricts the displacement
//! field of the embedding to the leading Laplace–Beltrami eigenvectors of an
//! initial manifold and evaluates the stress on a farthest-point sample of
//! the vertices only. On top of that sits a multiresolution driver, spectral
//! and regularized interpolation of the displacement field, and a linearly
//! constrained application to horizontal image retargeting.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`mesh_io`] | triangle meshes, OFF/OBJ, grid and sphere generators, PGM/PPM rasters |
//! | [`sparse`] | symmetric sparse matrices and an envelope Cholesky factorization |
//! | [`laplace`] | cotangent stiffness and lumped mass, graph Laplacians, truncated eigenbases |
//! | [`metric`] | graph geodesics and farthest point sampling |
//! | [`stress`] | the stress function, `V`, `B(X)` and the majorizer |
//! | [`smacof`] | full-space SMACOF and reduced-rank extrapolation |
//! | [`spectral`] | spectral SMACOF, multiresolution schedules, interpolation |
//! | [`retarget`] | saliency-aware retargeting with a small ADMM QP solver |
//! | [`bench`] | timing harness comparing the solvers |

pub mod bench;
pub mod error;
pub mod laplace;
pub mod linalg;
pub mod mesh_io;
pub mod metric;
pub mod retarget;
pub mod smacof;
pub mod sparse;
pub mod spectral;
pub mod stress;

pub use error::{Error, Result};
pub use laplace::EigenBasis;
pub use mesh_io::{RasterImage, TriangleMesh};
pub use metric::SamplingSet;
pub use smacof::{ConvergenceLog, SolverOptions};
pub use sparse::SparseSymmetricMatrix;
pub use stress::{Embedding, StressProblem, Weights};
