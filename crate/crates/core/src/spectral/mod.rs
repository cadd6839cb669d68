//! Spectral SMACOF: the displacement from an initial embedding `X₀` is
//! restricted to `Φα` for a truncated Laplacian eigenbasis `Φ`, and the
//! stress is evaluated on sampled points only.

mod interpolate;
mod multires;
mod schedule;

pub use interpolate::{regularized_interpolate, spectral_interpolate};
pub use multires::{
    multires_solve, spectral_smacof, DistanceSource, LevelSummary, MultiresOptions, MultiresResult, WeightModel,
};
pub use schedule::{LevelSize, MultiresSchedule};

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::pinv_symmetric_scaled;
use crate::smacof::{ConvergenceLog, SolverOptions};
use crate::stress::StressProblem;

/// Relative eigenvalue cutoff for the projected pseudo-inverse.
pub const PINV_THRESHOLD: f64 = 1e-10;

/// Cached quantities of the sampled subspace problem.
#[derive(Debug, Clone)]
pub struct SubspaceState {
    /// Current coefficients, `p x m`.
    pub alpha: DMatrix<f64>,
    x0_sampled: DMatrix<f64>,
    basis_sampled: DMatrix<f64>,
    projected_inverse: DMatrix<f64>,
    /// `(ΦᵀSᵀVˢSΦ)^† ΦᵀSᵀ`, `p x q`.
    projector: DMatrix<f64>,
    /// `(ΦᵀSᵀVˢSΦ)^† ΦᵀSᵀVˢSX₀`, `p x m`.
    rhs_fixed: DMatrix<f64>,
}

impl SubspaceState {
    /// `problem` lives on the `q` sampled points, `x0_sampled` is `SX₀` and
    /// `basis_sampled` is `SΦ`. Coefficients start at zero.
    pub fn new(problem: &StressProblem, x0_sampled: DMatrix<f64>, basis_sampled: DMatrix<f64>) -> Result<Self> {
        let q = problem.num_points();
        if x0_sampled.nrows() != q || basis_sampled.nrows() != q {
            return Err(Error::ShapeMismatch(format!(
                "sampled problem has {q} points, SX₀ has {} rows, SΦ has {}",
                x0_sampled.nrows(),
                basis_sampled.nrows()
            )));
        }
        let vs = problem.v_matrix();
        let vs_phi = &vs * &basis_sampled;
        let projected = basis_sampled.tr_mul(&vs_phi);
        // ‖Vˢ‖ ‖SΦ‖² bounds the projected matrix; rounding noise sits far below it
        let scale = vs.diagonal().max() * basis_sampled.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
        let projected_inverse = pinv_symmetric_scaled(&projected, PINV_THRESHOLD, scale);
        let projector = &projected_inverse * basis_sampled.transpose();
        let rhs_fixed = &projected_inverse * vs_phi.tr_mul(&x0_sampled);
        Ok(Self {
            alpha: DMatrix::zeros(basis_sampled.ncols(), x0_sampled.ncols()),
            x0_sampled,
            basis_sampled,
            projected_inverse,
            projector,
            rhs_fixed,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.basis_sampled.nrows()
    }

    pub fn basis_size(&self) -> usize {
        self.basis_sampled.ncols()
    }

    pub fn projected_inverse(&self) -> &DMatrix<f64> {
        &self.projected_inverse
    }

    /// `SX₀ + SΦα` for the current coefficients.
    pub fn sampled_embedding(&self) -> DMatrix<f64> {
        &self.x0_sampled + &self.basis_sampled * &self.alpha
    }
}

/// One subspace update: `α⁺ = (ΦᵀSᵀVˢSΦ)^† ΦᵀSᵀ(Bˢ(X)X − VˢSX₀)` at the
/// sampled embedding `x_sampled`.
pub fn spectral_step(state: &SubspaceState, problem: &StressProblem, x_sampled: &DMatrix<f64>) -> DMatrix<f64> {
    let (_, bx) = problem.majorize(x_sampled);
    &state.projector * bx - &state.rhs_fixed
}

/// Iterates [`spectral_step`] from `state.alpha` under the stopping rule of
/// `opts`, logging the sampled stress. Log records are tagged with `level`
/// and numbered from `first_iteration`; times are measured from `clock`.
/// Returns the final sampled stress and the number of updates.
pub fn spectral_iterate(
    state: &mut SubspaceState,
    problem: &StressProblem,
    opts: &SolverOptions,
    log: &mut ConvergenceLog,
    level: usize,
    first_iteration: usize,
    clock: Instant,
) -> Result<(f64, usize)> {
    opts.validate()?;
    let mut x = state.sampled_embedding();
    let (mut stress, mut bx) = problem.majorize(&x);
    if opts.record_log {
        log.push(first_iteration, stress, clock.elapsed().as_secs_f64(), level);
    }
    let mut previous = f64::INFINITY;
    let mut k = 0;
    while opts.keep_going(k, stress, previous) {
        state.alpha = &state.projector * &bx - &state.rhs_fixed;
        x = state.sampled_embedding();
        k += 1;
        previous = stress;
        (stress, bx) = problem.majorize(&x);
        if opts.record_log {
            log.push(first_iteration + k, stress, clock.elapsed().as_secs_f64(), level);
        }
    }
    Ok((stress, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::centered;
    use crate::smacof::{smacof_step, FactoredV};
    use crate::stress::Weights;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, rng: &mut ChaCha8Rng) -> StressProblem {
        let pts = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let d = DMatrix::from_fn(n, n, |i, j| (pts.row(i) - pts.row(j)).norm() * 1.3);
        let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 + ((i + j) % 3) as f64 });
        StressProblem::new(d, Weights::Table(w)).unwrap()
    }

    #[test]
    fn square_orthonormal_basis_reproduces_full_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        let problem = random_problem(n, &mut rng);
        let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let x0 = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let state = SubspaceState::new(&problem, x0.clone(), q.clone()).unwrap();
        let alpha = spectral_step(&state, &problem, &x0);
        let spectral = centered(&(&x0 + &q * alpha));
        let full = smacof_step(&problem, &FactoredV::new(&problem).unwrap(), &x0);
        assert!((spectral - full).amax() < 1e-8);
    }

    #[test]
    fn constant_basis_pins_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let problem = random_problem(8, &mut rng);
        let x0 = DMatrix::from_fn(8, 2, |_, _| rng.random_range(-1.0..1.0));
        let phi = DMatrix::from_element(8, 1, 1.0 / 8f64.sqrt());
        let mut state = SubspaceState::new(&problem, x0.clone(), phi).unwrap();
        let before = problem.stress(&x0);
        let mut log = ConvergenceLog::default();
        let opts = SolverOptions {
            max_iter: 5,
            rel_tol: 0.0,
            ..Default::default()
        };
        let (after, _) = spectral_iterate(&mut state, &problem, &opts, &mut log, 0, 0, Instant::now()).unwrap();
        assert!(state.alpha.amax() < 1e-12);
        assert!((after - before).abs() <= 1e-12 * before);
    }

    #[test]
    fn perfect_fit_is_fixed_point() {
        let n = 6;
        let x0 = DMatrix::from_fn(n, 2, |i, k| ((i * 2 + k) as f64).sin());
        let d = DMatrix::from_fn(n, n, |i, j| (x0.row(i) - x0.row(j)).norm());
        let problem = StressProblem::unit(d).unwrap();
        let phi = DMatrix::from_fn(n, 3, |i, k| ((i + 1) as f64 * (k + 1) as f64 * 0.3).cos());
        let state = SubspaceState::new(&problem, x0.clone(), phi).unwrap();
        let alpha = spectral_step(&state, &problem, &x0);
        assert!(alpha.amax() < 1e-12);
    }
}
