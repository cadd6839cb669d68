//! Full-space SMACOF and reduced-rank extrapolation.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{centered, pinv_symmetric};
use crate::stress::{Embedding, StressProblem};

/// Stopping rule: iterate while `k < max_iter`, `σ > abs_tol` and
/// `1 − σ_k/σ_{k−1} > rel_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub record_log: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-5,
            max_iter: 5000,
            record_log: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0) || !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn keep_going(&self, k: usize, stress: f64, previous: f64) -> bool {
        k < self.max_iter && stress > self.abs_tol && (1.0 - stress / previous) > self.rel_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub stress: f64,
    pub seconds: f64,
    pub level: usize,
}

/// Per-iteration stress trace. Iteration 0 is the initial configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceLog {
    pub records: Vec<LogRecord>,
}

impl ConvergenceLog {
    pub fn push(&mut self, iteration: usize, stress: f64, seconds: f64, level: usize) {
        self.records.push(LogRecord {
            iteration,
            stress,
            seconds,
            level,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_stress(&self) -> Option<f64> {
        self.records.last().map(|r| r.stress)
    }

    /// Number of update steps taken (records minus the initial one).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn stresses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.stress).collect()
    }

    /// Records belonging to one level.
    pub fn level(&self, level: usize) -> Vec<LogRecord> {
        self.records.iter().copied().filter(|r| r.level == level).collect()
    }

    pub fn num_levels(&self) -> usize {
        let mut levels: Vec<usize> = self.records.iter().map(|r| r.level).collect();
        levels.dedup();
        levels.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,stress,seconds,level\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{:e},{:.6},{}", r.iteration, r.stress, r.seconds, r.level);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Cached solve with `V + 11ᵀ/N`.
#[derive(Debug, Clone)]
pub enum FactoredV {
    /// Unit weights: `(V + 11ᵀ/N)⁻¹ Y = Y / N` for centered `Y`.
    Unit { n: usize },
    General { cholesky: nalgebra::Cholesky<f64, nalgebra::Dyn> },
}

impl FactoredV {
    pub fn new(problem: &StressProblem) -> Result<Self> {
        let n = problem.num_points();
        if problem.weights().is_unit() {
            return Ok(FactoredV::Unit { n });
        }
        let mut v = problem.v_matrix();
        v.add_scalar_mut(1.0 / n as f64);
        let cholesky = v
            .cholesky()
            .ok_or_else(|| Error::Singular("V + 11ᵀ/N is not positive definite; is the weight graph connected?".into()))?;
        Ok(FactoredV::General { cholesky })
    }

    /// Forces the general factorization even for unit weights.
    pub fn general(problem: &StressProblem) -> Result<Self> {
        let n = problem.num_points();
        let mut v = problem.v_matrix();
        v.add_scalar_mut(1.0 / n as f64);
        let cholesky = v
            .cholesky()
            .ok_or_else(|| Error::Singular("V + 11ᵀ/N is not positive definite".into()))?;
        Ok(FactoredV::General { cholesky })
    }

    pub fn solve(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            FactoredV::Unit { n } => y / *n as f64,
            FactoredV::General { cholesky } => cholesky.solve(y),
        }
    }
}

/// One SMACOF update `X⁺ = (V + 11ᵀ/N)⁻¹ B(X) X`, centered.
pub fn smacof_step(problem: &StressProblem, factored: &FactoredV, x: &Embedding) -> Embedding {
    let (_, bx) = problem.majorize(x);
    centered(&factored.solve(&bx))
}

/// Runs SMACOF from `x0` under the three-clause stopping rule.
pub fn smacof_solve(problem: &StressProblem, x0: &Embedding, opts: &SolverOptions) -> Result<(Embedding, ConvergenceLog)> {
    smacof_solve_with(problem, x0, opts, None)
}

/// SMACOF with reduced-rank extrapolation every `period` steps.
/// Default number of plain steps between extrapolations.
pub const DEFAULT_RRE_PERIOD: usize = 5;

pub fn smacof_solve_rre(
    problem: &StressProblem,
    x0: &Embedding,
    opts: &SolverOptions,
    period: usize,
) -> Result<(Embedding, ConvergenceLog)> {
    if period == 0 {
        return Err(Error::InvalidArgument("extrapolation period must be at least 1".into()));
    }
    smacof_solve_with(problem, x0, opts, Some(period))
}

fn smacof_solve_with(
    problem: &StressProblem,
    x0: &Embedding,
    opts: &SolverOptions,
    period: Option<usize>,
) -> Result<(Embedding, ConvergenceLog)> {
    opts.validate()?;
    if x0.nrows() != problem.num_points() {
        return Err(Error::ShapeMismatch(format!(
            "initial embedding has {} rows, problem {}",
            x0.nrows(),
            problem.num_points()
        )));
    }
    let start = Instant::now();
    let factored = FactoredV::new(problem)?;
    let mut x = centered(x0);
    let (mut stress, mut bx) = problem.majorize(&x);
    let mut log = ConvergenceLog::default();
    if opts.record_log {
        log.push(0, stress, start.elapsed().as_secs_f64(), 0);
    }
    let mut previous = f64::INFINITY;
    let mut k = 0;
    let mut history = vec![x.clone()];
    while opts.keep_going(k, stress, previous) {
        x = centered(&factored.solve(&bx));
        k += 1;
        previous = stress;
        (stress, bx) = problem.majorize(&x);
        if let Some(period) = period {
            history.push(x.clone());
            if history.len() == period + 1 {
                if let Some(s) = rre_extrapolate(&history) {
                    let s = centered(&s);
                    let (s_stress, s_bx) = problem.majorize(&s);
                    if s_stress < stress {
                        x = s;
                        stress = s_stress;
                        bx = s_bx;
                    }
                }
                history.clear();
                history.push(x.clone());
            }
        }
        if opts.record_log {
            log.push(k, stress, start.elapsed().as_secs_f64(), 0);
        }
    }
    Ok((x, log))
}

/// Reduced-rank extrapolation of `x_0, …, x_k`: `s = Σ γ_i x_i` with
/// `Σ γ_i = 1` minimizing `‖Σ γ_i (x_{i+1} − x_i)‖`. Returns `None` when the
/// differences vanish.
pub fn rre_extrapolate(history: &[Embedding]) -> Option<Embedding> {
    if history.len() < 3 {
        return None;
    }
    let len = history[0].len();
    let diffs: Vec<DVector<f64>> = history
        .windows(2)
        .map(|w| DVector::from_column_slice((&w[1] - &w[0]).as_slice()))
        .collect();
    if diffs.iter().all(|u| u.amax() == 0.0) {
        return None;
    }
    // x_0 + Σ ξ_i u_i with ξ minimizing ‖u_0 + Σ ξ_i (u_{i+1} − u_i)‖
    let k = diffs.len() - 1;
    let mut w = DMatrix::zeros(len, k);
    for i in 0..k {
        w.set_column(i, &(&diffs[i + 1] - &diffs[i]));
    }
    // least-norm solution through the small Gram matrix
    let gram = w.tr_mul(&w);
    let xi = -pinv_symmetric(&gram, 1e-14) * w.tr_mul(&diffs[0]);
    let mut s = history[0].clone();
    for i in 0..k {
        s += &history_diff(history, i) * xi[i];
    }
    s.iter().all(|v| v.is_finite()).then_some(s)
}

fn history_diff(history: &[Embedding], i: usize) -> Embedding {
    &history[i + 1] - &history[i]
}

/// Extrapolates `history` and returns the extrapolant when it lowers the
/// stress below that of the last entry, otherwise the last entry.
pub fn rre_accelerate(problem: &StressProblem, history: &[Embedding]) -> Result<Embedding> {
    let last = history
        .last()
        .ok_or_else(|| Error::InvalidArgument("extrapolation needs at least 2 iterates".into()))?;
    if history.len() < 2 {
        return Err(Error::InvalidArgument("extrapolation needs at least 2 iterates".into()));
    }
    if let Some(s) = rre_extrapolate(history) {
        if problem.stress(&s) < problem.stress(last) {
            return Ok(s);
        }
    }
    Ok(last.clone())
}
