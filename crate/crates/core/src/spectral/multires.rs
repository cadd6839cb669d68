use std::time::Instant;

use nalgebra::DMatrix;

use super::{spectral_iterate, MultiresSchedule, SubspaceState};
use crate::error::{Error, Result};
use crate::laplace::{cotan_matrices, eigenbasis_with, EigenBasis, EigenOptions};
use crate::mesh_io::TriangleMesh;
use crate::metric::{farthest_point_sampling, farthest_point_sampling_table, geodesic_all_pairs_graph, SamplingSet, WeightedGraph};
use crate::smacof::{smacof_solve, ConvergenceLog, SolverOptions};
use crate::stress::{StressProblem, Weights};

/// Where the dissimilarities come from.
#[derive(Debug, Clone, Copy)]
pub enum DistanceSource<'a> {
    /// A full `N x N` table.
    Table(&'a DMatrix<f64>),
    /// Shortest paths in a graph over the `N` vertices, computed on demand
    /// from the sampled vertices only.
    Graph(&'a WeightedGraph),
}

impl DistanceSource<'_> {
    fn num_points(&self) -> usize {
        match self {
            DistanceSource::Table(d) => d.nrows(),
            DistanceSource::Graph(g) => g.num_nodes(),
        }
    }
}

/// How weights are derived from the dissimilarities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightModel {
    Unit,
    /// `w_ij = 1 / d_ij²`.
    Relative,
}

impl WeightModel {
    pub fn problem(self, d: DMatrix<f64>) -> Result<StressProblem> {
        match self {
            WeightModel::Unit => StressProblem::new(d, Weights::Unit),
            WeightModel::Relative => StressProblem::relative(d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiresOptions {
    /// Stopping rule of every level but the last.
    pub level: SolverOptions,
    /// Relative tolerance of the last level.
    pub final_rel_tol: f64,
    /// First farthest point sample.
    pub seed: usize,
    pub eigen: EigenOptions,
    /// Precomputed eigenbasis with at least the largest `p < N` columns.
    pub basis: Option<EigenBasis>,
    /// Evaluate the full stress after every level. Requires the full
    /// dissimilarity table, which is computed if the source is a graph.
    pub full_stress: bool,
}

impl Default for MultiresOptions {
    fn default() -> Self {
        Self {
            level: SolverOptions {
                abs_tol: 0.0,
                rel_tol: 1e-4,
                max_iter: 100,
                record_log: true,
            },
            final_rel_tol: 1e-5,
            seed: 0,
            eigen: EigenOptions::default(),
            basis: None,
            full_stress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub q: usize,
    pub p: usize,
    pub iterations: usize,
    /// Stress on the level's samples at its end (the full stress for full levels).
    pub sampled_stress: f64,
    pub full_stress: Option<f64>,
    /// Time since the start of the solve when the level finished.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MultiresResult {
    pub embedding: DMatrix<f64>,
    pub log: ConvergenceLog,
    pub levels: Vec<LevelSummary>,
    /// Sampling and eigenbasis time.
    pub setup_seconds: f64,
    pub basis: Option<EigenBasis>,
    pub samples: Option<SamplingSet>,
}

impl MultiresResult {
    pub fn final_full_stress(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.full_stress)
    }
}

/// Runs the levels of `schedule` in order, each warm-started from the
/// previous level's interpolated embedding with zero coefficients. Samples
/// are prefixes of one farthest point sampling and bases are leading columns
/// of one eigenbasis, both computed once for the largest level. A level with
/// `q = p = N` runs plain SMACOF on the full problem.
pub fn multires_solve(
    mesh: &TriangleMesh,
    x0: &DMatrix<f64>,
    source: DistanceSource<'_>,
    weights: WeightModel,
    schedule: &MultiresSchedule,
    opts: &MultiresOptions,
) -> Result<MultiresResult> {
    let clock = Instant::now();
    let n = mesh.num_vertices();
    if x0.nrows() != n {
        return Err(Error::ShapeMismatch(format!("initial embedding has {} rows, mesh {n} vertices", x0.nrows())));
    }
    if source.num_points() != n {
        return Err(Error::ShapeMismatch(format!(
            "distance source covers {} points, mesh has {n} vertices",
            source.num_points()
        )));
    }
    opts.level.validate()?;
    let levels = schedule.resolve(n)?;
    let max_q = levels.iter().map(|l| l.0).filter(|&q| q < n).max();
    let max_p = levels.iter().map(|l| l.1).filter(|&p| p < n).max();

    let samples = match max_q {
        None => None,
        Some(q) => Some(match source {
            DistanceSource::Table(d) => farthest_point_sampling_table(d, q, opts.seed)?,
            DistanceSource::Graph(g) => farthest_point_sampling(g, q, opts.seed)?,
        }),
    };
    let basis = match max_p {
        None => None,
        Some(p) => Some(match &opts.basis {
            Some(b) => {
                if b.num_vertices() != n || b.len() < p {
                    return Err(Error::ShapeMismatch(format!(
                        "supplied basis is {}x{}, need {n} rows and at least {p} columns",
                        b.num_vertices(),
                        b.len()
                    )));
                }
                b.truncated(p)
            }
            None => {
                let (w, a) = cotan_matrices(mesh)?;
                eigenbasis_with(&w, &a, p, &opts.eigen)?
            }
        }),
    };
    let setup_seconds = clock.elapsed().as_secs_f64();

    let needs_full = opts.full_stress || levels.iter().any(|l| l.0 == n);
    let full_problem = if needs_full {
        let d = match source {
            DistanceSource::Table(d) => d.clone(),
            DistanceSource::Graph(g) => geodesic_all_pairs_graph(g)?,
        };
        Some(weights.problem(d)?)
    } else {
        None
    };

    let mut x = x0.clone();
    let mut log = ConvergenceLog::default();
    let mut summaries = Vec::with_capacity(levels.len());
    let mut offset = 0;
    for (level, &(q, p)) in levels.iter().enumerate() {
        let mut level_opts = opts.level.clone();
        if level + 1 == levels.len() {
            level_opts.rel_tol = opts.final_rel_tol;
        }
        let sampled_stress;
        let iterations;
        if q == n && p == n {
            let problem = full_problem.as_ref().expect("full problem is built for full levels");
            let (out, level_log) = smacof_solve(problem, &x, &level_opts)?;
            let base = clock.elapsed().as_secs_f64() - level_log.records.last().map_or(0.0, |r| r.seconds);
            for r in &level_log.records {
                log.push(offset + r.iteration, r.stress, base + r.seconds, level);
            }
            iterations = level_log.iterations();
            sampled_stress = level_log.final_stress().unwrap_or_else(|| problem.stress(&out));
            x = out;
        } else {
            let basis = basis.as_ref().expect("basis is built for subspace levels");
            let (indices, problem) = if q == n {
                let problem = full_problem.as_ref().expect("full problem is built for q = N").clone();
                ((0..n).collect::<Vec<_>>(), problem)
            } else {
                let set = samples.as_ref().expect("samples are built for sampled levels").prefix(q);
                let problem = weights.problem(set.distances)?;
                (set.indices, problem)
            };
            let phi = basis.phi.columns(0, p);
            let phi_s = DMatrix::from_fn(q, p, |r, c| phi[(indices[r], c)]);
            let x_s = DMatrix::from_fn(q, x.ncols(), |r, c| x[(indices[r], c)]);
            let mut state = SubspaceState::new(&problem, x_s, phi_s)?;
            (sampled_stress, iterations) =
                spectral_iterate(&mut state, &problem, &level_opts, &mut log, level, offset, clock)?;
            x += phi * &state.alpha;
        }
        offset += iterations;
        summaries.push(LevelSummary {
            level,
            q,
            p,
            iterations,
            sampled_stress,
            full_stress: if opts.full_stress {
                full_problem.as_ref().map(|fp| fp.stress(&x))
            } else {
                None
            },
            seconds: clock.elapsed().as_secs_f64(),
        });
        log::debug!("level {level} (q = {q}, p = {p}): {iterations} iterations, stress {sampled_stress:e}");
    }
    Ok(MultiresResult {
        embedding: x,
        log,
        levels: summaries,
        setup_seconds,
        basis,
        samples,
    })
}

/// Single-level subspace solve with `q` samples and `p` basis functions.
pub fn spectral_smacof(
    mesh: &TriangleMesh,
    x0: &DMatrix<f64>,
    source: DistanceSource<'_>,
    weights: WeightModel,
    p: usize,
    q: usize,
    opts: &MultiresOptions,
) -> Result<MultiresResult> {
    if q < p {
        return Err(Error::InvalidArgument(format!("q = {q} samples is fewer than p = {p} basis functions")));
    }
    if q < 2 * p {
        log::warn!("q = {q} < 2p = {}: expect higher stress than with q >= 2p", 2 * p);
    }
    let n = mesh.num_vertices();
    let size = |k: usize| if k == n { super::LevelSize::Full } else { super::LevelSize::Count(k) };
    let schedule = MultiresSchedule {
        q: vec![size(q)],
        p: vec![size(p)],
        c: 1.0,
    };
    multires_solve(mesh, x0, source, weights, &schedule, opts)
}
