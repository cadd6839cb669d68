//! Timing harness: run the multiresolution solver, then full SMACOF (and
//! optionally SMACOF with extrapolation) until it matches the stress the
//! subspace solver reached.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh_io::TriangleMesh;
use crate::smacof::{smacof_solve, smacof_solve_rre, ConvergenceLog, SolverOptions};
use crate::spectral::{multires_solve, DistanceSource, MultiresOptions, MultiresSchedule, WeightModel};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub schedule: MultiresSchedule,
    pub multires: MultiresOptions,
    /// Iteration cap of the full solvers.
    pub max_iter: usize,
    /// Also run SMACOF with extrapolation every `k` steps.
    pub rre_period: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            schedule: MultiresSchedule::parse("200,400,N", "100,200,N").expect("valid literal"),
            multires: MultiresOptions::default(),
            max_iter: 5000,
            rre_period: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub solver: String,
    pub log: ConvergenceLog,
    /// Wall time until the stress first dropped to the target, if it did.
    pub seconds_to_target: Option<f64>,
    pub final_stress: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Full stress reached by the multiresolution solver.
    pub target_stress: f64,
    /// Sampling and eigenbasis time.
    pub setup_seconds: f64,
    /// Multiresolution wall time including setup.
    pub spectral_seconds: f64,
    pub runs: Vec<SolverRun>,
}

impl BenchReport {
    /// Full SMACOF time to the target over total multiresolution time.
    pub fn speedup(&self) -> Option<f64> {
        self.run("smacof")?.seconds_to_target.map(|t| t / self.spectral_seconds)
    }

    pub fn run(&self, solver: &str) -> Option<&SolverRun> {
        self.runs.iter().find(|r| r.solver == solver)
    }

    /// Columns `solver,iteration,seconds,stress,level`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("solver,iteration,seconds,stress,level\n");
        for run in &self.runs {
            for r in &run.log.records {
                let _ = writeln!(s, "{},{},{:.6},{:e},{}", run.solver, r.iteration, r.seconds, r.stress, r.level);
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Runs the comparison on one problem. `d` is the full dissimilarity table;
/// building it is not counted against either solver.
pub fn run_bench(
    mesh: &TriangleMesh,
    x0: &DMatrix<f64>,
    d: &DMatrix<f64>,
    weights: WeightModel,
    config: &BenchConfig,
) -> Result<BenchReport> {
    let mut multires_opts = config.multires.clone();
    multires_opts.full_stress = true;
    let spectral = multires_solve(mesh, x0, DistanceSource::Table(d), weights, &config.schedule, &multires_opts)?;
    let target = spectral.final_full_stress().expect("full stress is requested");
    let spectral_seconds = spectral.levels.last().map_or(0.0, |l| l.seconds);
    let mut runs = vec![SolverRun {
        solver: "multires".into(),
        seconds_to_target: Some(spectral_seconds),
        final_stress: target,
        log: spectral.log,
    }];

    let problem = weights.problem(d.clone())?;
    let opts = SolverOptions {
        abs_tol: target,
        rel_tol: 0.0,
        max_iter: config.max_iter,
        record_log: true,
    };
    let mut full = vec![("smacof", smacof_solve(&problem, x0, &opts)?.1)];
    if let Some(k) = config.rre_period {
        full.push(("smacof-rre", smacof_solve_rre(&problem, x0, &opts, k)?.1));
    }
    for (name, log) in full {
        let seconds_to_target = log.records.iter().find(|r| r.stress <= target).map(|r| r.seconds);
        if seconds_to_target.is_none() {
            log::info!("{name} stopped at stress {:e} above the target {target:e}", log.final_stress().unwrap_or(f64::NAN));
        }
        runs.push(SolverRun {
            solver: name.into(),
            seconds_to_target,
            final_stress: log.final_stress().unwrap_or(f64::NAN),
            log,
        });
    }
    Ok(BenchReport {
        target_stress: target,
        setup_seconds: spectral.setup_seconds,
        spectral_seconds,
        runs,
    })
}
