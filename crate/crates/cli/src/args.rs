use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "smds", version, about = "Stress-majorization MDS, subspace solvers and grid retargeting")]
pub struct Cli {
    /// JSON file with command parameters; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Raise log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a mesh (geodesic distances) or a CSV distance table.
    Embed(EmbedArgs),
    /// Multiresolution canonical form of a mesh under its geodesic metric.
    CanonicalForm(CanonicalArgs),
    /// Time full SMACOF against the multiresolution solver.
    Bench(BenchArgs),
    /// Saliency-aware horizontal retargeting of an image.
    Retarget(RetargetArgs),
    /// Compute and cache a Laplacian eigenbasis.
    Basis(BasisArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Smacof,
    SmacofRre,
    Spectral,
    Multires,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArg {
    Unit,
    Relative,
}

/// Fills every `None` field of `self` from `other`.
macro_rules! merge_from {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn merged(self, other: Self) -> Self {
                Self { $($field: self.$field.or(other.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedArgs {
    /// Mesh (.off/.obj) or square distance table (.csv).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Basis size of the single-level subspace solver.
    #[arg(long)]
    pub p: Option<usize>,
    /// Sample count of the single-level subspace solver.
    #[arg(long)]
    pub q: Option<usize>,
    /// Comma-separated sample counts; `N` means every vertex.
    #[arg(long)]
    pub schedule_q: Option<String>,
    /// Comma-separated basis sizes; `N` means every vertex.
    #[arg(long)]
    pub schedule_p: Option<String>,
    /// Minimum samples per basis function below the full level.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Extrapolation period of `smacof-rre`.
    #[arg(long)]
    pub rre_period: Option<usize>,
    /// First sample and random initialization seed.
    #[arg(long)]
    pub seed: Option<usize>,
    /// Directory of cached eigenbases.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Write zero for wall times so logs are byte-identical across runs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_timing: Option<bool>,
}

merge_from!(EmbedArgs {
    input, out_dir, solver, weights, dim, p, q, schedule_q, schedule_p, ratio, max_iter, rel_tol, abs_tol,
    rre_period, seed, cache_dir, no_timing,
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    #[arg(long)]
    pub schedule_q: Option<String>,
    #[arg(long)]
    pub schedule_p: Option<String>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_timing: Option<bool>,
}

merge_from!(CanonicalArgs {
    input, out_dir, weights, schedule_q, schedule_p, ratio, max_iter, rel_tol, seed, cache_dir, no_timing,
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    #[arg(long)]
    pub schedule_q: Option<String>,
    #[arg(long)]
    pub schedule_p: Option<String>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Iteration cap of the full solvers.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Also run SMACOF with extrapolation every this many steps.
    #[arg(long)]
    pub rre_period: Option<usize>,
    #[arg(long)]
    pub seed: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

merge_from!(BenchArgs {
    input, out_dir, weights, schedule_q, schedule_p, ratio, max_iter, rre_period, seed, cache_dir,
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetargetArgs {
    /// Source image (plain PGM or PPM).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Saliency mask (plain PGM) with values in [0, 1] after scaling.
    #[arg(long)]
    pub saliency: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Output width over source width.
    #[arg(long)]
    pub width_ratio: Option<f64>,
    #[arg(long)]
    pub grid_rows: Option<usize>,
    #[arg(long)]
    pub grid_cols: Option<usize>,
    /// Weight of the smoothness term.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Minimum horizontal gap between neighbors; defaults to half the rescaled spacing.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub seed: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_timing: Option<bool>,
}

merge_from!(RetargetArgs {
    source, saliency, out_dir, width_ratio, grid_rows, grid_cols, mu, epsilon, p, q, seed, max_iter, rel_tol,
    no_timing,
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of eigenpairs.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

merge_from!(BasisArgs { input, p, cache_dir });
