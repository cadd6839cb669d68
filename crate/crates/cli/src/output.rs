use std::fs;
use std::path::{Path, PathBuf};

use spectral_mds::laplace::{read_basis_cache, write_basis_cache};
use spectral_mds::{ConvergenceLog, EigenBasis, TriangleMesh};
use tempfile::TempDir;
use thiserror::Error;

/// Environment variable naming the eigenbasis cache directory.
pub const CACHE_ENV: &str = "SMDS_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] spectral_mds::Error),
}

impl CliError {
    /// 1 for bad configuration or inputs, 2 for failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        use spectral_mds::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Core(e) => match e {
                E::Io { .. }
                | E::Parse { .. }
                | E::InvalidMesh(_)
                | E::DegenerateFace { .. }
                | E::InvalidImage(_)
                | E::ShapeMismatch(_)
                | E::InvalidArgument(_)
                | E::Asymmetric { .. }
                | E::Disconnected { .. }
                | E::DisconnectedWeights(_) => 1,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("writing {}: {e}", path.display()))
}

/// Output files are written into a hidden directory next to their final
/// location and renamed into place only when every file has been written.
pub struct Staging {
    out_dir: PathBuf,
    dir: TempDir,
    files: Vec<String>,
}

impl Staging {
    pub fn new(out_dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| runtime(out_dir, e))?;
        let dir = tempfile::Builder::new()
            .prefix(".smds-staging-")
            .tempdir_in(out_dir)
            .map_err(|e| runtime(out_dir, e))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            dir,
            files: Vec::new(),
        })
    }

    /// Path to write `name` to before commit.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.path().join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| runtime(&path, e))
    }

    pub fn write_log(&mut self, name: &str, log: &ConvergenceLog, no_timing: bool) -> CliResult<()> {
        let text = if no_timing { untimed(log).to_csv() } else { log.to_csv() };
        self.write(name, &text)
    }

    /// Moves every staged file to the output directory.
    pub fn commit(self) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let to = self.out_dir.join(name);
            fs::rename(self.dir.path().join(name), &to).map_err(|e| runtime(&to, e))?;
            written.push(to);
        }
        Ok(written)
    }
}

pub fn untimed(log: &ConvergenceLog) -> ConvergenceLog {
    let mut log = log.clone();
    for r in &mut log.records {
        r.seconds = 0.0;
    }
    log
}

/// `--cache-dir`, then `$SMDS_CACHE_DIR`, then `$XDG_CACHE_HOME/smds`, then `~/.cache/smds`.
pub fn cache_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    let env = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
    flag.or_else(|| env(CACHE_ENV))
        .or_else(|| env("XDG_CACHE_HOME").map(|d| d.join("smds")))
        .or_else(|| env("HOME").map(|d| d.join(".cache").join("smds")))
}

fn cache_name(mesh: &TriangleMesh, p: usize) -> String {
    format!("{:016x}-p{p}.eig", mesh.fingerprint())
}

/// The smallest cached basis of this mesh with at least `p` columns,
/// truncated to `p`.
pub fn load_cached_basis(dir: &Path, mesh: &TriangleMesh, p: usize) -> Option<EigenBasis> {
    let prefix = format!("{:016x}-p", mesh.fingerprint());
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(dir).ok()?.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(size) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".eig")) else {
            continue;
        };
        let Ok(size) = size.parse::<usize>() else { continue };
        if size >= p && best.as_ref().is_none_or(|(b, _)| size < *b) {
            best = Some((size, entry.path()));
        }
    }
    let (_, path) = best?;
    match read_basis_cache(&path) {
        Ok(basis) if basis.num_vertices() == mesh.num_vertices() => Some(basis.truncated(p)),
        Ok(_) => None,
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

/// Stores `basis` atomically; failures only log a warning.
pub fn store_basis(dir: &Path, mesh: &TriangleMesh, basis: &EigenBasis) {
    let store = || -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let tmp = tempfile::Builder::new().prefix(".eig-").tempfile_in(dir)?;
        write_basis_cache(tmp.path(), basis).map_err(std::io::Error::other)?;
        let to = dir.join(cache_name(mesh, basis.len()));
        tmp.persist(&to).map_err(|e| e.error)?;
        Ok(to)
    };
    match store() {
        Ok(path) => log::info!("cached eigenbasis at {}", path.display()),
        Err(e) => log::warn!("could not cache eigenbasis in {}: {e}", dir.display()),
    }
}
