//! Flat binary cache for eigenbases.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "SMDSEIG1"
//! N        u64
//! p        u64
//! lambda   p  x f64
//! mass     N  x f64   (diagonal of the lumped mass matrix)
//! phi      N*p x f64  (column-major)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::EigenBasis;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetricMatrix;

const MAGIC: &[u8; 8] = b"SMDSEIG1";

pub fn write_basis_cache(path: impl AsRef<Path>, basis: &EigenBasis) -> Result<()> {
    let path = path.as_ref();
    let (n, p) = (basis.phi.nrows(), basis.phi.ncols());
    let mut buf = Vec::with_capacity(24 + 8 * (p + n + n * p));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(p as u64).to_le_bytes());
    for v in basis
        .eigenvalues
        .iter()
        .chain(basis.mass.diagonal().iter())
        .chain(basis.phi.as_slice())
    {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_basis_cache(path: impl AsRef<Path>) -> Result<EigenBasis> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::parse(0, format!("basis cache {}: {m}", path.display()));
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let (n, p) = (word(8) as usize, word(16) as usize);
    let count = p + n + n * p;
    if bytes.len() != 24 + 8 * count {
        return Err(bad("truncated"));
    }
    let floats: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(EigenBasis {
        eigenvalues: floats[..p].to_vec(),
        mass: SparseSymmetricMatrix::from_diagonal(&floats[p..p + n])?,
        phi: DMatrix::from_column_slice(n, p, &floats[p + n..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::fourier_basis_grid;

    #[test]
    fn round_trip_is_bit_exact() {
        let b = fourier_basis_grid(5, 6, 1.0, 2.0, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.bin");
        write_basis_cache(&path, &b).unwrap();
        let r = read_basis_cache(&path).unwrap();
        assert_eq!(r.phi, b.phi);
        assert_eq!(r.eigenvalues, b.eigenvalues);
        assert_eq!(r.mass, b.mass);
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 24 + 8 * (7 + 30 + 30 * 7));
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"SMDSEIG1\x01").unwrap();
        assert!(read_basis_cache(&path).is_err());
    }
}
