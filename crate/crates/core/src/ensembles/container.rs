//! Binary matrix container and its JSON sidecar.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `QCBPMAT1`                          |
//! | 8      | 8    | reserved, zero                            |
//! | 16     | 8    | `m` as u64                                |
//! | 24     | 8    | `N` as u64                                |
//! | 32     | 16mN | row-major `(re, im)` pairs of f64         |
//!
//! The sidecar lives next to the matrix at `<path>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SensingMatrix;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub const MATRIX_MAGIC: &[u8; 8] = b"QCBPMAT1";
const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetadata {
    pub kind: String,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub seed: u64,
    pub stream_id: u64,
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rows: usize,
    pub rows_distinct: bool,
    pub sample_points: Option<Vec<f64>>,
}

impl MatrixMetadata {
    pub fn of(a: &SensingMatrix) -> Self {
        let (seed, stream_id) = a.seed();
        Self {
            kind: a.spec().kind().name().to_string(),
            k: a.spec().bos_constant(),
            seed,
            stream_id,
            m: a.nominal_m(),
            n: a.cols(),
            rows: a.rows(),
            rows_distinct: a.rows_distinct(),
            sample_points: a.sample_points().map(<[f64]>::to_vec),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn encode_matrix(a: &CMatrix) -> Vec<u8> {
    let (m, n) = a.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 + 16 * m * n);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&[0u8; HEADER_LEN - 8]);
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    buf
}

pub fn decode_matrix(bytes: &[u8]) -> Result<CMatrix> {
    let bad = |msg: &str| Error::InvalidArgument(format!("matrix container: {msg}"));
    if bytes.len() < HEADER_LEN + 16 || &bytes[..8] != MATRIX_MAGIC {
        return Err(bad("missing QCBPMAT1 header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let m = word(HEADER_LEN) as usize;
    let n = word(HEADER_LEN + 8) as usize;
    let body = &bytes[HEADER_LEN + 16..];
    let expected = m.checked_mul(n).and_then(|mn| mn.checked_mul(16));
    if expected != Some(body.len()) {
        return Err(bad(&format!("payload of {} bytes does not match {m}x{n}", body.len())));
    }
    let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    Ok(CMatrix::from_fn(m, n, |i, j| {
        let k = 2 * (i * n + j);
        Complex64::new(f(k), f(k + 1))
    }))
}

/// Writes the container to `path` and the metadata to `<path>.json`.
pub fn write_matrix(path: &Path, a: &SensingMatrix) -> Result<()> {
    fs::write(path, encode_matrix(a.entries())).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&MatrixMetadata::of(a))?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

/// Reads a container; the sidecar is optional.
pub fn read_matrix(path: &Path) -> Result<(CMatrix, Option<MatrixMetadata>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let a = decode_matrix(&bytes)?;
    let side = sidecar_path(path);
    let meta = match fs::read_to_string(&side) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&side, e)),
    };
    Ok((a, meta))
}
