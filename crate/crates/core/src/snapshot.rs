//! Binary field snapshots with a JSON sidecar.
//!
//! Layout (little-endian): `b"GPTW"`, `u32` version, `u32` dim, `dim` x `u64`
//! sizes, `dim` x `f64` half periods, then interleaved `re, im` pairs in
//! row-major order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{ComplexField, FieldError};
use crate::grid::{GridError, TorusGrid};

pub const MAGIC: &[u8; 4] = b"GPTW";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("truncated snapshot")]
    Truncated,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

/// Free-form provenance stored next to a snapshot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub p_target: Option<f64>,
    pub c: Option<f64>,
    #[serde(default)]
    pub residuals: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

pub fn encode(v: &ComplexField) -> Vec<u8> {
    let grid = v.grid();
    let mut out = Vec::with_capacity(16 + 16 * grid.dim() + 16 * v.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for &n in grid.sizes() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &a in grid.half_periods() {
        out.extend_from_slice(&a.to_le_bytes());
    }
    for z in v.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        if self.bytes.len() < n {
            return Err(SnapshotError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }
    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ComplexField, SnapshotError> {
    let mut cur = Cursor { bytes };
    if cur.take(4)? != MAGIC {
        return Err(SnapshotError::Magic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let dim = cur.u32()? as usize;
    if !(2..=3).contains(&dim) {
        return Err(GridError::Dimension(dim).into());
    }
    let sizes = (0..dim)
        .map(|_| cur.u64().map(|n| n as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let half_periods = (0..dim).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
    let grid = TorusGrid::new(&sizes, &half_periods)?;
    if cur.bytes.len() != 16 * grid.len() {
        return Err(SnapshotError::Truncated);
    }
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = cur.f64()?;
        let im = cur.f64()?;
        values.push(Complex64::new(re, im));
    }
    Ok(ComplexField::new(&grid, values)?)
}

/// Path of the JSON sidecar belonging to a snapshot file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write(path: &Path, v: &ComplexField, sidecar: Option<&Sidecar>) -> Result<(), SnapshotError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(v))?;
    if let Some(meta) = sidecar {
        let text = serde_json::to_string_pretty(meta)?;
        fs::write(sidecar_path(path), text + "\n")?;
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<ComplexField, SnapshotError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, SnapshotError> {
    let text = fs::read_to_string(sidecar_path(path))?;
    Ok(serde_json::from_str(&text)?)
}
