//! Field dumps: raw little-endian `(re, im)` f64 pairs in row-major order,
//! no header, plus a JSON sidecar describing the grid.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

/// Format tag embedded in every report written by this crate.
pub const FORMAT_VERSION: &str = "boostedgs-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
    /// Free-form parameters of the run that produced the field.
    pub params: serde_json::Value,
    /// `\int |f|^2 dx` at write time, used as an integrity check.
    pub l2_norm_sq: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` (binary) and its `.json` sidecar.
pub fn write_field(path: &Path, f: &Field, params: serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = Vec::with_capacity(16 * f.values().len());
    for z in f.values() {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let g = f.grid();
    let meta = FieldMeta {
        dim: g.dim(),
        half_width: g.half_width(),
        points_per_dim: g.points(),
        params,
        l2_norm_sq: f.mass(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<FieldMeta> {
    let text = fs::read_to_string(sidecar_path(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a dump and its sidecar. Length mismatches are errors.
pub fn read_field(path: &Path) -> Result<(Field, FieldMeta)> {
    let meta = read_meta(path)?;
    let grid = Grid::smoke(meta.dim, meta.half_width, meta.points_per_dim)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::Invalid(format!(
            "{}: {} bytes, expected {}",
            path.display(),
            bytes.len(),
            16 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((Field::new(&grid, values)?, meta))
}
