//! Map file IO.
//!
//! Two formats, chosen by extension:
//!
//! * `.sdm` — flat binary, little-endian. Header: magic `SDM1`, format
//!   version 1, nt, np (all 32-bit unsigned), followed by theta (nt f64),
//!   phi (np f64), and the data row-major (nt*np f64). Total length is
//!   exactly 16 + 8*(nt + np + nt*np) bytes.
//! * `.csv` — UTF-8 text. First row: empty corner cell, then the phi
//!   values; every following row: theta_i, then the row's values. Floats
//!   are printed shortest-roundtrip, so a write/read cycle is bitwise
//!   lossless here too.
//!
//! Reading validates the reconstructed grid; violated grid invariants
//! surface as validation errors naming the invariant. Pole rows are
//! collapsed to their first value on read (a map whose pole rings disagree
//! was not produced by this tool).

use std::path::{Path, PathBuf};

use diffuse_core::{ScalarField, SphericalGrid};
use thiserror::Error;

pub const SDM_MAGIC: [u8; 4] = *b"SDM1";
pub const SDM_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: format error: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
    #[error("{}: validation error: {detail}", path.display())]
    Validation { path: PathBuf, detail: String },
}

fn io_err(path: &Path, source: std::io::Error) -> MapError {
    MapError::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, detail: impl Into<String>) -> MapError {
    MapError::Format { path: path.to_path_buf(), detail: detail.into() }
}

fn validation_err(path: &Path, detail: impl Into<String>) -> MapError {
    MapError::Validation { path: path.to_path_buf(), detail: detail.into() }
}

/// Writes `field` in the format implied by the path's extension.
pub fn write_map(path: &Path, field: &ScalarField) -> Result<(), MapError> {
    match extension(path)? {
        MapFormat::Sdm => write_sdm(path, field),
        MapFormat::Csv => write_csv(path, field),
    }
}

/// Reads a map in the format implied by the path's extension. The grid is
/// reconstructed from the stored axes and revalidated.
pub fn read_map(path: &Path) -> Result<ScalarField, MapError> {
    match extension(path)? {
        MapFormat::Sdm => read_sdm(path),
        MapFormat::Csv => read_csv(path),
    }
}

enum MapFormat {
    Sdm,
    Csv,
}

fn extension(path: &Path) -> Result<MapFormat, MapError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("sdm") => Ok(MapFormat::Sdm),
        Some("csv") => Ok(MapFormat::Csv),
        _ => Err(format_err(path, "unsupported map extension (expected .sdm or .csv)")),
    }
}

pub fn write_sdm(path: &Path, field: &ScalarField) -> Result<(), MapError> {
    let grid = field.grid();
    let (nt, np) = (grid.nt(), grid.np());
    let mut buf = Vec::with_capacity(16 + 8 * (nt + np + nt * np));
    buf.extend_from_slice(&SDM_MAGIC);
    buf.extend_from_slice(&SDM_VERSION.to_le_bytes());
    buf.extend_from_slice(&(nt as u32).to_le_bytes());
    buf.extend_from_slice(&(np as u32).to_le_bytes());
    for &t in grid.theta() {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    for &p in grid.phi() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for &v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, &buf).map_err(|e| io_err(path, e))
}

pub fn read_sdm(path: &Path) -> Result<ScalarField, MapError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 16 {
        return Err(format_err(path, "truncated file (shorter than the 16-byte header)"));
    }
    if bytes[0..4] != SDM_MAGIC {
        return Err(format_err(path, "not an SDM1 file (bad magic)"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let version = word(1);
    if version != SDM_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let nt = word(2) as usize;
    let np = word(3) as usize;
    if nt < 3 || np < 3 {
        return Err(format_err(path, format!("header requires nt, np >= 3, got {nt}x{np}")));
    }
    let payload = (nt as u64 + np as u64 + nt as u64 * np as u64) * 8 + 16;
    if bytes.len() as u64 != payload {
        return Err(format_err(
            path,
            format!("length {} does not match header ({payload} bytes expected)", bytes.len()),
        ));
    }

    let f64_at = |k: usize| {
        let off = 16 + 8 * k;
        f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
    };
    let theta: Vec<f64> = (0..nt).map(f64_at).collect();
    let phi: Vec<f64> = (0..np).map(|k| f64_at(nt + k)).collect();
    let values: Vec<f64> = (0..nt * np).map(|k| f64_at(nt + np + k)).collect();

    let grid = SphericalGrid::from_nodes(theta, phi)
        .map_err(|e| validation_err(path, e.to_string()))?;
    Ok(ScalarField::from_values(&grid, values))
}

pub fn write_csv(path: &Path, field: &ScalarField) -> Result<(), MapError> {
    let grid = field.grid();
    let mut text = String::new();
    for &p in grid.phi() {
        text.push(',');
        text.push_str(&p.to_string());
    }
    text.push('\n');
    for i in 0..grid.nt() {
        text.push_str(&grid.theta()[i].to_string());
        for j in 0..grid.np() {
            text.push(',');
            text.push_str(&field.get(i, j).to_string());
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_csv(path: &Path) -> Result<ScalarField, MapError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?;
    let mut cells = header.split(',');
    if cells.next() != Some("") {
        return Err(format_err(path, "line 1: corner cell must be empty"));
    }
    let parse = |line_no: usize, cell: &str| {
        cell.parse::<f64>()
            .map_err(|_| format_err(path, format!("line {line_no}: not a number: {cell:?}")))
    };
    let phi = cells.map(|c| parse(1, c)).collect::<Result<Vec<f64>, _>>()?;

    let mut theta = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let mut cells = line.split(',');
        theta.push(parse(line_no, cells.next().unwrap())?);
        let before = values.len();
        for c in cells {
            values.push(parse(line_no, c)?);
        }
        if values.len() - before != phi.len() {
            return Err(format_err(
                path,
                format!("line {line_no}: expected {} values, got {}", phi.len(), values.len() - before),
            ));
        }
    }
    if theta.len() < 3 || phi.len() < 3 {
        return Err(format_err(
            path,
            format!("grid requires nt, np >= 3, got {}x{}", theta.len(), phi.len()),
        ));
    }

    let grid = SphericalGrid::from_nodes(theta, phi)
        .map_err(|e| validation_err(path, e.to_string()))?;
    Ok(ScalarField::from_values(&grid, values))
}
