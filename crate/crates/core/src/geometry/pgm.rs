//! Masks as binary PGM (P5) images plus a JSON sidecar carrying the grid.
//!
//! Pixel rows are written top (largest `y`) to bottom, set cells as 255.

use std::fs;
use std::path::{Path, PathBuf};

use super::{BinaryField, GridSpec};
use crate::error::{Error, Result};

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_pgm(field: &BinaryField) -> Vec<u8> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.reserve(nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            out.push(if field.get(i, j) { 255 } else { 0 });
        }
    }
    out
}

/// Writes `path` (PGM) and its `.json` sidecar.
pub fn write_mask(field: &BinaryField, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(field)).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    let json = serde_json::to_vec_pretty(field.grid())?;
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < bytes.len() {
        if bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else if bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn decode_pgm(bytes: &[u8], grid: &GridSpec, path: &Path) -> Result<BinaryField> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut pos = 0;
    let next_num = |what: &str, pos: &mut usize| -> Result<usize> {
        let tok = header_token(bytes, pos).ok_or_else(|| bad(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("invalid {what}")))
    };
    if header_token(bytes, &mut pos) != Some(b"P5") {
        return Err(bad("not a P5 PGM".into()));
    }
    let nx = next_num("width", &mut pos)?;
    let ny = next_num("height", &mut pos)?;
    let maxval = next_num("maxval", &mut pos)?;
    if maxval != 255 {
        return Err(bad(format!("maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if [nx, ny] != grid.cells {
        return Err(bad(format!(
            "image is {nx}x{ny} but sidecar grid is {:?}",
            grid.cells
        )));
    }
    let raster = bytes
        .get(pos..pos + nx * ny)
        .ok_or_else(|| bad("truncated raster".into()))?;
    if pos + nx * ny != bytes.len() {
        return Err(bad("trailing bytes after raster".into()));
    }
    let mut values = vec![0u8; nx * ny];
    for (row, chunk) in raster.chunks(nx).enumerate() {
        let j = ny - 1 - row;
        for (i, &px) in chunk.iter().enumerate() {
            values[grid.index(i, j)] = match px {
                0 => 0,
                255 => 1,
                other => return Err(bad(format!("pixel value {other} is not 0 or 255"))),
            };
        }
    }
    BinaryField::from_values(grid, values)
}

/// Reads a mask written by [`write_mask`].
pub fn read_mask(path: &Path) -> Result<BinaryField> {
    let sidecar = sidecar_path(path);
    let json = fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let grid: GridSpec = serde_json::from_slice(&json)?;
    grid.validate()?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, &grid, path)
}
