//! Cube and label file formats.
//!
//! `raw-bsq`: an ASCII header line `"height width bands\n"` followed by
//! `height * width * bands` little-endian `f32` values in band-sequential
//! order (all of band 0 row-major, then band 1, ...).
//!
//! `csv`: a header line `"height,width,bands"`, then one pixel per line with
//! `bands` comma-separated reals, row-major.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::cube::{GroundTruth, HsiCube};
use crate::error::{Error, Result};
use crate::raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeFormat {
    RawBsq,
    Csv,
}

impl CubeFormat {
    /// Guesses the format from a file extension (`.csv` is csv, anything else raw-bsq).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CubeFormat::Csv,
            _ => CubeFormat::RawBsq,
        }
    }
}

impl FromStr for CubeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-bsq" | "bsq" => Ok(CubeFormat::RawBsq),
            "csv" => Ok(CubeFormat::Csv),
            other => Err(Error::param(format!("unknown cube format {other:?}"))),
        }
    }
}

impl fmt::Display for CubeFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CubeFormat::RawBsq => "raw-bsq",
            CubeFormat::Csv => "csv",
        })
    }
}

pub fn load_cube(path: &Path, format: CubeFormat) -> Result<HsiCube> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes, format)
}

pub fn save_cube(cube: &HsiCube, path: &Path, format: CubeFormat) -> Result<()> {
    std::fs::write(path, encode_cube(cube, format)).map_err(|e| Error::io(path, e))
}

pub fn decode_cube(bytes: &[u8], format: CubeFormat) -> Result<HsiCube> {
    match format {
        CubeFormat::RawBsq => decode_bsq(bytes),
        CubeFormat::Csv => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| Error::Header(format!("csv cube is not UTF-8: {e}")))?;
            decode_csv(text)
        }
    }
}

pub fn encode_cube(cube: &HsiCube, format: CubeFormat) -> Vec<u8> {
    match format {
        CubeFormat::RawBsq => encode_bsq(cube),
        CubeFormat::Csv => encode_csv(cube).into_bytes(),
    }
}

fn parse_dims(fields: &[&str]) -> Result<(usize, usize, usize)> {
    if fields.len() != 3 {
        return Err(Error::Header(format!(
            "expected \"height width bands\", got {} fields",
            fields.len()
        )));
    }
    let mut dims = [0usize; 3];
    for (d, f) in dims.iter_mut().zip(fields) {
        *d = f
            .trim()
            .parse()
            .map_err(|_| Error::Header(format!("not a positive integer: {f:?}")))?;
        if *d == 0 {
            return Err(Error::Header("dimensions must be positive".into()));
        }
    }
    Ok((dims[0], dims[1], dims[2]))
}

fn decode_bsq(bytes: &[u8]) -> Result<HsiCube> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Header("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Header("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let (height, width, bands) = parse_dims(&fields)?;
    let payload = &bytes[newline + 1..];
    let expected = height * width * bands;
    if payload.len() != expected * 4 {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len() / 4,
        });
    }
    let n = height * width;
    let mut values = vec![0.0; expected];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                location: format!("byte offset {}", newline + 1 + 4 * k),
            });
        }
        let (band, pixel) = (k / n, k % n);
        values[pixel * bands + band] = f64::from(v);
    }
    HsiCube::new(height, width, bands, values)
}

fn encode_bsq(cube: &HsiCube) -> Vec<u8> {
    let (n, bands) = (cube.n_pixels(), cube.bands());
    let mut out = format!("{} {} {}\n", cube.height(), cube.width(), bands).into_bytes();
    out.reserve(n * bands * 4);
    for band in 0..bands {
        for pixel in 0..n {
            out.extend_from_slice(&(cube.pixel(pixel)[band] as f32).to_le_bytes());
        }
    }
    out
}

fn decode_csv(text: &str) -> Result<HsiCube> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Header("empty csv cube".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    let (height, width, bands) = parse_dims(&fields)?;
    let n = height * width;
    let mut values = Vec::with_capacity(n * bands);
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == n {
            return Err(Error::SizeMismatch {
                expected: n * bands,
                found: n * bands + line.split(',').count(),
            });
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    location: format!("line {} (pixel row {rows})", lineno + 1),
                });
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != bands {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("pixel has {got} bands, expected {bands}"),
            });
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::SizeMismatch {
            expected: n * bands,
            found: rows * bands,
        });
    }
    HsiCube::new(height, width, bands, values)
}

fn encode_csv(cube: &HsiCube) -> String {
    let mut out = format!("{},{},{}\n", cube.height(), cube.width(), cube.bands());
    for i in 0..cube.n_pixels() {
        let fields: Vec<String> = cube.pixel(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Loads a ground-truth label map from CSV or PGM.
pub fn load_labels(path: &Path) -> Result<GroundTruth> {
    let grid = raster::read_label_grid(path)?;
    GroundTruth::new(grid.height, grid.width, grid.labels)
}

/// Loads labels and checks that they cover the same lattice as `cube`.
pub fn load_labels_for(path: &Path, cube: &HsiCube) -> Result<GroundTruth> {
    let gt = load_labels(path)?;
    gt.check_matches(cube)?;
    Ok(gt)
}
