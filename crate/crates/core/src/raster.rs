//! Netpbm readers and writers for integer label maps.
//!
//! Label maps (ground truth, superpixel ids, cluster ids) are written as
//! plain PGM (`P2`); the reader also accepts binary `P5` with 8- or 16-bit
//! samples. Colorized cluster maps are written as binary PPM (`P6`).

use std::path::Path;

use crate::error::{Error, Result};

/// A height x width grid of unsigned labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
}

impl LabelGrid {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} labels do not fill a {height}x{width} grid",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }
}

/// `text` as `# `-prefixed lines.
pub fn comment_block(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}

/// Serializes labels as an ASCII PGM (`P2`).
pub fn pgm_ascii(height: usize, width: usize, labels: &[u32]) -> String {
    pgm_ascii_annotated(height, width, labels, "")
}

/// [`pgm_ascii`] with `note` embedded as header comments.
pub fn pgm_ascii_annotated(height: usize, width: usize, labels: &[u32], note: &str) -> String {
    let maxval = labels.iter().copied().max().unwrap_or(0).max(1);
    let mut out = format!("P2\n{}{width} {height}\n{maxval}\n", comment_block(note));
    for row in labels.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Serializes labels as CSV, one line per image row.
pub fn labels_csv(width: usize, labels: &[u32]) -> String {
    labels_csv_annotated(width, labels, "")
}

/// [`labels_csv`] preceded by `note` as `#` comment lines.
pub fn labels_csv_annotated(width: usize, labels: &[u32], note: &str) -> String {
    let mut out = comment_block(note);
    out.reserve(labels.len() * 3);
    for row in labels.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses a label CSV: one image row per line (`;` is also accepted as a row
/// separator), comma-separated non-negative integers. Lines starting with
/// `#` are skipped.
pub fn parse_labels_csv(text: &str) -> Result<LabelGrid> {
    let mut labels = Vec::new();
    let mut width = None;
    let mut height = 0;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(n, l)| l.split(';').map(move |r| (n, r.trim())))
        .filter(|(_, r)| !r.is_empty());
    for (lineno, row) in rows {
        let mut count = 0;
        for field in row.split(',') {
            let field = field.trim();
            let value: i64 = field.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("not an integer label: {field:?}"),
            })?;
            if value < 0 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("negative label {value}"),
                });
            }
            let value = u32::try_from(value).map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("label {value} out of range"),
            })?;
            labels.push(value);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("row has {count} labels, expected {w}"),
                })
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty label file".into(),
    })?;
    LabelGrid::new(height, width, labels)
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next_token(&mut self) -> Option<&'a str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (start < self.pos).then(|| std::str::from_utf8(&self.bytes[start..self.pos]).ok())?
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .next_token()
            .ok_or_else(|| Error::Header(format!("PGM: missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::Header(format!("PGM: bad {what} {tok:?}")))
    }
}

/// Parses a PGM label map (`P2` or `P5`).
pub fn parse_pgm(bytes: &[u8]) -> Result<LabelGrid> {
    let mut tok = Tokens { bytes, pos: 0 };
    let magic = tok
        .next_token()
        .ok_or_else(|| Error::Header("PGM: empty file".into()))?;
    let width = tok.number("width")?;
    let height = tok.number("height")?;
    let maxval = tok.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Header(format!("PGM: maxval {maxval} out of range")));
    }
    let n = width * height;
    let labels = match magic {
        "P2" => {
            let mut labels = Vec::with_capacity(n);
            for k in 0..n {
                let tok = tok.next_token().ok_or(Error::SizeMismatch {
                    expected: n,
                    found: k,
                })?;
                let v: u32 = tok.parse().map_err(|_| Error::Parse {
                    line: 0,
                    message: format!("PGM sample {k}: bad value {tok:?}"),
                })?;
                labels.push(v);
            }
            labels
        }
        "P5" => {
            // exactly one whitespace byte separates maxval from the raster
            let start = tok.pos + 1;
            let sample = if maxval < 256 { 1 } else { 2 };
            let payload = bytes.get(start..).unwrap_or(&[]);
            if payload.len() != n * sample {
                return Err(Error::SizeMismatch {
                    expected: n,
                    found: payload.len() / sample,
                });
            }
            if sample == 1 {
                payload.iter().map(|&b| u32::from(b)).collect()
            } else {
                payload
                    .chunks_exact(2)
                    .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]])))
                    .collect()
            }
        }
        other => return Err(Error::Header(format!("unsupported PGM magic {other:?}"))),
    };
    LabelGrid::new(height, width, labels)
}

/// Reads a label map from CSV or PGM, chosen by the file's magic bytes.
pub fn read_label_grid(path: &Path) -> Result<LabelGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Header(format!("{} is neither PGM nor CSV", path.display())))?;
        parse_labels_csv(&text)
    }
}

/// Deterministic, well-separated color for a label. Label 0 is black.
pub fn label_color(label: u32) -> [u8; 3] {
    if label == 0 {
        return [0, 0, 0];
    }
    // golden-angle hue walk, alternating value bands
    let hue = (f64::from(label - 1) * 137.507_764_05).rem_euclid(360.0);
    let value = if label % 2 == 0 { 0.75 } else { 0.95 };
    let sat = 0.85;
    let c = value * sat;
    let hp = hue / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = value - c;
    let to_byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

/// Renders labels as a binary PPM (`P6`) with [`label_color`].
pub fn render_ppm(height: usize, width: usize, labels: &[u32]) -> Vec<u8> {
    render_ppm_annotated(height, width, labels, "")
}

/// [`render_ppm`] with `note` embedded as header comments.
pub fn render_ppm_annotated(height: usize, width: usize, labels: &[u32], note: &str) -> Vec<u8> {
    let mut out = format!("P6\n{}{width} {height}\n255\n", comment_block(note)).into_bytes();
    out.reserve(labels.len() * 3);
    for &l in labels {
        out.extend_from_slice(&label_color(l));
    }
    out
}
