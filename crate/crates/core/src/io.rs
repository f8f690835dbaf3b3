//! File formats: PGM, PNG, CSV grids.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad PGM: {0}")]
    BadPgm(String),
    #[error("png: {0}")]
    Png(String),
    #[error("bad CSV: {0}")]
    BadCsv(String),
}

/// Greyscale raster read from a PGM file.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    /// Row-major, top row first.
    pub data: Vec<u32>,
}

/// Parses P2 (ASCII) and P5 (binary, 8-bit) greymaps. Comments start with `#`.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, IoError> {
    let bad = |m: &str| IoError::BadPgm(m.to_string());
    let mut pos = 0usize;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        header.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
    }
    let magic = header[0];
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("header number"));
    let (width, height, maxval) = (num(header[1])?, num(header[2])?, num(header[3])? as u32);
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range"));
    }
    let n = width * height;
    let data: Vec<u32> = match magic {
        "P2" => {
            let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| bad("not ASCII"))?;
            let data = text
                .split_whitespace()
                .take(n)
                .map(|t| t.parse::<u32>().map_err(|_| bad("pixel value")))
                .collect::<Result<Vec<_>, _>>()?;
            if data.len() != n {
                return Err(bad("too few pixels"));
            }
            data
        }
        "P5" => {
            // exactly one whitespace byte separates header and raster
            let body = &bytes[(pos + 1).min(bytes.len())..];
            if maxval < 256 {
                if body.len() < n {
                    return Err(bad("too few pixels"));
                }
                body[..n].iter().map(|&b| b as u32).collect()
            } else {
                if body.len() < 2 * n {
                    return Err(bad("too few pixels"));
                }
                body.chunks(2)
                    .take(n)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                    .collect()
            }
        }
        _ => return Err(bad("unsupported magic")),
    };
    if data.iter().any(|&v| v > maxval) {
        return Err(bad("pixel above maxval"));
    }
    Ok(GrayImage {
        width,
        height,
        maxval,
        data,
    })
}

pub fn parse_pgm_ascii(text: &str) -> Result<GrayImage, IoError> {
    parse_pgm(text.as_bytes())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage, IoError> {
    parse_pgm(&fs::read(path)?)
}

/// Linearly maps `values` (row-major) onto 0..=255 between `lo` and `hi`.
pub fn to_u8(values: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    values
        .iter()
        .map(|&v| {
            if v.is_finite() {
                (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect()
}

/// Finite min and max; (0, 0) when nothing is finite.
pub fn finite_range(values: &[f64]) -> (f64, f64) {
    let mut it = values.iter().copied().filter(|v| v.is_finite());
    let Some(first) = it.next() else {
        return (0.0, 0.0);
    };
    it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Binary 8-bit PGM.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), IoError> {
    assert_eq!(pixels.len(), width * height);
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

pub fn write_png(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), IoError> {
    image::save_buffer(
        path,
        pixels,
        width as u32,
        height as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| IoError::Png(e.to_string()))
}

/// Row-major grid as CSV, one image row per line, full round-trip precision.
pub fn write_csv_grid(path: &Path, width: usize, values: &[f64]) -> Result<(), IoError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV grid back; returns (width, height, values).
pub fn read_csv_grid(path: &Path) -> Result<(usize, usize, Vec<f64>), IoError> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| IoError::BadCsv(format!("line {}: {t:?}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(IoError::BadCsv(format!("line {} has {} columns", i + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    Ok((width.unwrap_or(0), height, values))
}

/// Writes a table with a header row.
pub fn write_csv_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
