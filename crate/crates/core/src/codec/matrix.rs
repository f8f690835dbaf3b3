use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CodecError;

/// Modules per side of a version-2 symbol.
pub const QR_SIZE: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EcLevel {
    L,
    M,
    Q,
    H,
}

impl EcLevel {
    pub const ALL: [EcLevel; 4] = [EcLevel::L, EcLevel::M, EcLevel::Q, EcLevel::H];

    /// Two-bit field stored in the format information.
    pub fn format_bits(self) -> u16 {
        match self {
            EcLevel::L => 1,
            EcLevel::M => 0,
            EcLevel::Q => 3,
            EcLevel::H => 2,
        }
    }

    pub fn from_format_bits(bits: u16) -> EcLevel {
        match bits & 3 {
            1 => EcLevel::L,
            0 => EcLevel::M,
            3 => EcLevel::Q,
            _ => EcLevel::H,
        }
    }
}

impl fmt::Display for EcLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EcLevel::L => "L",
            EcLevel::M => "M",
            EcLevel::Q => "Q",
            EcLevel::H => "H",
        };
        f.write_str(s)
    }
}

impl FromStr for EcLevel {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" => Ok(EcLevel::L),
            "M" => Ok(EcLevel::M),
            "Q" => Ok(EcLevel::Q),
            "H" => Ok(EcLevel::H),
            other => Err(CodecError::ParseGrid(format!("unknown EC level {other:?}"))),
        }
    }
}

/// A 25x25 module grid, `true` = dark (magnetic). Indexed `[row][col]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModuleMatrix {
    modules: Vec<bool>,
    /// Known when the matrix came from the encoder; unknown for scanned grids.
    pub ec_level: Option<EcLevel>,
}

impl ModuleMatrix {
    pub fn blank() -> Self {
        ModuleMatrix {
            modules: vec![false; QR_SIZE * QR_SIZE],
            ec_level: None,
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self, CodecError> {
        if rows.len() != QR_SIZE || rows.iter().any(|r| r.len() != QR_SIZE) {
            return Err(CodecError::BadMatrixSize(rows.len()));
        }
        Ok(ModuleMatrix {
            modules: rows.iter().flatten().copied().collect(),
            ec_level: None,
        })
    }

    pub fn size(&self) -> usize {
        QR_SIZE
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.modules[row * QR_SIZE + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, dark: bool) {
        self.modules[row * QR_SIZE + col] = dark;
    }

    pub fn flip(&mut self, row: usize, col: usize) {
        let i = row * QR_SIZE + col;
        self.modules[i] = !self.modules[i];
    }

    pub fn popcount(&self) -> usize {
        self.modules.iter().filter(|&&m| m).count()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> {
        self.modules.chunks(QR_SIZE)
    }

    /// Fraction of modules that agree with `other`.
    pub fn agreement(&self, other: &ModuleMatrix) -> f64 {
        let same = self
            .modules
            .iter()
            .zip(&other.modules)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.modules.len() as f64
    }

    /// Plain-text grid: `#` dark, `.` light, one row per line.
    pub fn to_grid_string(&self) -> String {
        let mut s = String::with_capacity(QR_SIZE * (QR_SIZE + 1));
        for row in self.rows() {
            s.extend(row.iter().map(|&m| if m { '#' } else { '.' }));
            s.push('\n');
        }
        s
    }

    pub fn parse_grid(text: &str) -> Result<Self, CodecError> {
        let rows = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.chars()
                    .map(|c| match c {
                        '#' => Ok(true),
                        '.' => Ok(false),
                        other => Err(CodecError::ParseGrid(format!("unexpected {other:?}"))),
                    })
                    .collect::<Result<Vec<bool>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(&rows)
    }

    /// ASCII PGM (P2), one pixel per module, dark modules black.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{QR_SIZE} {QR_SIZE}\n1\n");
        for row in self.rows() {
            let line: Vec<&str> = row.iter().map(|&m| if m { "0" } else { "1" }).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse_pgm(text: &str) -> Result<Self, CodecError> {
        let img = crate::io::parse_pgm_ascii(text)
            .map_err(|e| CodecError::ParseGrid(e.to_string()))?;
        if img.width != QR_SIZE || img.height != QR_SIZE {
            return Err(CodecError::BadMatrixSize(img.height));
        }
        let mid = img.maxval as f64 / 2.0;
        let rows: Vec<Vec<bool>> = img
            .data
            .chunks(img.width)
            .map(|r| r.iter().map(|&v| (v as f64) < mid).collect())
            .collect();
        Self::from_rows(&rows)
    }
}

impl fmt::Display for ModuleMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_grid_string())
    }
}
