//! Photon-count stacks from an axial field map.
//!
//! Every NV under a pixel sees the same lineshape shifted by its local
//! `γΔb`. The lineshape is tabulated once on a lattice aligned with the
//! sweep, so the PSF-weighted average of shifted curves reduces to a shift
//! histogram (weights split linearly between neighbouring lattice points)
//! convolved with the table. That is exactly linear interpolation of the
//! table at every sub-position.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImagingError, Psf};
use crate::magnetics::{BParMap, GAMMA_MHZ_PER_G};
use crate::nvmodel::odmr::canonical_rate;
use crate::nvmodel::{DriveConfig, RateModel, Sweep};
use crate::Grid;

/// Canonical `R(x)` on the lattice `x = x0 + m·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineshapeTable {
    pub x0: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl LineshapeTable {
    /// Tabulates `[lo, hi]` (widened to whole steps from `anchor`).
    pub fn build(
        model: &RateModel,
        drive: &DriveConfig,
        anchor: f64,
        step: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Self, ImagingError> {
        let m_lo = ((lo - anchor) / step).floor() as i64;
        let m_hi = ((hi - anchor) / step).ceil() as i64;
        let x0 = anchor + m_lo as f64 * step;
        let values = (0..=(m_hi - m_lo))
            .into_par_iter()
            .map(|m| canonical_rate(model, drive, x0 + m as f64 * step))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LineshapeTable { x0, step, values })
    }

    /// Linear interpolation; clamps outside the table.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.x0) / self.step;
        if u <= 0.0 {
            return self.values[0];
        }
        let k = u.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let f = u - k as f64;
        (1.0 - f) * self.values[k] + f * self.values[k + 1]
    }
}

/// Imaging parameters besides model, drive and PSF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    /// Total measurement time, seconds.
    pub exposure_s: f64,
    /// Counts per second per unit rate per pixel.
    pub photon_gain: f64,
    /// Lineshape table points per sweep step.
    pub table_oversample: usize,
    /// Relative gain loss at the field-of-view corners (quadratic in radius).
    pub edge_droop: f64,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            exposure_s: 100.0,
            photon_gain: 1.0e5,
            table_oversample: 2,
            edge_droop: 0.0,
        }
    }
}

impl StackConfig {
    pub fn with_exposure(mut self, exposure_s: f64) -> Self {
        self.exposure_s = exposure_s;
        self
    }
}

/// Default imaging sweep: ±60 MHz in 1 MHz steps.
pub fn imaging_sweep() -> Sweep {
    Sweep::symmetric(60.0, 121)
}

/// Noise-free, PSF-averaged rate curves for every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedStack {
    pub pixels: Grid,
    pub detunings: Vec<f64>,
    /// `rates[p * n_det + k]`.
    pub rates: Vec<f64>,
    /// No-microwave rate R₀.
    pub baseline: f64,
}

fn check_grid(bpar: &Grid, expected: &Grid) -> Result<(), ImagingError> {
    let tol = 1e-9 * expected.step.max(1.0);
    let same = bpar.nx == expected.nx
        && bpar.ny == expected.ny
        && (bpar.step - expected.step).abs() < tol
        && (bpar.x0 - expected.x0).abs() < tol
        && (bpar.y0 - expected.y0).abs() < tol;
    if same {
        Ok(())
    } else {
        Err(ImagingError::GridMismatch)
    }
}

/// PSF-weighted average of shifted lineshapes for every pixel of `pixels`.
/// `bpar` must be sampled on `psf.field_grid(pixels)`.
pub fn expected_curves(
    bpar: &BParMap,
    pixels: &Grid,
    model: &RateModel,
    drive: &DriveConfig,
    psf: &Psf,
    oversample: usize,
) -> Result<ExpectedStack, ImagingError> {
    check_grid(&bpar.grid, &psf.field_grid(pixels))?;
    let detunings = drive.sweep.values();
    let n_det = detunings.len();
    if n_det < 2 {
        return Err(ImagingError::BadConfig("sweep needs at least 2 points".into()));
    }
    let sweep_step = (drive.sweep.stop - drive.sweep.start) / (n_det - 1) as f64;
    let h = sweep_step / oversample.max(1) as f64;
    let over = oversample.max(1) as i64;

    let shifts: Vec<f64> = bpar
        .b_par
        .iter()
        .map(|b| GAMMA_MHZ_PER_G * (b - bpar.bias_par))
        .collect();
    let (smin, smax) = shifts
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let start = drive.sweep.start;
    let table = LineshapeTable::build(
        model,
        drive,
        start,
        h,
        start - smax - 2.0 * h,
        drive.sweep.stop - smin + 2.0 * h,
    )?;
    // table index of lattice point start + m·h
    let m_offset = ((start - table.x0) / h).round() as i64;

    let kernel = psf.pixel_kernel(pixels);
    let fine = bpar.grid;
    let rates: Vec<f64> = (0..pixels.len())
        .into_par_iter()
        .flat_map_iter(|p| {
            let (i, j) = (p % pixels.nx, p / pixels.nx);
            let (i0, j0) = kernel.origin(i, j);
            // shift histogram on the lattice j·h, ordered for a fixed summation order
            let mut hist: BTreeMap<i64, f64> = BTreeMap::new();
            for b in 0..kernel.side {
                for a in 0..kernel.side {
                    let w = kernel.weights[b * kernel.side + a];
                    if w == 0.0 {
                        continue;
                    }
                    let u = shifts[fine.index(i0 + a, j0 + b)] / h;
                    let k = u.floor();
                    let f = u - k;
                    *hist.entry(k as i64).or_insert(0.0) += w * (1.0 - f);
                    if f > 0.0 {
                        *hist.entry(k as i64 + 1).or_insert(0.0) += w * f;
                    }
                }
            }
            let table = &table;
            (0..n_det).map(move |d| {
                let base = m_offset + d as i64 * over;
                hist.iter()
                    .map(|(&jb, &w)| w * table.values[(base - jb) as usize])
                    .sum::<f64>()
            })
        })
        .collect();
    Ok(ExpectedStack {
        pixels: *pixels,
        detunings,
        rates,
        baseline: model.baseline()?,
    })
}

impl ExpectedStack {
    pub fn n_det(&self) -> usize {
        self.detunings.len()
    }

    pub fn curve(&self, pixel: usize) -> &[f64] {
        let n = self.n_det();
        &self.rates[pixel * n..(pixel + 1) * n]
    }

    /// Relative gain of each pixel under the edge droop.
    pub fn gain_profile(&self, droop: f64) -> Vec<f64> {
        gain_profile(&self.pixels, droop)
    }

    /// Counts for `config`; `seed = None` gives expected values without noise.
    pub fn sample(&self, config: &StackConfig, seed: Option<u64>) -> PhotonStack {
        let n = self.n_det();
        let per_point = config.photon_gain * config.exposure_s / n as f64;
        let profile = self.gain_profile(config.edge_droop);
        let counts: Vec<f64> = (0..self.pixels.len())
            .into_par_iter()
            .flat_map_iter(|p| {
                let scale = per_point * profile[p];
                let curve = self.curve(p);
                let mut rng = seed.map(|s| {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(p as u64);
                    r
                });
                let values: Vec<f64> = curve
                    .iter()
                    .map(|&r| {
                        let lambda = r * scale;
                        match rng.as_mut() {
                            None => lambda,
                            Some(_) if lambda <= 0.0 => 0.0,
                            Some(g) => Poisson::new(lambda).expect("positive mean").sample(g),
                        }
                    })
                    .collect();
                values
            })
            .collect();
        PhotonStack {
            pixels: self.pixels,
            detunings: self.detunings.clone(),
            counts,
            exposure_s: config.exposure_s,
            photon_gain: config.photon_gain,
            edge_droop: config.edge_droop,
            seed,
        }
    }
}

/// `1 - droop·(r/r_corner)²` about the grid centre.
pub fn gain_profile(pixels: &Grid, droop: f64) -> Vec<f64> {
    if droop == 0.0 {
        return vec![1.0; pixels.len()];
    }
    let cx = (pixels.nx as f64 - 1.0) / 2.0;
    let cy = (pixels.ny as f64 - 1.0) / 2.0;
    let r2max = (cx * cx + cy * cy).max(1.0);
    (0..pixels.len())
        .map(|p| {
            let (i, j) = ((p % pixels.nx) as f64, (p / pixels.nx) as f64);
            1.0 - droop * ((i - cx).powi(2) + (j - cy).powi(2)) / r2max
        })
        .collect()
}

/// Counts per pixel and detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStack {
    pub pixels: Grid,
    pub detunings: Vec<f64>,
    /// `counts[p * n_det + k]`; whole numbers unless `seed` is `None`.
    pub counts: Vec<f64>,
    pub exposure_s: f64,
    pub photon_gain: f64,
    pub edge_droop: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawHeader {
    format: String,
    /// (ny, nx, detunings)
    shape: [usize; 3],
    dtype: String,
    units: String,
    seed: Option<u64>,
    exposure_s: f64,
    photon_gain: f64,
    edge_droop: f64,
    grid: Grid,
    #[serde(rename = "detunings_MHz")]
    detunings: Vec<f64>,
}

const RAW_FORMAT: &str = "magstego-stack-v1";

impl PhotonStack {
    pub fn n_det(&self) -> usize {
        self.detunings.len()
    }

    /// Counts of one pixel across the sweep.
    pub fn spectrum(&self, pixel: usize) -> &[f64] {
        let n = self.n_det();
        &self.counts[pixel * n..(pixel + 1) * n]
    }

    /// One JSON header line, then little-endian f64 counts.
    pub fn write_raw(&self, path: &Path) -> Result<(), ImagingError> {
        let header = RawHeader {
            format: RAW_FORMAT.into(),
            shape: [self.pixels.ny, self.pixels.nx, self.n_det()],
            dtype: "<f8".into(),
            units: "photon counts".into(),
            seed: self.seed,
            exposure_s: self.exposure_s,
            photon_gain: self.photon_gain,
            edge_droop: self.edge_droop,
            grid: self.pixels,
            detunings: self.detunings.clone(),
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, &header).map_err(|e| ImagingError::BadStack(e.to_string()))?;
        w.write_all(b"\n")?;
        for c in &self.counts {
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_raw(path: &Path) -> Result<Self, ImagingError> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: RawHeader = serde_json::from_str(&line).map_err(|e| ImagingError::BadStack(e.to_string()))?;
        if h.format != RAW_FORMAT || h.dtype != "<f8" {
            return Err(ImagingError::BadStack(format!("unsupported format {} / {}", h.format, h.dtype)));
        }
        let [ny, nx, nd] = h.shape;
        if nx != h.grid.nx || ny != h.grid.ny || nd != h.detunings.len() {
            return Err(ImagingError::BadStack("header shape disagrees with grid".into()));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != nx * ny * nd * 8 {
            return Err(ImagingError::BadStack(format!("expected {} data bytes, found {}", nx * ny * nd * 8, bytes.len())));
        }
        let counts = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(PhotonStack {
            pixels: h.grid,
            detunings: h.detunings,
            counts,
            exposure_s: h.exposure_s,
            photon_gain: h.photon_gain,
            edge_droop: h.edge_droop,
            seed: h.seed,
        })
    }
}

/// Expected curves followed by one seeded Poisson draw per pixel and detuning.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_stack(
    bpar: &BParMap,
    pixels: &Grid,
    model: &RateModel,
    drive: &DriveConfig,
    psf: &Psf,
    config: &StackConfig,
    seed: Option<u64>,
) -> Result<PhotonStack, ImagingError> {
    let expected = expected_curves(bpar, pixels, model, drive, psf, config.table_oversample)?;
    Ok(expected.sample(config, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_linearly() {
        let t = LineshapeTable {
            x0: -1.0,
            step: 0.5,
            values: vec![0.0, 1.0, 3.0, 3.0, 3.0],
        };
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(-0.25), 2.0);
        assert_eq!(t.eval(-5.0), 0.0);
        assert_eq!(t.eval(5.0), 3.0);
    }

    #[test]
    fn droop_profile() {
        let g = gain_profile(&Grid::new(0.0, 0.0, 1.0, 5, 5), 0.3);
        assert_eq!(g[12], 1.0);
        assert!((g[0] - 0.7).abs() < 1e-15);
        assert!(gain_profile(&Grid::new(0.0, 0.0, 1.0, 3, 3), 0.0).iter().all(|&v| v == 1.0));
    }
}
