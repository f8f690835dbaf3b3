//! Frequency-shift, linewidth and contrast images from a photon stack.

use std::path::Path;

use rayon::prelude::*;

use super::synth::gain_profile;
use super::{ImagingError, PhotonStack};
use crate::io::{self, IoError};
use crate::magnetics::{write_heatmap, GAMMA_MHZ_PER_G};
use crate::nvmodel::{odmr_metrics, ODMRCurve};
use crate::Grid;

/// Per-pixel ODMR metrics. Pixels without a usable dip are invalid and hold
/// NaN in every map.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeImages {
    pub grid: Grid,
    /// Dip position relative to the bias resonance, MHz.
    pub freq_shift: Vec<f64>,
    /// Axial field offset `δ0 / γ`, Gauss.
    pub field_g: Vec<f64>,
    /// FWHM, MHz.
    pub linewidth: Vec<f64>,
    pub contrast: Vec<f64>,
    pub valid: Vec<bool>,
    /// First and last detuning of the sweep, MHz.
    pub sweep_mhz: [f64; 2],
}

pub const MIN_SWEEP_POINTS: usize = 15;

/// Normalises counts back to rates and measures every pixel's dip against
/// the model baseline `r0`.
pub fn extract_mode_images(stack: &PhotonStack, r0: f64) -> Result<ModeImages, ImagingError> {
    let n = stack.n_det();
    if n < MIN_SWEEP_POINTS {
        return Err(ImagingError::BadConfig(format!(
            "need at least {MIN_SWEEP_POINTS} sweep points, got {n}"
        )));
    }
    let per_point = stack.photon_gain * stack.exposure_s / n as f64;
    let profile = gain_profile(&stack.pixels, stack.edge_droop);
    let metrics: Vec<Option<(f64, f64, f64)>> = (0..stack.pixels.len())
        .into_par_iter()
        .map(|p| {
            let scale = per_point * profile[p];
            let curve = ODMRCurve {
                detunings: stack.detunings.clone(),
                r: stack.spectrum(p).iter().map(|c| c / scale).collect(),
                baseline: r0,
            };
            odmr_metrics(&curve).ok().map(|m| (m.delta0, m.fwhm, m.contrast))
        })
        .collect();
    let pick = |f: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
        metrics.iter().map(|m| m.as_ref().map_or(f64::NAN, f)).collect()
    };
    let freq_shift = pick(|m| m.0);
    Ok(ModeImages {
        grid: stack.pixels,
        field_g: freq_shift.iter().map(|d| d / GAMMA_MHZ_PER_G).collect(),
        freq_shift,
        linewidth: pick(|m| m.1),
        contrast: pick(|m| m.2),
        valid: metrics.iter().map(Option::is_some).collect(),
        sweep_mhz: [stack.detunings[0], stack.detunings[n - 1]],
    })
}

impl ModeImages {
    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|v| **v).count() as f64 / self.valid.len().max(1) as f64
    }

    pub fn map(&self, name: &str) -> Option<&[f64]> {
        Some(match name {
            "freq_shift" => &self.freq_shift,
            "field" => &self.field_g,
            "linewidth" => &self.linewidth,
            "contrast" => &self.contrast,
            _ => return None,
        })
    }

    /// Writes `<stem>_{freq_shift,linewidth,contrast}.{pgm,json,csv}` and a
    /// `<stem>_mask.pgm` (255 = valid). Returns the files written.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>, IoError> {
        let mut written = Vec::new();
        for (name, quantity) in [
            ("freq_shift", "freq_shift_MHz"),
            ("linewidth", "linewidth_MHz"),
            ("contrast", "contrast"),
        ] {
            let values = self.map(name).unwrap();
            let pgm = dir.join(format!("{stem}_{name}.pgm"));
            write_heatmap(&pgm, &self.grid, values, quantity)?;
            let csv = dir.join(format!("{stem}_{name}.csv"));
            io::write_csv_grid(&csv, self.grid.nx, values)?;
            written.extend([pgm.clone(), pgm.with_extension("json"), csv]);
        }
        let mask = dir.join(format!("{stem}_mask.pgm"));
        let px: Vec<u8> = self.valid.iter().map(|&v| if v { 255 } else { 0 }).collect();
        io::write_pgm(&mask, self.grid.nx, self.grid.ny, &px)?;
        written.push(mask);
        Ok(written)
    }
}
