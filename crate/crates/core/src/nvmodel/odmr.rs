//! ODMR lineshapes under single and dual CW driving, and the contrast,
//! linewidth and sensitivity metrics derived from them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pl_rate, NvError, RateModel};
use crate::io::{self, IoError};
use crate::magnetics::{NVFrame, GAMMA_MHZ_PER_G};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    SingleMinus,
    SinglePlus,
    Dual,
}

impl DriveMode {
    pub fn name(self) -> &'static str {
        match self {
            DriveMode::SingleMinus => "single_minus",
            DriveMode::SinglePlus => "single_plus",
            DriveMode::Dual => "dual",
        }
    }
}

/// Linear detuning grid, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Sweep {
    pub fn symmetric(half_span: f64, points: usize) -> Self {
        Sweep {
            start: -half_span,
            stop: half_span,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points < 2 {
            return vec![self.start; self.points];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + k as f64 * step).collect()
    }
}

/// Microwave drive. Amplitudes are in units of the model's Rabi unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub mode: DriveMode,
    /// Amplitude on g0 <-> g− (used by `single_minus` and `dual`).
    pub omega1: f64,
    /// Amplitude on g0 <-> g+ (used by `single_plus` and `dual`).
    pub omega2: f64,
    #[serde(rename = "sweep_MHz")]
    pub sweep: Sweep,
    /// Axial bias field that sets the reference resonances, Gauss.
    #[serde(rename = "bias_par_G")]
    pub bias_par_g: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            mode: DriveMode::Dual,
            omega1: 1.0,
            omega2: 1.0,
            sweep: Sweep::symmetric(36.0, 145),
            bias_par_g: NVFrame::default().bias_par(),
        }
    }
}

impl DriveConfig {
    pub fn new(mode: DriveMode, omega: f64) -> Self {
        DriveConfig {
            mode,
            omega1: omega,
            omega2: omega,
            ..DriveConfig::default()
        }
    }

    pub fn with_sweep(mut self, sweep: Sweep) -> Self {
        self.sweep = sweep;
        self
    }

    /// Amplitudes actually applied; single modes zero the unused tone.
    pub fn amplitudes(&self) -> (f64, f64) {
        match self.mode {
            DriveMode::SingleMinus => (self.omega1, 0.0),
            DriveMode::SinglePlus => (0.0, self.omega2),
            DriveMode::Dual => (self.omega1, self.omega2),
        }
    }

    /// Absolute tone frequencies (MHz) at sweep detuning `delta`. Tones are
    /// mirrored (f₋ − δ, f₊ + δ) so a local axial offset Δb moves every
    /// dip to δ = γΔb.
    pub fn tones(&self, delta: f64) -> (f64, f64) {
        let (f_minus, f_plus) = NVFrame::resonances(self.bias_par_g);
        (f_minus - delta, f_plus + delta)
    }
}

/// PL rate per detuning with the no-microwave baseline R₀.
#[derive(Debug, Clone, PartialEq)]
pub struct ODMRCurve {
    pub detunings: Vec<f64>,
    pub r: Vec<f64>,
    pub baseline: f64,
}

impl ODMRCurve {
    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        let rows: Vec<Vec<f64>> = self.detunings.iter().zip(&self.r).map(|(d, r)| vec![*d, *r]).collect();
        io::write_csv_table(path, &["detuning_MHz", "R"], &rows)
    }

    /// Same curve times `k`, baseline included.
    pub fn scaled(&self, k: f64) -> ODMRCurve {
        ODMRCurve {
            detunings: self.detunings.clone(),
            r: self.r.iter().map(|v| v * k).collect(),
            baseline: self.baseline * k,
        }
    }
}

/// Lineshape at the bias field.
pub fn odmr_lineshape(model: &RateModel, drive: &DriveConfig) -> Result<ODMRCurve, NvError> {
    odmr_lineshape_offset(model, drive, 0.0)
}

/// Lineshape with the local axial field offset by `delta_b_g` from the bias.
pub fn odmr_lineshape_offset(model: &RateModel, drive: &DriveConfig, delta_b_g: f64) -> Result<ODMRCurve, NvError> {
    let detunings = drive.sweep.values();
    let needed = 10.0 * model.gammac;
    let lo = detunings.first().copied().unwrap_or(0.0);
    let hi = detunings.last().copied().unwrap_or(0.0);
    if lo > -needed || hi < needed {
        return Err(NvError::GridTooNarrow {
            needed,
            got: (-lo).min(hi),
        });
    }
    let (o1, o2) = drive.amplitudes();
    let b_local = drive.bias_par_g + delta_b_g;
    let r = detunings
        .iter()
        .map(|&d| {
            let (f1, f2) = drive.tones(d);
            pl_rate(model, o1, o2, f1, f2, b_local)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ODMRCurve {
        detunings,
        r,
        baseline: model.baseline()?,
    })
}

/// PL rate for local detuning `x = δ − γΔb`; the canonical curve every pixel
/// samples with a shift.
pub fn canonical_rate(model: &RateModel, drive: &DriveConfig, x: f64) -> Result<f64, NvError> {
    let (o1, o2) = drive.amplitudes();
    model.pl_rate_detuned(o1, o2, -x, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdmrMetrics {
    /// Fractional dip depth against the no-MW baseline.
    pub contrast: f64,
    /// Full width at half depth, MHz.
    pub fwhm: f64,
    /// Dip position, MHz.
    pub delta0: f64,
}

fn is_monotone(r: &[f64]) -> bool {
    r.windows(2).all(|w| w[1] >= w[0]) || r.windows(2).all(|w| w[1] <= w[0])
}

/// Contrast, FWHM and dip position of `curve`.
pub fn odmr_metrics(curve: &ODMRCurve) -> Result<OdmrMetrics, NvError> {
    let (x, r) = (&curve.detunings, &curve.r);
    let n = r.len();
    if n < 3 || x.len() != n {
        return Err(NvError::NoDip);
    }
    let (imin, &rmin) = r
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(NvError::NoDip)?;
    if !(rmin < curve.baseline) || is_monotone(r) && (imin == 0 || imin == n - 1) {
        return Err(NvError::NoDip);
    }
    if imin == 0 || imin == n - 1 {
        return Err(NvError::EdgeDip);
    }

    // parabola through the three points around the minimum
    let (ya, yb, yc) = (r[imin - 1], r[imin], r[imin + 1]);
    let step = (x[imin + 1] - x[imin - 1]) / 2.0;
    let curv = ya - 2.0 * yb + yc;
    let (offset, r_vertex) = if curv > 0.0 {
        let u = (0.5 * (ya - yc) / curv).clamp(-0.5, 0.5);
        (u, yb + 0.25 * (yc - ya) * u + 0.5 * curv * u * u - 0.25 * curv * u * u)
    } else {
        (0.0, yb)
    };
    let delta0 = x[imin] + offset * step;
    let r_dip = r_vertex.min(yb);

    let level = 0.5 * (curve.baseline + r_dip);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        for k in range {
            let (k0, k1) = (k, if k < imin { k + 1 } else { k - 1 });
            if r[k0] >= level {
                // interpolate between k1 (below) and k0 (at or above)
                let t = (level - r[k1]) / (r[k0] - r[k1]);
                return Some(x[k1] + t * (x[k0] - x[k1]));
            }
        }
        None
    };
    let left = crossing(&mut (0..imin).rev()).ok_or(NvError::EdgeDip)?;
    let right = crossing(&mut (imin + 1..n)).ok_or(NvError::EdgeDip)?;

    Ok(OdmrMetrics {
        contrast: (curve.baseline - r_dip) / curve.baseline,
        fwhm: right - left,
        delta0,
    })
}

/// Shot-noise limited sensitivity figure Δω / (C √R₀).
pub fn sensitivity(contrast: f64, fwhm: f64, r0: f64) -> Result<f64, NvError> {
    if !(contrast > 0.0) || !(r0 > 0.0) {
        return Err(NvError::DivisionDomain(contrast, r0));
    }
    Ok(fwhm / (contrast * r0.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub mode: DriveMode,
    pub omega: f64,
    pub contrast: f64,
    pub fwhm: f64,
    pub sensitivity: f64,
}

/// `points` log-spaced amplitudes from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default amplitude grid: 41 log-spaced points over [0.1, 10].
pub fn default_omega_grid() -> Vec<f64> {
    log_grid(0.1, 10.0, 41)
}

/// Detuning grid wide enough for power-broadened lines at amplitude `omega`.
pub fn sweep_for(model: &RateModel, omega: f64) -> Sweep {
    Sweep::symmetric(12.0 * model.gammac * omega.max(1.0), 4001)
}

/// Contrast, FWHM and sensitivity versus drive amplitude for each mode.
/// Rows are ordered by mode, then amplitude.
pub fn sensitivity_sweep(
    model: &RateModel,
    omegas: &[f64],
    modes: &[DriveMode],
    bias_par_g: f64,
) -> Result<Vec<SweepRow>, NvError> {
    let r0 = model.baseline()?;
    let jobs: Vec<(DriveMode, f64)> = modes
        .iter()
        .flat_map(|&m| omegas.iter().map(move |&o| (m, o)))
        .collect();
    jobs.par_iter()
        .map(|&(mode, omega)| {
            let drive = DriveConfig {
                mode,
                omega1: omega,
                omega2: omega,
                sweep: sweep_for(model, omega),
                bias_par_g,
            };
            let m = odmr_metrics(&odmr_lineshape(model, &drive)?)?;
            Ok(SweepRow {
                mode,
                omega,
                contrast: m.contrast,
                fwhm: m.fwhm,
                sensitivity: sensitivity(m.contrast, m.fwhm, r0)?,
            })
        })
        .collect()
}

/// One CSV per mode: `OmegaR,C,FWHM_MHz,S`.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], mode: DriveMode) -> Result<(), IoError> {
    let table: Vec<Vec<f64>> = rows
        .iter()
        .filter(|r| r.mode == mode)
        .map(|r| vec![r.omega, r.contrast, r.fwhm, r.sensitivity])
        .collect();
    io::write_csv_table(path, &["OmegaR", "C", "FWHM_MHz", "S"], &table)
}

/// Local detuning `γΔb` for an axial field offset.
pub fn shift_mhz(delta_b_g: f64) -> f64 {
    GAMMA_MHZ_PER_G * delta_b_g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentzian(depth: f64, hwhm: f64, center: f64, step: f64, half: f64) -> ODMRCurve {
        let n = (2.0 * half / step).round() as usize + 1;
        let detunings: Vec<f64> = (0..n).map(|k| -half + k as f64 * step).collect();
        let r = detunings
            .iter()
            .map(|d| 1.0 - depth * hwhm * hwhm / (hwhm * hwhm + (d - center).powi(2)))
            .collect();
        ODMRCurve {
            detunings,
            r,
            baseline: 1.0,
        }
    }

    #[test]
    fn analytic_lorentzian_metrics() {
        let m = odmr_metrics(&lorentzian(0.2, 3.0, 0.0, 0.01, 60.0)).unwrap();
        assert!((m.contrast - 0.2).abs() < 1e-6);
        assert!((m.fwhm - 6.0).abs() < 1e-3, "{}", m.fwhm);
        assert!(m.delta0.abs() < 1e-9);
    }

    #[test]
    fn parabolic_refinement_between_samples() {
        let m = odmr_metrics(&lorentzian(0.2, 3.0, 0.23, 0.5, 60.0)).unwrap();
        assert!((m.delta0 - 0.23).abs() < 0.02, "{}", m.delta0);
    }

    #[test]
    fn flat_and_edge_curves() {
        let mut c = lorentzian(0.0, 3.0, 0.0, 0.5, 30.0);
        assert_eq!(odmr_metrics(&c), Err(NvError::NoDip));
        for (k, v) in c.r.iter_mut().enumerate() {
            *v = 1.0 - 1e-3 * k as f64;
        }
        assert_eq!(odmr_metrics(&c), Err(NvError::NoDip));
        let edge = lorentzian(0.2, 3.0, 29.5, 0.5, 30.0);
        let mut e = edge.clone();
        e.r[0] = 0.95;
        assert_eq!(odmr_metrics(&e), Err(NvError::EdgeDip));
    }

    #[test]
    fn sensitivity_scaling() {
        let s = sensitivity(0.1, 5.0, 4.0).unwrap();
        assert!((sensitivity(0.2, 5.0, 4.0).unwrap() - s / 2.0).abs() < 1e-15);
        assert!((sensitivity(0.1, 10.0, 4.0).unwrap() - 2.0 * s).abs() < 1e-15);
        assert!(matches!(sensitivity(0.0, 5.0, 1.0), Err(NvError::DivisionDomain(..))));
    }

    #[test]
    fn narrow_grid_rejected() {
        let drive = DriveConfig::default().with_sweep(Sweep::symmetric(20.0, 81));
        assert!(matches!(
            odmr_lineshape(&RateModel::default(), &drive),
            Err(NvError::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn lineshape_matches_canonical_rate() {
        let model = RateModel::default();
        for mode in [DriveMode::SingleMinus, DriveMode::SinglePlus, DriveMode::Dual] {
            let drive = DriveConfig::new(mode, 1.5);
            let c = odmr_lineshape_offset(&model, &drive, 0.7).unwrap();
            for (d, r) in c.detunings.iter().zip(&c.r).step_by(7) {
                let expect = canonical_rate(&model, &drive, d - shift_mhz(0.7)).unwrap();
                assert!((r - expect).abs() < 1e-12 * expect);
            }
        }
    }

    #[test]
    fn drive_config_json_keys() {
        let text = serde_json::to_string(&DriveConfig::default()).unwrap();
        assert!(text.contains("\"mode\":\"dual\""));
        assert!(text.contains("sweep_MHz") && text.contains("bias_par_G"));
        let d: DriveConfig = serde_json::from_str(r#"{"mode":"single_plus","omega2":2.0}"#).unwrap();
        assert_eq!(d.amplitudes(), (0.0, 2.0));
    }
}
