//! Run configuration: one JSON document, every field optional.

use magstego::imaging::{imaging_sweep, Psf, RecoverConfig, StackConfig};
use magstego::layout::Geometry;
use magstego::magnetics::NVFrame;
use magstego::nvmodel::odmr::default_omega_grid;
use magstego::nvmodel::{DriveConfig, DriveMode, RateModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; per-trial seeds are `seed + k`.
    pub seed: u64,
    /// Worker threads, 0 = one per core. Never changes results.
    pub workers: usize,
    pub model: RateModel,
    /// Imaging drive.
    pub drive: DriveConfig,
    pub psf: Psf,
    pub stack: StackConfig,
    pub recover: RecoverConfig,
    pub frame: NVFrame,
    pub scene: SceneConfig,
    pub geometry: Geometries,
    pub sweep: SweepConfig,
    pub correlate: CorrelateConfig,
    pub threshold: ThresholdConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            workers: 0,
            model: RateModel::default(),
            drive: DriveConfig::new(DriveMode::Dual, 1.0).with_sweep(imaging_sweep()),
            psf: Psf::default(),
            stack: StackConfig::default(),
            recover: RecoverConfig::default(),
            frame: NVFrame::default(),
            scene: SceneConfig::default(),
            geometry: Geometries::default(),
            sweep: SweepConfig::default(),
            correlate: CorrelateConfig::default(),
            threshold: ThresholdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub pixel_um: f64,
    /// Border added around the pattern on every side.
    pub margin_um: f64,
    /// NV plane height above the pattern; the geometry's value when absent.
    pub standoff_um: Option<f64>,
    /// Expected counts instead of a Poisson draw.
    pub noise_free: bool,
    /// Also write the photon stack as a raw file.
    pub save_stack: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            pixel_um: 0.5,
            margin_um: 5.0,
            standoff_um: None,
            noise_free: false,
            save_stack: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometries {
    pub pixel_art: Geometry,
    pub barcode: Geometry,
    pub qr: Geometry,
}

impl Default for Geometries {
    fn default() -> Self {
        Geometries {
            pixel_art: Geometry::pixel_art(),
            barcode: Geometry::barcode(),
            qr: Geometry::qr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub omegas: Vec<f64>,
    /// Amplitudes at which full spectra are written.
    pub spectra_omegas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            omegas: default_omega_grid(),
            spectra_omegas: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateConfig {
    pub times_s: Vec<f64>,
    pub seeds: usize,
    pub level: f64,
    /// Drive mode compared against dual driving.
    pub single_mode: DriveMode,
    /// Exposures at which contrast images are written.
    pub snapshot_times_s: Vec<f64>,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig {
            times_s: (0..=14).map(|k| 10f64.powf(0.25 * k as f64)).collect(),
            seeds: 5,
            level: 0.65,
            single_mode: DriveMode::SingleMinus,
            snapshot_times_s: vec![100.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub exposures_s: Vec<f64>,
    pub seeds: usize,
    /// Exposure used for the high-SNR decode.
    pub high_exposure_s: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            exposures_s: vec![100.0, 300.0, 1000.0, 3000.0, 10000.0, 30000.0],
            seeds: 3,
            high_exposure_s: 1.0e5,
        }
    }
}

impl RunConfig {
    /// Overlays `text` on the defaults key by key, so a partial section keeps
    /// the defaults of the fields it omits.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let overlay: Value = serde_json::from_str(text)?;
        let mut base = serde_json::to_value(RunConfig::default())?;
        merge(&mut base, overlay);
        serde_json::from_value(base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON of everything that affects outputs.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn seeds(&self, n: usize) -> Vec<u64> {
        (0..n as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    pub fn standoff(&self, geom: &Geometry) -> f64 {
        self.scene.standoff_um.unwrap_or(geom.standoff_um)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}
