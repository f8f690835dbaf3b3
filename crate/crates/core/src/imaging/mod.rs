//! Wide-field ODMR imaging: photon-count stacks from an axial field map,
//! per-pixel mode images, symbol recovery and image-quality metrics.

pub mod modes;
pub mod pearson;
pub mod psf;
pub mod recover;
pub mod synth;

use thiserror::Error;

pub use modes::{extract_mode_images, ModeImages};
pub use pearson::{correlation_curve, crossing_time, median_series, pearson, CorrelationPoint};
pub use psf::{Psf, PsfKind};
pub use recover::{otsu, recover_barcode, recover_qr, RecoverConfig, RecoveredBarcode, RecoveredQr};
pub use synth::{
    expected_curves, imaging_sweep, synthesize_stack, ExpectedStack, LineshapeTable, PhotonStack,
    StackConfig,
};

use crate::codec::CodecError;
use crate::layout::MagneticPattern;
use crate::magnetics::{field_map, nv_projection, BParMap, MagneticsError, NVFrame};
use crate::nvmodel::NvError;
use crate::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error("field map is not sampled on the grid the PSF requires")]
    GridMismatch,
    #[error("images differ in shape")]
    ShapeMismatch,
    #[error("image has zero variance")]
    ConstantImage,
    #[error("could not align the symbol grid: {0}")]
    AlignmentFailed(String),
    #[error("module scores are not bimodal (separability {0:.3})")]
    AmbiguousThreshold(f64),
    #[error("invalid imaging config: {0}")]
    BadConfig(String),
    #[error("bad stack file: {0}")]
    BadStack(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] NvError),
    #[error(transparent)]
    Field(#[from] MagneticsError),
}

impl From<std::io::Error> for ImagingError {
    fn from(e: std::io::Error) -> Self {
        ImagingError::Io(e.to_string())
    }
}

/// Axial field of `pattern` on the grid `psf` needs for `pixels`.
pub fn scene_bpar(
    pattern: &MagneticPattern,
    pixels: &Grid,
    psf: &Psf,
    standoff_um: f64,
    frame: &NVFrame,
) -> Result<BParMap, ImagingError> {
    let fm = field_map(pattern, &psf.field_grid(pixels), standoff_um)?;
    Ok(nv_projection(&fm, frame))
}
