//! Point spread function and the per-pixel sampling weights it implies.

use serde::{Deserialize, Serialize};

use crate::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsfKind {
    Gaussian,
    /// One NV at the pixel centre, no averaging.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Psf {
    pub kind: PsfKind,
    pub fwhm_um: f64,
    /// Sub-positions per pixel side.
    pub subsamples: usize,
    /// Kernel radius in units of sigma.
    pub truncation_sigma: f64,
}

impl Default for Psf {
    fn default() -> Self {
        Psf {
            kind: PsfKind::Gaussian,
            fwhm_um: 1.0,
            subsamples: 4,
            truncation_sigma: 3.0,
        }
    }
}

/// Square window of weights on the field grid; entry `(a, b)` applies to
/// field point `(i0 + a, j0 + b)` where `(i0, j0)` is the window origin of a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelKernel {
    pub side: usize,
    /// Row-major, sums to 1.
    pub weights: Vec<f64>,
    /// Field-grid points per pixel side.
    pub stride: usize,
}

impl PixelKernel {
    /// Field-grid window origin for pixel `(i, j)`.
    pub fn origin(&self, i: usize, j: usize) -> (usize, usize) {
        (i * self.stride, j * self.stride)
    }
}

impl Psf {
    pub fn delta() -> Self {
        Psf {
            kind: PsfKind::Delta,
            ..Psf::default()
        }
    }

    pub fn sigma_um(&self) -> f64 {
        self.fwhm_um / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    fn radius_points(&self, fine_step: f64) -> usize {
        (self.truncation_sigma * self.sigma_um() / fine_step).ceil() as usize
    }

    /// Grid on which the axial field must be sampled for `pixels`.
    pub fn field_grid(&self, pixels: &Grid) -> Grid {
        match self.kind {
            PsfKind::Delta => *pixels,
            PsfKind::Gaussian => {
                let fine = pixels.subdivide(self.subsamples.max(1));
                fine.padded(self.radius_points(fine.step))
            }
        }
    }

    /// Pixel-box average convolved with the truncated Gaussian, sampled on the
    /// field grid.
    pub fn pixel_kernel(&self, pixels: &Grid) -> PixelKernel {
        match self.kind {
            PsfKind::Delta => PixelKernel {
                side: 1,
                weights: vec![1.0],
                stride: 1,
            },
            PsfKind::Gaussian => {
                let s = self.subsamples.max(1);
                let h = pixels.step / s as f64;
                let r = self.radius_points(h) as i64;
                let sigma = self.sigma_um();
                let cut = (self.truncation_sigma * sigma).powi(2);
                let g_side = (2 * r + 1) as usize;
                let mut gauss = vec![0.0; g_side * g_side];
                for b in -r..=r {
                    for a in -r..=r {
                        let d2 = ((a * a + b * b) as f64) * h * h;
                        if d2 <= cut {
                            gauss[((b + r) as usize) * g_side + (a + r) as usize] = (-d2 / (2.0 * sigma * sigma)).exp();
                        }
                    }
                }
                let side = s + g_side - 1;
                let mut weights = vec![0.0; side * side];
                for by in 0..s {
                    for bx in 0..s {
                        for gy in 0..g_side {
                            for gx in 0..g_side {
                                weights[(by + gy) * side + bx + gx] += gauss[gy * g_side + gx];
                            }
                        }
                    }
                }
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                PixelKernel {
                    side,
                    weights,
                    stride: s,
                }
            }
        }
    }
}
