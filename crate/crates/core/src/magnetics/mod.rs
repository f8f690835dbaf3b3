//! Stray fields of magnetic patterns and their projection on the NV axis.

pub mod cuboid;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cuboid::cuboid_b_field;
use cuboid::field_at_displacement;

use crate::grid::Grid;
use crate::io::{self, IoError};
use crate::layout::{Cuboid, MagneticPattern};
use crate::vec3::{self, Vec3};

/// Zero-field splitting, MHz.
pub const D_MHZ: f64 = 2870.0;
/// NV gyromagnetic ratio, MHz/G.
pub const GAMMA_MHZ_PER_G: f64 = 2.8;

#[derive(Debug, Error, PartialEq)]
pub enum MagneticsError {
    #[error("field point {0:?} lies inside a magnetized source")]
    PointInsideSource(Vec3),
    #[error("standoff must be positive, got {0}")]
    BadStandoff(f64),
    #[error("NV axis must be non-zero")]
    ZeroAxis,
}

/// Vector stray field on a plane `z = z_um`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: Grid,
    pub z_um: f64,
    /// Gauss, row-major over the grid.
    pub b: Vec<Vec3>,
}

impl FieldMap {
    pub fn zeros(grid: Grid, z_um: f64) -> Self {
        FieldMap {
            grid,
            z_um,
            b: vec![[0.0; 3]; grid.len()],
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        let rows: Vec<Vec<f64>> = (0..self.grid.ny)
            .flat_map(|j| (0..self.grid.nx).map(move |i| (i, j)))
            .map(|(i, j)| {
                let b = self.b[self.grid.index(i, j)];
                vec![self.grid.x(i), self.grid.y(j), b[0], b[1], b[2]]
            })
            .collect();
        io::write_csv_table(path, &["x_um", "y_um", "Bx_G", "By_G", "Bz_G"], &rows)
    }
}

/// Quantization axis and bias field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NVFrame {
    /// Unit vector along the NV axis, lab frame.
    pub axis: Vec3,
    /// Bias field, Gauss.
    pub bias_g: Vec3,
}

impl Default for NVFrame {
    fn default() -> Self {
        NVFrame::along_axis([1.0, 1.0, 1.0], 400.0)
    }
}

impl NVFrame {
    /// Bias of `magnitude_g` along the (normalised) axis.
    pub fn along_axis(axis: Vec3, magnitude_g: f64) -> Self {
        let n = vec3::normalize(axis);
        NVFrame {
            axis: n,
            bias_g: vec3::scale(n, magnitude_g),
        }
    }

    /// Rotation of the crystal frame into the lab, applied to a crystal-frame axis.
    pub fn rotated(rotation: [[f64; 3]; 3], crystal_axis: Vec3, bias_magnitude_g: f64) -> Self {
        let a = crystal_axis;
        let lab = [
            vec3::dot(rotation[0], a),
            vec3::dot(rotation[1], a),
            vec3::dot(rotation[2], a),
        ];
        NVFrame::along_axis(lab, bias_magnitude_g)
    }

    pub fn validate(&self) -> Result<(), MagneticsError> {
        let n = vec3::norm(self.axis);
        if n == 0.0 || !n.is_finite() {
            return Err(MagneticsError::ZeroAxis);
        }
        Ok(())
    }

    /// Unit axis (re-normalised so that configs may give any length).
    pub fn unit_axis(&self) -> Vec3 {
        vec3::normalize(self.axis)
    }

    pub fn bias_par(&self) -> f64 {
        vec3::dot(self.bias_g, self.unit_axis())
    }

    /// f₋ and f₊ in MHz for a given axial field.
    pub fn resonances(b_par_g: f64) -> (f64, f64) {
        (D_MHZ - GAMMA_MHZ_PER_G * b_par_g, D_MHZ + GAMMA_MHZ_PER_G * b_par_g)
    }
}

/// Axial field `(B_stray + B_bias)·n̂` per grid point, Gauss.
#[derive(Debug, Clone, PartialEq)]
pub struct BParMap {
    pub grid: Grid,
    pub b_par: Vec<f64>,
    /// Bias contribution `B_bias·n̂`.
    pub bias_par: f64,
}

impl BParMap {
    /// Local deviation from the bias, Gauss.
    pub fn delta(&self) -> Vec<f64> {
        self.b_par.iter().map(|b| b - self.bias_par).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        let rows: Vec<Vec<f64>> = (0..self.grid.ny)
            .flat_map(|j| (0..self.grid.nx).map(move |i| (i, j)))
            .map(|(i, j)| {
                vec![
                    self.grid.x(i),
                    self.grid.y(j),
                    self.b_par[self.grid.index(i, j)],
                ]
            })
            .collect();
        io::write_csv_table(path, &["x_um", "y_um", "bpar_G"], &rows)
    }

    /// Heatmap of `b_par - bias` plus a JSON sidecar with the value scale.
    pub fn write_heatmap(&self, pgm: &Path) -> Result<(), IoError> {
        write_heatmap(pgm, &self.grid, &self.delta(), "bpar_minus_bias_G")
    }
}

/// Scale of a heatmap: pixel 0 maps to `min`, 255 to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapScale {
    pub quantity: String,
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
    pub x0_um: f64,
    pub y0_um: f64,
    pub step_um: f64,
}

/// Writes `values` as an 8-bit PGM and `<name>.json` alongside it.
pub fn write_heatmap(pgm: &Path, grid: &Grid, values: &[f64], quantity: &str) -> Result<(), IoError> {
    let (lo, hi) = io::finite_range(values);
    io::write_pgm(pgm, grid.nx, grid.ny, &io::to_u8(values, lo, hi))?;
    let scale = HeatmapScale {
        quantity: quantity.to_string(),
        min: lo,
        max: hi,
        width: grid.nx,
        height: grid.ny,
        x0_um: grid.x0,
        y0_um: grid.y0,
        step_um: grid.step,
    };
    let text = serde_json::to_string_pretty(&scale).expect("scale serializes");
    std::fs::write(pgm.with_extension("json"), text)?;
    Ok(())
}

/// Projects the stray field plus bias onto the NV axis.
pub fn nv_projection(fm: &FieldMap, frame: &NVFrame) -> BParMap {
    let n = frame.unit_axis();
    let bias_par = frame.bias_par();
    BParMap {
        grid: fm.grid,
        b_par: fm.b.iter().map(|b| vec3::dot(*b, n) + bias_par).collect(),
        bias_par,
    }
}

/// Stray field of all magnetized cuboids on the plane `z = -standoff`.
///
/// Cuboids sharing shape, magnetization and sub-grid position are evaluated
/// once on an enlarged grid and superposed by integer shifts; everything else
/// is summed directly. Each output point accumulates contributions in a fixed
/// order, so the result does not depend on the number of threads.
pub fn field_map(pattern: &MagneticPattern, grid: &Grid, standoff_um: f64) -> Result<FieldMap, MagneticsError> {
    if !(standoff_um > 0.0 && standoff_um.is_finite()) {
        return Err(MagneticsError::BadStandoff(standoff_um));
    }
    let z = -standoff_um;
    let sources: Vec<&Cuboid> = pattern.magnetic().collect();
    for c in &sources {
        if (z - c.center[2]).abs() <= c.half_extents[2] {
            return Err(MagneticsError::PointInsideSource([c.center[0], c.center[1], z]));
        }
    }

    let mut out = FieldMap::zeros(*grid, z);
    for group in group_sources(&sources, grid) {
        let kernel_cost = group.kernel_len(grid);
        let direct_cost = group.members.len() * grid.len();
        if group.members.len() > 1 && kernel_cost < direct_cost {
            add_via_kernel(&mut out, &group, z);
        } else {
            add_direct(&mut out, &group.members, z);
        }
    }
    Ok(out)
}

/// Cuboids interchangeable up to an integer grid shift.
struct SourceGroup {
    half_extents: Vec3,
    magnetization: Vec3,
    center_z: f64,
    /// Sub-pixel offset of the centres, in pixels, in [0, 1).
    frac: [f64; 2],
    /// (cuboid, integer pixel offset of its centre).
    members: Vec<(Cuboid, [i64; 2])>,
}

impl SourceGroup {
    fn span(&self) -> ([i64; 2], [i64; 2]) {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for (_, o) in &self.members {
            for k in 0..2 {
                lo[k] = lo[k].min(o[k]);
                hi[k] = hi[k].max(o[k]);
            }
        }
        (lo, hi)
    }

    fn kernel_dims(&self, grid: &Grid) -> (usize, usize) {
        let (lo, hi) = self.span();
        (
            grid.nx + (hi[0] - lo[0]) as usize,
            grid.ny + (hi[1] - lo[1]) as usize,
        )
    }

    fn kernel_len(&self, grid: &Grid) -> usize {
        let (kx, ky) = self.kernel_dims(grid);
        kx * ky
    }
}

const FRAC_QUANTUM: f64 = 1e-6;

fn group_sources(sources: &[&Cuboid], grid: &Grid) -> Vec<SourceGroup> {
    // BTreeMap keeps group order deterministic
    let mut groups: BTreeMap<(Vec<u64>, [i64; 2]), SourceGroup> = BTreeMap::new();
    for c in sources {
        let px = (c.center[0] - grid.x0) / grid.step;
        let py = (c.center[1] - grid.y0) / grid.step;
        let fx = ((px - px.floor()) / FRAC_QUANTUM).round() as i64;
        let fy = ((py - py.floor()) / FRAC_QUANTUM).round() as i64;
        // a fraction that rounds to 1.0 belongs to the next integer
        let (fx, ox) = normalize_frac(fx, px.floor() as i64);
        let (fy, oy) = normalize_frac(fy, py.floor() as i64);
        let shape_key: Vec<u64> = c
            .half_extents
            .iter()
            .chain(c.magnetization.iter())
            .chain(std::iter::once(&c.center[2]))
            .map(|v| v.to_bits())
            .collect();
        groups
            .entry((shape_key, [fx, fy]))
            .or_insert_with(|| SourceGroup {
                half_extents: c.half_extents,
                magnetization: c.magnetization,
                center_z: c.center[2],
                frac: [fx as f64 * FRAC_QUANTUM, fy as f64 * FRAC_QUANTUM],
                members: Vec::new(),
            })
            .members
            .push((**c, [ox, oy]));
    }
    groups.into_values().collect()
}

fn normalize_frac(f: i64, base: i64) -> (i64, i64) {
    let one = (1.0 / FRAC_QUANTUM).round() as i64;
    if f >= one {
        (f - one, base + 1)
    } else {
        (f, base)
    }
}

fn add_direct(out: &mut FieldMap, members: &[(Cuboid, [i64; 2])], z: f64) {
    let grid = out.grid;
    out.b
        .par_chunks_mut(grid.nx)
        .enumerate()
        .for_each(|(j, row)| {
            let y = grid.y(j);
            for (i, b) in row.iter_mut().enumerate() {
                let x = grid.x(i);
                for (c, _) in members {
                    let d = [x - c.center[0], y - c.center[1], z - c.center[2]];
                    *b = vec3::add(*b, field_at_displacement(c.half_extents, c.magnetization, d));
                }
            }
        });
}

fn add_via_kernel(out: &mut FieldMap, group: &SourceGroup, z: f64) {
    let grid = out.grid;
    let (_, hi) = group.span();
    let (kx, ky) = group.kernel_dims(&grid);
    // Kernel index (a, b) holds the field at displacement
    // ((a - hi_x - frac_x) * step, (b - hi_y - frac_y) * step) from a source centre.
    let kernel: Vec<Vec3> = (0..ky)
        .into_par_iter()
        .flat_map_iter(|b| {
            let dy = (b as f64 - hi[1] as f64 - group.frac[1]) * grid.step;
            (0..kx).map(move |a| {
                let dx = (a as f64 - hi[0] as f64 - group.frac[0]) * grid.step;
                field_at_displacement(
                    group.half_extents,
                    group.magnetization,
                    [dx, dy, z - group.center_z],
                )
            })
        })
        .collect();
    out.b
        .par_chunks_mut(grid.nx)
        .enumerate()
        .for_each(|(j, row)| {
            for (_, o) in &group.members {
                // kernel column for pixel i is i - o + hi
                let kb = (j as i64 + hi[1] - o[1]) as usize;
                let start = (hi[0] - o[0]) as usize;
                let krow = &kernel[kb * kx + start..kb * kx + start + grid.nx];
                for (b, k) in row.iter_mut().zip(krow) {
                    *b = vec3::add(*b, *k);
                }
            }
        });
}
