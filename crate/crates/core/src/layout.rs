//! Physical Ni/Au micro-patterns built from digital carriers, and their
//! (material-blind) optical appearance.
//!
//! Coordinates are µm. The sample occupies `z ∈ [0, thickness]` and the NV
//! sensing plane sits at `z = -standoff`. Module/dot `(row, col)` is placed at
//! `x = col * pitch`, `y = row * pitch` (lower-left corner), so images indexed
//! `[row][col]` show the symbol upright.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{ElementSequence, ModuleMatrix, QR_SIZE};
use crate::grid::Grid;
use crate::io::{self, IoError};
use crate::vec3::{self, Vec3};

/// Saturation magnetization of nickel, A/m.
pub const NI_MS: f64 = 4.8e5;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("hidden dot at row {row}, col {col} has no cover dot")]
    HiddenNotSubset { row: usize, col: usize },
    #[error("bitmaps differ in shape")]
    ShapeMismatch,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("cuboids {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("bad pattern file: {0}")]
    BadFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Material {
    Ni,
    Au,
}

/// Sample geometry and magnetization state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    /// (x, y) size of a dot or QR module.
    pub dot_size_um: [f64; 2],
    pub pitch_um: f64,
    pub bar_length_um: f64,
    pub narrow_width_um: f64,
    pub wide_width_um: f64,
    pub thickness_um: f64,
    pub standoff_um: f64,
    pub ms_a_per_m: f64,
    /// Direction of the (saturated) Ni magnetization; normalised on use.
    pub magnetization_axis: Vec3,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::pixel_art()
    }
}

impl Geometry {
    fn base() -> Self {
        Geometry {
            dot_size_um: [1.0, 1.0],
            pitch_um: 2.0,
            bar_length_um: 20.0,
            narrow_width_um: 2.0,
            wide_width_um: 4.0,
            thickness_um: 0.05,
            standoff_um: 1.0,
            ms_a_per_m: NI_MS,
            magnetization_axis: [1.0, 1.0, 1.0],
        }
    }

    /// 1x1 µm dots, 2 µm apart.
    pub fn pixel_art() -> Self {
        Self::base()
    }

    /// 20 µm bars, 2/4 µm widths.
    pub fn barcode() -> Self {
        Self::base()
    }

    /// 2x2 µm modules with 1 µm spacing.
    pub fn qr() -> Self {
        Geometry {
            dot_size_um: [2.0, 2.0],
            pitch_um: 3.0,
            ..Self::base()
        }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let lengths = [
            ("dot width", self.dot_size_um[0]),
            ("dot height", self.dot_size_um[1]),
            ("pitch", self.pitch_um),
            ("bar length", self.bar_length_um),
            ("narrow width", self.narrow_width_um),
            ("wide width", self.wide_width_um),
            ("thickness", self.thickness_um),
            ("standoff", self.standoff_um),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LayoutError::InvalidGeometry(format!("{name} must be > 0")));
            }
        }
        if self.pitch_um < self.dot_size_um[0].max(self.dot_size_um[1]) {
            return Err(LayoutError::InvalidGeometry(
                "pitch smaller than the dot".into(),
            ));
        }
        if !(self.ms_a_per_m >= 0.0 && self.ms_a_per_m.is_finite()) {
            return Err(LayoutError::InvalidGeometry("Ms must be >= 0".into()));
        }
        if vec3::norm(self.magnetization_axis) == 0.0 {
            return Err(LayoutError::InvalidGeometry(
                "magnetization axis is zero".into(),
            ));
        }
        Ok(())
    }

    /// Magnetization vector of a Ni element, A/m.
    pub fn ni_magnetization(&self) -> Vec3 {
        vec3::scale(vec3::normalize(self.magnetization_axis), self.ms_a_per_m)
    }

    fn cuboid(&self, x_min: f64, y_min: f64, w: f64, h: f64, material: Material) -> Cuboid {
        let magnetization = match material {
            Material::Ni => self.ni_magnetization(),
            Material::Au => [0.0; 3],
        };
        Cuboid {
            center: [x_min + w / 2.0, y_min + h / 2.0, self.thickness_um / 2.0],
            half_extents: [w / 2.0, h / 2.0, self.thickness_um / 2.0],
            material,
            magnetization,
        }
    }
}

/// Axis-aligned, uniformly magnetized box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    #[serde(rename = "center_um")]
    pub center: Vec3,
    #[serde(rename = "half_extents_um")]
    pub half_extents: Vec3,
    pub material: Material,
    #[serde(rename = "magnetization_A_per_m")]
    pub magnetization: Vec3,
}

impl Cuboid {
    pub fn min(&self) -> Vec3 {
        vec3::sub(self.center, self.half_extents)
    }

    pub fn max(&self) -> Vec3 {
        vec3::add(self.center, self.half_extents)
    }

    pub fn is_magnetic(&self) -> bool {
        self.magnetization != [0.0; 3]
    }

    /// True when the interiors intersect; shared faces are allowed.
    pub fn overlaps(&self, other: &Cuboid) -> bool {
        const TOL: f64 = 1e-9;
        (0..3).all(|k| {
            self.min()[k] < other.max()[k] - TOL && other.min()[k] < self.max()[k] - TOL
        })
    }

    /// Whether `(x, y)` lies inside the footprint (closed on the low side).
    #[inline]
    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).abs() < self.half_extents[0]
            && (y - self.center[1]).abs() < self.half_extents[1]
    }
}

/// The physical sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MagneticPattern {
    pub cuboids: Vec<Cuboid>,
}

impl MagneticPattern {
    pub fn len(&self) -> usize {
        self.cuboids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuboids.is_empty()
    }

    pub fn count(&self, material: Material) -> usize {
        self.cuboids.iter().filter(|c| c.material == material).count()
    }

    pub fn magnetic(&self) -> impl Iterator<Item = &Cuboid> {
        self.cuboids.iter().filter(|c| c.is_magnetic())
    }

    /// Checks material/magnetization consistency and that no two cuboids overlap.
    pub fn validate(&self) -> Result<(), LayoutError> {
        for c in &self.cuboids {
            if c.material == Material::Au && c.is_magnetic() {
                return Err(LayoutError::BadFile("magnetized Au cuboid".into()));
            }
            if c.half_extents.iter().any(|&h| !(h > 0.0)) {
                return Err(LayoutError::BadFile("non-positive extent".into()));
            }
        }
        // sweep over x to keep this near-linear for large patterns
        let mut order: Vec<usize> = (0..self.cuboids.len()).collect();
        order.sort_by(|&a, &b| {
            self.cuboids[a].min()[0].total_cmp(&self.cuboids[b].min()[0])
        });
        for (k, &a) in order.iter().enumerate() {
            let ca = &self.cuboids[a];
            for &b in &order[k + 1..] {
                let cb = &self.cuboids[b];
                if cb.min()[0] >= ca.max()[0] {
                    break;
                }
                if ca.overlaps(cb) {
                    return Err(LayoutError::Overlap(a.min(b), a.max(b)));
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned (x, y) bounding box: `([x_min, y_min], [x_max, y_max])`.
    pub fn bounds_xy(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut it = self.cuboids.iter();
        let first = it.next()?;
        let (mut lo, mut hi) = ([first.min()[0], first.min()[1]], [first.max()[0], first.max()[1]]);
        for c in it {
            lo = [lo[0].min(c.min()[0]), lo[1].min(c.min()[1])];
            hi = [hi[0].max(c.max()[0]), hi[1].max(c.max()[1])];
        }
        Some((lo, hi))
    }

    /// Centre of the xy bounding box (origin for an empty pattern).
    pub fn center_xy(&self) -> [f64; 2] {
        self.bounds_xy()
            .map(|(lo, hi)| [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0])
            .unwrap_or([0.0, 0.0])
    }

    /// Same pattern with every Ni magnetization reversed.
    pub fn reversed(&self) -> MagneticPattern {
        let mut p = self.clone();
        for c in &mut p.cuboids {
            c.magnetization = vec3::scale(c.magnetization, -1.0);
        }
        p
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LayoutError> {
        let p: MagneticPattern =
            serde_json::from_str(text).map_err(|e| LayoutError::BadFile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Boolean raster, `[row][col]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub rows: usize,
    pub cols: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(rows: usize, cols: usize) -> Self {
        Bitmap {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize) -> Self {
        Bitmap {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    /// Rows of `#` (set) and any other character (clear).
    pub fn from_art(lines: &[&str]) -> Self {
        let cols = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0);
        let mut b = Bitmap::new(lines.len(), cols);
        for (r, l) in lines.iter().enumerate() {
            for (c, ch) in l.chars().enumerate() {
                b.set(r, c, ch == '#');
            }
        }
        b
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.cols + col] = v;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// The cover shape of the pixel-art sample.
pub fn heart_mask() -> Bitmap {
    Bitmap::from_art(&[
        ".##...##.",
        "####.####",
        "#########",
        "#########",
        "#########",
        ".#######.",
        "..#####..",
        "...###...",
        "....#....",
    ])
}

/// The hidden magnetic shape; a subset of [`heart_mask`].
pub fn diamond_mask() -> Bitmap {
    Bitmap::from_art(&[
        ".........",
        ".........",
        "....#....",
        "...###...",
        "..#####..",
        "...###...",
        "....#....",
        ".........",
        ".........",
    ])
}

/// One dot per set cover cell; Ni where `hidden` is set, Au elsewhere.
pub fn layout_pixel_art(
    cover: &Bitmap,
    hidden: &Bitmap,
    geom: &Geometry,
) -> Result<MagneticPattern, LayoutError> {
    geom.validate()?;
    if cover.rows != hidden.rows || cover.cols != hidden.cols {
        return Err(LayoutError::ShapeMismatch);
    }
    let mut cuboids = Vec::with_capacity(cover.popcount());
    for row in 0..cover.rows {
        for col in 0..cover.cols {
            let h = hidden.get(row, col);
            if h && !cover.get(row, col) {
                return Err(LayoutError::HiddenNotSubset { row, col });
            }
            if cover.get(row, col) {
                let material = if h { Material::Ni } else { Material::Au };
                cuboids.push(geom.cuboid(
                    col as f64 * geom.pitch_um,
                    row as f64 * geom.pitch_um,
                    geom.dot_size_um[0],
                    geom.dot_size_um[1],
                    material,
                ));
            }
        }
    }
    Ok(MagneticPattern { cuboids })
}

/// Width of an element in µm.
fn element_width(geom: &Geometry, e: &crate::codec::Element) -> f64 {
    match e.width {
        crate::codec::Width::Narrow => geom.narrow_width_um,
        crate::codec::Width::Wide => geom.wide_width_um,
    }
}

/// Every element, bar or space, becomes a strip along x; its `magnetic` flag
/// picks Ni or Au. Spaces are therefore Au-filled and the footprint is one
/// solid strip regardless of the payload.
pub fn layout_barcode(seq: &ElementSequence, geom: &Geometry) -> Result<MagneticPattern, LayoutError> {
    geom.validate()?;
    let mut cuboids = Vec::with_capacity(seq.len());
    // positions as integer multiples of the narrow width to avoid drift
    let mut units = 0u32;
    for e in &seq.elements {
        let x = units as f64 * geom.narrow_width_um;
        let w = element_width(geom, e);
        let material = if e.magnetic { Material::Ni } else { Material::Au };
        cuboids.push(geom.cuboid(x, 0.0, w, geom.bar_length_um, material));
        units += e.width.units();
    }
    Ok(MagneticPattern { cuboids })
}

/// Barcode x-extent in µm.
pub fn barcode_extent(seq: &ElementSequence, geom: &Geometry) -> f64 {
    seq.elements.iter().map(|e| element_width(geom, e)).sum()
}

/// All 625 modules are present; dark modules are Ni, light ones Au.
pub fn layout_qr(matrix: &ModuleMatrix, geom: &Geometry) -> Result<MagneticPattern, LayoutError> {
    geom.validate()?;
    let mut cuboids = Vec::with_capacity(QR_SIZE * QR_SIZE);
    for row in 0..QR_SIZE {
        for col in 0..QR_SIZE {
            let material = if matrix.get(row, col) {
                Material::Ni
            } else {
                Material::Au
            };
            cuboids.push(geom.cuboid(
                col as f64 * geom.pitch_um,
                row as f64 * geom.pitch_um,
                geom.dot_size_um[0],
                geom.dot_size_um[1],
                material,
            ));
        }
    }
    Ok(MagneticPattern { cuboids })
}

/// Side length of a QR sample in µm.
pub fn qr_extent(geom: &Geometry) -> f64 {
    (QR_SIZE - 1) as f64 * geom.pitch_um + geom.dot_size_um[0]
}

/// Transmission image: 0 under a cuboid footprint, 1 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalImage {
    pub grid: Grid,
    /// Row-major, values in [0, 1].
    pub data: Vec<f64>,
}

impl OpticalImage {
    pub fn to_u8(&self) -> Vec<u8> {
        io::to_u8(&self.data, 0.0, 1.0)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), IoError> {
        io::write_pgm(path, self.grid.nx, self.grid.ny, &self.to_u8())
    }

    pub fn write_png(&self, path: &Path) -> Result<(), IoError> {
        io::write_png(path, self.grid.nx, self.grid.ny, &self.to_u8())
    }
}

const OPTICAL_SUPERSAMPLE: usize = 8;

/// Material-blind render: each pixel is the uncovered fraction of an 8x8
/// sub-sample raster, optionally blurred by a Gaussian of the given FWHM (µm).
pub fn optical_render(pattern: &MagneticPattern, grid: &Grid, blur_fwhm_um: Option<f64>) -> OpticalImage {
    let n = OPTICAL_SUPERSAMPLE;
    let sub = grid.step / n as f64;
    let mut data = vec![1.0; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (cx, cy) = (grid.x(i), grid.y(j));
            let candidates: Vec<&Cuboid> = pattern
                .cuboids
                .iter()
                .filter(|c| {
                    (cx - c.center[0]).abs() < c.half_extents[0] + grid.step
                        && (cy - c.center[1]).abs() < c.half_extents[1] + grid.step
                })
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let mut covered = 0usize;
            for a in 0..n {
                let y = cy - grid.step / 2.0 + (a as f64 + 0.5) * sub;
                for b in 0..n {
                    let x = cx - grid.step / 2.0 + (b as f64 + 0.5) * sub;
                    if candidates.iter().any(|c| c.footprint_contains(x, y)) {
                        covered += 1;
                    }
                }
            }
            data[grid.index(i, j)] = 1.0 - covered as f64 / (n * n) as f64;
        }
    }
    if let Some(fwhm) = blur_fwhm_um.filter(|f| *f > 0.0) {
        data = gaussian_blur(&data, grid.nx, grid.ny, fwhm / grid.step);
    }
    OpticalImage { grid: *grid, data }
}

/// Separable Gaussian blur (FWHM in pixels), edge-clamped.
fn gaussian_blur(data: &[f64], nx: usize, ny: usize, fwhm_px: f64) -> Vec<f64> {
    let sigma = fwhm_px / (8.0 * std::f64::consts::LN_2).sqrt();
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let d = k as isize - radius;
                    let (ii, jj) = if horizontal {
                        ((i as isize + d).clamp(0, nx as isize - 1) as usize, j)
                    } else {
                        (i, (j as isize + d).clamp(0, ny as isize - 1) as usize)
                    };
                    acc += w * src[jj * nx + ii];
                }
                out[j * nx + i] = acc;
            }
        }
        out
    };
    pass(&pass(data, true), false)
}
