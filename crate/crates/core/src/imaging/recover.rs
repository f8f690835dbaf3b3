//! Digital carriers from mode images.
//!
//! QR modules are read from the contrast map: a Ni module lowers the contrast
//! under its footprint. Barcode bars are read from their edges: every Ni/Au
//! boundary carries a strong edge field that moves the dip far from the bias
//! resonance, while a boundary inside a wide element does not.

use serde::{Deserialize, Serialize};

use super::{ImagingError, ModeImages};
use crate::codec::{Element, ElementSequence, ModuleMatrix, Width, QR_SIZE};
use crate::layout::Geometry;
use crate::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    /// Side of the integration window as a fraction of the module footprint.
    pub window_fraction: f64,
    /// Half-width of the band around a barcode unit boundary, in narrow widths.
    pub edge_band: f64,
    /// Smallest accepted Otsu separability (between-class / total variance).
    pub min_separability: f64,
    /// Smallest accepted finder-template correlation.
    pub min_alignment: f64,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            window_fraction: 0.5,
            edge_band: 0.25,
            min_separability: 0.4,
            min_alignment: 0.5,
        }
    }
}

/// Two-class split of `values` maximising between-class variance. Returns
/// the threshold (midpoint of the split) and the separability in [0, 1].
pub fn otsu(values: &[f64]) -> (f64, f64) {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n < 2 {
        return (v.first().copied().unwrap_or(0.0), 0.0);
    }
    let total: f64 = v.iter().sum();
    let mean = total / n as f64;
    let var_t = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var_t == 0.0 {
        return (v[0], 0.0);
    }
    let mut best = (0.0, 0.5 * (v[0] + v[n - 1]));
    let mut left = 0.0;
    for k in 1..n {
        left += v[k - 1];
        if v[k] == v[k - 1] {
            continue;
        }
        let (w0, w1) = (k as f64 / n as f64, (n - k) as f64 / n as f64);
        let (m0, m1) = (left / k as f64, (total - left) / (n - k) as f64);
        let between = w0 * w1 * (m1 - m0).powi(2);
        if between > best.0 {
            best = (between, 0.5 * (v[k - 1] + v[k]));
        }
    }
    (best.1, best.0 / var_t)
}

/// Which map a window reads and how masked pixels count.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Feature {
    /// Contrast; a window with no valid pixel scores 0.
    Contrast,
    /// Unsigned dip shift; masked pixels count as a shift past the sweep edge.
    AbsShift(f64),
}

/// Mean of the feature over the pixels whose centres fall in the rectangle;
/// falls back to the nearest pixel when the window is smaller than a pixel.
fn window_mean(img: &ModeImages, feature: Feature, x: [f64; 2], y: [f64; 2]) -> Option<f64> {
    let g: &Grid = &img.grid;
    let to_i = |v: f64, o: f64| (v - o) / g.step;
    let mut i_lo = to_i(x[0], g.x0).ceil().max(0.0);
    let mut i_hi = to_i(x[1], g.x0).floor().min((g.nx - 1) as f64);
    let mut j_lo = to_i(y[0], g.y0).ceil().max(0.0);
    let mut j_hi = to_i(y[1], g.y0).floor().min((g.ny - 1) as f64);
    if i_lo > i_hi || j_lo > j_hi {
        let ci = to_i(0.5 * (x[0] + x[1]), g.x0).round();
        let cj = to_i(0.5 * (y[0] + y[1]), g.y0).round();
        if ci < 0.0 || cj < 0.0 || ci as usize >= g.nx || cj as usize >= g.ny {
            return None;
        }
        (i_lo, i_hi, j_lo, j_hi) = (ci, ci, cj, cj);
    }
    let (mut sum, mut n, mut masked) = (0.0, 0usize, 0usize);
    for j in j_lo as usize..=j_hi as usize {
        for i in i_lo as usize..=i_hi as usize {
            let k = g.index(i, j);
            match (feature, img.valid[k]) {
                (Feature::Contrast, true) => {
                    sum += img.contrast[k];
                    n += 1;
                }
                (Feature::AbsShift(_), true) => {
                    sum += img.freq_shift[k].abs();
                    n += 1;
                }
                (_, false) => masked += 1,
            }
        }
    }
    Some(match feature {
        Feature::Contrast if n == 0 => 0.0,
        Feature::Contrast => sum / n as f64,
        Feature::AbsShift(edge) => (sum + masked as f64 * edge) / (n + masked) as f64,
    })
}

fn inside(g: &Grid, x: [f64; 2], y: [f64; 2]) -> bool {
    let half = g.step / 2.0;
    x[0] >= g.x0 - half
        && y[0] >= g.y0 - half
        && x[1] <= g.x(g.nx - 1) + half
        && y[1] <= g.y(g.ny - 1) + half
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredQr {
    pub matrix: ModuleMatrix,
    /// Mean contrast per module, row-major.
    pub scores: Vec<f64>,
    /// Distance from the threshold in units of the class-mean gap.
    pub margins: Vec<f64>,
    pub threshold: f64,
    pub separability: f64,
    /// Refined lower-left corner of module (0, 0), µm.
    pub origin: [f64; 2],
    pub alignment: f64,
}

fn finder_template(row: usize, col: usize) -> Option<bool> {
    let corners = [(0usize, 0usize), (0, QR_SIZE - 7), (QR_SIZE - 7, 0)];
    for (r0, c0) in corners {
        if (r0..r0 + 7).contains(&row) && (c0..c0 + 7).contains(&col) {
            let (r, c) = (row - r0, col - c0);
            let ring = r.min(c).min(6 - r).min(6 - c);
            return Some(ring != 1);
        }
    }
    None
}

fn qr_scores(img: &ModeImages, geom: &Geometry, origin: [f64; 2], cfg: &RecoverConfig, modules: &[(usize, usize)]) -> Option<Vec<f64>> {
    let [w, h] = geom.dot_size_um;
    let (hw, hh) = (0.5 * w * cfg.window_fraction, 0.5 * h * cfg.window_fraction);
    modules
        .iter()
        .map(|&(r, c)| {
            let cx = origin[0] + c as f64 * geom.pitch_um + 0.5 * w;
            let cy = origin[1] + r as f64 * geom.pitch_um + 0.5 * h;
            let (x, y) = ([cx - hw, cx + hw], [cy - hh, cy + hh]);
            if !inside(&img.grid, x, y) {
                return None;
            }
            window_mean(img, Feature::Contrast, x, y)
        })
        .collect()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    super::pearson(a, b).unwrap_or(0.0)
}

/// Reads a QR matrix from a contrast image. `origin` is the expected
/// lower-left corner of module (0, 0); it is refined within ±pitch/2 by
/// matching the three finder patterns.
pub fn recover_qr(img: &ModeImages, geom: &Geometry, origin: [f64; 2], cfg: &RecoverConfig) -> Result<RecoveredQr, ImagingError> {
    let finder: Vec<(usize, usize)> = (0..QR_SIZE)
        .flat_map(|r| (0..QR_SIZE).map(move |c| (r, c)))
        .filter(|&(r, c)| finder_template(r, c).is_some())
        .collect();
    // dark modules read as low contrast
    let template: Vec<f64> = finder
        .iter()
        .map(|&(r, c)| if finder_template(r, c).unwrap() { -1.0 } else { 1.0 })
        .collect();
    let step = img.grid.step.min(geom.pitch_um / 4.0);
    let reach = (0.5 * geom.pitch_um / step).floor() as i64;
    let mut best: Option<(f64, [f64; 2])> = None;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let o = [origin[0] + dx as f64 * step, origin[1] + dy as f64 * step];
            if let Some(s) = qr_scores(img, geom, o, cfg, &finder) {
                let score = correlation(&s, &template);
                if best.is_none_or(|b| score > b.0) {
                    best = Some((score, o));
                }
            }
        }
    }
    let (alignment, origin) = best.ok_or_else(|| ImagingError::AlignmentFailed("symbol lies outside the image".into()))?;
    if alignment < cfg.min_alignment {
        return Err(ImagingError::AlignmentFailed(format!("finder correlation {alignment:.3}")));
    }

    let all: Vec<(usize, usize)> = (0..QR_SIZE).flat_map(|r| (0..QR_SIZE).map(move |c| (r, c))).collect();
    let scores = qr_scores(img, geom, origin, cfg, &all)
        .ok_or_else(|| ImagingError::AlignmentFailed("symbol lies outside the image".into()))?;
    let (threshold, separability) = otsu(&scores);
    if separability < cfg.min_separability {
        return Err(ImagingError::AmbiguousThreshold(separability));
    }
    let gap = class_gap(&scores, threshold);
    let mut matrix = ModuleMatrix::blank();
    for (k, &(r, c)) in all.iter().enumerate() {
        // ties go to non-magnetic
        matrix.set(r, c, scores[k] < threshold);
    }
    Ok(RecoveredQr {
        matrix,
        margins: scores.iter().map(|s| (s - threshold).abs() / gap).collect(),
        scores,
        threshold,
        separability,
        origin,
        alignment,
    })
}

fn class_gap(values: &[f64], threshold: f64) -> f64 {
    let mean = |f: &dyn Fn(f64) -> bool| {
        let sel: Vec<f64> = values.iter().copied().filter(|v| f(*v)).collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    };
    let gap = mean(&|v| v >= threshold) - mean(&|v| v < threshold);
    if gap > 0.0 {
        gap
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredBarcode {
    pub sequence: ElementSequence,
    /// Mean unsigned dip shift (MHz) in the band around each unit boundary,
    /// ends included.
    pub boundary_scores: Vec<f64>,
    /// Material change detected at each boundary.
    pub edges: Vec<bool>,
    pub threshold: f64,
    pub separability: f64,
    /// Refined left end of the strip, µm.
    pub origin: [f64; 2],
}

fn boundary_scores(
    img: &ModeImages,
    geom: &Geometry,
    origin: [f64; 2],
    n_units: usize,
    cfg: &RecoverConfig,
    sweep_edge: f64,
) -> Option<Vec<f64>> {
    let w = geom.narrow_width_um;
    let band = cfg.edge_band * w;
    // stay clear of the strip ends along the bars
    let y = [
        origin[1] + 0.2 * geom.bar_length_um,
        origin[1] + 0.8 * geom.bar_length_um,
    ];
    (0..=n_units)
        .map(|k| {
            let xc = origin[0] + k as f64 * w;
            let x = [xc - band, xc + band];
            if !inside(&img.grid, x, y) {
                return None;
            }
            window_mean(img, Feature::AbsShift(sweep_edge), x, y)
        })
        .collect()
}

/// Reads a barcode of `n_units` narrow widths whose strip starts at `origin`
/// (refined within ±narrow/2). Widths follow from which unit boundaries carry
/// an edge; elements alternate starting from a bar.
pub fn recover_barcode(
    img: &ModeImages,
    geom: &Geometry,
    origin: [f64; 2],
    n_units: usize,
    cfg: &RecoverConfig,
) -> Result<RecoveredBarcode, ImagingError> {
    let w = geom.narrow_width_um;
    let sweep_edge = img.sweep_mhz[0].abs().max(img.sweep_mhz[1].abs());
    let step = img.grid.step.min(w / 4.0);
    let reach = (0.5 * w / step).floor() as i64;
    let mut best: Option<(f64, [f64; 2], Vec<f64>)> = None;
    for dx in -reach..=reach {
        let o = [origin[0] + dx as f64 * step, origin[1]];
        if let Some(s) = boundary_scores(img, geom, o, n_units, cfg, sweep_edge) {
            let sep = otsu(&s).1;
            if best.as_ref().is_none_or(|b| sep > b.0) {
                best = Some((sep, o, s));
            }
        }
    }
    let (_, origin, scores) = best.ok_or_else(|| ImagingError::AlignmentFailed("strip lies outside the image".into()))?;
    let (threshold, separability) = otsu(&scores);
    if separability < cfg.min_separability {
        return Err(ImagingError::AmbiguousThreshold(separability));
    }
    let edges: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
    if !edges[0] || !edges[n_units] {
        return Err(ImagingError::AlignmentFailed("strip ends not found".into()));
    }
    let cuts: Vec<usize> = (0..=n_units).filter(|&k| edges[k]).collect();
    let mut elements = Vec::with_capacity(cuts.len());
    for (i, pair) in cuts.windows(2).enumerate() {
        let width = match pair[1] - pair[0] {
            1 => Width::Narrow,
            2 => Width::Wide,
            n => {
                return Err(ImagingError::Codec(crate::codec::CodecError::MalformedSequence(format!(
                    "run of {n} units at unit {}",
                    pair[0]
                ))))
            }
        };
        elements.push(if i % 2 == 0 {
            Element::bar(width)
        } else {
            Element::space(width)
        });
    }
    Ok(RecoveredBarcode {
        sequence: ElementSequence { elements },
        boundary_scores: scores,
        edges,
        threshold,
        separability,
        origin,
    })
}
