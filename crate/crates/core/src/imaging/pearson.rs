//! Image similarity and the quality-versus-time curves built on it.

use rayon::prelude::*;
use serde::Serialize;

use super::{extract_mode_images, ExpectedStack, ImagingError, StackConfig};
use crate::nvmodel::DriveMode;

/// Pearson correlation over the pixels finite in both images.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, ImagingError> {
    if a.len() != b.len() {
        return Err(ImagingError::ShapeMismatch);
    }
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (*x, *y))
        .collect();
    if pairs.is_empty() {
        return Err(ImagingError::ConstantImage);
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(ImagingError::ConstantImage);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationPoint {
    pub mode: DriveMode,
    pub time_s: f64,
    pub seed: u64,
    pub r: f64,
}

/// Pearson correlation of noisy contrast images against the noise-free one,
/// for every exposure in `times` and every seed. Each entry of `stacks` is the
/// expected stack of one drive mode over the same scene.
pub fn correlation_curve(
    stacks: &[(DriveMode, &ExpectedStack)],
    config: &StackConfig,
    times: &[f64],
    seeds: &[u64],
) -> Result<Vec<CorrelationPoint>, ImagingError> {
    let mut out = Vec::new();
    for &(mode, expected) in stacks {
        let reference = extract_mode_images(&expected.sample(config, None), expected.baseline)?;
        let jobs: Vec<(f64, u64)> = times
            .iter()
            .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
            .collect();
        let points = jobs
            .par_iter()
            .map(|&(t, seed)| {
                let stack = expected.sample(&config.with_exposure(t), Some(seed));
                let img = extract_mode_images(&stack, expected.baseline)?;
                Ok(CorrelationPoint {
                    mode,
                    time_s: t,
                    seed,
                    r: pearson(&img.contrast, &reference.contrast)?,
                })
            })
            .collect::<Result<Vec<_>, ImagingError>>()?;
        out.extend(points);
    }
    Ok(out)
}

/// Median of `r` over seeds for each time of one mode, in time order.
pub fn median_series(points: &[CorrelationPoint], mode: DriveMode) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = points.iter().filter(|p| p.mode == mode).map(|p| p.time_s).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| {
            let mut rs: Vec<f64> = points
                .iter()
                .filter(|p| p.mode == mode && p.time_s == t)
                .map(|p| p.r)
                .collect();
            rs.sort_by(f64::total_cmp);
            let m = rs.len();
            let med = if m % 2 == 1 {
                rs[m / 2]
            } else {
                0.5 * (rs[m / 2 - 1] + rs[m / 2])
            };
            (t, med)
        })
        .collect()
}

/// First time the series reaches `level`, interpolated linearly in log time.
pub fn crossing_time(series: &[(f64, f64)], level: f64) -> Option<f64> {
    if let Some(first) = series.first() {
        if first.1 >= level {
            return Some(first.0);
        }
    }
    series.windows(2).find_map(|w| {
        let ((t0, r0), (t1, r1)) = (w[0], w[1]);
        (r0 < level && r1 >= level).then(|| {
            let f = (level - r0) / (r1 - r0);
            (t0.ln() + f * (t1.ln() - t0.ln())).exp()
        })
    })
}
