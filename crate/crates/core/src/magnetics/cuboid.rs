//! Closed-form stray field of a uniformly magnetized rectangular prism.
//!
//! A uniform magnetization M is equivalent to surface charges `σ = M·n̂` on the
//! six faces. Each charged rectangle has an exact field in terms of `atan`
//! (normal component) and `ln` (in-plane components) evaluated at its four
//! corners; the prism field is the sum over faces.

use super::MagneticsError;
use crate::layout::Cuboid;
use crate::vec3::Vec3;

/// μ0 / 4π in T·m/A.
const MU0_OVER_4PI: f64 = 1e-7;
const TESLA_TO_GAUSS: f64 = 1e4;

/// `ln(b1 + r1) - ln(b2 + r2)` where `r_k = sqrt(b_k² + q)`, rewritten for
/// negative `b` so that the cancellation `b + r → 0` never happens.
#[inline]
fn log_pair(b1: f64, b2: f64, q: f64) -> f64 {
    let r1 = (b1 * b1 + q).sqrt();
    let r2 = (b2 * b2 + q).sqrt();
    if b1 < 0.0 && b2 < 0.0 {
        // ln(b + r) = ln(q) - ln(r - b); the ln(q) terms cancel.
        (r2 - b2).ln() - (r1 - b1).ln()
    } else {
        (b1 + r1).ln() - (b2 + r2).ln()
    }
}

/// Field of a unit-density charged rectangle, times 4π, in the face frame.
///
/// `n` is the signed distance from the face plane; the face spans
/// `[a2, a1] x [b2, b1]` in point-relative coordinates (point minus edge).
/// Returns (normal, along-a, along-b) components.
#[inline]
fn face_field(n: f64, a1: f64, a2: f64, b1: f64, b2: f64) -> [f64; 3] {
    let mut hn = 0.0;
    if n != 0.0 {
        for (a, sa) in [(a1, 1.0), (a2, -1.0)] {
            for (b, sb) in [(b1, 1.0), (b2, -1.0)] {
                let r = (a * a + b * b + n * n).sqrt();
                hn += sa * sb * (a * b / (n * r)).atan();
            }
        }
    }
    let n2 = n * n;
    let ha = -(log_pair(b1, b2, a1 * a1 + n2) - log_pair(b1, b2, a2 * a2 + n2));
    let hb = -(log_pair(a1, a2, b1 * b1 + n2) - log_pair(a1, a2, b2 * b2 + n2));
    [hn, ha, hb]
}

/// Geometric part of the field: H·4π/|M-component| summed over faces, for a
/// prism centred at the origin with half extents `h`, at displacement `d`.
/// Column `k` of the result is the field per unit `M_k`.
pub fn demag_tensor_columns(h: Vec3, d: Vec3) -> [Vec3; 3] {
    let mut cols = [[0.0; 3]; 3];
    for ax in 0..3 {
        let (a_ax, b_ax) = ((ax + 1) % 3, (ax + 2) % 3);
        let (u, hu) = (d[ax], h[ax]);
        let (v, hv) = (d[a_ax], h[a_ax]);
        let (w, hw) = (d[b_ax], h[b_ax]);
        for sgn in [1.0, -1.0] {
            let n = u - sgn * hu;
            let f = face_field(n, v + hv, v - hv, w + hw, w - hw);
            cols[ax][ax] += sgn * f[0];
            cols[ax][a_ax] += sgn * f[1];
            cols[ax][b_ax] += sgn * f[2];
        }
    }
    cols
}

/// Stray field (Gauss) of `cuboid` at `point` (µm). The point must lie
/// strictly outside the prism.
pub fn cuboid_b_field(cuboid: &Cuboid, point: Vec3) -> Result<Vec3, MagneticsError> {
    let d = [
        point[0] - cuboid.center[0],
        point[1] - cuboid.center[1],
        point[2] - cuboid.center[2],
    ];
    let inside = (0..3).all(|k| d[k].abs() <= cuboid.half_extents[k]);
    if inside {
        return Err(MagneticsError::PointInsideSource(point));
    }
    Ok(field_at_displacement(cuboid.half_extents, cuboid.magnetization, d))
}

/// Same as [`cuboid_b_field`] without the inside check, for callers that
/// already guarantee the point is outside.
#[inline]
pub fn field_at_displacement(h: Vec3, m: Vec3, d: Vec3) -> Vec3 {
    if m == [0.0; 3] {
        return [0.0; 3];
    }
    let cols = demag_tensor_columns(h, d);
    // H = Σ_k M_k col_k / 4π ; B = μ0 H
    let k = MU0_OVER_4PI * TESLA_TO_GAUSS;
    let mut b = [0.0; 3];
    for (mk, col) in m.iter().zip(cols.iter()) {
        if *mk != 0.0 {
            for i in 0..3 {
                b[i] += k * mk * col[i];
            }
        }
    }
    b
}
