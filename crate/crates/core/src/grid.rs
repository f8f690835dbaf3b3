use serde::{Deserialize, Serialize};

/// Square-pixel sampling grid in the sample plane. Point `(i, j)` (column,
/// row) sits at `(x0 + i * step, y0 + j * step)` µm; rows run along +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x0: f64, y0: f64, step: f64, nx: usize, ny: usize) -> Self {
        assert!(step > 0.0 && step.is_finite(), "grid step must be positive");
        Grid {
            x0,
            y0,
            step,
            nx,
            ny,
        }
    }

    /// `n x n` pixel centres covering the square `[cx - w/2, cx + w/2]`, same in y.
    pub fn centered(cx: f64, cy: f64, width: f64, step: f64) -> Self {
        let n = (width / step).round().max(1.0) as usize;
        let x0 = cx - (n as f64) * step / 2.0 + step / 2.0;
        let y0 = cy - (n as f64) * step / 2.0 + step / 2.0;
        Grid::new(x0, y0, step, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.step
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.step
    }

    /// Row-major index of point `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Finer grid with `factor x factor` points per pixel, centred on each pixel.
    pub fn subdivide(&self, factor: usize) -> Grid {
        assert!(factor >= 1);
        let step = self.step / factor as f64;
        let offset = (self.step - step) / 2.0;
        Grid::new(
            self.x0 - offset,
            self.y0 - offset,
            step,
            self.nx * factor,
            self.ny * factor,
        )
    }

    /// Same spacing, extended by `margin` points on every side.
    pub fn padded(&self, margin: usize) -> Grid {
        let m = margin as f64 * self.step;
        Grid::new(
            self.x0 - m,
            self.y0 - m,
            self.step,
            self.nx + 2 * margin,
            self.ny + 2 * margin,
        )
    }
}
