//! Analytic ellipse phantoms rasterized at pixel centres.
//!
//! Ellipse parameters live in the normalized frame `[-1, 1]^2` that spans
//! the image support (x to the right, y up), the frame used by the
//! published Shepp-Logan tables. Each pixel takes the sum of the
//! intensities of all ellipses containing its centre; there is no
//! supersampling, so the phantoms stay exactly piecewise constant.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-axes along the ellipse's own x and y directions.
    pub axes: (f64, f64),
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    /// Added to every point inside.
    pub intensity: f64,
}

impl Ellipse {
    pub fn new(center: (f64, f64), axes: (f64, f64), rotation_deg: f64, intensity: f64) -> Result<Self> {
        if !(axes.0 > 0.0 && axes.1 > 0.0) {
            return Err(Error::InvalidDimensions(format!("ellipse semi-axes {axes:?} must be positive")));
        }
        Ok(Self { center, axes, rotation: rotation_deg.to_radians(), intensity })
    }

    /// Closed-set membership test in the normalized frame.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.axes.0).powi(2) + (v / self.axes.1).powi(2) <= 1.0
    }
}

// (intensity, a, b, x0, y0, phi in degrees)
const MODIFIED_SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// The ten-ellipse modified (high-contrast) Shepp-Logan parameter set.
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    MODIFIED_SHEPP_LOGAN
        .iter()
        .map(|&(a0, a, b, x0, y0, phi)| Ellipse {
            center: (x0, y0),
            axes: (a, b),
            rotation: phi.to_radians(),
            intensity: a0,
        })
        .collect()
}

/// Simplified ellipse-only head: bone shell, brain tissue at 1.05, and
/// low-contrast inserts a few thousandths away from the tissue value.
pub fn forbild_ellipses() -> Vec<Ellipse> {
    let e = |x0, y0, a, b, phi: f64, v| Ellipse {
        center: (x0, y0),
        axes: (a, b),
        rotation: phi.to_radians(),
        intensity: v,
    };
    vec![
        // skull (1.8) and brain (1.05)
        e(0.0, 0.0, 0.72, 0.94, 0.0, 1.8),
        e(0.0, 0.0, 0.66, 0.88, 0.0, -0.75),
        // frontal sinus (air) inside the bone shell
        e(0.0, 0.905, 0.12, 0.025, 0.0, -1.8),
        // ventricles, slightly below tissue
        e(-0.11, 0.15, 0.07, 0.22, 18.0, -0.01),
        e(0.11, 0.15, 0.07, 0.22, -18.0, -0.01),
        // low-contrast lesions
        e(0.0, 0.55, 0.1, 0.1, 0.0, 0.01),
        e(-0.3, -0.3, 0.08, 0.06, 30.0, 0.005),
        e(0.3, -0.3, 0.06, 0.06, 0.0, -0.005),
        e(0.0, -0.6, 0.15, 0.08, 0.0, 0.012),
        // small bright inner-ear-like bone islands
        e(-0.5, -0.1, 0.04, 0.08, 0.0, 0.75),
        e(0.5, -0.1, 0.04, 0.08, 0.0, 0.75),
    ]
}

/// Rasterize `ellipses` onto a `rows x cols` grid by summing intensities at
/// pixel centres.
pub fn rasterize(rows: usize, cols: usize, ellipses: &[Ellipse]) -> Result<Image> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidDimensions(format!("phantom needs at least 2x2, got {rows}x{cols}")));
    }
    let (hr, hc) = (0.5 * rows as f64, 0.5 * cols as f64);
    Image::from_fn(rows, cols, |i, j| {
        let x = ((j as f64 - 0.5) - hc) / hc;
        let y = (hr - (i as f64 - 0.5)) / hr;
        let v: f64 = ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum();
        // Remove rounding residue such as 1 - 0.8 - 0.2 != 0.
        let v = (v * 1e12).round() / 1e12;
        if v == 0.0 {
            0.0
        } else {
            v
        }
    })
}

pub fn shepp_logan(rows: usize, cols: usize) -> Result<Image> {
    rasterize(rows, cols, &shepp_logan_ellipses())
}

pub fn forbild_head(rows: usize, cols: usize) -> Result<Image> {
    rasterize(rows, cols, &forbild_ellipses())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan,
    Forbild,
}

impl PhantomKind {
    pub fn render(self, rows: usize, cols: usize) -> Result<Image> {
        match self {
            PhantomKind::SheppLogan => shepp_logan(rows, cols),
            PhantomKind::Forbild => forbild_head(rows, cols),
        }
    }
}

impl std::str::FromStr for PhantomKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "shepp-logan" => Ok(PhantomKind::SheppLogan),
            "forbild" => Ok(PhantomKind::Forbild),
            other => Err(format!("unknown phantom {other:?} (expected shepp-logan or forbild)")),
        }
    }
}
