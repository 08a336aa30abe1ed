//! Parallel-beam scan description.
//!
//! The image support is the rectangle `[-cols*s/2, cols*s/2] x [-rows*s/2, rows*s/2]`
//! (pixel size `s`) centred on the rotation axis, with row 1 at the top
//! (largest `y`). For view angle `theta` the detector axis is
//! `(cos theta, sin theta)` and every ray runs along `(-sin theta, cos theta)`
//! through the centre of one detector bin.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    rows: usize,
    cols: usize,
    pixel_size: f64,
    angles: Vec<f64>,
    bins: usize,
    bin_spacing: f64,
    detector_offset: f64,
}

/// Smallest bin count covering the image diagonal at unit spacing,
/// `ceil(sqrt(2) * max(rows, cols))`.
pub fn default_bins(rows: usize, cols: usize) -> usize {
    (std::f64::consts::SQRT_2 * rows.max(cols) as f64).ceil() as usize
}

/// `views` angles uniformly spaced over `[0, pi)`.
pub fn uniform_angles(views: usize) -> Vec<f64> {
    (0..views).map(|k| k as f64 * PI / views as f64).collect()
}

impl Geometry {
    /// Default scan: uniform angles, `default_bins` bins at pixel spacing,
    /// detector centred, unit pixels.
    pub fn parallel_beam(rows: usize, cols: usize, views: usize) -> Result<Self> {
        Self::builder(rows, cols).views(views).build()
    }

    pub fn builder(rows: usize, cols: usize) -> GeometryBuilder {
        GeometryBuilder {
            rows,
            cols,
            pixel_size: 1.0,
            angles: None,
            views: None,
            bins: None,
            bin_spacing: None,
            detector_offset: 0.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Pixel count `N`.
    pub fn num_pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn views(&self) -> usize {
        self.angles.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_spacing
    }

    pub fn detector_offset(&self) -> f64 {
        self.detector_offset
    }

    /// Measurement count `M = views * bins`.
    pub fn num_measurements(&self) -> usize {
        self.views() * self.bins
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.cols as f64 * self.pixel_size
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.rows as f64 * self.pixel_size
    }

    pub fn diagonal(&self) -> f64 {
        2.0 * self.half_width().hypot(self.half_height())
    }

    /// Signed detector coordinate of bin `b` (0-based).
    pub fn bin_position(&self, b: usize) -> f64 {
        (b as f64 - 0.5 * (self.bins as f64 - 1.0)) * self.bin_spacing + self.detector_offset
    }
}

#[derive(Debug, Clone)]
pub struct GeometryBuilder {
    rows: usize,
    cols: usize,
    pixel_size: f64,
    angles: Option<Vec<f64>>,
    views: Option<usize>,
    bins: Option<usize>,
    bin_spacing: Option<f64>,
    detector_offset: f64,
}

impl GeometryBuilder {
    /// Uniformly spaced views over `[0, pi)`. Ignored when explicit angles are set.
    pub fn views(mut self, views: usize) -> Self {
        self.views = Some(views);
        self
    }

    pub fn angles(mut self, angles: Vec<f64>) -> Self {
        self.angles = Some(angles);
        self
    }

    pub fn bins(mut self, bins: usize) -> Self {
        self.bins = Some(bins);
        self
    }

    pub fn pixel_size(mut self, s: f64) -> Self {
        self.pixel_size = s;
        self
    }

    /// Defaults to the pixel size.
    pub fn bin_spacing(mut self, spacing: f64) -> Self {
        self.bin_spacing = Some(spacing);
        self
    }

    pub fn detector_offset(mut self, offset: f64) -> Self {
        self.detector_offset = offset;
        self
    }

    pub fn build(self) -> Result<Geometry> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("empty image grid {}x{}", self.rows, self.cols));
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return bad(format!("pixel size {} must be positive", self.pixel_size));
        }
        let angles = match (self.angles, self.views) {
            (Some(a), _) => a,
            (None, Some(v)) => uniform_angles(v),
            (None, None) => return bad("no views or angles given".into()),
        };
        if angles.is_empty() {
            return bad("at least one view is required".into());
        }
        if let Some(a) = angles.iter().find(|a| !(**a >= 0.0 && **a < PI)) {
            return bad(format!("angle {a} outside [0, pi)"));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return bad("angles must be strictly increasing".into());
        }
        let bin_spacing = self.bin_spacing.unwrap_or(self.pixel_size);
        if !(bin_spacing > 0.0 && bin_spacing.is_finite()) {
            return bad(format!("bin spacing {bin_spacing} must be positive"));
        }
        if !self.detector_offset.is_finite() {
            return bad("detector offset must be finite".into());
        }
        let bins = self.bins.unwrap_or_else(|| {
            let unit = default_bins(self.rows, self.cols);
            // Keep the default physical extent when the spacing differs from the pixel size.
            (unit as f64 * self.pixel_size / bin_spacing).ceil() as usize
        });
        if bins == 0 {
            return bad("at least one detector bin is required".into());
        }
        let geom = Geometry {
            rows: self.rows,
            cols: self.cols,
            pixel_size: self.pixel_size,
            angles,
            bins,
            bin_spacing,
            detector_offset: self.detector_offset,
        };
        let reach = 0.5 * bins as f64 * bin_spacing - self.detector_offset.abs();
        // Small slack so that the exact-fit default (e.g. D = diagonal) is accepted.
        if reach < 0.5 * geom.diagonal() * (1.0 - 1e-12) {
            return bad(format!(
                "detector ({bins} bins x {bin_spacing}, offset {}) does not cover image diagonal {}",
                self.detector_offset,
                geom.diagonal()
            ));
        }
        Ok(geom)
    }
}
