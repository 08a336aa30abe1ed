//! Dense row-major grids: the reconstructed [`Image`] and the measured
//! [`Sinogram`], plus the pixel linearization shared by every module.
//!
//! Pixel coordinates in the public API are 1-based, `(i, j)` with
//! `1 <= i <= rows` and `1 <= j <= cols`. The flat storage behind
//! [`Image::as_slice`] is ordinary 0-based row-major, so pixel `(i, j)`
//! lives at offset `linearize(i, j, cols) - 1`.

use crate::error::{Error, Result};

/// Flat 1-based index `n = (i - 1) * cols + j` of pixel `(i, j)`.
///
/// ```
/// use sparsect::linearize;
/// assert_eq!(linearize(1, 1, 128, 128).unwrap(), 1);
/// assert_eq!(linearize(2, 1, 128, 128).unwrap(), 129);
/// assert_eq!(linearize(128, 128, 128, 128).unwrap(), 16384);
/// assert!(linearize(0, 1, 128, 128).is_err());
/// ```
pub fn linearize(i: usize, j: usize, rows: usize, cols: usize) -> Result<usize> {
    if i == 0 || i > rows || j == 0 || j > cols {
        return Err(Error::OutOfRange(format!("pixel ({i}, {j}) outside {rows}x{cols} grid")));
    }
    Ok((i - 1) * cols + j)
}

/// Inverse of [`linearize`]: the 1-based `(i, j)` of flat index `n`.
pub fn delinearize(n: usize, rows: usize, cols: usize) -> Result<(usize, usize)> {
    if n == 0 || n > rows * cols {
        return Err(Error::OutOfRange(format!("flat index {n} outside 1..={}", rows * cols)));
    }
    Ok(((n - 1) / cols + 1, (n - 1) % cols + 1))
}

fn check_grid(rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions(format!("{rows}x{cols}")));
    }
    if data.len() != rows * cols {
        return Err(Error::InvalidDimensions(format!(
            "{rows}x{cols} grid needs {} values, got {}",
            rows * cols,
            data.len()
        )));
    }
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    Ok(())
}

/// An `rows x cols` grid of attenuation values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_grid(rows, cols, &data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Build from a closure over 1-based pixel coordinates.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 1..=rows {
            for j in 1..=cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    // Crate-internal constructor for buffers already known to be valid.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of pixel `(i, j)`, 1-based. Panics when out of range.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i >= 1 && i <= self.rows && j >= 1 && j <= self.cols, "pixel ({i}, {j}) out of range");
        self.data[(i - 1) * self.cols + (j - 1)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!("{}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols)))
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean distance `||self - other||_2`.
    pub fn distance(&self, other: &Image) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }
}

/// `views x bins` line-integral measurements, one row per view angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    views: usize,
    bins: usize,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(views: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        check_grid(views, bins, &data)?;
        Ok(Self { views, bins, data })
    }

    pub(crate) fn from_parts(views: usize, bins: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), views * bins);
        Self { views, bins, data }
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Total measurement count `M = views * bins`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// One row of a [`ConvergenceTrace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub epsilon: f64,
    /// `(d, r, psnr)` against the reference image, when one was supplied.
    pub metrics: Option<crate::metrics::MetricReport>,
}

/// Per-iteration record of the update norm and optional quality metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a record. Iteration numbers must increase strictly from 1.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        let expected = self.records.last().map_or(1, |r| r.iter + 1);
        if record.iter != expected {
            return Err(Error::OutOfRange(format!(
                "trace iteration {} out of order (expected {expected})",
                record.iter
            )));
        }
        if !(record.epsilon >= 0.0) {
            return Err(Error::InvalidDimensions(format!("negative or NaN epsilon {}", record.epsilon)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linearize_examples() {
        assert_eq!(linearize(1, 1, 128, 128).unwrap(), 1);
        assert_eq!(linearize(2, 1, 128, 128).unwrap(), 129);
        assert_eq!(linearize(128, 128, 128, 128).unwrap(), 16384);
    }

    #[test]
    fn linearize_rejects_out_of_range() {
        assert!(linearize(0, 1, 4, 4).is_err());
        assert!(linearize(1, 0, 4, 4).is_err());
        assert!(linearize(5, 1, 4, 4).is_err());
        assert!(linearize(1, 5, 4, 4).is_err());
        assert!(delinearize(0, 4, 4).is_err());
        assert!(delinearize(17, 4, 4).is_err());
    }

    #[test]
    fn linearize_is_bijective_on_small_grids() {
        for (rows, cols) in [(1, 1), (3, 5), (7, 2), (16, 16)] {
            let mut seen = vec![false; rows * cols];
            for i in 1..=rows {
                for j in 1..=cols {
                    let n = linearize(i, j, rows, cols).unwrap();
                    assert!(!seen[n - 1]);
                    seen[n - 1] = true;
                    assert_eq!(delinearize(n, rows, cols).unwrap(), (i, j));
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    proptest! {
        #[test]
        fn delinearize_inverts_linearize(rows in 1usize..200, cols in 1usize..200, seed in any::<u64>()) {
            let n = (seed as usize) % (rows * cols) + 1;
            let (i, j) = delinearize(n, rows, cols).unwrap();
            prop_assert_eq!(linearize(i, j, rows, cols).unwrap(), n);
        }
    }

    #[test]
    fn image_validation() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
        assert!(matches!(Image::new(1, 2, vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
        let img = Image::from_fn(2, 3, |i, j| (10 * i + j) as f64).unwrap();
        assert_eq!(img.get(2, 3), 23.0);
        assert_eq!(img.as_slice()[linearize(2, 1, 2, 3).unwrap() - 1], 21.0);
    }

    #[test]
    fn trace_requires_increasing_iterations() {
        let mut t = ConvergenceTrace::new();
        let rec = |iter, epsilon| TraceRecord { iter, epsilon, metrics: None };
        assert!(t.push(rec(2, 0.0)).is_err());
        t.push(rec(1, 0.5)).unwrap();
        assert!(t.push(rec(1, 0.5)).is_err());
        assert!(t.push(rec(2, -1.0)).is_err());
        t.push(rec(2, 0.0)).unwrap();
        assert_eq!(t.len(), 2);
    }
}
