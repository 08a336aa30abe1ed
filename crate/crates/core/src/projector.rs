//! The measurement matrix `R`, one sparse row per ray.
//!
//! `R` is never stored densely. Each row holds the exact intersection
//! lengths of one detector-bin ray with the pixels it crosses, found by
//! parametric traversal of the pixel grid planes (Siddon's method). Rows
//! are generated on demand, or once up front with [`Projector::precomputed`].
//!
//! Measurement indices `m` are 0-based here: ray `m` belongs to view
//! `m / bins` and detector bin `m % bins`, matching the row-major layout of
//! [`Sinogram`].

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::image::{Image, Sinogram};

/// Intersections shorter than this fraction of the pixel size are dropped.
pub const MIN_WEIGHT_FRACTION: f64 = 1e-12;

/// Above this many estimated nonzeros, [`Projector::auto`] generates rows on demand.
pub const PRECOMPUTE_BUDGET: usize = 1 << 25;

/// One row `R_m`: flat 0-based pixel offsets and intersection lengths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    indices: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseRow {
    /// Build from `(offset, weight)` pairs, validating the row invariants.
    pub fn new(indices: Vec<u32>, weights: Vec<f64>) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!("{} indices vs {} weights", indices.len(), weights.len())));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDimensions("row indices must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDimensions("row weights must be positive".into()));
        }
        Ok(Self { indices, weights })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&n| n as usize).zip(self.weights.iter().copied())
    }

    /// `R_m . x`
    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(n, w)| w * x[n]).sum()
    }

    /// `x += alpha * R_m^T`
    #[inline]
    pub fn axpy(&self, alpha: f64, x: &mut [f64]) {
        for (n, w) in self.iter() {
            x[n] += alpha * w;
        }
    }

    /// `R_m . R_m^T`, zero for an empty row.
    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Total chord length of the ray inside the image.
    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A line `point + t * direction` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: (f64, f64),
    pub direction: (f64, f64),
}

impl Ray {
    /// Ray perpendicular to the detector at signed detector coordinate `u`
    /// for view angle `theta`.
    pub fn parallel(theta: f64, u: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { origin: (u * c, u * s), direction: (-s, c) }
    }
}

/// Parameter interval `[t0, t1]` where `origin + t * dir` lies inside `[lo, hi]`
/// along one axis, or `None` when parallel and outside.
fn slab(origin: f64, dir: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if dir == 0.0 {
        if origin > lo && origin < hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let a = (lo - origin) / dir;
        let b = (hi - origin) / dir;
        Some((a.min(b), a.max(b)))
    }
}

/// Exact intersection lengths of `ray` with the pixels of `geom`'s grid.
pub fn trace_ray(geom: &Geometry, ray: &Ray) -> SparseRow {
    let s = geom.pixel_size();
    let (hw, hh) = (geom.half_width(), geom.half_height());
    let (rows, cols) = (geom.rows(), geom.cols());
    let (px, py) = ray.origin;
    let (dx, dy) = ray.direction;

    let Some((tx0, tx1)) = slab(px, dx, -hw, hw) else {
        return SparseRow::default();
    };
    let Some((ty0, ty1)) = slab(py, dy, -hh, hh) else {
        return SparseRow::default();
    };
    let t_enter = tx0.max(ty0);
    let t_exit = tx1.min(ty1);
    if !(t_exit > t_enter) {
        return SparseRow::default();
    }

    // Parameters of every grid-plane crossing strictly inside the chord.
    let mut ts = Vec::with_capacity(rows + cols + 2);
    ts.push(t_enter);
    if dx != 0.0 {
        for k in 0..=cols {
            let t = (-hw + k as f64 * s - px) / dx;
            if t > t_enter && t < t_exit {
                ts.push(t);
            }
        }
    }
    if dy != 0.0 {
        for k in 0..=rows {
            let t = (-hh + k as f64 * s - py) / dy;
            if t > t_enter && t < t_exit {
                ts.push(t);
            }
        }
    }
    ts.push(t_exit);
    ts.sort_unstable_by(f64::total_cmp);

    let min_len = MIN_WEIGHT_FRACTION * s;
    let mut hits: Vec<(u32, f64)> = Vec::with_capacity(ts.len());
    for seg in ts.windows(2) {
        let len = seg[1] - seg[0];
        if len < min_len {
            continue;
        }
        let tm = 0.5 * (seg[0] + seg[1]);
        let (x, y) = (px + tm * dx, py + tm * dy);
        let j = (((x + hw) / s).floor() as isize).clamp(0, cols as isize - 1) as usize;
        let i = (((hh - y) / s).floor() as isize).clamp(0, rows as isize - 1) as usize;
        hits.push(((i * cols + j) as u32, len));
    }
    hits.sort_unstable_by_key(|h| h.0);

    let mut indices = Vec::with_capacity(hits.len());
    let mut weights: Vec<f64> = Vec::with_capacity(hits.len());
    for (n, w) in hits {
        if indices.last() == Some(&n) {
            *weights.last_mut().unwrap() += w;
        } else {
            indices.push(n);
            weights.push(w);
        }
    }
    SparseRow { indices, weights }
}

/// A linear measurement operator accessed one row at a time.
pub trait SystemMatrix: Sync {
    /// `(rows, cols)` of the unknown image.
    fn image_shape(&self) -> (usize, usize);

    /// `(views, bins)` of the data; `views * bins` rows in total.
    fn data_shape(&self) -> (usize, usize);

    fn row(&self, m: usize) -> Cow<'_, SparseRow>;

    fn num_rows(&self) -> usize {
        let (v, d) = self.data_shape();
        v * d
    }

    fn num_cols(&self) -> usize {
        let (r, c) = self.image_shape();
        r * c
    }

    fn row_norm_sq(&self, m: usize) -> f64 {
        self.row(m).norm_sq()
    }

    /// `p = R f`.
    fn forward(&self, f: &Image) -> Result<Sinogram> {
        check_image(self, f)?;
        let (views, bins) = self.data_shape();
        let x = f.as_slice();
        let mut p = vec![0.0; views * bins];
        p.par_chunks_mut(bins).enumerate().for_each(|(v, chunk)| {
            for (b, out) in chunk.iter_mut().enumerate() {
                *out = self.row(v * bins + b).dot(x);
            }
        });
        Ok(Sinogram::from_parts(views, bins, p))
    }

    /// `R^T q`, accumulated row by row in order `m = 0..M`.
    fn adjoint(&self, q: &Sinogram) -> Result<Image> {
        check_sinogram(self, q)?;
        let (rows, cols) = self.image_shape();
        let mut out = vec![0.0; rows * cols];
        for (m, &qm) in q.as_slice().iter().enumerate() {
            self.row(m).axpy(qm, &mut out);
        }
        Ok(Image::from_parts(rows, cols, out))
    }
}

pub(crate) fn check_image<A: SystemMatrix + ?Sized>(a: &A, f: &Image) -> Result<()> {
    let (rows, cols) = a.image_shape();
    if f.rows() != rows || f.cols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, operator expects {rows}x{cols}",
            f.rows(),
            f.cols()
        )));
    }
    Ok(())
}

pub(crate) fn check_sinogram<A: SystemMatrix + ?Sized>(a: &A, p: &Sinogram) -> Result<()> {
    let (views, bins) = a.data_shape();
    if p.views() != views || p.bins() != bins {
        return Err(Error::DimensionMismatch(format!(
            "sinogram is {}x{}, operator expects {views}x{bins}",
            p.views(),
            p.bins()
        )));
    }
    Ok(())
}

/// Parallel-beam projector over a [`Geometry`].
#[derive(Debug, Clone)]
pub struct Projector {
    geom: Geometry,
    cache: Option<Vec<(SparseRow, f64)>>,
}

impl Projector {
    /// Rows are traced on every access.
    pub fn new(geom: Geometry) -> Self {
        Self { geom, cache: None }
    }

    /// Trace and keep every row (with its squared norm) up front.
    pub fn precomputed(geom: Geometry) -> Self {
        let cache = (0..geom.num_measurements())
            .into_par_iter()
            .map(|m| {
                let row = trace_ray(&geom, &ray_for(&geom, m));
                let nsq = row.norm_sq();
                (row, nsq)
            })
            .collect();
        Self { geom, cache: Some(cache) }
    }

    /// Precompute when the estimated row storage fits [`PRECOMPUTE_BUDGET`].
    pub fn auto(geom: Geometry) -> Self {
        let est = geom.num_measurements() * (geom.rows() + geom.cols());
        if est <= PRECOMPUTE_BUDGET {
            Self::precomputed(geom)
        } else {
            Self::new(geom)
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn is_precomputed(&self) -> bool {
        self.cache.is_some()
    }

    /// The ray measured by 0-based index `m`.
    pub fn ray(&self, m: usize) -> Result<Ray> {
        self.check_index(m)?;
        Ok(ray_for(&self.geom, m))
    }

    /// Row `R_m` for 0-based `m`.
    pub fn ray_row(&self, m: usize) -> Result<Cow<'_, SparseRow>> {
        self.check_index(m)?;
        Ok(self.row(m))
    }

    fn check_index(&self, m: usize) -> Result<()> {
        let total = self.geom.num_measurements();
        if m >= total {
            return Err(Error::OutOfRange(format!("measurement {m} outside 0..{total}")));
        }
        Ok(())
    }
}

fn ray_for(geom: &Geometry, m: usize) -> Ray {
    let bins = geom.bins();
    Ray::parallel(geom.angles()[m / bins], geom.bin_position(m % bins))
}

impl SystemMatrix for Projector {
    fn image_shape(&self) -> (usize, usize) {
        (self.geom.rows(), self.geom.cols())
    }

    fn data_shape(&self) -> (usize, usize) {
        (self.geom.views(), self.geom.bins())
    }

    fn row(&self, m: usize) -> Cow<'_, SparseRow> {
        match &self.cache {
            Some(rows) => Cow::Borrowed(&rows[m].0),
            None => Cow::Owned(trace_ray(&self.geom, &ray_for(&self.geom, m))),
        }
    }

    fn row_norm_sq(&self, m: usize) -> f64 {
        match &self.cache {
            Some(rows) => rows[m].1,
            None => self.row(m).norm_sq(),
        }
    }
}

/// An explicitly listed set of rows, for hand-built systems and tests.
#[derive(Debug, Clone)]
pub struct ExplicitMatrix {
    rows: usize,
    cols: usize,
    matrix_rows: Vec<SparseRow>,
}

impl ExplicitMatrix {
    /// A matrix acting on `rows x cols` images; each row is one measurement.
    pub fn new(rows: usize, cols: usize, matrix_rows: Vec<SparseRow>) -> Result<Self> {
        let n = rows * cols;
        if n == 0 || matrix_rows.is_empty() {
            return Err(Error::InvalidDimensions("empty system".into()));
        }
        if matrix_rows.iter().any(|r| r.indices.last().is_some_and(|&k| k as usize >= n)) {
            return Err(Error::OutOfRange(format!("row index outside 0..{n}")));
        }
        Ok(Self { rows, cols, matrix_rows })
    }

    /// From a dense row-major `m x (rows*cols)` matrix, dropping zeros.
    pub fn from_dense(rows: usize, cols: usize, dense: &[Vec<f64>]) -> Result<Self> {
        let matrix_rows = dense
            .iter()
            .map(|r| {
                let (idx, w): (Vec<u32>, Vec<f64>) =
                    r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k as u32, *v)).unzip();
                SparseRow::new(idx, w)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, cols, matrix_rows)
    }
}

impl SystemMatrix for ExplicitMatrix {
    fn image_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn data_shape(&self) -> (usize, usize) {
        (self.matrix_rows.len(), 1)
    }

    fn row(&self, m: usize) -> Cow<'_, SparseRow> {
        Cow::Borrowed(&self.matrix_rows[m])
    }
}

/// `p = R f` for `geom`, tracing rows on demand.
pub fn forward_project(geom: &Geometry, f: &Image) -> Result<Sinogram> {
    Projector::new(geom.clone()).forward(f)
}

/// `R_m . R_m^T` for 0-based measurement `m`.
pub fn row_norm_sq(geom: &Geometry, m: usize) -> Result<f64> {
    let total = geom.num_measurements();
    if m >= total {
        return Err(Error::OutOfRange(format!("measurement {m} outside 0..{total}")));
    }
    Ok(trace_ray(geom, &ray_for(geom, m)).norm_sq())
}
