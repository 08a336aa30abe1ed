//! Discrete gradient transform and its thresholded pseudo-inverse.
//!
//! The gradient magnitude of pixel `(i, j)` uses the forward differences
//! to its lower and right neighbours,
//!
//! ```text
//! grad f(i,j) = sqrt((f(i,j) - f(i+1,j))^2 + (f(i,j) - f(i,j+1))^2)
//! ```
//!
//! with replicated borders (`f(I+1, j) = f(I, j)`, `f(i, J+1) = f(i, J)`),
//! so a constant image has an all-zero gradient map.
//!
//! The gradient is not invertible, so hard thresholding in the gradient
//! domain is mapped back to the image by a local nonlinear filter. Every
//! pixel collects three candidates, one for each gradient stencil it
//! belongs to:
//!
//! * `a`, its own stencil `{(i,j), (i+1,j), (i,j+1)}` governed by `grad(i,j)`;
//! * `b`, the stencil of the pixel above, `{(i-1,j), (i,j), (i-1,j+1)}`,
//!   governed by `grad(i-1,j)`;
//! * `c`, the stencil of the pixel to the left, `{(i,j-1), (i,j), (i+1,j-1)}`,
//!   governed by `grad(i,j-1)`.
//!
//! A stencil whose gradient is below the threshold `w` is flattened (the
//! candidate is the stencil mean); otherwise the candidate is the pixel's
//! own value. The output is `(2a + b + c) / 4`. In the first row the `b`
//! candidate, and in the first column the `c` candidate, is the pixel's own
//! value; out-of-range stencil neighbours use the replicated border value.
//!
//! All gradients are read from the unmodified input, so the result does not
//! depend on the order in which pixels are visited.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;

// Below this the filter runs on the calling thread.
const PARALLEL_MIN_PIXELS: usize = 1 << 14;

/// Relative floor for "nonzero" gradients inside the solvers.
pub const SOLVER_ZERO_FRACTION: f64 = 1e-12;

/// Per-pixel gradient magnitudes of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    rows: usize,
    cols: usize,
    magnitudes: Vec<f64>,
}

impl GradientMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Magnitude at 1-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i >= 1 && i <= self.rows && j >= 1 && j <= self.cols);
        self.magnitudes[(i - 1) * self.cols + (j - 1)]
    }

    pub fn max(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of magnitudes: the isotropic total variation.
    pub fn total_variation(&self) -> f64 {
        self.magnitudes.iter().sum()
    }

    /// Nonzero count ignoring floating-point dust below
    /// [`SOLVER_ZERO_FRACTION`] of the largest magnitude.
    pub fn support_size(&self) -> usize {
        l0_norm(self, SOLVER_ZERO_FRACTION * self.max())
    }
}

fn check_size(f: &Image) -> Result<()> {
    if f.rows() < 2 || f.cols() < 2 {
        return Err(Error::InvalidDimensions(format!(
            "gradient transform needs at least 2x2, got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    Ok(())
}

pub fn gradient_magnitude(f: &Image) -> Result<GradientMap> {
    check_size(f)?;
    let (rows, cols) = (f.rows(), f.cols());
    let x = f.as_slice();
    let mut magnitudes = vec![0.0; rows * cols];
    for r in 0..rows {
        let rd = (r + 1).min(rows - 1);
        for c in 0..cols {
            let cr = (c + 1).min(cols - 1);
            let v = x[r * cols + c];
            let dv = v - x[rd * cols + c];
            let dh = v - x[r * cols + cr];
            magnitudes[r * cols + c] = (dv * dv + dh * dh).sqrt();
        }
    }
    Ok(GradientMap { rows, cols, magnitudes })
}

/// Number of magnitudes strictly greater than `tau`.
pub fn l0_norm(g: &GradientMap, tau: f64) -> usize {
    g.magnitudes.iter().filter(|&&m| m > tau).count()
}

/// The rank-`sparsity` magnitude `w` of a gradient map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub w: f64,
    pub sparsity: usize,
}

/// `w` = the `sparsity`-th largest magnitude (1-based rank, ties share a rank value).
pub fn select_threshold(g: &GradientMap, sparsity: usize) -> Result<Threshold> {
    let n = g.magnitudes.len();
    if sparsity == 0 || sparsity > n {
        return Err(Error::OutOfRange(format!("sparsity {sparsity} outside 1..={n}")));
    }
    let mut buf = g.magnitudes.clone();
    let (_, w, _) = buf.select_nth_unstable_by(sparsity - 1, |a, b| b.total_cmp(a));
    Ok(Threshold { w: *w, sparsity })
}

#[inline]
fn mean3(a: f64, b: f64, c: f64) -> f64 {
    // The exact mean lies in [min, max]; the clamp only removes rounding
    // excursions so constant stencils map to themselves exactly.
    let lo = a.min(b).min(c);
    let hi = a.max(b).max(c);
    ((a + b + c) / 3.0).clamp(lo, hi)
}

#[inline]
fn blend(a: f64, b: f64, c: f64) -> f64 {
    let lo = a.min(b).min(c);
    let hi = a.max(b).max(c);
    ((2.0 * a + b + c) / 4.0).clamp(lo, hi)
}

/// Shared traversal for the hard and soft filters. `keep(value, mean, grad)`
/// gives the candidate of a stencil whose gradient is at or above `w`.
fn pseudo_inverse<K>(f: &Image, w: f64, keep: K) -> Result<Image>
where
    K: Fn(f64, f64, f64) -> f64 + Sync,
{
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::InvalidConfig(format!("threshold {w} must be finite and nonnegative")));
    }
    let g = gradient_magnitude(f)?;
    let (rows, cols) = (f.rows(), f.cols());
    let x = f.as_slice();
    let gm = g.as_slice();
    let at = |r: usize, c: usize| x[r * cols + c];
    let candidate = |grad: f64, value: f64, mean: f64| {
        if grad < w {
            mean
        } else {
            keep(value, mean, grad)
        }
    };

    let mut out = vec![0.0; rows * cols];
    let filter_row = |(r, out_row): (usize, &mut [f64])| {
        let rd = (r + 1).min(rows - 1);
        for (c, o) in out_row.iter_mut().enumerate() {
            let cr = (c + 1).min(cols - 1);
            let v = at(r, c);
            let a = candidate(gm[r * cols + c], v, mean3(v, at(rd, c), at(r, cr)));
            let b =
                if r == 0 { v } else { candidate(gm[(r - 1) * cols + c], v, mean3(at(r - 1, c), v, at(r - 1, cr))) };
            let cc = if c == 0 { v } else { candidate(gm[r * cols + c - 1], v, mean3(at(r, c - 1), v, at(rd, c - 1))) };
            *o = blend(a, b, cc);
        }
    };
    if rows * cols >= PARALLEL_MIN_PIXELS {
        out.par_chunks_mut(cols).enumerate().for_each(filter_row);
    } else {
        out.chunks_mut(cols).enumerate().for_each(filter_row);
    }
    Ok(Image::from_parts(rows, cols, out))
}

/// Hard-threshold pseudo-inverse: flatten every stencil whose gradient is
/// below `w`, keep the rest.
pub fn hard_threshold_pinv(f: &Image, w: f64) -> Result<Image> {
    pseudo_inverse(f, w, |value, _, _| value)
}

/// Shrinkage counterpart of [`hard_threshold_pinv`]: stencils at or above
/// `w` are pulled toward their mean by the factor `max(0, 1 - w / grad)`
/// instead of being kept verbatim.
pub fn soft_threshold_pinv(f: &Image, w: f64) -> Result<Image> {
    pseudo_inverse(f, w, |value, mean, grad| {
        if w == 0.0 {
            return value;
        }
        let t = (1.0 - w / grad).max(0.0);
        let lo = value.min(mean);
        let hi = value.max(mean);
        (mean + t * (value - mean)).clamp(lo, hi)
    })
}

/// Select `w` for sparsity `s` on `f` and apply the hard filter: the
/// composition of gradient, hard thresholding and pseudo-inverse.
pub fn iht_filter(f: &Image, sparsity: usize) -> Result<(Image, Threshold)> {
    let t = select_threshold(&gradient_magnitude(f)?, sparsity)?;
    Ok((hard_threshold_pinv(f, t.w)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn img(rows: usize, cols: usize, v: &[f64]) -> Image {
        Image::new(rows, cols, v.to_vec()).unwrap()
    }

    // Literal per-pixel evaluation of the gradient formula with replicate borders.
    fn oracle_gradient(f: &Image) -> Vec<f64> {
        let (ni, nj) = (f.rows(), f.cols());
        let v = |i: usize, j: usize| f.get(i.min(ni), j.min(nj));
        let mut out = Vec::new();
        for i in 1..=ni {
            for j in 1..=nj {
                out.push(((v(i, j) - v(i + 1, j)).powi(2) + (v(i, j) - v(i, j + 1)).powi(2)).sqrt());
            }
        }
        out
    }

    // Literal three-candidate filter; `keep(value, mean, grad)` as in the implementation.
    fn oracle_filter(f: &Image, w: f64, keep: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let (ni, nj) = (f.rows(), f.cols());
        let v = |i: usize, j: usize| f.get(i.min(ni), j.min(nj));
        let g = |i: usize, j: usize| ((v(i, j) - v(i + 1, j)).powi(2) + (v(i, j) - v(i, j + 1)).powi(2)).sqrt();
        let mut out = Vec::new();
        for i in 1..=ni {
            for j in 1..=nj {
                let fa = {
                    let m = (v(i, j) + v(i + 1, j) + v(i, j + 1)) / 3.0;
                    if g(i, j) < w {
                        m
                    } else {
                        keep(v(i, j), m, g(i, j))
                    }
                };
                let fb = if i == 1 {
                    v(i, j)
                } else {
                    let m = (v(i - 1, j) + v(i, j) + v(i - 1, j + 1)) / 3.0;
                    if g(i - 1, j) < w {
                        m
                    } else {
                        keep(v(i, j), m, g(i - 1, j))
                    }
                };
                let fc = if j == 1 {
                    v(i, j)
                } else {
                    let m = (v(i, j - 1) + v(i, j) + v(i + 1, j - 1)) / 3.0;
                    if g(i, j - 1) < w {
                        m
                    } else {
                        keep(v(i, j), m, g(i, j - 1))
                    }
                };
                out.push((2.0 * fa + fb + fc) / 4.0);
            }
        }
        out
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let f = Image::filled(5, 7, 3.25).unwrap();
        let g = gradient_magnitude(&f).unwrap();
        assert!(g.as_slice().iter().all(|&m| m == 0.0));
        assert_eq!(l0_norm(&g, 0.0), 0);
    }

    #[test]
    fn two_by_two_example() {
        let g = gradient_magnitude(&img(2, 2, &[0.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!(g.get(1, 1), 1.0);
        assert_eq!(g.get(1, 2), 1.0);
        assert_eq!(g.get(2, 1), 0.0);
        assert_eq!(g.get(2, 2), 0.0);
    }

    #[test]
    fn single_spike_gradient_matches_oracle() {
        let f = img(3, 3, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let g = gradient_magnitude(&f).unwrap();
        assert_eq!(g.as_slice(), oracle_gradient(&f).as_slice());
        // Frozen from the oracle: 1 above and left of the spike, sqrt(2) on it.
        let s2 = 2f64.sqrt();
        assert_eq!(g.as_slice(), &[0.0, 1.0, 0.0, 1.0, s2, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_needs_two_by_two() {
        assert!(gradient_magnitude(&img(1, 3, &[0.0; 3])).is_err());
    }

    #[test]
    fn l0_examples() {
        let g = GradientMap { rows: 1, cols: 4, magnitudes: vec![1.0, 0.0, 2.0, 0.0] };
        assert_eq!(l0_norm(&g, 0.0), 2);
        assert_eq!(l0_norm(&g, 1.0), 1);
        let z = GradientMap { rows: 2, cols: 2, magnitudes: vec![0.0; 4] };
        assert_eq!(l0_norm(&z, 0.0), 0);
    }

    #[test]
    fn threshold_examples() {
        let g = GradientMap { rows: 1, cols: 5, magnitudes: vec![5.0, 3.0, 1.0, 0.0, 2.0] };
        assert_eq!(select_threshold(&g, 2).unwrap().w, 3.0);
        assert_eq!(select_threshold(&g, 5).unwrap().w, 0.0);
        assert!(select_threshold(&g, 0).is_err());
        assert!(select_threshold(&g, 6).is_err());
        let ties = GradientMap { rows: 1, cols: 3, magnitudes: vec![4.0; 3] };
        assert_eq!(select_threshold(&ties, 2).unwrap().w, 4.0);
    }

    #[test]
    fn threshold_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Image::from_fn(128, 128, |_, _| rng.random_range(0.0..1.0)).unwrap();
        let g = gradient_magnitude(&f).unwrap();
        let mut sorted = g.as_slice().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for s in [1, 2, 17, 1081, 8000, 16384] {
            assert_eq!(select_threshold(&g, s).unwrap().w, sorted[s - 1]);
        }
    }

    proptest! {
        #[test]
        fn threshold_rank_definition(v in proptest::collection::vec(0u8..6, 4..40), s_seed in any::<usize>()) {
            let magnitudes: Vec<f64> = v.iter().map(|&k| k as f64).collect();
            let n = magnitudes.len();
            let g = GradientMap { rows: 1, cols: n, magnitudes };
            let s = s_seed % n + 1;
            let w = select_threshold(&g, s).unwrap().w;
            prop_assert!(g.as_slice().iter().filter(|&&m| m >= w).count() >= s);
            prop_assert!(g.as_slice().iter().filter(|&&m| m > w).count() < s);
        }
    }

    #[test]
    fn hard_filter_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Image::from_fn(9, 6, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        assert_eq!(hard_threshold_pinv(&f, 0.0).unwrap(), f);
        let c = Image::filled(6, 5, 0.7).unwrap();
        assert_eq!(hard_threshold_pinv(&c, 10.0).unwrap(), c);
        assert!(hard_threshold_pinv(&f, -1.0).is_err());
    }

    #[test]
    fn hard_filter_spike_matches_oracle() {
        let f = img(3, 3, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let out = hard_threshold_pinv(&f, 10.0).unwrap();
        let expected = oracle_filter(&f, 10.0, |v, _, _| v);
        assert_eq!(out.as_slice(), expected.as_slice());
        // Frozen values: every stencil touching the spike averages it in.
        let third = 1.0 / 3.0;
        assert_eq!(out.get(2, 2), (2.0 * third + third + third) / 4.0);
        assert_eq!(out.get(1, 1), 0.0);
        assert_eq!(out.get(1, 2), 2.0 * third / 4.0);
        assert_eq!(out.get(3, 1), third / 4.0);
    }

    #[test]
    fn hard_filter_ties_keep() {
        // grad(1,1) = 1 equals w, so stencil a of pixel (1,1) is kept.
        let f = img(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let out = hard_threshold_pinv(&f, 1.0).unwrap();
        assert_eq!(out.as_slice(), oracle_filter(&f, 1.0, |v, _, _| v).as_slice());
        assert_eq!(out.get(1, 1), 0.0);
    }

    #[test]
    fn soft_filter_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = Image::from_fn(7, 7, |_, _| rng.random_range(0.0..2.0)).unwrap();
        assert_eq!(soft_threshold_pinv(&f, 0.0).unwrap(), f);
        let c = Image::filled(4, 4, -2.5).unwrap();
        assert_eq!(soft_threshold_pinv(&c, 1.0).unwrap(), c);

        let spike = img(3, 3, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let w = 0.5 * gradient_magnitude(&spike).unwrap().max();
        let out = soft_threshold_pinv(&spike, w).unwrap();
        let expected = oracle_filter(&spike, w, |v, m, g| m + (1.0 - w / g).max(0.0) * (v - m));
        for (a, b) in out.as_slice().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn soft_close_to_hard_for_large_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let f = Image::from_fn(6, 6, |_, _| rng.random_range(0.0..1.0)).unwrap();
            let g = gradient_magnitude(&f).unwrap();
            let w = 0.3 * g.max() * rng.random_range(0.1..1.0);
            let hard = hard_threshold_pinv(&f, w).unwrap();
            let soft = soft_threshold_pinv(&f, w).unwrap();
            // Per-candidate bound (w / grad) |v - mean| summed with the blend weights.
            let (ni, nj) = (6usize, 6usize);
            let v = |i: usize, j: usize| f.get(i.min(ni), j.min(nj));
            let dev = |grad: f64, value: f64, mean: f64| {
                if grad < w {
                    0.0
                } else {
                    (w / grad).min(1.0) * (value - mean).abs()
                }
            };
            for i in 1..=ni {
                for j in 1..=nj {
                    let a = dev(g.get(i, j), v(i, j), (v(i, j) + v(i + 1, j) + v(i, j + 1)) / 3.0);
                    let b = if i == 1 {
                        0.0
                    } else {
                        dev(g.get(i - 1, j), v(i, j), (v(i - 1, j) + v(i, j) + v(i - 1, j + 1)) / 3.0)
                    };
                    let c = if j == 1 {
                        0.0
                    } else {
                        dev(g.get(i, j - 1), v(i, j), (v(i, j - 1) + v(i, j) + v(i + 1, j - 1)) / 3.0)
                    };
                    let bound = (2.0 * a + b + c) / 4.0 + 1e-15;
                    assert!((hard.get(i, j) - soft.get(i, j)).abs() <= bound);
                }
            }
        }
    }

    #[test]
    fn flat_region_bounded_by_strong_edges_is_unchanged() {
        // A 3x3 plateau of 5 inside zeros: every stencil that straddles the
        // plateau border has gradient >= 5, interior stencils are flat.
        let f =
            Image::from_fn(7, 7, |i, j| if (3..=5).contains(&i) && (3..=5).contains(&j) { 5.0 } else { 0.0 }).unwrap();
        let out = hard_threshold_pinv(&f, 4.0).unwrap();
        for i in 3..=5 {
            for j in 3..=5 {
                assert_eq!(out.get(i, j), 5.0);
            }
        }
    }

    proptest! {
        #[test]
        fn hard_filter_preserves_range(
            (rows, cols, data) in (2usize..9, 2usize..9).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), proptest::collection::vec(-3.0f64..3.0, r * c))
            }),
            frac in 0.0f64..1.2,
        ) {
            let f = Image::new(rows, cols, data).unwrap();
            let w = frac * gradient_magnitude(&f).unwrap().max();
            for out in [hard_threshold_pinv(&f, w).unwrap(), soft_threshold_pinv(&f, w).unwrap()] {
                prop_assert!(out.min() >= f.min() && out.max() <= f.max());
            }
        }
    }
}
