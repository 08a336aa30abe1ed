//! Independent reference evaluations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the code path it checks.

#![allow(dead_code)]

use sparsect::{gradient_magnitude, hard_threshold_pinv, select_threshold, Image, Ray};

/// Literal per-pixel evaluation of the three-candidate filter, 1-based.
/// Out-of-range neighbours replicate the border; the `b` candidate in row 1
/// and the `c` candidate in column 1 fall back to the pixel itself.
pub fn literal_filter(f: &Image, w: f64) -> Vec<f64> {
    let (ni, nj) = (f.rows(), f.cols());
    let v = |i: usize, j: usize| f.get(i.min(ni), j.min(nj));
    let grad = |i: usize, j: usize| ((v(i, j) - v(i + 1, j)).powi(2) + (v(i, j) - v(i, j + 1)).powi(2)).sqrt();
    let mut out = Vec::with_capacity(ni * nj);
    for i in 1..=ni {
        for j in 1..=nj {
            let fa = if grad(i, j) < w { (v(i, j) + v(i + 1, j) + v(i, j + 1)) / 3.0 } else { v(i, j) };
            let fb = if i == 1 {
                v(i, j)
            } else if grad(i - 1, j) < w {
                (v(i - 1, j) + v(i, j) + v(i - 1, j + 1)) / 3.0
            } else {
                v(i, j)
            };
            let fc = if j == 1 {
                v(i, j)
            } else if grad(i, j - 1) < w {
                (v(i, j - 1) + v(i, j) + v(i + 1, j - 1)) / 3.0
            } else {
                v(i, j)
            };
            out.push((2.0 * fa + fb + fc) / 4.0);
        }
    }
    out
}

/// Run every `rows x cols` image with values in {0, 1, 2} through the filter
/// at each fixed threshold and at the rank-`N/3` threshold. Returns
/// `(checked, mismatched)`, comparing bit patterns.
pub fn exhaustive_filter_check(rows: usize, cols: usize, fixed_w: &[f64]) -> (u64, u64) {
    let n = rows * cols;
    let total = 3u64.pow(n as u32);
    let mut digits = vec![0.0f64; n];
    let (mut checked, mut mismatched) = (0u64, 0u64);
    for code in 0..total {
        let mut c = code;
        for d in digits.iter_mut() {
            *d = (c % 3) as f64;
            c /= 3;
        }
        let f = Image::new(rows, cols, digits.clone()).unwrap();
        let rank_w = select_threshold(&gradient_magnitude(&f).unwrap(), (n / 3).max(1)).unwrap().w;
        for &w in fixed_w.iter().chain(std::iter::once(&rank_w)) {
            let got = hard_threshold_pinv(&f, w).unwrap();
            let want = literal_filter(&f, w);
            checked += 1;
            if got.as_slice().iter().zip(&want).any(|(a, b)| a.to_bits() != b.to_bits()) {
                mismatched += 1;
            }
        }
    }
    (checked, mismatched)
}

/// Length of the segment where the infinite line `ray` crosses the
/// rectangle `[-hw, hw] x [-hh, hh]`, by intersecting the line with each of
/// the four edges and measuring between the extreme hits.
pub fn chord_length(ray: &Ray, hw: f64, hh: f64) -> f64 {
    let (px, py) = ray.origin;
    let (dx, dy) = ray.direction;
    let mut ts = Vec::new();
    for x in [-hw, hw] {
        if dx != 0.0 {
            let t = (x - px) / dx;
            let y = py + t * dy;
            if y >= -hh && y <= hh {
                ts.push(t);
            }
        }
    }
    for y in [-hh, hh] {
        if dy != 0.0 {
            let t = (y - py) / dy;
            let x = px + t * dx;
            if x >= -hw && x <= hw {
                ts.push(t);
            }
        }
    }
    if ts.len() < 2 {
        return 0.0;
    }
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Direction is unit length, so the parameter span is the length.
    hi - lo
}

/// `d` by a double loop over 1-based pixels.
pub fn literal_nmsd(t: &Image, f: &Image) -> f64 {
    let (ni, nj) = (t.rows(), t.cols());
    let mut mean = 0.0;
    for i in 1..=ni {
        for j in 1..=nj {
            mean += t.get(i, j);
        }
    }
    mean /= (ni * nj) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..=ni {
        for j in 1..=nj {
            num += (t.get(i, j) - f.get(i, j)).powi(2);
            den += (t.get(i, j) - mean).powi(2);
        }
    }
    (num / den).powf(0.5)
}

/// `r` by a double loop over 1-based pixels.
pub fn literal_naad(t: &Image, f: &Image) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..=t.rows() {
        for j in 1..=t.cols() {
            num += (t.get(i, j) - f.get(i, j)).abs();
            den += t.get(i, j).abs();
        }
    }
    num / den
}

/// `20 log10(max(t) / rmse)` by a double loop.
pub fn literal_psnr(t: &Image, f: &Image) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut sq = 0.0;
    for i in 1..=t.rows() {
        for j in 1..=t.cols() {
            peak = peak.max(t.get(i, j));
            sq += (t.get(i, j) - f.get(i, j)).powi(2);
        }
    }
    let rmse = (sq / (t.rows() * t.cols()) as f64).sqrt();
    20.0 * (peak / rmse).log10()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
