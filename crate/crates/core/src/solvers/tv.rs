//! Smoothed isotropic total variation and its gradient, on the same
//! replicate-border forward differences as the gradient transform.

/// `sum sqrt(dv^2 + dh^2 + delta^2)` over all pixels.
pub fn smoothed_tv(x: &[f64], rows: usize, cols: usize, delta: f64) -> f64 {
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let (dv, dh) = diffs(x, rows, cols, r, c);
            total += (dv * dv + dh * dh + delta * delta).sqrt();
        }
    }
    total
}

#[inline]
fn diffs(x: &[f64], rows: usize, cols: usize, r: usize, c: usize) -> (f64, f64) {
    let v = x[r * cols + c];
    let dv = if r + 1 < rows { v - x[(r + 1) * cols + c] } else { 0.0 };
    let dh = if c + 1 < cols { v - x[r * cols + c + 1] } else { 0.0 };
    (dv, dh)
}

/// Gradient of [`smoothed_tv`] with respect to every pixel.
pub fn smoothed_tv_gradient(x: &[f64], rows: usize, cols: usize, delta: f64) -> Vec<f64> {
    let mut g = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (dv, dh) = diffs(x, rows, cols, r, c);
            let phi = (dv * dv + dh * dh + delta * delta).sqrt();
            g[r * cols + c] += (dv + dh) / phi;
            if r + 1 < rows {
                g[(r + 1) * cols + c] -= dv / phi;
            }
            if c + 1 < cols {
                g[r * cols + c + 1] -= dh / phi;
            }
        }
    }
    g
}
