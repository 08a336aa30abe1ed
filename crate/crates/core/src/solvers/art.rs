//! Row-action (Kaczmarz) data-consistency sweeps.

use crate::error::Result;
use crate::image::{Image, Sinogram};
use crate::projector::{check_image, check_sinogram, SystemMatrix};

/// One full ART pass over rows `m = 0..M` in order, updating `x` in place:
///
/// `x += lambda * (p_m - R_m x) / (R_m R_m^T) * R_m^T`
///
/// Rows with zero norm (rays that miss the image) are skipped.
pub(crate) fn sweep_in_place<A: SystemMatrix + ?Sized>(a: &A, p: &[f64], x: &mut [f64], lambda: f64) {
    for (m, &pm) in p.iter().enumerate() {
        let nsq = a.row_norm_sq(m);
        if nsq == 0.0 {
            continue;
        }
        let row = a.row(m);
        let residual = pm - row.dot(x);
        row.axpy(lambda * residual / nsq, x);
    }
}

/// One ART sweep starting from `f`; the input image is left untouched.
pub fn art_sweep<A: SystemMatrix + ?Sized>(a: &A, p: &Sinogram, f: &Image, lambda: f64) -> Result<Image> {
    check_image(a, f)?;
    check_sinogram(a, p)?;
    super::check_lambda(lambda)?;
    let mut x = f.as_slice().to_vec();
    sweep_in_place(a, p.as_slice(), &mut x, lambda);
    Image::new(f.rows(), f.cols(), x)
}

/// Squared data residual `||p - R f||^2`.
pub fn residual_sq<A: SystemMatrix + ?Sized>(a: &A, p: &Sinogram, f: &Image) -> Result<f64> {
    let q = a.forward(f)?;
    check_sinogram(a, p)?;
    Ok(p.as_slice().iter().zip(q.as_slice()).map(|(u, v)| (u - v) * (u - v)).sum())
}
