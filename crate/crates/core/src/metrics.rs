//! Image-quality figures against a reference image `t`.
//!
//! * `d`, normalized mean square distance: `sqrt(sum (t - f)^2 / sum (t - mean(t))^2)`,
//!   sensitive to a few large errors;
//! * `r`, normalized absolute average distance: `sum |t - f| / sum |t|`,
//!   sensitive to many small errors;
//! * PSNR in dB with peak `max(t)`.
//!
//! Sums run over every pixel of the grid.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub d: f64,
    pub r: f64,
    /// `f64::INFINITY` when the images are identical.
    pub psnr: f64,
}

pub fn nmsd(t: &Image, f: &Image) -> Result<f64> {
    t.ensure_same_shape(f)?;
    let tb = t.as_slice().iter().sum::<f64>() / t.len() as f64;
    let den: f64 = t.as_slice().iter().map(|v| (v - tb) * (v - tb)).sum();
    if den <= 0.0 {
        return Err(Error::Degenerate("reference image is constant".into()));
    }
    let num: f64 = t.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((num / den).sqrt())
}

pub fn naad(t: &Image, f: &Image) -> Result<f64> {
    t.ensure_same_shape(f)?;
    let den: f64 = t.as_slice().iter().map(|v| v.abs()).sum();
    if den <= 0.0 {
        return Err(Error::Degenerate("reference image is all zero".into()));
    }
    let num: f64 = t.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    Ok(num / den)
}

pub fn psnr(t: &Image, f: &Image) -> Result<f64> {
    t.ensure_same_shape(f)?;
    let peak = t.max();
    if peak <= 0.0 {
        return Err(Error::Degenerate(format!("reference peak {peak} is not positive")));
    }
    let mse = t.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

pub fn evaluate(t: &Image, f: &Image) -> Result<MetricReport> {
    Ok(MetricReport { d: nmsd(t, f)?, r: naad(t, f)?, psnr: psnr(t, f)? })
}
