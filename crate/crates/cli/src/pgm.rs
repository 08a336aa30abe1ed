//! 16-bit binary PGM export with a linear display window.

use std::path::Path;

use sparsect::Image;

use crate::error::{CliError, CliResult};

/// `round(65535 * clamp((v - lo) / (hi - lo), 0, 1))`
pub fn window_value(v: f64, lo: f64, hi: f64) -> u16 {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (65535.0 * t).round() as u16
}

fn check_window(lo: f64, hi: f64) -> CliResult<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::Usage(format!("display window [{lo}, {hi}] needs lo < hi")));
    }
    Ok(())
}

/// P5 header followed by big-endian samples, rows top to bottom.
pub fn encode_pgm(img: &Image, lo: f64, hi: f64) -> CliResult<Vec<u8>> {
    check_window(lo, hi)?;
    let mut out = format!("P5\n{} {}\n65535\n", img.cols(), img.rows()).into_bytes();
    out.reserve(2 * img.len());
    for &v in img.as_slice() {
        out.extend_from_slice(&window_value(v, lo, hi).to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, img: &Image, lo: f64, hi: f64) -> CliResult<()> {
    let bytes = encode_pgm(img, lo, hi)?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
