//! `.rcf` matrix files and CSV trace output.
//!
//! Layout (all little-endian, no padding, no trailing bytes):
//!
//! | bytes    | content                          |
//! |----------|----------------------------------|
//! | 0..4     | ASCII `RCF1`                     |
//! | 4..8     | rows, `u32`                      |
//! | 8..12    | cols, `u32`                      |
//! | 12..     | `rows * cols` binary64, row-major |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::image::{ConvergenceTrace, Image, Sinogram};

pub const MAGIC: [u8; 4] = *b"RCF1";
const HEADER_LEN: usize = 12;

pub fn encode_matrix(rows: usize, cols: usize, data: &[f64]) -> Result<Vec<u8>> {
    if data.len() != rows * cols {
        return Err(Error::InvalidDimensions(format!(
            "{rows}x{cols} matrix needs {} values, got {}",
            rows * cols,
            data.len()
        )));
    }
    let (r, c) = match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(r), Ok(c)) if r > 0 && c > 0 => (r, c),
        _ => return Err(Error::InvalidDimensions(format!("{rows}x{cols}"))),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * data.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), FormatError> {
    if bytes.len() < HEADER_LEN {
        // A short file with the wrong leading bytes is still a magic error.
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic { found: bytes[..4].try_into().unwrap() });
        }
        return Err(FormatError::ShortHeader { len: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic { found: magic });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(FormatError::ZeroDimension { rows, cols });
    }
    let expected = (rows as usize) * (cols as usize) * 8;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(FormatError::Truncated { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes { extra: payload.len() - expected });
    }
    let mut data = Vec::with_capacity(expected / 8);
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::NonFinite { index: k });
        }
        data.push(v);
    }
    Ok((rows as usize, cols as usize, data))
}

pub fn write_matrix(path: impl AsRef<Path>, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    let bytes = encode_matrix(rows, cols, data)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path)?;
    Ok(decode_matrix(&bytes)?)
}

impl Image {
    pub fn write_rcf(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix(path, self.rows(), self.cols(), self.as_slice())
    }

    pub fn read_rcf(path: impl AsRef<Path>) -> Result<Self> {
        let (rows, cols, data) = read_matrix(path)?;
        Image::new(rows, cols, data)
    }
}

impl Sinogram {
    pub fn write_rcf(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix(path, self.views(), self.bins(), self.as_slice())
    }

    pub fn read_rcf(path: impl AsRef<Path>) -> Result<Self> {
        let (views, bins, data) = read_matrix(path)?;
        Sinogram::new(views, bins, data)
    }
}

/// Write a trace as CSV with header `iter,epsilon,d,r,psnr`. Metric columns
/// are left empty when the trace carries no metrics. Infinite PSNR is
/// written as `inf`.
pub fn write_trace_csv<W: Write>(trace: &ConvergenceTrace, mut w: W) -> std::io::Result<()> {
    writeln!(w, "iter,epsilon,d,r,psnr")?;
    for rec in trace.records() {
        match rec.metrics {
            Some(m) => writeln!(w, "{},{:e},{:e},{:e},{}", rec.iter, rec.epsilon, m.d, m.r, fmt_psnr(m.psnr))?,
            None => writeln!(w, "{},{:e},,,", rec.iter, rec.epsilon)?,
        }
    }
    Ok(())
}

pub fn fmt_psnr(psnr: f64) -> String {
    if psnr.is_infinite() {
        "inf".to_string()
    } else {
        format!("{psnr:.6}")
    }
}
