//! 8-bit grayscale export as binary PGM (P5): linear windowing, no
//! compression, deterministic bytes.

use crate::error::{GslrError, Result};
use crate::grid::KArray;
use std::io::Write;
use std::path::Path;

/// Renders the real part of a single-channel spatial array to P5 bytes.
///
/// The window defaults to [0, max]; values map linearly to 0..=255 and are
/// clamped. A degenerate window (max <= min) renders solid white.
pub fn grayscale_bytes(img: &KArray, window: Option<(f64, f64)>) -> Result<Vec<u8>> {
    if img.channels() != 1 {
        return Err(GslrError::ChannelMismatch {
            expected: 1,
            got: img.channels(),
        });
    }
    if !img.is_finite() {
        return Err(GslrError::InvalidParam("image is not finite".into()));
    }
    let (nx, ny) = (img.grid().nx(), img.grid().ny());
    let values: Vec<f64> = img.channel(0).iter().map(|c| c.re).collect();
    let (min, max) = match window {
        Some((lo, hi)) => (lo, hi),
        None => (0.0, values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
    };
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    if max > min {
        let scale = 255.0 / (max - min);
        out.extend(
            values
                .iter()
                .map(|&v| ((v - min) * scale).round().clamp(0.0, 255.0) as u8),
        );
    } else {
        out.extend(std::iter::repeat_n(255u8, values.len()));
    }
    Ok(out)
}

pub fn export_grayscale(img: &KArray, path: &Path, window: Option<(f64, f64)>) -> Result<()> {
    let bytes = grayscale_bytes(img, window)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
