//! Fourier-lattice data model: centered k-space grids, multi-channel complex
//! arrays, the unitary FFT pair, derivative weightings and their adjoints,
//! and valid-convolution index sets.
//!
//! Conventions used throughout the crate:
//! - k indices are centered: kx in [-floor(nx/2), ceil(nx/2)-1], same for ky,
//!   so the DC index (0,0) always exists. Storage is row-major over (ky, kx).
//! - Spatial arrays are natural order: r = (x, y), x in 0..nx, y in 0..ny,
//!   row-major over (y, x), origin at the first element.
//! - 1-D signals are grids with ny = 1.

use crate::error::{GslrError, Result};
use crate::fft;
use num_complex::Complex64;
use rustfft::FftDirection;

/// Rectangular centered Fourier index lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KGrid {
    nx: usize,
    ny: usize,
}

impl KGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(GslrError::InvalidParam(format!(
                "grid dimensions must be positive, got {nx}x{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    /// 1-D grid of length `nx` (ny = 1).
    pub fn new_1d(nx: usize) -> Result<Self> {
        Self::new(nx, 1)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    pub fn kx_lo(&self) -> i64 {
        -((self.nx / 2) as i64)
    }

    pub fn kx_hi(&self) -> i64 {
        (self.nx.div_ceil(2) as i64) - 1
    }

    pub fn ky_lo(&self) -> i64 {
        -((self.ny / 2) as i64)
    }

    pub fn ky_hi(&self) -> i64 {
        (self.ny.div_ceil(2) as i64) - 1
    }

    /// Frequency held by centered slot `ix` along x.
    pub fn kx_at(&self, ix: usize) -> i64 {
        ix as i64 + self.kx_lo()
    }

    pub fn ky_at(&self, iy: usize) -> i64 {
        iy as i64 + self.ky_lo()
    }

    /// Linear storage slot of frequency (kx, ky), if it lies on the grid.
    pub fn slot(&self, kx: i64, ky: i64) -> Option<usize> {
        if kx < self.kx_lo() || kx > self.kx_hi() || ky < self.ky_lo() || ky > self.ky_hi() {
            return None;
        }
        let ix = (kx - self.kx_lo()) as usize;
        let iy = (ky - self.ky_lo()) as usize;
        Some(iy * self.nx + ix)
    }

    /// Frequency pair stored at linear slot `idx`.
    pub fn k_at(&self, idx: usize) -> (i64, i64) {
        let iy = idx / self.nx;
        let ix = idx % self.nx;
        (self.kx_at(ix), self.ky_at(iy))
    }
}

/// Multi-channel complex array over a [`KGrid`]; used for both k-space and
/// spatial-domain data. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct KArray {
    grid: KGrid,
    channels: usize,
    data: Vec<Complex64>,
}

impl KArray {
    pub fn zeros(grid: KGrid, channels: usize) -> Self {
        assert!(channels >= 1, "channel count must be positive");
        Self {
            grid,
            channels,
            data: vec![Complex64::new(0.0, 0.0); channels * grid.len()],
        }
    }

    /// Builds an array from raw channel-major data, validating length and
    /// finiteness.
    pub fn from_vec(grid: KGrid, channels: usize, data: Vec<Complex64>) -> Result<Self> {
        if channels == 0 {
            return Err(GslrError::InvalidParam("channel count must be positive".into()));
        }
        if data.len() != channels * grid.len() {
            return Err(GslrError::ShapeMismatch(format!(
                "expected {} values for {} channel(s) on {}x{}, got {}",
                channels * grid.len(),
                channels,
                grid.nx(),
                grid.ny(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GslrError::NonFinite(i));
        }
        Ok(Self { grid, channels, data })
    }

    pub fn grid(&self) -> KGrid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Inner product sum(conj(self) * other).
    pub fn inner(&self, other: &KArray) -> Complex64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_in_place(&mut self, other: &KArray) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn sub_in_place(&mut self, other: &KArray) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
    }

    /// self + other, checking grid and channel agreement.
    pub fn add(&self, other: &KArray) -> Result<KArray> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.add_in_place(other);
        Ok(out)
    }

    pub fn sub(&self, other: &KArray) -> Result<KArray> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.sub_in_place(other);
        Ok(out)
    }

    fn check_same_shape(&self, other: &KArray) -> Result<()> {
        if self.grid != other.grid || self.channels != other.channels {
            return Err(GslrError::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.channels,
                self.grid.ny(),
                self.grid.nx(),
                other.channels,
                other.grid.ny(),
                other.grid.nx()
            )));
        }
        Ok(())
    }
}

/// Rectangular index window in k-space: a filter support Delta (centered) or
/// a derived valid-convolution set Gamma (arbitrary lower corner).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportSet {
    fx: usize,
    fy: usize,
    x_lo: i64,
    y_lo: i64,
}

impl SupportSet {
    /// Centered filter support of dimensions fx x fy, using the same index
    /// convention as [`KGrid`].
    pub fn centered(fx: usize, fy: usize) -> Result<Self> {
        if fx == 0 || fy == 0 {
            return Err(GslrError::InvalidParam(format!(
                "filter support must be positive, got {fx}x{fy}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            x_lo: -((fx / 2) as i64),
            y_lo: -((fy / 2) as i64),
        })
    }

    pub fn with_corner(fx: usize, fy: usize, x_lo: i64, y_lo: i64) -> Self {
        Self { fx, fy, x_lo, y_lo }
    }

    pub fn fx(&self) -> usize {
        self.fx
    }

    pub fn fy(&self) -> usize {
        self.fy
    }

    pub fn len(&self) -> usize {
        self.fx * self.fy
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_lo(&self) -> i64 {
        self.x_lo
    }

    pub fn y_lo(&self) -> i64 {
        self.y_lo
    }

    pub fn x_hi(&self) -> i64 {
        self.x_lo + self.fx as i64 - 1
    }

    pub fn y_hi(&self) -> i64 {
        self.y_lo + self.fy as i64 - 1
    }

    /// Iterates indices row-major (ky slowest), matching linear slot order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let (fx, x_lo, y_lo) = (self.fx as i64, self.x_lo, self.y_lo);
        let fy = self.fy as i64;
        (0..fy).flat_map(move |j| (0..fx).map(move |i| (x_lo + i, y_lo + j)))
    }

    pub fn slot(&self, kx: i64, ky: i64) -> Option<usize> {
        if kx < self.x_lo || kx > self.x_hi() || ky < self.y_lo || ky > self.y_hi() {
            return None;
        }
        Some(((ky - self.y_lo) as usize) * self.fx + (kx - self.x_lo) as usize)
    }
}

/// Order of the derivative weighting applied in k-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    First,
    Second,
}

impl DerivOrder {
    /// Number of weighted channels the forward map produces on `grid`.
    /// On 1-D grids the identically-zero ky channels are collapsed away.
    pub fn channels(&self, grid: &KGrid) -> usize {
        match (self, grid.is_1d()) {
            (DerivOrder::First, false) => 2,
            (DerivOrder::First, true) => 1,
            (DerivOrder::Second, false) => 3,
            (DerivOrder::Second, true) => 1,
        }
    }

    /// Weight of channel `c` at frequency (kx, ky).
    pub fn weight(&self, grid: &KGrid, c: usize, kx: i64, ky: i64) -> f64 {
        let (x, y) = (kx as f64, ky as f64);
        if grid.is_1d() {
            return match self {
                DerivOrder::First => x,
                DerivOrder::Second => x * x,
            };
        }
        match (self, c) {
            (DerivOrder::First, 0) => x,
            (DerivOrder::First, 1) => y,
            (DerivOrder::Second, 0) => x * x,
            (DerivOrder::Second, 1) => x * y,
            (DerivOrder::Second, 2) => y * y,
            _ => unreachable!("channel {c} out of range"),
        }
    }

    /// Diagonal of M*M at frequency (kx, ky): sum of squared channel weights.
    pub fn mm_diagonal(&self, grid: &KGrid, kx: i64, ky: i64) -> f64 {
        (0..self.channels(grid))
            .map(|c| {
                let w = self.weight(grid, c, kx, ky);
                w * w
            })
            .sum()
    }
}

/// Unitary forward 2-D DFT per channel: natural-order spatial input to
/// centered k-space output. Preserves the l2 norm.
pub fn fft2_unitary(img: &KArray) -> KArray {
    transform(img, FftDirection::Forward)
}

/// Unitary inverse 2-D DFT per channel: centered k-space input to
/// natural-order spatial output.
pub fn ifft2_unitary(spec: &KArray) -> KArray {
    transform(spec, FftDirection::Inverse)
}

fn transform(x: &KArray, dir: FftDirection) -> KArray {
    let grid = x.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let scale = 1.0 / (grid.len() as f64).sqrt();
    let mut out = KArray::zeros(grid, x.channels());
    for c in 0..x.channels() {
        let mut buf: Vec<Complex64> = match dir {
            FftDirection::Forward => x.channel(c).to_vec(),
            FftDirection::Inverse => fft::ifftshift2(x.channel(c), nx, ny),
        };
        fft::fft2_raw(&mut buf, nx, ny, dir);
        let shifted = match dir {
            FftDirection::Forward => fft::fftshift2(&buf, nx, ny),
            FftDirection::Inverse => buf,
        };
        for (dst, src) in out.channel_mut(c).iter_mut().zip(shifted.iter()) {
            *dst = src * scale;
        }
    }
    out
}

/// Applies the derivative weighting M (forward) or its adjoint M* to a
/// k-space array.
///
/// Forward maps one channel to the weighted channels of `order`; the adjoint
/// maps them back to a single channel by a real-weighted sum, so M*M is
/// diagonal.
pub fn apply_derivative_weights(x: &KArray, order: DerivOrder, adjoint: bool) -> Result<KArray> {
    let grid = x.grid();
    let nch = order.channels(&grid);
    if !adjoint {
        if x.channels() != 1 {
            return Err(GslrError::ChannelMismatch {
                expected: 1,
                got: x.channels(),
            });
        }
        let mut out = KArray::zeros(grid, nch);
        for c in 0..nch {
            let dst = out.channel_mut(c);
            for (idx, (d, s)) in dst.iter_mut().zip(x.channel(0).iter()).enumerate() {
                let (kx, ky) = grid.k_at(idx);
                *d = s * order.weight(&grid, c, kx, ky);
            }
        }
        Ok(out)
    } else {
        if x.channels() != nch {
            return Err(GslrError::ChannelMismatch {
                expected: nch,
                got: x.channels(),
            });
        }
        let mut out = KArray::zeros(grid, 1);
        for c in 0..nch {
            let src = x.channel(c);
            let dst = out.channel_mut(0);
            for (idx, (d, s)) in dst.iter_mut().zip(src.iter()).enumerate() {
                let (kx, ky) = grid.k_at(idx);
                *d += s * order.weight(&grid, c, kx, ky);
            }
        }
        Ok(out)
    }
}

/// Valid-convolution index set: all lattice points where a filter of support
/// `filt` fully overlaps the grid. Dimensions are (nx-fx+1, ny-fy+1).
pub fn valid_index_set(grid: &KGrid, filt: &SupportSet) -> Result<SupportSet> {
    if filt.fx() > grid.nx() || filt.fy() > grid.ny() {
        return Err(GslrError::FilterTooLarge {
            fx: filt.fx(),
            fy: filt.fy(),
            nx: grid.nx(),
            ny: grid.ny(),
        });
    }
    Ok(SupportSet::with_corner(
        grid.nx() - filt.fx() + 1,
        grid.ny() - filt.fy() + 1,
        grid.kx_lo() + filt.x_hi(),
        grid.ky_lo() + filt.y_hi(),
    ))
}
