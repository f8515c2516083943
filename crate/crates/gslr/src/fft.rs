//! Low-level FFT plumbing: unnormalized 2-D transforms in natural (DC-first)
//! order and the shifts between natural and centered k-space storage.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, dir))
}

/// In-place unnormalized 2-D FFT of a natural-order row-major (ny, nx) array.
pub(crate) fn fft2_raw(data: &mut [Complex64], nx: usize, ny: usize, dir: FftDirection) {
    debug_assert_eq!(data.len(), nx * ny);
    if nx > 1 {
        let row_fft = plan(nx, dir);
        for row in data.chunks_exact_mut(nx) {
            row_fft.process(row);
        }
    }
    if ny > 1 {
        let col_fft = plan(ny, dir);
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for x in 0..nx {
            for y in 0..ny {
                col[y] = data[y * nx + x];
            }
            col_fft.process(&mut col);
            for y in 0..ny {
                data[y * nx + x] = col[y];
            }
        }
    }
}

/// Reorder natural (DC-first) storage into centered storage, per axis.
/// Centered slot j holds frequency k = j - floor(n/2).
pub(crate) fn fftshift2(src: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    let sx = nx.div_ceil(2);
    let sy = ny.div_ceil(2);
    for jy in 0..ny {
        let yn = (jy + sy) % ny;
        for jx in 0..nx {
            let xn = (jx + sx) % nx;
            out[jy * nx + jx] = src[yn * nx + xn];
        }
    }
    out
}

/// Inverse of [`fftshift2`]: centered storage back to natural order.
pub(crate) fn ifftshift2(src: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    let sx = nx / 2;
    let sy = ny / 2;
    for iy in 0..ny {
        let yc = (iy + sy) % ny;
        for ix in 0..nx {
            let xc = (ix + sx) % nx;
            out[iy * nx + ix] = src[yc * nx + xc];
        }
    }
    out
}
