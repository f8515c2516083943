//! Synthetic phantoms with analytically controlled edge sets.
//!
//! Continuous models are rasterized at `oversampling` times the target
//! resolution; the grid Fourier coefficients are the fine-grid DFT values
//! restricted to the target band (anti-aliased truncation), so the spatial
//! truth is the band-limited image the measurements actually see.

use crate::error::{GslrError, Result};
use crate::fft;
use crate::grid::{ifft2_unitary, KArray, KGrid, SupportSet};
use crate::util::SplitMix64;
use num_complex::Complex64;
use rustfft::FftDirection;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Centered disk indicator holding a quarter of the field of view.
    DiskPc,
    /// Indicator of the sublevel set of a random real trigonometric
    /// polynomial supported in the edge support.
    TrigRegionPc,
    /// Continuous piecewise-linear tent profile; zero amplitude degenerates
    /// to a constant image.
    RampPl,
    /// Piecewise-constant plus piecewise-linear parts with the ground-truth
    /// split returned.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub grid: KGrid,
    /// Support of the edge trigonometric polynomial (trig_region_pc, mixed).
    pub edge_support: (usize, usize),
    /// Rasterization factor, at least 4.
    pub oversampling: usize,
    pub seed: u64,
    /// Profile amplitude for ramp_pl.
    pub amplitude: f64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, grid: KGrid) -> Self {
        Self {
            kind,
            grid,
            edge_support: (3, if grid.is_1d() { 1 } else { 3 }),
            oversampling: 8,
            seed: 0,
            amplitude: 1.0,
        }
    }
}

/// Generated phantom: band-limited spatial image, its grid Fourier
/// coefficients, and (for mixed phantoms) the ground-truth component split.
/// The k-space and spatial sums equal the stored totals exactly by
/// construction.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub image: KArray,
    pub kspace: KArray,
    pub split: Option<SyntheticSplit>,
}

#[derive(Debug, Clone)]
pub struct SyntheticSplit {
    pub pc_image: KArray,
    pub pc_kspace: KArray,
    pub pl_image: KArray,
    pub pl_kspace: KArray,
}

/// Rasterizes the continuous model and band-limits it to the grid.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.oversampling < 4 {
        return Err(GslrError::InvalidParam(format!(
            "oversampling must be at least 4, got {}",
            spec.oversampling
        )));
    }
    let grid = spec.grid;
    let fine = FineRaster::dims(grid, spec.oversampling);

    match spec.kind {
        SyntheticKind::DiskPc => {
            let img = fine.rasterize(|u, v| disk_indicator(u, v, grid.is_1d()));
            single(grid, fine, img)
        }
        SyntheticKind::TrigRegionPc => {
            let mu = trig_polynomial(&fine, grid, spec)?;
            let img: Vec<f64> = mu.iter().map(|&m| if m <= 0.0 { 1.0 } else { 0.0 }).collect();
            single(grid, fine, img)
        }
        SyntheticKind::RampPl => {
            let a = spec.amplitude;
            let img = fine.rasterize(|u, v| {
                if grid.is_1d() {
                    0.25 + a * tent(u)
                } else {
                    0.25 + a * (tent(u) + 0.5 * tent(v))
                }
            });
            single(grid, fine, img)
        }
        SyntheticKind::Mixed => {
            let (pc, pl) = if grid.is_1d() {
                mixed_profiles_1d(&fine, spec)
            } else {
                mixed_profiles_2d(&fine, grid, spec)?
            };
            let pc_kspace = fine.band_limit(&pc, grid);
            let pl_kspace = fine.band_limit(&pl, grid);
            let pc_image = ifft2_unitary(&pc_kspace);
            let pl_image = ifft2_unitary(&pl_kspace);
            let kspace = pc_kspace.add(&pl_kspace)?;
            let image = pc_image.add(&pl_image)?;
            Ok(Synthetic {
                image,
                kspace,
                split: Some(SyntheticSplit {
                    pc_image,
                    pc_kspace,
                    pl_image,
                    pl_kspace,
                }),
            })
        }
    }
}

fn single(grid: KGrid, fine: FineRaster, img: Vec<f64>) -> Result<Synthetic> {
    let kspace = fine.band_limit(&img, grid);
    let image = ifft2_unitary(&kspace);
    Ok(Synthetic {
        image,
        kspace,
        split: None,
    })
}

/// Fine rasterization lattice; 1-D grids are not oversampled along y.
struct FineRaster {
    nx: usize,
    ny: usize,
}

impl FineRaster {
    fn dims(grid: KGrid, oversampling: usize) -> Self {
        Self {
            nx: grid.nx() * oversampling,
            ny: if grid.is_1d() {
                1
            } else {
                grid.ny() * oversampling
            },
        }
    }

    fn rasterize(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny];
        for j in 0..self.ny {
            let v = j as f64 / self.ny as f64;
            for i in 0..self.nx {
                let u = i as f64 / self.nx as f64;
                out[j * self.nx + i] = f(u, v);
            }
        }
        out
    }

    /// Fine DFT restricted to the target band, scaled so the result matches
    /// the unitary-DFT convention of the coarse grid.
    fn band_limit(&self, img: &[f64], grid: KGrid) -> KArray {
        let mut buf: Vec<Complex64> = img.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::fft2_raw(&mut buf, self.nx, self.ny, FftDirection::Forward);
        let scale = (grid.len() as f64).sqrt() / (self.nx * self.ny) as f64;
        let mut out = KArray::zeros(grid, 1);
        for idx in 0..grid.len() {
            let (kx, ky) = grid.k_at(idx);
            let fx = kx.rem_euclid(self.nx as i64) as usize;
            let fy = ky.rem_euclid(self.ny as i64) as usize;
            out.data_mut()[idx] = buf[fy * self.nx + fx] * scale;
        }
        out
    }
}

fn disk_indicator(u: f64, v: f64, one_d: bool) -> f64 {
    if one_d {
        // centered segment holding a quarter of the period
        if (u - 0.5).abs() <= 0.125 {
            1.0
        } else {
            0.0
        }
    } else {
        // centered disk of area fraction 1/4
        let r = (0.25 / std::f64::consts::PI).sqrt();
        let d = ((u - 0.5).powi(2) + (v - 0.5).powi(2)).sqrt();
        if d <= r {
            1.0
        } else {
            0.0
        }
    }
}

fn tent(u: f64) -> f64 {
    1.0 - (2.0 * u - 1.0).abs()
}

/// Samples a random real trigonometric polynomial supported in the edge
/// support on the fine lattice, shifted by its median so the sublevel set
/// {mu <= 0} splits the field of view.
fn trig_polynomial(fine: &FineRaster, grid: KGrid, spec: &SyntheticSpec) -> Result<Vec<f64>> {
    let support = SupportSet::centered(spec.edge_support.0, spec.edge_support.1)?;
    if support.fx() > grid.nx() || support.fy() > grid.ny() {
        return Err(GslrError::FilterTooLarge {
            fx: support.fx(),
            fy: support.fy(),
            nx: grid.nx(),
            ny: grid.ny(),
        });
    }
    let mut rng = SplitMix64::new(spec.seed.wrapping_add(0x7261737465726974));
    let mut coeffs = vec![Complex64::new(0.0, 0.0); support.len()];
    for (slot, (kx, ky)) in support.iter().enumerate() {
        // fill the half-plane and mirror so mu is real
        if ky > 0 || (ky == 0 && kx > 0) {
            let c = Complex64::new(rng.next_normal(), rng.next_normal());
            coeffs[slot] = c;
            if let Some(ms) = support.slot(-kx, -ky) {
                coeffs[ms] = c.conj();
            }
        } else if kx == 0 && ky == 0 {
            coeffs[slot] = Complex64::new(rng.next_normal(), 0.0);
        }
    }

    // evaluate on the fine lattice with an unnormalized inverse DFT
    let mut padded = vec![Complex64::new(0.0, 0.0); fine.nx * fine.ny];
    for (slot, (kx, ky)) in support.iter().enumerate() {
        let fx = kx.rem_euclid(fine.nx as i64) as usize;
        let fy = ky.rem_euclid(fine.ny as i64) as usize;
        padded[fy * fine.nx + fx] = coeffs[slot];
    }
    fft::fft2_raw(&mut padded, fine.nx, fine.ny, FftDirection::Inverse);
    let mut mu: Vec<f64> = padded.iter().map(|c| c.re).collect();

    // shifting by the median keeps mu supported in the edge set and makes
    // the region roughly half the field of view
    let mut sorted = mu.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    for m in mu.iter_mut() {
        *m -= median;
    }
    let (lo, hi) = mu
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
            (lo.min(m), hi.max(m))
        });
    if !(lo < 0.0 && hi > 0.0) {
        return Err(GslrError::DegenerateRegion(format!(
            "trigonometric polynomial does not change sign (range [{lo:.3e}, {hi:.3e}])"
        )));
    }
    Ok(mu)
}

fn mixed_profiles_1d(fine: &FineRaster, spec: &SyntheticSpec) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(spec.seed.wrapping_add(0x6d69786564));
    let mut boxes = Vec::new();
    for _ in 0..3 {
        let c = rng.range(0.1, 0.9);
        let w = rng.range(0.06, 0.16);
        let a = rng.range(0.5, 1.5) * if rng.next_unit() < 0.5 { -1.0 } else { 1.0 };
        boxes.push((c, w, a));
    }
    let mut tris = Vec::new();
    for _ in 0..4 {
        let c = rng.range(0.1, 0.9);
        let w = rng.range(0.15, 0.4);
        let a = rng.range(0.4, 1.0) * if rng.next_unit() < 0.5 { -1.0 } else { 1.0 };
        tris.push((c, w, a));
    }
    let pc = fine.rasterize(|u, _| {
        boxes
            .iter()
            .map(|&(c, w, a)| if (u - c).abs() <= w / 2.0 { a } else { 0.0 })
            .sum()
    });
    let pl = fine.rasterize(|u, _| {
        0.4 * tent(u)
            + tris
                .iter()
                .map(|&(c, w, a)| a * (1.0 - (u - c).abs() * 2.0 / w).max(0.0))
                .sum::<f64>()
    });
    (pc, pl)
}

fn mixed_profiles_2d(
    fine: &FineRaster,
    grid: KGrid,
    spec: &SyntheticSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mu = trig_polynomial(fine, grid, spec)?;
    let pc: Vec<f64> = mu.iter().map(|&m| if m <= 0.0 { 1.0 } else { 0.0 }).collect();
    let mut rng = SplitMix64::new(spec.seed.wrapping_add(0x70796c6f6e));
    let (cu, cv) = (rng.range(0.3, 0.7), rng.range(0.3, 0.7));
    let w = rng.range(0.25, 0.4);
    let a = rng.range(0.6, 1.2);
    let pl = fine.rasterize(|u, v| {
        let pyramid = a * (1.0 - ((u - cu).abs().max((v - cv).abs())) / w).max(0.0);
        pyramid + 0.15 * (tent(u) + tent(v))
    });
    Ok((pc, pl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fft2_unitary, DerivOrder};
    use crate::lifting::build_toeplitz;

    #[test]
    fn disk_dc_coefficient_matches_area() {
        let grid = KGrid::new(32, 32).unwrap();
        let spec = SyntheticSpec {
            oversampling: 8,
            ..SyntheticSpec::new(SyntheticKind::DiskPc, grid)
        };
        let ph = make_synthetic(&spec).unwrap();
        let dc = ph.kspace.channel(0)[grid.slot(0, 0).unwrap()];
        let want = 0.25 * (grid.len() as f64).sqrt();
        assert!(
            (dc.re - want).abs() <= 0.02 * want && dc.im.abs() < 1e-9,
            "DC {dc} vs {want}"
        );
    }

    #[test]
    fn ramp_with_zero_amplitude_is_constant_and_t2_vanishes() {
        let grid = KGrid::new(16, 16).unwrap();
        let spec = SyntheticSpec {
            amplitude: 0.0,
            ..SyntheticSpec::new(SyntheticKind::RampPl, grid)
        };
        let ph = make_synthetic(&spec).unwrap();
        let first = ph.image.channel(0)[0];
        for v in ph.image.channel(0) {
            assert!((v - first).norm() < 1e-12);
        }
        let filt = SupportSet::centered(3, 3).unwrap();
        let t2 = build_toeplitz(&ph.kspace, DerivOrder::Second, &filt).unwrap();
        let sv = t2.singular_values();
        assert!(sv[0] < 1e-10, "sigma_max {}", sv[0]);
    }

    #[test]
    fn trig_region_is_a_proper_indicator() {
        let grid = KGrid::new(32, 32).unwrap();
        let spec = SyntheticSpec {
            seed: 5,
            ..SyntheticSpec::new(SyntheticKind::TrigRegionPc, grid)
        };
        let ph = make_synthetic(&spec).unwrap();
        // a genuine region: mean spatial value strictly between 0 and 1
        let dc = ph.kspace.channel(0)[grid.slot(0, 0).unwrap()].re / (grid.len() as f64).sqrt();
        assert!(dc > 0.05 && dc < 0.95, "area fraction {dc}");
        // deterministic given the seed
        let again = make_synthetic(&spec).unwrap();
        assert_eq!(ph.kspace, again.kspace);
    }

    #[test]
    fn mixed_split_sums_exactly() {
        for grid in [KGrid::new_1d(64).unwrap(), KGrid::new(16, 16).unwrap()] {
            let spec = SyntheticSpec {
                seed: 9,
                ..SyntheticSpec::new(SyntheticKind::Mixed, grid)
            };
            let ph = make_synthetic(&spec).unwrap();
            let split = ph.split.as_ref().unwrap();
            let ksum = split.pc_kspace.add(&split.pl_kspace).unwrap();
            assert_eq!(ksum, ph.kspace);
            let isum = split.pc_image.add(&split.pl_image).unwrap();
            assert_eq!(isum, ph.image);
        }
    }

    #[test]
    fn image_and_kspace_are_a_transform_pair() {
        let grid = KGrid::new_1d(32).unwrap();
        let spec = SyntheticSpec {
            seed: 2,
            ..SyntheticSpec::new(SyntheticKind::Mixed, grid)
        };
        let ph = make_synthetic(&spec).unwrap();
        let spec_again = fft2_unitary(&ph.image);
        let diff = spec_again.sub(&ph.kspace).unwrap().max_abs();
        assert!(diff < 1e-12, "transform mismatch {diff}");
    }

    #[test]
    fn oversampling_validation() {
        let grid = KGrid::new(8, 8).unwrap();
        let spec = SyntheticSpec {
            oversampling: 2,
            ..SyntheticSpec::new(SyntheticKind::DiskPc, grid)
        };
        assert!(make_synthetic(&spec).is_err());
    }
}
