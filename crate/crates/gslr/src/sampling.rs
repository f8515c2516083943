//! Undersampling masks (radial, variable-density random), the diagonal
//! measurement operator with optional complex Gaussian noise, and the
//! acceleration / SNR metrics.

use crate::error::{GslrError, Result};
use crate::grid::{KArray, KGrid};
use crate::util::keyed_unit;
use num_complex::Complex64;
use std::collections::BTreeMap;

// keyed counter-based draws (see util) keep masks and noise reproducible and
// independent of evaluation order
const STREAM_MASK: u64 = 1;
const STREAM_NOISE_A: u64 = 2;
const STREAM_NOISE_B: u64 = 3;

/// Binary sampling set on a k-space grid, with a provenance record of how it
/// was generated. The DC index is always sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: KGrid,
    sampled: Vec<bool>,
    provenance: BTreeMap<String, String>,
}

impl Mask {
    /// Builds a mask from raw flags, forcing DC on.
    pub fn from_flags(
        grid: KGrid,
        mut sampled: Vec<bool>,
        provenance: BTreeMap<String, String>,
    ) -> Result<Self> {
        if sampled.len() != grid.len() {
            return Err(GslrError::ShapeMismatch(format!(
                "mask needs {} flags, got {}",
                grid.len(),
                sampled.len()
            )));
        }
        let dc = grid.slot(0, 0).expect("DC always on grid");
        sampled[dc] = true;
        Ok(Self {
            grid,
            sampled,
            provenance,
        })
    }

    /// Fully sampled mask.
    pub fn full(grid: KGrid) -> Self {
        let mut provenance = BTreeMap::new();
        provenance.insert("generator".into(), "full".into());
        Self {
            grid,
            sampled: vec![true; grid.len()],
            provenance,
        }
    }

    pub fn grid(&self) -> KGrid {
        self.grid
    }

    pub fn flags(&self) -> &[bool] {
        &self.sampled
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    pub fn is_sampled(&self, idx: usize) -> bool {
        self.sampled[idx]
    }

    pub fn count(&self) -> usize {
        self.sampled.iter().filter(|&&s| s).count()
    }

    /// Applies the diagonal projection A (equivalently A*A) to each channel:
    /// unsampled entries are zeroed.
    pub fn apply(&self, x: &KArray) -> KArray {
        let mut out = x.clone();
        let n = self.grid.len();
        for c in 0..out.channels() {
            let chan = out.channel_mut(c);
            for (v, &s) in chan.iter_mut().zip(self.sampled.iter()) {
                if !s {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
            debug_assert_eq!(chan.len(), n);
        }
        out
    }
}

/// Ratio of grid size to sampled count.
pub fn acceleration(mask: &Mask) -> f64 {
    mask.grid().len() as f64 / mask.count() as f64
}

/// Radial mask: `n_spokes` lines through DC at uniformly spaced angles
/// j*pi/n_spokes, each rasterized by symmetric rounding of unit-radius steps
/// along the line, deduplicated. DC is always included.
pub fn radial_mask(grid: KGrid, n_spokes: usize) -> Mask {
    let mut sampled = vec![false; grid.len()];
    let half_diag = ((grid.nx() as f64 / 2.0).powi(2) + (grid.ny() as f64 / 2.0).powi(2)).sqrt();
    let steps = half_diag.ceil() as i64 + 2;
    for j in 0..n_spokes {
        let theta = j as f64 * std::f64::consts::PI / n_spokes as f64;
        let (dx, dy) = (theta.cos(), theta.sin());
        for s in -steps..=steps {
            let t = s as f64;
            // round half away from zero, symmetric about DC
            let kx = (t * dx).round() as i64;
            let ky = (t * dy).round() as i64;
            if let Some(slot) = grid.slot(kx, ky) {
                sampled[slot] = true;
            }
        }
    }
    let mut provenance = BTreeMap::new();
    provenance.insert("generator".into(), "radial".into());
    provenance.insert("spokes".into(), n_spokes.to_string());
    Mask::from_flags(grid, sampled, provenance).expect("flags sized to grid")
}

/// Variable-density random mask: a fully sampled centered disk holding
/// `center_fraction` of the grid, with the remaining points kept
/// independently with probability proportional to
/// (1 + |k|/k_max)^(-density_power), rescaled so the expected total meets
/// `target_accel`. Deterministic given the seed.
pub fn variable_density_mask(
    grid: KGrid,
    target_accel: f64,
    density_power: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<Mask> {
    if target_accel <= 1.0 {
        return Err(GslrError::InvalidParam(format!(
            "target acceleration must exceed 1, got {target_accel}"
        )));
    }
    if !(0.0..1.0).contains(&center_fraction) {
        return Err(GslrError::InvalidParam(format!(
            "center fraction must lie in [0, 1), got {center_fraction}"
        )));
    }
    let n = grid.len();
    let budget = n as f64 / target_accel;

    // centered disk (a centered segment in 1-D) holding center_fraction of
    // the grid
    let center_target = center_fraction * n as f64;
    let radius = if grid.is_1d() {
        center_target / 2.0
    } else {
        (center_target / std::f64::consts::PI).sqrt()
    };
    let mut in_center = vec![false; n];
    let mut n_center = 0usize;
    for (idx, flag) in in_center.iter_mut().enumerate() {
        let (kx, ky) = grid.k_at(idx);
        let r = ((kx * kx + ky * ky) as f64).sqrt();
        if r <= radius || (kx, ky) == (0, 0) {
            *flag = true;
            n_center += 1;
        }
    }
    if n_center as f64 > budget {
        return Err(GslrError::InvalidParam(format!(
            "center block of {n_center} points exceeds the sampling budget {budget:.1}"
        )));
    }

    // density weights outside the center
    let k_max = (0..n)
        .map(|idx| {
            let (kx, ky) = grid.k_at(idx);
            ((kx * kx + ky * ky) as f64).sqrt()
        })
        .fold(0.0, f64::max)
        .max(1.0);
    let weight = |idx: usize| -> f64 {
        let (kx, ky) = grid.k_at(idx);
        let r = ((kx * kx + ky * ky) as f64).sqrt();
        (1.0 + r / k_max).powf(-density_power)
    };

    // global scale s so that sum min(s w, 1) matches the leftover budget
    let leftover = budget - n_center as f64;
    let expected = |s: f64| -> f64 {
        (0..n)
            .filter(|&i| !in_center[i])
            .map(|i| (s * weight(i)).min(1.0))
            .sum()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while expected(hi) < leftover && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < leftover {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = 0.5 * (lo + hi);

    let mut sampled = vec![false; n];
    for idx in 0..n {
        if in_center[idx] {
            sampled[idx] = true;
        } else {
            let p = (scale * weight(idx)).min(1.0);
            sampled[idx] = keyed_unit(seed, STREAM_MASK, idx as u64) <= p;
        }
    }
    let mut provenance = BTreeMap::new();
    provenance.insert("generator".into(), "variable-density".into());
    provenance.insert("target_accel".into(), format!("{target_accel}"));
    provenance.insert("density_power".into(), format!("{density_power}"));
    provenance.insert("center_fraction".into(), format!("{center_fraction}"));
    provenance.insert("seed".into(), seed.to_string());
    Mask::from_flags(grid, sampled, provenance)
}

/// White complex Gaussian noise model; sigma is relative to the peak
/// modulus of the measured array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }
}

/// Measurement operator: b = mask . rho_hat + n, with complex Gaussian noise
/// of per-component std sigma/sqrt(2) injected on sampled entries only.
pub fn measure(rho_hat: &KArray, mask: &Mask, noise: &NoiseModel) -> Result<KArray> {
    if rho_hat.grid() != mask.grid() {
        return Err(GslrError::ShapeMismatch(
            "measurement grid differs from mask grid".into(),
        ));
    }
    let mut b = mask.apply(rho_hat);
    if noise.sigma > 0.0 {
        let sigma_abs = noise.sigma * rho_hat.max_abs();
        let comp = sigma_abs / 2.0_f64.sqrt();
        let n = b.grid().len();
        for c in 0..b.channels() {
            let chan = b.channel_mut(c);
            for (idx, v) in chan.iter_mut().enumerate() {
                if !mask.is_sampled(idx) {
                    continue;
                }
                let ctr = (c * n + idx) as u64;
                let u1 = keyed_unit(noise.seed, STREAM_NOISE_A, ctr);
                let u2 = keyed_unit(noise.seed, STREAM_NOISE_B, ctr);
                let r = (-2.0 * u1.ln()).sqrt();
                let phi = 2.0 * std::f64::consts::PI * u2;
                *v += Complex64::new(comp * r * phi.cos(), comp * r * phi.sin());
            }
        }
    }
    Ok(b)
}

/// SNR in dB: -10 log10(|orig - recon|^2 / |orig|^2). Exact agreement maps
/// to +infinity.
pub fn snr_db(recon: &KArray, orig: &KArray) -> Result<f64> {
    if recon.grid() != orig.grid() || recon.channels() != orig.channels() {
        return Err(GslrError::ShapeMismatch(
            "SNR operands have different shapes".into(),
        ));
    }
    let denom = orig.norm_sqr();
    if denom == 0.0 {
        return Err(GslrError::InvalidParam(
            "SNR reference has zero norm".into(),
        ));
    }
    let err = recon.sub(orig)?.norm_sqr();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * (err / denom).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spokes_is_dc_only() {
        let g = KGrid::new(8, 8).unwrap();
        let m = radial_mask(g, 0);
        assert_eq!(m.count(), 1);
        assert!(m.is_sampled(g.slot(0, 0).unwrap()));
        assert_eq!(acceleration(&m), 64.0);
    }

    #[test]
    fn two_spokes_are_axes() {
        let g = KGrid::new(64, 64).unwrap();
        let m = radial_mask(g, 2);
        // horizontal + vertical lines sharing DC
        assert_eq!(m.count(), 2 * 64 - 1);
        for kx in g.kx_lo()..=g.kx_hi() {
            assert!(m.is_sampled(g.slot(kx, 0).unwrap()));
        }
        for ky in g.ky_lo()..=g.ky_hi() {
            assert!(m.is_sampled(g.slot(0, ky).unwrap()));
        }
    }

    #[test]
    fn radial_26_spokes_acceleration_factor() {
        let g = KGrid::new(256, 256).unwrap();
        let m = radial_mask(g, 26);
        let acc = acceleration(&m);
        assert!(
            (acc - 10.7).abs() <= 0.15 * 10.7,
            "acceleration {acc} not within 15% of 10.7"
        );
    }

    #[test]
    fn variable_density_hits_target() {
        let g = KGrid::new(128, 128).unwrap();
        let m = variable_density_mask(g, 4.0, 3.0, 0.02, 7).unwrap();
        let acc = acceleration(&m);
        assert!((3.6..=4.4).contains(&acc), "acceleration {acc}");
        assert!(m.is_sampled(g.slot(0, 0).unwrap()));
    }

    #[test]
    fn variable_density_near_full_and_determinism() {
        let g = KGrid::new(64, 64).unwrap();
        let m = variable_density_mask(g, 1.05, 3.0, 0.02, 3).unwrap();
        let acc = acceleration(&m);
        assert!((acc - 1.05).abs() <= 0.1 * 1.05, "acceleration {acc}");

        let a = variable_density_mask(g, 3.0, 3.0, 0.02, 11).unwrap();
        let b = variable_density_mask(g, 3.0, 3.0, 0.02, 11).unwrap();
        assert_eq!(a, b);
        let c = variable_density_mask(g, 3.0, 3.0, 0.02, 12).unwrap();
        assert_ne!(a.flags(), c.flags());
    }

    #[test]
    fn variable_density_infeasible_center() {
        let g = KGrid::new(32, 32).unwrap();
        let err = variable_density_mask(g, 8.0, 3.0, 0.5, 1);
        assert!(matches!(err, Err(GslrError::InvalidParam(_))));
    }

    #[test]
    fn acceleration_ratios() {
        let g = KGrid::new(64, 64).unwrap();
        assert_eq!(acceleration(&Mask::full(g)), 1.0);
        let mut flags = vec![false; g.len()];
        for (i, f) in flags.iter_mut().enumerate() {
            *f = i % 2 == 0;
        }
        let m = Mask::from_flags(g, flags, BTreeMap::new()).unwrap();
        // DC forcing may add one sample on top of the exact half
        let acc = acceleration(&m);
        assert!((acc - 2.0).abs() < 0.01);
        let mut flags = vec![false; g.len()];
        for (i, f) in flags.iter_mut().enumerate() {
            *f = i % 4 == 0;
        }
        let m = Mask::from_flags(g, flags, BTreeMap::new()).unwrap();
        assert_eq!(m.count(), 1024);
        assert_eq!(acceleration(&m), 4.0);
    }

    #[test]
    fn mask_projection_is_idempotent_and_self_adjoint() {
        let g = KGrid::new(16, 16).unwrap();
        let m = variable_density_mask(g, 2.0, 3.0, 0.02, 5).unwrap();
        let x = noisy_array(g, 100);
        let once = m.apply(&x);
        let twice = m.apply(&once);
        assert_eq!(once, twice);
        let y = noisy_array(g, 101);
        let lhs = m.apply(&x).inner(&y);
        let rhs = x.inner(&m.apply(&y));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    fn noisy_array(g: KGrid, seed: u64) -> KArray {
        let data = (0..g.len())
            .map(|i| {
                Complex64::new(
                    keyed_unit(seed, 7, i as u64) - 0.5,
                    keyed_unit(seed, 8, i as u64) - 0.5,
                )
            })
            .collect();
        KArray::from_vec(g, 1, data).unwrap()
    }

    #[test]
    fn measure_without_noise_is_projection() {
        let g = KGrid::new(16, 16).unwrap();
        let x = noisy_array(g, 1);
        let m = variable_density_mask(g, 2.0, 3.0, 0.02, 2).unwrap();
        let b = measure(&x, &m, &NoiseModel::none()).unwrap();
        assert_eq!(b, m.apply(&x));
        let full = Mask::full(g);
        let b = measure(&x, &full, &NoiseModel::none()).unwrap();
        assert_eq!(b, x);
    }

    #[test]
    fn measured_noise_variance_matches_sigma() {
        let g = KGrid::new(512, 256).unwrap(); // > 1e5 entries
        let ones = KArray::from_vec(g, 1, vec![Complex64::new(1.0, 0.0); g.len()]).unwrap();
        let full = Mask::full(g);
        let sigma = 0.3;
        let b = measure(&ones, &full, &NoiseModel { sigma, seed: 9 }).unwrap();
        let var: f64 = b
            .data()
            .iter()
            .zip(ones.data().iter())
            .map(|(got, want)| (got - want).norm_sqr())
            .sum::<f64>()
            / g.len() as f64;
        assert!(
            (var - sigma * sigma).abs() < 0.05 * sigma * sigma,
            "variance {var} vs {}",
            sigma * sigma
        );
    }

    #[test]
    fn measure_is_deterministic() {
        let g = KGrid::new(32, 32).unwrap();
        let x = noisy_array(g, 2);
        let m = variable_density_mask(g, 2.0, 3.0, 0.02, 3).unwrap();
        let nm = NoiseModel { sigma: 0.1, seed: 4 };
        assert_eq!(measure(&x, &m, &nm).unwrap(), measure(&x, &m, &nm).unwrap());
    }

    #[test]
    fn snr_examples() {
        let g = KGrid::new(4, 4).unwrap();
        let orig = KArray::from_vec(g, 1, vec![Complex64::new(1.0, 0.0); 16]).unwrap();
        assert_eq!(snr_db(&orig, &orig).unwrap(), f64::INFINITY);
        let zero = KArray::zeros(g, 1);
        assert!((snr_db(&zero, &orig).unwrap() - 0.0).abs() < 1e-12);
        // error norm = orig norm / 10 -> 20 dB
        let mut recon = orig.clone();
        for v in recon.data_mut() {
            *v *= 1.0 - 0.1;
        }
        assert!((snr_db(&recon, &orig).unwrap() - 20.0).abs() < 1e-9);
        assert!(snr_db(&orig, &zero).is_err());
    }
}
