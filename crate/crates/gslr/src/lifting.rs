//! Derivative-weighted Toeplitz liftings and the machinery derived from
//! them: explicit lifted matrices (oracle scale), Gram matrices with an
//! exact fast assembly path, Schatten-p values, eigendecomposition-based
//! weight square roots, and spatial sum-of-squares filter spectrum masks.

use crate::error::{GslrError, Result};
use crate::fft;
use crate::grid::{
    apply_derivative_weights, valid_index_set, DerivOrder, KArray, KGrid, SupportSet,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftDirection;

/// Dense derivative-weighted Toeplitz lifting of a k-space array.
///
/// Rows are indexed channel-major by the valid-convolution set, columns by
/// the filter support, so `matrix * vec(filter)` is the valid-region linear
/// convolution of each weighted channel with the filter.
#[derive(Debug, Clone)]
pub struct LiftedMatrix {
    order: DerivOrder,
    filt: SupportSet,
    valid: SupportSet,
    mat: DMatrix<Complex64>,
}

impl LiftedMatrix {
    pub fn order(&self) -> DerivOrder {
        self.order
    }

    pub fn filter_support(&self) -> SupportSet {
        self.filt
    }

    pub fn valid_set(&self) -> SupportSet {
        self.valid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn nrows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.mat.ncols()
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .mat
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    /// Number of singular values below `rel_tol * sigma_max`. A zero matrix
    /// counts every direction as null.
    pub fn numerical_null_dim(&self, rel_tol: f64) -> usize {
        let sv = self.singular_values();
        let smax = sv.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return sv.len();
        }
        sv.iter().filter(|&&s| s / smax < rel_tol).count()
    }
}

/// Builds the explicit lifted matrix T(x) for the given derivative order and
/// filter support.
pub fn build_toeplitz(x: &KArray, order: DerivOrder, filt: &SupportSet) -> Result<LiftedMatrix> {
    let grid = x.grid();
    let valid = valid_index_set(&grid, filt)?;
    let weighted = apply_derivative_weights(x, order, false)?;
    let nch = weighted.channels();
    let nvalid = valid.len();
    let mut mat = DMatrix::zeros(nch * nvalid, filt.len());
    for c in 0..nch {
        let chan = weighted.channel(c);
        for (ri, (lx, ly)) in valid.iter().enumerate() {
            for (ci, (kx, ky)) in filt.iter().enumerate() {
                let slot = grid
                    .slot(lx - kx, ly - ky)
                    .expect("valid set guarantees full overlap");
                mat[(c * nvalid + ri, ci)] = chan[slot];
            }
        }
    }
    Ok(LiftedMatrix {
        order,
        filt: *filt,
        valid,
        mat,
    })
}

/// Gram matrix G = T(x)* T(x) of the lifting, Hermitian PSD of size
/// |Delta| x |Delta|.
///
/// With `fast = false` the explicit lifted matrix is formed and multiplied.
/// With `fast = true` the same entries are assembled from windowed
/// autocorrelations of the weighted channels (prefix sums over the valid
/// window, one pass per lag), which is exact and never materializes T.
pub fn gram_matrix(
    x: &KArray,
    order: DerivOrder,
    filt: &SupportSet,
    fast: bool,
) -> Result<DMatrix<Complex64>> {
    let g = if fast {
        gram_fast(x, order, filt)?
    } else {
        let t = build_toeplitz(x, order, filt)?;
        t.mat.adjoint() * &t.mat
    };
    Ok(hermitian_part(&g))
}

fn gram_fast(x: &KArray, order: DerivOrder, filt: &SupportSet) -> Result<DMatrix<Complex64>> {
    let grid = x.grid();
    let valid = valid_index_set(&grid, filt)?;
    let weighted = apply_derivative_weights(x, order, false)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let nd = filt.len();
    let mut g = DMatrix::zeros(nd, nd);

    // Pairs (k, k') of filter indices sharing the lag d = k - k'.
    type LagPairs = Vec<((i64, i64), Vec<(usize, usize)>)>;
    let fx = filt.fx() as i64;
    let fy = filt.fy() as i64;
    let mut lag_pairs: LagPairs = Vec::new();
    for dy in -(fy - 1)..=(fy - 1) {
        for dx in -(fx - 1)..=(fx - 1) {
            let mut pairs = Vec::new();
            for (ki, (kx, ky)) in filt.iter().enumerate() {
                if let Some(kj) = filt.slot(kx - dx, ky - dy) {
                    pairs.push((ki, kj));
                }
            }
            if !pairs.is_empty() {
                lag_pairs.push(((dx, dy), pairs));
            }
        }
    }

    let mut lagprod = vec![Complex64::new(0.0, 0.0); nx * ny];
    let mut prefix = vec![Complex64::new(0.0, 0.0); (nx + 1) * (ny + 1)];
    for c in 0..weighted.channels() {
        let u = weighted.channel(c);
        for ((dx, dy), pairs) in &lag_pairs {
            // lagprod[m] = conj(u[m]) * u[m + d], zero where m + d leaves the grid
            for (idx, v) in lagprod.iter_mut().enumerate() {
                let (mx, my) = grid.k_at(idx);
                *v = match grid.slot(mx + dx, my + dy) {
                    Some(s) => u[idx].conj() * u[s],
                    None => Complex64::new(0.0, 0.0),
                };
            }
            // 2-D inclusive prefix sums over storage slots
            for iy in 0..ny {
                let mut rowsum = Complex64::new(0.0, 0.0);
                for ix in 0..nx {
                    rowsum += lagprod[iy * nx + ix];
                    prefix[(iy + 1) * (nx + 1) + (ix + 1)] =
                        prefix[iy * (nx + 1) + (ix + 1)] + rowsum;
                }
            }
            // G(k, k') = sum of lagprod over the window Gamma - k
            for &(ki, kj) in pairs {
                let (kx, ky) = filt_index(filt, ki);
                let x0 = (valid.x_lo() - kx - grid.kx_lo()) as usize;
                let x1 = (valid.x_lo() + valid.fx() as i64 - 1 - kx - grid.kx_lo()) as usize;
                let y0 = (valid.y_lo() - ky - grid.ky_lo()) as usize;
                let y1 = (valid.y_lo() + valid.fy() as i64 - 1 - ky - grid.ky_lo()) as usize;
                let s = prefix[(y1 + 1) * (nx + 1) + (x1 + 1)]
                    - prefix[y0 * (nx + 1) + (x1 + 1)]
                    - prefix[(y1 + 1) * (nx + 1) + x0]
                    + prefix[y0 * (nx + 1) + x0];
                g[(ki, kj)] += s;
            }
        }
    }
    Ok(g)
}

fn filt_index(filt: &SupportSet, slot: usize) -> (i64, i64) {
    let iy = slot / filt.fx();
    let ix = slot % filt.fx();
    (filt.x_lo() + ix as i64, filt.y_lo() + iy as i64)
}

/// Exactly Hermitian part (G + G*)/2.
fn hermitian_part(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = g.nrows();
    let mut out = g.clone();
    for i in 0..n {
        out[(i, i)] = Complex64::new(g[(i, i)].re, 0.0);
        for j in 0..i {
            let v = (g[(i, j)] + g[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Schatten-p value of a dense matrix: (1/p) sum sigma_i^p for p in (0, 1],
/// and sum log(sigma_i) for p = 0 with singular values floored at 1e-15.
pub fn schatten_p(mat: &DMatrix<Complex64>, p: f64) -> Result<f64> {
    check_p(p)?;
    let sv = mat.clone().svd(false, false).singular_values;
    if p == 0.0 {
        Ok(sv.iter().map(|&s| s.max(1e-15).ln()).sum())
    } else {
        Ok(sv.iter().map(|&s| s.powf(p)).sum::<f64>() / p)
    }
}

/// Epsilon-smoothed Schatten-p functional evaluated from the eigenvalues of
/// the Gram matrix G = X*X: (2/p) sum (lambda_i + eps)^(p/2) for p > 0 and
/// sum log(lambda_i + eps) for p = 0, i.e. twice the Schatten value of X at
/// eps = 0.
///
/// The constant is chosen so the gradient in G is exactly the reweighting
/// matrix (G + eps I)^(p/2 - 1); the weighted least-squares step of the
/// solver is then a true majorize-minimize step for this functional, which
/// is what makes its recorded history non-increasing.
pub fn schatten_from_gram_eigs(eigs: &[f64], p: f64, eps: f64) -> f64 {
    if p == 0.0 {
        eigs.iter().map(|&l| (l.max(0.0) + eps).ln()).sum::<f64>()
    } else {
        2.0 * eigs
            .iter()
            .map(|&l| (l.max(0.0) + eps).powf(p / 2.0))
            .sum::<f64>()
            / p
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GslrError::InvalidParam(format!(
            "Schatten exponent p must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Bank of scaled eigenvector filters: one choice of the weight-matrix
/// square root, interpreted column-wise as annihilating filters.
#[derive(Debug, Clone)]
pub struct FilterBank {
    grid: KGrid,
    support: SupportSet,
    /// |Delta| x |Delta| matrix whose l-th column is
    /// (lambda_l + eps)^(p/4 - 1/2) v_l.
    columns: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
}

impl FilterBank {
    pub fn grid(&self) -> KGrid {
        self.grid
    }

    pub fn support(&self) -> SupportSet {
        self.support
    }

    pub fn count(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn column(&self, l: usize) -> Vec<Complex64> {
        self.columns.column(l).iter().cloned().collect()
    }

    /// Gram eigenvalues, clamped to be nonnegative, in the column order of
    /// the bank.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(0.0, f64::max)
    }
}

/// Eigendecomposition-based weight square root: the full bank of |Delta|
/// scaled eigenvector columns of the Gram matrix, satisfying
/// sum_l h_l h_l* = (G + eps I)^(p/2 - 1).
pub fn weight_sqrt_columns(
    gram: &DMatrix<Complex64>,
    p: f64,
    eps: f64,
    grid: KGrid,
    support: SupportSet,
) -> Result<FilterBank> {
    check_p(p)?;
    if eps <= 0.0 {
        return Err(GslrError::InvalidParam(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if gram.nrows() != gram.ncols() || gram.nrows() != support.len() {
        return Err(GslrError::ShapeMismatch(format!(
            "gram is {}x{}, filter support holds {} indices",
            gram.nrows(),
            gram.ncols(),
            support.len()
        )));
    }
    let scale = gram.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(gram);
    if dev > 1e-10 * scale {
        return Err(GslrError::NotHermitian(dev));
    }
    let eig = hermitian_part(gram).symmetric_eigen();
    let n = support.len();
    let mut columns = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for l in 0..n {
        let lam = eig.eigenvalues[l].max(0.0);
        eigenvalues.push(lam);
        let s = (lam + eps).powf(p / 4.0 - 0.5);
        for r in 0..n {
            columns[(r, l)] = eig.eigenvectors[(r, l)] * s;
        }
    }
    Ok(FilterBank {
        grid,
        support,
        columns,
        eigenvalues,
    })
}

fn hermitian_deviation(g: &DMatrix<Complex64>) -> f64 {
    let n = g.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((g[(i, j)] - g[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Nonnegative spatial diagonal built from a filter bank: one value per
/// spatial location, the sum over filters of |mu_l(r)|^2.
#[derive(Debug, Clone)]
pub struct SpectrumMask {
    grid: KGrid,
    values: Vec<f64>,
}

impl SpectrumMask {
    pub fn grid(&self) -> KGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All-zero mask (no filter penalty).
    pub fn zeros(grid: KGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: KGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GslrError::ShapeMismatch(format!(
                "mask needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(GslrError::InvalidParam(
                "spectrum mask entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { grid, values })
    }
}

/// Sum-of-squares spectrum of a filter bank.
///
/// Each column is zero-padded onto the grid and transformed by the inverse
/// DFT normalized so that a unit filter (delta at the support origin) yields
/// mu identically 1; the mask entry at r is sum_l |mu_l(r)|^2.
pub fn filter_spectrum_mask(bank: &FilterBank) -> Result<SpectrumMask> {
    let grid = bank.grid();
    let support = bank.support();
    // the support must lie inside the grid
    valid_index_set(&grid, &support)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut values = vec![0.0; grid.len()];
    let mut padded = vec![Complex64::new(0.0, 0.0); grid.len()];
    for l in 0..bank.count() {
        for v in padded.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for (slot, (kx, ky)) in support.iter().enumerate() {
            let gslot = grid.slot(kx, ky).expect("support inside grid");
            padded[gslot] = bank.columns()[(slot, l)];
        }
        // unnormalized inverse DFT: delta at k = 0 maps to all-ones
        let mut mu = fft::ifftshift2(&padded, nx, ny);
        fft::fft2_raw(&mut mu, nx, ny, FftDirection::Inverse);
        for (dst, m) in values.iter_mut().zip(mu.iter()) {
            *dst += m.norm_sqr();
        }
    }
    SpectrumMask::from_values(grid, values)
}
