//! End-to-end plumbing: synthetic phantoms, array/PGM file formats, flat
//! run configs, and the multi-coil reconstruction driver.

pub mod array_file;
pub mod config;
pub mod pgm;
pub mod synthetic;

pub use array_file::{read_array, read_array_bytes, write_array, write_array_bytes, ArrayFile,
    ArrayPayload, Dtype};
pub use config::{parse_config_file, parse_config_str, RunConfig};
pub use pgm::{export_grayscale, grayscale_bytes};
pub use synthetic::{make_synthetic, Synthetic, SyntheticKind, SyntheticSpec, SyntheticSplit};

use crate::error::{GslrError, Result};
use crate::grid::{fft2_unitary, KArray, KGrid};
use crate::sampling::{acceleration, measure, snr_db, NoiseModel};
use crate::solver::{irls_reconstruct, ReconResult};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Pointwise root-sum-of-squares combination of per-coil images into a
/// real-valued image (stored with zero imaginary part).
pub fn combine_coils_sos(images: &[KArray]) -> Result<KArray> {
    let first = images
        .first()
        .ok_or_else(|| GslrError::InvalidParam("no coil images supplied".into()))?;
    let grid = first.grid();
    for img in images {
        if img.grid() != grid || img.channels() != first.channels() {
            return Err(GslrError::ShapeMismatch(
                "coil images differ in shape".into(),
            ));
        }
    }
    let mut out = KArray::zeros(grid, first.channels());
    for img in images {
        for (acc, v) in out.data_mut().iter_mut().zip(img.data()) {
            acc.re += v.norm_sqr();
        }
    }
    for v in out.data_mut() {
        *v = Complex64::new(v.re.sqrt(), 0.0);
    }
    Ok(out)
}

/// Magnitude of the centered (Pearson) correlation between two arrays.
/// Returns 0 when either argument is constant.
pub fn correlation(a: &KArray, b: &KArray) -> Result<f64> {
    if a.grid() != b.grid() || a.channels() != b.channels() {
        return Err(GslrError::ShapeMismatch(
            "correlation operands differ in shape".into(),
        ));
    }
    let n = a.data().len() as f64;
    let mean = |x: &KArray| x.data().iter().sum::<Complex64>() / n;
    let (ma, mb) = (mean(a), mean(b));
    let mut dot = Complex64::new(0.0, 0.0);
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&va, &vb) in a.data().iter().zip(b.data()) {
        let (ca, cb) = (va - ma, vb - mb);
        dot += ca.conj() * cb;
        na += ca.norm_sqr();
        nb += cb.norm_sqr();
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot.norm() / (na * nb).sqrt())
}

fn extract_channel(x: &KArray, c: usize) -> KArray {
    KArray::from_vec(x.grid(), 1, x.channel(c).to_vec()).expect("channel slice is valid")
}

fn stack_channels(grid: KGrid, parts: &[KArray]) -> KArray {
    let mut data = Vec::with_capacity(parts.len() * grid.len());
    for p in parts {
        data.extend_from_slice(p.channel(0));
    }
    KArray::from_vec(grid, parts.len(), data).expect("stacked channels are valid")
}

/// Everything a reconstruction run produced: the per-coil solver results and
/// the ordered metrics record that was written to disk.
#[derive(Debug)]
pub struct ReconArtifacts {
    pub results: Vec<ReconResult>,
    pub metrics: Vec<(String, String)>,
    pub output_dir: PathBuf,
}

fn load_spatial(path: &Path, grid: KGrid, what: &str) -> Result<KArray> {
    let arr = read_array(path)?.to_karray()?;
    if arr.grid() != grid {
        return Err(GslrError::ShapeMismatch(format!(
            "{what} grid {}x{} differs from mask grid {}x{}",
            arr.grid().nx(),
            arr.grid().ny(),
            grid.nx(),
            grid.ny()
        )));
    }
    Ok(arr)
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Runs the configured reconstruction end to end: loads inputs, reconstructs
/// each coil independently, combines, and writes arrays, grayscale exports,
/// and a metrics record into the output directory.
pub fn run_recon(cfg: &RunConfig) -> Result<ReconArtifacts> {
    let mask_path = cfg
        .mask
        .as_ref()
        .ok_or_else(|| GslrError::Config("a mask path is required".into()))?;
    let mask = read_array(mask_path)?.to_mask()?;
    let grid = mask.grid();

    let b = match (&cfg.kspace, &cfg.image) {
        (Some(kp), _) => load_spatial(kp, grid, "k-space")?,
        (None, Some(ip)) => {
            let img = load_spatial(ip, grid, "image")?;
            let noise = NoiseModel {
                sigma: cfg.noise_sigma,
                seed: cfg.seed,
            };
            measure(&fft2_unitary(&img), &mask, &noise)?
        }
        (None, None) => {
            return Err(GslrError::Config(
                "either a kspace or an image input is required".into(),
            ))
        }
    };
    let coils = b.channels();

    let truth = cfg
        .truth
        .as_ref()
        .map(|p| load_spatial(p, grid, "truth"))
        .transpose()?;
    if let Some(t) = &truth {
        if t.channels() != coils {
            return Err(GslrError::ShapeMismatch(format!(
                "truth has {} channel(s), data has {coils}",
                t.channels()
            )));
        }
    }
    let truth1 = cfg
        .truth1
        .as_ref()
        .map(|p| load_spatial(p, grid, "truth1"))
        .transpose()?;
    let truth2 = cfg
        .truth2
        .as_ref()
        .map(|p| load_spatial(p, grid, "truth2"))
        .transpose()?;

    let mut results = Vec::with_capacity(coils);
    for c in 0..coils {
        let bc = extract_channel(&b, c);
        let tc = truth.as_ref().map(|t| extract_channel(t, c));
        results.push(irls_reconstruct(&bc, &mask, &cfg.recon, tc.as_ref())?);
    }

    std::fs::create_dir_all(&cfg.output_dir)?;
    let out = |name: &str| cfg.output_dir.join(name);

    let rho: Vec<KArray> = results.iter().map(|r| r.rho.clone()).collect();
    let rho1: Vec<KArray> = results.iter().map(|r| r.rho1.clone()).collect();
    let rho2: Vec<KArray> = results.iter().map(|r| r.rho2.clone()).collect();
    let rho_hat: Vec<KArray> = results.iter().map(|r| r.rho_hat.clone()).collect();

    let mut prov = BTreeMap::new();
    prov.insert("generator".into(), "recon".into());
    prov.insert("mode".into(), cfg.recon.mode.as_str().into());
    prov.insert("seed".into(), cfg.seed.to_string());
    for (name, parts) in [
        ("rho.arr", &rho),
        ("rho1.arr", &rho1),
        ("rho2.arr", &rho2),
        ("kspace.arr", &rho_hat),
    ] {
        let stacked = stack_channels(grid, parts);
        write_array(&out(name), &ArrayFile::from_karray(&stacked, prov.clone()))?;
    }

    // grayscale exports of the coil-combined magnitudes
    let combined = combine_coils_sos(&rho)?;
    export_grayscale(&combined, &out("rho.pgm"), None)?;
    export_grayscale(&combine_coils_sos(&rho1)?, &out("rho1.pgm"), None)?;
    export_grayscale(&combine_coils_sos(&rho2)?, &out("rho2.pgm"), None)?;

    let mut metrics: Vec<(String, String)> = vec![
        ("mode".into(), cfg.recon.mode.as_str().into()),
        ("coils".into(), coils.to_string()),
        ("acceleration".into(), fmt(acceleration(&mask))),
        ("lambda1".into(), fmt(cfg.recon.lambda1)),
        ("lambda2".into(), fmt(cfg.recon.lambda2)),
        ("p".into(), fmt(cfg.recon.p)),
        (
            "filter1".into(),
            format!("{}x{}", cfg.recon.filter1.0, cfg.recon.filter1.1),
        ),
        (
            "filter2".into(),
            format!("{}x{}", cfg.recon.filter2.0, cfg.recon.filter2.1),
        ),
        ("outer_iters".into(), cfg.recon.outer_iters.to_string()),
        ("admm_iters".into(), cfg.recon.admm_iters.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("noise_sigma".into(), fmt(cfg.noise_sigma)),
    ];

    if let Some(t) = &truth {
        let snr = if coils == 1 {
            snr_db(&rho[0], &extract_channel(t, 0))?
        } else {
            let truth_coils: Vec<KArray> =
                (0..coils).map(|c| extract_channel(t, c)).collect();
            let truth_sos = combine_coils_sos(&truth_coils)?;
            snr_db(&combined, &truth_sos)?
        };
        metrics.push(("snr_db".into(), fmt(snr)));

        let error = {
            let reference = if coils == 1 {
                extract_channel(t, 0)
            } else {
                let truth_coils: Vec<KArray> =
                    (0..coils).map(|c| extract_channel(t, c)).collect();
                combine_coils_sos(&truth_coils)?
            };
            let recon_mag = combine_coils_sos(&rho)?;
            let mut err = KArray::zeros(grid, 1);
            for ((e, r), tv) in err
                .data_mut()
                .iter_mut()
                .zip(recon_mag.data())
                .zip(reference.data())
            {
                e.re = (r.re - tv.norm()).abs();
            }
            err
        };
        write_array(
            &out("error.arr"),
            &ArrayFile::from_karray(&error, prov.clone()),
        )?;
        export_grayscale(&error, &out("error.pgm"), None)?;
    }

    if let (Some(t1), Some(t2)) = (&truth1, &truth2) {
        let rho2_ref = &rho2[0];
        let corr_pl = correlation(rho2_ref, t2)?;
        let corr_pc = correlation(rho2_ref, t1)?;
        metrics.push(("corr_rho2_pl".into(), fmt(corr_pl)));
        metrics.push(("corr_rho2_pc".into(), fmt(corr_pc)));
        metrics.push((
            "decomposition_ok".into(),
            (corr_pl > corr_pc).to_string(),
        ));
    }

    let history: Vec<String> = results[0].objective.iter().map(|&v| fmt(v)).collect();
    metrics.push(("objective".into(), history.join(",")));
    if let Some((r1, r2)) = results[0].constraint_residuals.last() {
        metrics.push(("residual1".into(), fmt(*r1)));
        metrics.push(("residual2".into(), fmt(*r2)));
    }

    let record: String = metrics
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    std::fs::write(out("metrics.txt"), record)?;

    Ok(ReconArtifacts {
        results,
        metrics,
        output_dir: cfg.output_dir.clone(),
    })
}
