//! Drives the compiled binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn gslr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gslr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_workflow_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    assert_ok(&gslr(d, &["mask", "--grid", "32x32", "--out", "mask.arr", "full"]));
    assert_ok(&gslr(
        d,
        &[
            "phantom",
            "--grid",
            "32x32",
            "--kind",
            "mixed",
            "--out-prefix",
            "ph",
            "--seed",
            "5",
        ],
    ));

    let recon = gslr(
        d,
        &[
            "recon",
            "--mask",
            "mask.arr",
            "--image",
            "ph_image.arr",
            "--truth",
            "ph_image.arr",
            "--lambda1",
            "1e-8",
            "--lambda2",
            "1e-8",
            "--filter1",
            "3x3",
            "--filter2",
            "3x3",
            "--outer-iters",
            "4",
            "--admm-iters",
            "8",
            "--output-dir",
            "out",
        ],
    );
    assert_ok(&recon);
    let text = stdout(&recon);
    let snr: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("snr_db = "))
        .expect("snr line")
        .trim()
        .parse()
        .unwrap();
    assert!(snr > 60.0, "noiseless full sampling SNR {snr}");

    // standalone metrics agrees with the emitted record
    let metrics = gslr(
        d,
        &["metrics", "--recon", "out/rho.arr", "--truth", "ph_image.arr"],
    );
    assert_ok(&metrics);
    let snr2: f64 = stdout(&metrics)
        .lines()
        .find_map(|l| l.strip_prefix("snr_db = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((snr - snr2).abs() < 1e-6);

    // PGM export of the magnitude
    let export = gslr(
        d,
        &[
            "export",
            "--input",
            "out/rho.arr",
            "--out",
            "rho_mag.pgm",
            "--magnitude",
        ],
    );
    assert_ok(&export);
    let pgm = std::fs::read(d.join("rho_mag.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 32\n255\n"));
    assert_eq!(pgm.len(), b"P5\n32 32\n255\n".len() + 32 * 32);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&gslr(d, &["mask", "--grid", "16x16", "--out", "mask.arr", "full"]));
    assert_ok(&gslr(
        d,
        &[
            "phantom", "--grid", "16x16", "--kind", "disk_pc", "--out-prefix", "ph",
        ],
    ));
    std::fs::write(
        d.join("run.cfg"),
        "mask = mask.arr\nimage = ph_image.arr\nlambda1 = 1e-8\nlambda2 = 1e-8\n\
         filter1 = 3x3\nfilter2 = 3x3\nouter_iters = 2\nadmm_iters = 4\n\
         mode = GSLR\noutput_dir = out_a\n",
    )
    .unwrap();
    // config alone
    let a = gslr(d, &["recon", "--config", "run.cfg"]);
    assert_ok(&a);
    assert!(stdout(&a).contains("mode = GSLR"));
    // flag overrides the mode and output dir
    let b = gslr(
        d,
        &[
            "recon",
            "--config",
            "run.cfg",
            "--mode",
            "SLA1",
            "--output-dir",
            "out_b",
        ],
    );
    assert_ok(&b);
    assert!(stdout(&b).contains("mode = SLA1"));
    assert!(d.join("out_a/metrics.txt").exists());
    assert!(d.join("out_b/metrics.txt").exists());
}

#[test]
fn missing_input_yields_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = gslr(
        dir.path(),
        &["recon", "--mask", "nope.arr", "--kspace", "also_nope.arr"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("input not found"), "stderr: {err}");
}

#[test]
fn mask_generators_report_acceleration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let radial = gslr(
        d,
        &["mask", "--grid", "64x64", "--out", "r.arr", "radial", "--spokes", "2"],
    );
    assert_ok(&radial);
    assert!(stdout(&radial).contains("sampled = 127"));

    let vd = gslr(
        d,
        &[
            "mask", "--grid", "64x64", "--out", "v.arr", "vd", "--accel", "2", "--seed", "3",
        ],
    );
    assert_ok(&vd);
    let accel: f64 = stdout(&vd)
        .lines()
        .find_map(|l| l.strip_prefix("acceleration = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((accel - 2.0).abs() < 0.2, "acceleration {accel}");
}
