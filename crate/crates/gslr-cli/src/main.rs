//! Command-line driver: mask generation, phantom synthesis, reconstruction,
//! metrics, and grayscale export.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gslr::grid::{KArray, KGrid};
use gslr::pipeline::config::{apply_key, parse_config_file};
use gslr::pipeline::{
    export_grayscale, make_synthetic, read_array, run_recon, write_array, ArrayFile, RunConfig,
    SyntheticKind, SyntheticSpec,
};
use gslr::sampling::{acceleration, radial_mask, snr_db, variable_density_mask, Mask};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gslr",
    about = "Recovers signals and images from undersampled Fourier measurements \
             by generalized structured low-rank matrix completion",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a sampling mask
    Mask(MaskArgs),
    /// Synthesize a phantom with a controlled edge set
    Phantom(PhantomArgs),
    /// Reconstruct from undersampled measurements
    Recon(ReconArgs),
    /// SNR between a reconstruction and a reference array
    Metrics(MetricsArgs),
    /// Export an array as an 8-bit PGM image
    Export(ExportArgs),
}

fn parse_grid(s: &str) -> Result<KGrid> {
    let (nx, ny) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (a.parse()?, b.parse()?),
        None => (s.parse()?, 1),
    };
    Ok(KGrid::new(nx, ny)?)
}

#[derive(Args)]
struct MaskArgs {
    /// Grid dimensions, e.g. 256x256 or 256 (1-D)
    #[arg(long)]
    grid: String,
    /// Output array file (u8)
    #[arg(long)]
    out: PathBuf,
    #[command(subcommand)]
    generator: MaskGenerator,
}

#[derive(Subcommand)]
enum MaskGenerator {
    /// Uniform-angle radial spokes through DC
    Radial {
        #[arg(long)]
        spokes: usize,
    },
    /// Variable-density random sampling with a fully sampled center
    Vd {
        /// Target acceleration factor (> 1)
        #[arg(long)]
        accel: f64,
        /// Density law exponent
        #[arg(long, default_value_t = 3.0)]
        power: f64,
        /// Fraction of the grid inside the fully sampled center
        #[arg(long, default_value_t = 0.02)]
        center_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fully sampled grid
    Full,
}

fn cmd_mask(args: &MaskArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    let mask = match &args.generator {
        MaskGenerator::Radial { spokes } => radial_mask(grid, *spokes),
        MaskGenerator::Vd {
            accel,
            power,
            center_frac,
            seed,
        } => variable_density_mask(grid, *accel, *power, *center_frac, *seed)?,
        MaskGenerator::Full => Mask::full(grid),
    };
    write_array(&args.out, &ArrayFile::from_mask(&mask))?;
    println!("acceleration = {:.4}", acceleration(&mask));
    println!("sampled = {}", mask.count());
    Ok(())
}

#[derive(Args)]
struct PhantomArgs {
    /// Grid dimensions, e.g. 64x64 or 256 (1-D)
    #[arg(long)]
    grid: String,
    /// disk_pc | trig_region_pc | ramp_pl | mixed
    #[arg(long)]
    kind: String,
    /// Output prefix; writes <prefix>_image.arr and <prefix>_kspace.arr
    /// (plus <prefix>_truth1/2.arr for mixed phantoms)
    #[arg(long)]
    out_prefix: String,
    /// Edge polynomial support, e.g. 3x3
    #[arg(long, default_value = "3x3")]
    support: String,
    #[arg(long, default_value_t = 8)]
    oversample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Profile amplitude (ramp_pl)
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

fn cmd_phantom(args: &PhantomArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    let kind = match args.kind.as_str() {
        "disk_pc" => SyntheticKind::DiskPc,
        "trig_region_pc" => SyntheticKind::TrigRegionPc,
        "ramp_pl" => SyntheticKind::RampPl,
        "mixed" => SyntheticKind::Mixed,
        other => bail!("unknown phantom kind '{other}'"),
    };
    let support = gslr::pipeline::config::parse_filter_dims(&args.support)?;
    let spec = SyntheticSpec {
        kind,
        grid,
        edge_support: support,
        oversampling: args.oversample,
        seed: args.seed,
        amplitude: args.amplitude,
    };
    let ph = make_synthetic(&spec)?;

    let mut prov = BTreeMap::new();
    prov.insert("generator".into(), format!("phantom-{}", args.kind));
    prov.insert("seed".into(), args.seed.to_string());
    prov.insert("oversampling".into(), args.oversample.to_string());
    let write = |suffix: &str, x: &KArray| -> Result<()> {
        let path = PathBuf::from(format!("{}_{suffix}.arr", args.out_prefix));
        write_array(&path, &ArrayFile::from_karray(x, prov.clone()))?;
        println!("wrote {}", path.display());
        Ok(())
    };
    write("image", &ph.image)?;
    write("kspace", &ph.kspace)?;
    if let Some(split) = &ph.split {
        write("truth1", &split.pc_image)?;
        write("truth2", &split.pl_image)?;
    }
    Ok(())
}

#[derive(Args)]
struct ReconArgs {
    /// Config file of key = value lines; flags below override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda1: Option<String>,
    #[arg(long)]
    lambda2: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Filter support for the first-order lifting, e.g. 5x5
    #[arg(long)]
    filter1: Option<String>,
    /// Filter support for the second-order lifting, e.g. 5x5
    #[arg(long)]
    filter2: Option<String>,
    #[arg(long)]
    gamma1: Option<String>,
    #[arg(long)]
    gamma2: Option<String>,
    #[arg(long)]
    outer_iters: Option<String>,
    #[arg(long)]
    admm_iters: Option<String>,
    /// Initial smoothing value or "auto"
    #[arg(long)]
    eps0: Option<String>,
    /// Smoothing floor or "auto"
    #[arg(long)]
    eps_floor: Option<String>,
    #[arg(long)]
    eps_eta: Option<String>,
    /// GSLR | SLA1 | SLA2
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    /// Measured k-space input (.arr)
    #[arg(long)]
    kspace: Option<String>,
    /// Spatial image input, measured through the mask when no k-space given
    #[arg(long)]
    image: Option<String>,
    /// Sampling mask (.arr, u8)
    #[arg(long)]
    mask: Option<String>,
    /// Ground-truth spatial image for SNR
    #[arg(long)]
    truth: Option<String>,
    /// Ground-truth piecewise-constant component
    #[arg(long)]
    truth1: Option<String>,
    /// Ground-truth piecewise-linear component
    #[arg(long)]
    truth2: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
}

fn cmd_recon(args: &ReconArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => RunConfig::default(),
    };
    let overrides: [(&str, &Option<String>); 21] = [
        ("lambda1", &args.lambda1),
        ("lambda2", &args.lambda2),
        ("p", &args.p),
        ("filter1", &args.filter1),
        ("filter2", &args.filter2),
        ("gamma1", &args.gamma1),
        ("gamma2", &args.gamma2),
        ("outer_iters", &args.outer_iters),
        ("admm_iters", &args.admm_iters),
        ("eps0", &args.eps0),
        ("eps_floor", &args.eps_floor),
        ("eps_eta", &args.eps_eta),
        ("mode", &args.mode),
        ("seed", &args.seed),
        ("noise_sigma", &args.noise_sigma),
        ("kspace", &args.kspace),
        ("image", &args.image),
        ("mask", &args.mask),
        ("truth", &args.truth),
        ("truth1", &args.truth1),
        ("truth2", &args.truth2),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            apply_key(&mut cfg, key, v)?;
        }
    }
    if let Some(dir) = &args.output_dir {
        apply_key(&mut cfg, "output_dir", dir)?;
    }
    let artifacts = run_recon(&cfg)?;
    for (k, v) in &artifacts.metrics {
        println!("{k} = {v}");
    }
    Ok(())
}

#[derive(Args)]
struct MetricsArgs {
    /// Reconstructed array
    #[arg(long)]
    recon: PathBuf,
    /// Reference array
    #[arg(long)]
    truth: PathBuf,
    /// Also write the record to this path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let recon = read_array(&args.recon)?.to_karray()?;
    let truth = read_array(&args.truth)?.to_karray()?;
    let snr = snr_db(&recon, &truth)?;
    let record = format!("snr_db = {snr:.12e}\n");
    print!("{record}");
    if let Some(path) = &args.out {
        std::fs::write(path, record).context("writing metrics record")?;
    }
    Ok(())
}

#[derive(Args)]
struct ExportArgs {
    /// Input array (.arr)
    #[arg(long)]
    input: PathBuf,
    /// Output PGM path
    #[arg(long)]
    out: PathBuf,
    /// Window as lo,hi; defaults to [0, max]
    #[arg(long)]
    window: Option<String>,
    /// Channel to export
    #[arg(long, default_value_t = 0)]
    channel: usize,
    /// Export the modulus instead of the real part
    #[arg(long)]
    magnitude: bool,
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let arr = read_array(&args.input)?.to_karray()?;
    if args.channel >= arr.channels() {
        bail!(
            "channel {} out of range ({} available)",
            args.channel,
            arr.channels()
        );
    }
    let mut img = KArray::from_vec(arr.grid(), 1, arr.channel(args.channel).to_vec())?;
    if args.magnitude {
        for v in img.data_mut() {
            *v = Complex64::new(v.norm(), 0.0);
        }
    }
    let window = match &args.window {
        Some(w) => {
            let (lo, hi) = w
                .split_once(',')
                .context("window must be lo,hi")?;
            Some((lo.trim().parse::<f64>()?, hi.trim().parse::<f64>()?))
        }
        None => None,
    };
    export_grayscale(&img, &args.out, window)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mask(args) => cmd_mask(args),
        Command::Phantom(args) => cmd_phantom(args),
        Command::Recon(args) => cmd_recon(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Export(args) => cmd_export(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
