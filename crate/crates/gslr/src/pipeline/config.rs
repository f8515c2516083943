//! Flat key=value reconstruction configs.
//!
//! One decision surface, no nesting: every solver hyperparameter and path is
//! a single documented key. `#` starts a comment; later CLI flags override
//! parsed values field by field.

use crate::error::{GslrError, Result};
use crate::solver::{Mode, ReconConfig};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;

/// A full reconstruction run: solver hyperparameters, input paths, noise
/// model, and output location.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub recon: ReconConfig,
    /// Measured k-space input (channels = coils).
    pub kspace: Option<PathBuf>,
    /// Spatial image input, measured through the mask (with optional noise)
    /// when no k-space file is given.
    pub image: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Ground-truth piecewise-constant component (spatial).
    pub truth1: Option<PathBuf>,
    /// Ground-truth piecewise-linear component (spatial).
    pub truth2: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Relative noise level applied when measuring an image input.
    pub noise_sigma: f64,
    /// Noise seed.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            recon: ReconConfig::default(),
            kspace: None,
            image: None,
            mask: None,
            truth: None,
            truth1: None,
            truth2: None,
            output_dir: PathBuf::from("."),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

pub fn parse_filter_dims(s: &str) -> Result<(usize, usize)> {
    let parse_one = |t: &str| -> Result<usize> {
        t.parse::<usize>()
            .map_err(|_| GslrError::Config(format!("bad filter dimension '{t}'")))
    };
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse_one(a)?, parse_one(b)?)),
        None => {
            let n = parse_one(s)?;
            Ok((n, n))
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| GslrError::Config(format!("bad value '{value}' for key '{key}'")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        Ok(Some(parse_num::<f64>(key, value)?))
    }
}

/// Parses config text. Unknown or duplicate keys are errors.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            GslrError::Config(format!("line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(GslrError::Config(format!(
                "line {}: duplicate key '{key}'",
                lineno + 1
            )));
        }
        apply_key(&mut cfg, key, value)?;
    }
    Ok(cfg)
}

/// Sets a single key on the config; shared by the file parser and the CLI
/// flag overrides.
pub fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "lambda1" => cfg.recon.lambda1 = parse_num(key, value)?,
        "lambda2" => cfg.recon.lambda2 = parse_num(key, value)?,
        "p" => cfg.recon.p = parse_num(key, value)?,
        "filter1" => cfg.recon.filter1 = parse_filter_dims(value)?,
        "filter2" => cfg.recon.filter2 = parse_filter_dims(value)?,
        "gamma1" => cfg.recon.gamma1 = parse_num(key, value)?,
        "gamma2" => cfg.recon.gamma2 = parse_num(key, value)?,
        "outer_iters" => cfg.recon.outer_iters = parse_num(key, value)?,
        "admm_iters" => cfg.recon.admm_iters = parse_num(key, value)?,
        "eps0" => cfg.recon.eps0 = parse_optional(key, value)?,
        "eps_floor" => cfg.recon.eps_floor = parse_optional(key, value)?,
        "eps_eta" => cfg.recon.eps_eta = parse_num(key, value)?,
        "mode" => cfg.recon.mode = Mode::from_str(value)?,
        "seed" => cfg.seed = parse_num(key, value)?,
        "noise_sigma" => cfg.noise_sigma = parse_num(key, value)?,
        "kspace" => cfg.kspace = Some(PathBuf::from(value)),
        "image" => cfg.image = Some(PathBuf::from(value)),
        "mask" => cfg.mask = Some(PathBuf::from(value)),
        "truth" => cfg.truth = Some(PathBuf::from(value)),
        "truth1" => cfg.truth1 = Some(PathBuf::from(value)),
        "truth2" => cfg.truth2 = Some(PathBuf::from(value)),
        "output_dir" => cfg.output_dir = PathBuf::from(value),
        other => {
            return Err(GslrError::Config(format!("unknown key '{other}'")));
        }
    }
    Ok(())
}

pub fn parse_config_file(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            GslrError::InputNotFound(path.display().to_string())
        } else {
            GslrError::Io(e)
        }
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# reconstruction settings
lambda1 = 100.0
lambda2 = 250   # inline comment
p = 0.5
filter1 = 7x5
filter2 = 3
mode = sla2
eps0 = auto
eps_floor = 1e-9
outer_iters = 12
admm_iters = 8
seed = 42
noise_sigma = 0.01
kspace = data/b.arr
mask = data/mask.arr
output_dir = out
";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.recon.lambda1, 100.0);
        assert_eq!(cfg.recon.lambda2, 250.0);
        assert_eq!(cfg.recon.p, 0.5);
        assert_eq!(cfg.recon.filter1, (7, 5));
        assert_eq!(cfg.recon.filter2, (3, 3));
        assert_eq!(cfg.recon.mode, Mode::Sla2);
        assert_eq!(cfg.recon.eps0, None);
        assert_eq!(cfg.recon.eps_floor, Some(1e-9));
        assert_eq!(cfg.recon.outer_iters, 12);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.noise_sigma, 0.01);
        assert_eq!(cfg.kspace.unwrap(), PathBuf::from("data/b.arr"));
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse_config_str("nonsense line").is_err());
        assert!(parse_config_str("unknown_key = 3").is_err());
        assert!(parse_config_str("lambda1 = notanumber").is_err());
        assert!(parse_config_str("lambda1 = 1\nlambda1 = 2").is_err());
        assert!(parse_config_str("mode = tv").is_err());
        assert!(parse_config_str("filter1 = 3xx3").is_err());
    }

    #[test]
    fn empty_config_is_defaults() {
        let cfg = parse_config_str("\n# only comments\n").unwrap();
        assert_eq!(cfg.recon.lambda1, ReconConfig::default().lambda1);
        assert!(cfg.kspace.is_none());
    }
}
