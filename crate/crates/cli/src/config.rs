//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown or repeated keys are errors. `emit` writes every key in
//! a fixed order, and parsing that text gives back the same config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use sv_core::ensemble::PoolConfig;
use sv_core::{Params, SchemeConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given more than once")]
    Duplicate(String),
    #[error("key `{key}`: cannot parse {value:?}: {msg}")]
    Value { key: String, value: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Simulate { params: Params, n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub sampler: SchemeConfig,
    pub n_runs: usize,
    pub out: PathBuf,
    pub sweep_lx: Vec<usize>,
    pub sweep_leta: Vec<usize>,
    /// Write measured seconds into the trace instead of zeros. Traces are
    /// then no longer reproducible byte for byte.
    pub wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Simulate {
                params: Params::new(0.5, 0.98, 0.15).expect("valid defaults"),
                n: 1000,
                seed: 1,
            },
            sampler: SchemeConfig::default(),
            n_runs: 5,
            out: PathBuf::from("out"),
            sweep_lx: vec![10, 30, 50, 70],
            sweep_leta: vec![1, 10, 30, 50],
            wall_time: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "data_file",
    "sim_c",
    "sim_phi",
    "sim_sigma2",
    "sim_n",
    "data_seed",
    "scheme",
    "iterations",
    "burn_in",
    "seed",
    "n_runs",
    "out",
    "n_metropolis",
    "nc_sd_c",
    "nc_sd_gamma",
    "nc_sd_eta",
    "c_sd_c",
    "c_sd_gamma",
    "c_sd_eta",
    "l_x",
    "l_eta",
    "pool_scale",
    "ens_gamma_sd",
    "timing_window",
    "prior_c_mean",
    "prior_c_sd",
    "prior_phi_lo",
    "prior_phi_hi",
    "prior_ig_alpha",
    "prior_ig_beta",
    "sweep_lx",
    "sweep_leta",
    "wall_time",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Applies one `key = value` setting; used for files and command-line overrides alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.sampler;
        match key {
            "data_file" => self.data = DataSource::File(PathBuf::from(value)),
            "sim_c" | "sim_phi" | "sim_sigma2" | "sim_n" | "data_seed" => {
                let DataSource::Simulate { params, n, seed } = &mut self.data else {
                    return Err(ConfigError::Invalid(format!("`{key}` conflicts with data_file")));
                };
                match key {
                    "sim_c" => params.c = parse_value(key, value)?,
                    "sim_phi" => params.phi = parse_value(key, value)?,
                    "sim_sigma2" => params.sigma2 = parse_value(key, value)?,
                    "sim_n" => *n = parse_value(key, value)?,
                    _ => *seed = parse_value(key, value)?,
                }
            }
            "scheme" => s.scheme = value.parse().map_err(|e: sv_core::SvError| ConfigError::Value {
                key: key.into(),
                value: value.into(),
                msg: e.to_string(),
            })?,
            "iterations" => s.iterations = parse_value(key, value)?,
            "burn_in" => s.burn_in = parse_value(key, value)?,
            "seed" => s.seed = parse_value(key, value)?,
            "n_runs" => self.n_runs = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "n_metropolis" => s.block.n_metropolis = parse_value(key, value)?,
            "nc_sd_c" => s.block.nc_sds.0 = parse_value(key, value)?,
            "nc_sd_gamma" => s.block.nc_sds.1 = parse_value(key, value)?,
            "nc_sd_eta" => s.block.nc_sds.2 = parse_value(key, value)?,
            "c_sd_c" => s.block.c_sds.0 = parse_value(key, value)?,
            "c_sd_gamma" => s.block.c_sds.1 = parse_value(key, value)?,
            "c_sd_eta" => s.block.c_sds.2 = parse_value(key, value)?,
            "l_x" => s.pool.l_x = parse_value(key, value)?,
            "l_eta" => s.pool.l_eta = parse_value(key, value)?,
            "pool_scale" => s.pool.pool_scale = parse_value(key, value)?,
            "ens_gamma_sd" => s.ens_gamma_sd = parse_value(key, value)?,
            "timing_window" => s.timing_window = parse_value(key, value)?,
            "prior_c_mean" => s.prior.c_mean = parse_value(key, value)?,
            "prior_c_sd" => s.prior.c_sd = parse_value(key, value)?,
            "prior_phi_lo" => s.prior.phi_lo = parse_value(key, value)?,
            "prior_phi_hi" => s.prior.phi_hi = parse_value(key, value)?,
            "prior_ig_alpha" => s.prior.ig_alpha = parse_value(key, value)?,
            "prior_ig_beta" => s.prior.ig_beta = parse_value(key, value)?,
            "sweep_lx" => self.sweep_lx = parse_list(key, value)?,
            "sweep_leta" => self.sweep_leta = parse_list(key, value)?,
            "wall_time" => self.wall_time = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let DataSource::Simulate { params, n, .. } = &self.data {
            params.validate().map_err(|e| ConfigError::Invalid(format!("simulation parameters: {e}")))?;
            if *n < 3 {
                return Err(ConfigError::Invalid("sim_n must be >= 3".into()));
            }
        }
        if self.n_runs == 0 {
            return Err(ConfigError::Invalid("n_runs must be >= 1".into()));
        }
        if self.sweep_lx.contains(&0) || self.sweep_leta.contains(&0) {
            return Err(ConfigError::Invalid("sweep pool sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// Every key in canonical order.
    pub fn emit(&self) -> String {
        let s = &self.sampler;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.data {
            DataSource::File(p) => kv("data_file", p.display().to_string()),
            DataSource::Simulate { params, n, seed } => {
                kv("sim_c", format!("{:?}", params.c));
                kv("sim_phi", format!("{:?}", params.phi));
                kv("sim_sigma2", format!("{:?}", params.sigma2));
                kv("sim_n", n.to_string());
                kv("data_seed", seed.to_string());
            }
        }
        kv("scheme", s.scheme.to_string());
        kv("iterations", s.iterations.to_string());
        kv("burn_in", format!("{:?}", s.burn_in));
        kv("seed", s.seed.to_string());
        kv("n_runs", self.n_runs.to_string());
        kv("out", self.out.display().to_string());
        kv("n_metropolis", s.block.n_metropolis.to_string());
        kv("nc_sd_c", format!("{:?}", s.block.nc_sds.0));
        kv("nc_sd_gamma", format!("{:?}", s.block.nc_sds.1));
        kv("nc_sd_eta", format!("{:?}", s.block.nc_sds.2));
        kv("c_sd_c", format!("{:?}", s.block.c_sds.0));
        kv("c_sd_gamma", format!("{:?}", s.block.c_sds.1));
        kv("c_sd_eta", format!("{:?}", s.block.c_sds.2));
        kv("l_x", s.pool.l_x.to_string());
        kv("l_eta", s.pool.l_eta.to_string());
        kv("pool_scale", format!("{:?}", s.pool.pool_scale));
        kv("ens_gamma_sd", format!("{:?}", s.ens_gamma_sd));
        kv("timing_window", s.timing_window.to_string());
        kv("prior_c_mean", format!("{:?}", s.prior.c_mean));
        kv("prior_c_sd", format!("{:?}", s.prior.c_sd));
        kv("prior_phi_lo", format!("{:?}", s.prior.phi_lo));
        kv("prior_phi_hi", format!("{:?}", s.prior.phi_hi));
        kv("prior_ig_alpha", format!("{:?}", s.prior.ig_alpha));
        kv("prior_ig_beta", format!("{:?}", s.prior.ig_beta));
        kv("sweep_lx", join(&self.sweep_lx));
        kv("sweep_leta", join(&self.sweep_leta));
        kv("wall_time", self.wall_time.to_string());
        out
    }

    /// Hex SHA-256 of the canonical text, without the output directory so
    /// that moving results does not change it.
    pub fn hash(&self) -> String {
        let canonical: String = self
            .emit()
            .lines()
            .filter(|l| !l.starts_with("out ="))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with different pool sizes, for sweeps.
    pub fn with_pools(&self, l_x: usize, l_eta: usize) -> Self {
        let mut c = self.clone();
        c.sampler.pool = PoolConfig { l_x, l_eta, ..c.sampler.pool };
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sv_core::Scheme;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse_str("scheme = KF\n").unwrap();
        assert_eq!(c.sampler.scheme, Scheme::Kf);
        assert_eq!(c.sampler.block.nc_sds, (0.21, 0.5, 0.36));
        assert_eq!(c.sampler.block.c_sds, (0.105, 0.25, 0.18));
        assert_eq!(c.sampler.block.n_metropolis, 80);
        assert_eq!(c.n_runs, 5);
        let DataSource::Simulate { params, n, .. } = c.data else { panic!() };
        assert_eq!((params.c, params.phi, params.sigma2, n), (0.5, 0.98, 0.15, 1000));
    }

    #[test]
    fn zero_pool_rejected() {
        let e = ExperimentConfig::parse_str("l_x = 0").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)), "{e}");
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert_eq!(
            ExperimentConfig::parse_str("lx = 3").unwrap_err(),
            ConfigError::UnknownKey("lx".into())
        );
        assert_eq!(
            ExperimentConfig::parse_str("l_x = 3\nl_x = 4").unwrap_err(),
            ConfigError::Duplicate("l_x".into())
        );
        assert!(matches!(
            ExperimentConfig::parse_str("just words").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        let e = ExperimentConfig::parse_str("iterations = many").unwrap_err();
        assert!(e.to_string().contains("iterations"));
    }

    #[test]
    fn emit_parse_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("scheme", "ENS2").unwrap();
        c.set("pool_scale", "1.7").unwrap();
        c.set("sweep_lx", "5, 6").unwrap();
        c.set("nc_sd_c", "0.1").unwrap();
        c.set("wall_time", "true").unwrap();
        let back = ExperimentConfig::parse_str(&c.emit()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());

        let mut f = ExperimentConfig::default();
        f.set("data_file", "prices.csv").unwrap();
        assert_eq!(ExperimentConfig::parse_str(&f.emit()).unwrap(), f);
    }

    #[test]
    fn hash_tracks_settings_but_not_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.set("seed", "2").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
