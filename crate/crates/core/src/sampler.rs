//! Full iteration schemes and the single-chain driver.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asis::{gis_nc_parameter_block, AcceptanceStats, BlockConfig, ObsModel};
use crate::ensemble::{ens1_update, ens2_update, PoolConfig};
use crate::error::{Result, SvError};
use crate::kalman::ffbs_sample;
use crate::mixture::{importance_log_weight, sample_indicators, IndicatorPath, MixtureTable, INITIAL_COMPONENT};
use crate::model::{phi_of_gamma, simulate_latent, Dataset, PriorSpec, TransformedParams};
use crate::par::Execution;
use crate::rng::RandomStream;

/// Starting values used for every chain.
pub const INITIAL_C: f64 = 0.0;
pub const INITIAL_GAMMA: f64 = 1.39;
pub const INITIAL_ETA: f64 = -3.29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "KF")]
    Kf,
    #[serde(rename = "ENS1")]
    Ens1,
    #[serde(rename = "ENS2")]
    Ens2,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Kf, Scheme::Ens1, Scheme::Ens2];

    pub fn uses_ensemble(self) -> bool {
        !matches!(self, Scheme::Kf)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Kf => "KF",
            Scheme::Ens1 => "ENS1",
            Scheme::Ens2 => "ENS2",
        })
    }
}

impl FromStr for Scheme {
    type Err = SvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "KF" => Ok(Scheme::Kf),
            "ENS1" => Ok(Scheme::Ens1),
            "ENS2" => Ok(Scheme::Ens2),
            other => Err(SvError::Config(format!("unknown scheme '{other}' (expected KF, ENS1 or ENS2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub block: BlockConfig,
    pub pool: PoolConfig,
    pub ens_gamma_sd: f64,
    pub iterations: usize,
    pub burn_in: f64,
    pub seed: u64,
    pub prior: PriorSpec,
    pub table: MixtureTable,
    /// Number of post-burn-in iterations averaged for the per-iteration time.
    pub timing_window: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Kf,
            block: BlockConfig::default(),
            pool: PoolConfig::default(),
            ens_gamma_sd: 1.0,
            iterations: 20_000,
            burn_in: 0.10,
            seed: 1,
            prior: PriorSpec::default(),
            table: MixtureTable::omori(),
            timing_window: 100,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        self.block.validate()?;
        self.pool.validate()?;
        self.prior.validate()?;
        if self.block.n_metropolis == 0 {
            return Err(SvError::Config("n_metropolis must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(SvError::Config(format!("burn_in must be in [0, 1), got {}", self.burn_in)));
        }
        if !(self.ens_gamma_sd >= 0.0 && self.ens_gamma_sd.is_finite()) {
            return Err(SvError::Config("ens_gamma_sd must be finite and non-negative".into()));
        }
        if self.timing_window == 0 {
            return Err(SvError::Config("timing_window must be >= 1".into()));
        }
        Ok(())
    }

    pub fn burn_in_iterations(&self) -> usize {
        (self.burn_in * self.iterations as f64).floor() as usize
    }
}

/// Full MCMC state. `x` is non-centred between iterations; `r` is present
/// only for the KF scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub t: TransformedParams,
    pub x: Vec<f64>,
    pub r: Option<IndicatorPath>,
    pub iteration: u64,
    pub stats: AcceptanceStats,
}

impl ChainState {
    /// Prior-mean parameters, x drawn from the stationary AR(1) law at the
    /// starting gamma, all indicators at the median-matching component.
    pub fn initial(scheme: Scheme, n: usize, rng: &mut RandomStream) -> Self {
        let x = simulate_latent(phi_of_gamma(INITIAL_GAMMA), n, rng);
        Self {
            t: TransformedParams::new(INITIAL_C, INITIAL_GAMMA, INITIAL_ETA),
            x,
            r: (scheme == Scheme::Kf).then(|| IndicatorPath::constant(n, INITIAL_COMPONENT)),
            iteration: 0,
            stats: AcceptanceStats::default(),
        }
    }
}

/// FFBS given the indicators, the parameter block under the mixture
/// approximation, then fresh indicators.
pub fn kf_iteration(state: &mut ChainState, dataset: &Dataset, cfg: &SchemeConfig, rng: &mut RandomStream) -> Result<()> {
    let r = state
        .r
        .take()
        .ok_or_else(|| SvError::Config("KF iteration needs mixture indicators".into()))?;
    state.x = ffbs_sample(dataset, &r, &state.t, &cfg.table, rng)?.values;
    let obs = ObsModel::MixtureApprox {
        indicators: &r,
        table: &cfg.table,
    };
    state.t = gis_nc_parameter_block(state.t, &mut state.x, dataset, obs, &cfg.prior, &cfg.block, rng, &mut state.stats)?;
    state.r = Some(sample_indicators(dataset, &state.x, state.t.c, state.t.sigma(), &cfg.table, rng)?);
    state.iteration += 1;
    Ok(())
}

pub fn ens1_iteration(
    state: &mut ChainState,
    dataset: &Dataset,
    cfg: &SchemeConfig,
    exec: Execution,
    rng: &mut RandomStream,
) -> Result<()> {
    let (t, x) = ens1_update(dataset, state.t, &state.x, &cfg.prior, &cfg.pool, exec, rng)?;
    state.x = x;
    exact_block(state, t, dataset, cfg, rng)
}

pub fn ens2_iteration(
    state: &mut ChainState,
    dataset: &Dataset,
    cfg: &SchemeConfig,
    exec: Execution,
    rng: &mut RandomStream,
) -> Result<()> {
    let (t, x, _) = ens2_update(
        dataset,
        state.t,
        &state.x,
        &cfg.prior,
        &cfg.pool,
        cfg.ens_gamma_sd,
        exec,
        rng,
        &mut state.stats.ensemble_gamma,
    )?;
    state.x = x;
    exact_block(state, t, dataset, cfg, rng)
}

fn exact_block(
    state: &mut ChainState,
    t: TransformedParams,
    dataset: &Dataset,
    cfg: &SchemeConfig,
    rng: &mut RandomStream,
) -> Result<()> {
    state.t = gis_nc_parameter_block(t, &mut state.x, dataset, ObsModel::Exact, &cfg.prior, &cfg.block, rng, &mut state.stats)?;
    state.iteration += 1;
    Ok(())
}

/// One iteration of `cfg.scheme`.
pub fn iterate(
    state: &mut ChainState,
    dataset: &Dataset,
    cfg: &SchemeConfig,
    exec: Execution,
    rng: &mut RandomStream,
) -> Result<()> {
    match cfg.scheme {
        Scheme::Kf => kf_iteration(state, dataset, cfg, rng),
        Scheme::Ens1 => ens1_iteration(state, dataset, cfg, exec, rng),
        Scheme::Ens2 => ens2_iteration(state, dataset, cfg, exec, rng),
    }
}

/// Per-iteration draws of one chain plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub scheme: Scheme,
    pub master_seed: u64,
    pub stream_id: u64,
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
    /// Importance log-weights correcting the mixture approximation; zero
    /// for the ensemble schemes.
    pub log_weight: Vec<f64>,
    /// Wall-clock seconds spent in each iteration.
    pub seconds: Vec<f64>,
    /// Mean seconds per iteration over the timing window.
    pub seconds_per_iter: f64,
    pub acceptance: AcceptanceStats,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Series for parameter index 0 = c, 1 = gamma, 2 = eta.
    pub fn param(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.c,
            1 => &self.gamma,
            2 => &self.eta,
            _ => panic!("parameter index {k} out of range"),
        }
    }
}

/// Runs `cfg.iterations` iterations from the standard starting point.
pub fn run_chain(cfg: &SchemeConfig, dataset: &Dataset, exec: Execution, rng: &mut RandomStream) -> Result<ChainTrace> {
    cfg.validate()?;
    let n = cfg.iterations;
    let mut trace = ChainTrace {
        scheme: cfg.scheme,
        master_seed: rng.master_seed(),
        stream_id: rng.stream_id(),
        c: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        log_weight: Vec::with_capacity(n),
        seconds: Vec::with_capacity(n),
        seconds_per_iter: f64::NAN,
        acceptance: AcceptanceStats::default(),
    };
    if n == 0 {
        return Ok(trace);
    }
    let mut state = ChainState::initial(cfg.scheme, dataset.len(), rng);
    for _ in 0..n {
        let start = Instant::now();
        iterate(&mut state, dataset, cfg, exec, rng)?;
        let lw = if cfg.scheme == Scheme::Kf {
            importance_log_weight(dataset, &state.x, state.t.c, state.t.sigma(), &cfg.table)?
        } else {
            0.0
        };
        trace.seconds.push(start.elapsed().as_secs_f64());
        trace.c.push(state.t.c);
        trace.gamma.push(state.t.gamma);
        trace.eta.push(state.t.eta);
        trace.log_weight.push(lw);
    }
    trace.seconds_per_iter = timing_average(&trace.seconds, cfg.burn_in_iterations(), cfg.timing_window);
    trace.acceptance = state.stats;
    Ok(trace)
}

/// Mean of `window` timings starting at `from`, shifted back when the run
/// is too short to hold the whole window.
fn timing_average(seconds: &[f64], from: usize, window: usize) -> f64 {
    let end = (from + window).min(seconds.len());
    let start = end.saturating_sub(window);
    let s = &seconds[start..end];
    s.iter().sum::<f64>() / s.len() as f64
}
