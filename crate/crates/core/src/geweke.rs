//! Joint-distribution ("getting it right") tests of the samplers.
//!
//! Marginal-conditional draws of (theta, x) straight from the prior are
//! compared with a successive-conditional chain that alternates one sampler
//! iteration given y with a fresh draw of y given the state. Both have the
//! prior as their stationary law exactly when the sampler is correct.

use serde::{Deserialize, Serialize};

use crate::diagnostics::act_estimate;
use crate::error::Result;
use crate::mixture::{IndicatorPath, MixtureTable};
use crate::model::{simulate_latent, Dataset, PriorSpec, TransformedParams};
use crate::par::Execution;
use crate::rng::{RandomStream, StreamPurpose};
use crate::sampler::{iterate, ChainState, Scheme, SchemeConfig};
use crate::asis::AcceptanceStats;

/// Test functions of (theta, x). Under the uniform prior on phi, `x_1^2`
/// has infinite mean, so the latent path enters through bounded or
/// standardised summaries.
pub const STAT_NAMES: [&str; 14] = [
    "c",
    "gamma",
    "eta",
    "c^2",
    "gamma^2",
    "eta^2",
    "c*eta",
    "gamma*eta",
    "atan x_1",
    "x_1 sqrt(1-phi^2)",
    "x_1^2 (1-phi^2)",
    "mean innovation^2",
    "S/(1+S), S = sum x^2",
    "atan x_N",
];

fn statistics(t: &TransformedParams, x: &[f64]) -> [f64; 14] {
    let phi = t.phi();
    let n = x.len();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let u1 = x[0] * (1.0 - phi * phi).sqrt();
    let innov = if n > 1 {
        x.windows(2).map(|w| (w[1] - phi * w[0]).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        1.0
    };
    [
        t.c,
        t.gamma,
        t.eta,
        t.c * t.c,
        t.gamma * t.gamma,
        t.eta * t.eta,
        t.c * t.eta,
        t.gamma * t.eta,
        x[0].atan(),
        u1,
        u1 * u1,
        innov,
        sum_sq / (1.0 + sum_sq),
        x[n - 1].atan(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeStat {
    pub name: String,
    pub prior_mean: f64,
    pub prior_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    pub chain_act: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub scheme: Scheme,
    pub cycles: usize,
    pub stats: Vec<GewekeStat>,
    pub acceptance: AcceptanceStats,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }
}

fn draw_prior(prior: &PriorSpec, n: usize, rng: &mut RandomStream) -> (TransformedParams, Vec<f64>) {
    let t = TransformedParams::new(prior.sample_c(rng), prior.sample_gamma(rng), prior.sample_eta(rng));
    let x = simulate_latent(t.phi(), n, rng);
    (t, x)
}

fn draw_indicators(table: &MixtureTable, n: usize, rng: &mut RandomStream) -> Result<IndicatorPath> {
    let r = (0..n)
        .map(|_| rng.categorical(&table.weights).map(|k| k as u8))
        .collect::<Result<Vec<u8>>>()?;
    IndicatorPath::new(r)
}

/// Observations given the state: exact model, or the mixture model given
/// indicators with random signs.
fn draw_data(state: &ChainState, table: &MixtureTable, rng: &mut RandomStream) -> Result<Dataset> {
    let (c, sigma) = (state.t.c, state.t.sigma());
    let y = match &state.r {
        None => state
            .x
            .iter()
            .map(|&x| rng.normal01() * (0.5 * (c + sigma * x)).exp())
            .collect(),
        Some(r) => state
            .x
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let k = r.get(i);
                let ly = c + sigma * x + table.means[k] + table.variances[k].sqrt() * rng.normal01();
                let sign = if rng.uniform01() < 0.5 { -1.0 } else { 1.0 };
                sign * (0.5 * ly).exp()
            })
            .collect(),
    };
    Dataset::from_returns(y)
}

fn mean_and_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

/// Runs `cycles` successive-conditional cycles and `prior_draws` independent
/// prior draws for series of length `n_obs`, and returns a z-score per
/// statistic with ACT-adjusted chain standard errors.
pub fn geweke_test(
    cfg: &SchemeConfig,
    n_obs: usize,
    cycles: usize,
    prior_draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<GewekeReport> {
    cfg.validate()?;
    let index = cfg.scheme as u32 * 2;
    let mut rng_prior = RandomStream::for_purpose(seed, StreamPurpose::Geweke, index);
    let mut rng_chain = RandomStream::for_purpose(seed, StreamPurpose::Geweke, index + 1);

    let mut prior_series = vec![Vec::with_capacity(prior_draws); STAT_NAMES.len()];
    for _ in 0..prior_draws {
        let (t, x) = draw_prior(&cfg.prior, n_obs, &mut rng_prior);
        for (s, v) in prior_series.iter_mut().zip(statistics(&t, &x)) {
            s.push(v);
        }
    }

    let (t, x) = draw_prior(&cfg.prior, n_obs, &mut rng_chain);
    let r = match cfg.scheme {
        Scheme::Kf => Some(draw_indicators(&cfg.table, n_obs, &mut rng_chain)?),
        _ => None,
    };
    let mut state = ChainState {
        t,
        x,
        r,
        iteration: 0,
        stats: AcceptanceStats::default(),
    };
    let mut chain_series = vec![Vec::with_capacity(cycles); STAT_NAMES.len()];
    for _ in 0..cycles {
        let data = draw_data(&state, &cfg.table, &mut rng_chain)?;
        iterate(&mut state, &data, cfg, exec, &mut rng_chain)?;
        for (s, v) in chain_series.iter_mut().zip(statistics(&state.t, &state.x)) {
            s.push(v);
        }
    }

    let mut stats = Vec::with_capacity(STAT_NAMES.len());
    for (k, name) in STAT_NAMES.iter().enumerate() {
        let (pm, pv) = mean_and_var(&prior_series[k]);
        let (cm, cv) = mean_and_var(&chain_series[k]);
        let act = act_estimate(&[&chain_series[k]], 0.0)?.act.max(1.0);
        let prior_se = (pv / prior_draws as f64).sqrt();
        let chain_se = (cv * act / cycles as f64).sqrt();
        stats.push(GewekeStat {
            name: name.to_string(),
            prior_mean: pm,
            prior_se,
            chain_mean: cm,
            chain_se,
            chain_act: act,
            z: (cm - pm) / (prior_se * prior_se + chain_se * chain_se).sqrt(),
        });
    }
    Ok(GewekeReport {
        scheme: cfg.scheme,
        cycles,
        stats,
        acceptance: state.stats,
    })
}
