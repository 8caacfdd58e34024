//! Autocorrelation times, importance-weighted posterior summaries and
//! efficiency (ACT x time) tables.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SvError};
use crate::sampler::{ChainTrace, Scheme};

pub const PARAM_NAMES: [&str; 3] = ["c", "gamma", "eta"];

/// Autocorrelations below this count as zero when choosing the cutoff lag.
pub const ACT_CUTOFF_RHO: f64 = 0.01;

/// Effective sample sizes below this are flagged.
pub const LOW_ESS: f64 = 10.0;

/// Biased (divide by n) autocovariances about a supplied mean, all lags
/// `0..n`, computed by zero-padded FFT.
pub fn autocovariance_fft(series: &[f64], mean: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(SvError::TooShort { need: 2, got: n });
    }
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / (m as f64 * n as f64);
    Ok(buf[..n].iter().map(|z| z.re * scale).collect())
}

/// `O(n * max_lag)` reference for [`autocovariance_fft`].
pub fn autocovariance_direct(series: &[f64], mean: f64, max_lag: usize) -> Vec<f64> {
    let n = series.len();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            let s: f64 = (0..n - k).map(|i| (series[i] - mean) * (series[i + k] - mean)).sum();
            s / n as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActEstimate {
    pub act: f64,
    pub cutoff: usize,
    /// `rho_0..=rho_K`
    pub autocorr: Vec<f64>,
}

/// `1 + 2 sum_{k=1..K} rho_k`, where `K` is the first lag with
/// `rho_K < 0.01` (negative included), capped at `max_lag`.
pub fn act_from_autocorr(rho: &[f64], max_lag: usize) -> ActEstimate {
    assert!(rho.len() >= 2, "need at least lags 0 and 1");
    let cap = max_lag.clamp(1, rho.len() - 1);
    let mut k_cut = cap;
    for (k, &r) in rho.iter().enumerate().take(cap + 1).skip(1) {
        if r < ACT_CUTOFF_RHO {
            k_cut = k;
            break;
        }
    }
    let act = 1.0 + 2.0 * rho[1..=k_cut].iter().sum::<f64>();
    ActEstimate {
        act,
        cutoff: k_cut,
        autocorr: rho[..=k_cut].to_vec(),
    }
}

/// ACT from several runs of the same sampler: the first `burn_in` fraction
/// of each run is dropped, autocovariances are taken about the grand mean
/// of all runs and averaged, then normalised.
pub fn act_estimate(runs: &[&[f64]], burn_in: f64) -> Result<ActEstimate> {
    if runs.is_empty() {
        return Err(SvError::TooShort { need: 1, got: 0 });
    }
    let kept: Vec<&[f64]> = runs
        .iter()
        .map(|r| &r[(burn_in * r.len() as f64).floor() as usize..])
        .collect();
    let len = kept.iter().map(|r| r.len()).min().unwrap_or(0);
    if len < 2 {
        return Err(SvError::TooShort { need: 2, got: len });
    }
    let total: usize = kept.iter().map(|r| r.len()).sum();
    let grand_mean = kept.iter().flat_map(|r| r.iter()).sum::<f64>() / total as f64;
    let mut acov = vec![0.0; len];
    for r in &kept {
        let a = autocovariance_fft(r, grand_mean)?;
        for (dst, v) in acov.iter_mut().zip(a) {
            *dst += v / kept.len() as f64;
        }
    }
    let var = acov[0];
    if !(var > 0.0) || !var.is_finite() {
        return Err(SvError::Degenerate("series has zero variance".into()));
    }
    let rho: Vec<f64> = acov.iter().map(|v| v / var).collect();
    Ok(act_from_autocorr(&rho, (len / 50).max(1)))
}

/// ACTs of (c, gamma, eta) across the traces of one configuration.
pub fn act_table(traces: &[ChainTrace], burn_in: f64) -> Result<[ActEstimate; 3]> {
    let one = |k: usize| {
        let runs: Vec<&[f64]> = traces.iter().map(|t| t.param(k)).collect();
        act_estimate(&runs, burn_in)
    };
    Ok([one(0)?, one(1)?, one(2)?])
}

/// Self-normalised importance-weighted mean; the log-weights are max-shifted
/// before exponentiating.
pub fn weighted_mean(values: &[f64], log_weights: &[f64]) -> Result<f64> {
    if values.len() != log_weights.len() {
        return Err(SvError::LengthMismatch {
            expected: values.len(),
            got: log_weights.len(),
        });
    }
    let m = max_finite(log_weights)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (&v, &lw) in values.iter().zip(log_weights) {
        let w = (lw - m).exp();
        num += w * v;
        den += w;
    }
    Ok(num / den)
}

fn max_finite(log_weights: &[f64]) -> Result<f64> {
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(SvError::Degenerate("importance log-weights must not be NaN or +inf".into()));
    }
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(SvError::Degenerate("all importance weights are zero".into()));
    }
    Ok(m)
}

/// `sum w / max w`, the number of draws carrying the total weight if every
/// draw were as heavy as the heaviest.
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64> {
    let m = max_finite(log_weights)?;
    Ok(log_weights.iter().map(|&lw| (lw - m).exp()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub weighted: bool,
    pub runs: usize,
    /// (c, gamma, eta)
    pub params: [MeanSe; 3],
    pub per_run_means: Vec<[f64; 3]>,
    pub ess: f64,
    pub low_ess: bool,
}

/// Posterior means of (c, gamma, eta) over all runs pooled, with standard
/// errors from the spread of per-run means. With `weighted` the trace
/// log-weights are applied; otherwise plain means.
pub fn weighted_summary(traces: &[ChainTrace], burn_in: f64, weighted: bool) -> Result<PosteriorSummary> {
    if traces.is_empty() {
        return Err(SvError::TooShort { need: 1, got: 0 });
    }
    let start = |t: &ChainTrace| (burn_in * t.len() as f64).floor() as usize;
    let weights_of = |t: &ChainTrace| -> Vec<f64> {
        let s = start(t);
        if weighted {
            t.log_weight[s..].to_vec()
        } else {
            vec![0.0; t.len() - s]
        }
    };
    let mut per_run_means = Vec::with_capacity(traces.len());
    let mut pooled_lw = Vec::new();
    let mut pooled_vals: [Vec<f64>; 3] = Default::default();
    for t in traces {
        let s = start(t);
        if s >= t.len() {
            return Err(SvError::TooShort { need: s + 1, got: t.len() });
        }
        let lw = weights_of(t);
        let mut m = [0.0; 3];
        for k in 0..3 {
            m[k] = weighted_mean(&t.param(k)[s..], &lw)?;
            pooled_vals[k].extend_from_slice(&t.param(k)[s..]);
        }
        pooled_lw.extend_from_slice(&lw);
        per_run_means.push(m);
    }
    let r = traces.len() as f64;
    let mut params = [MeanSe { mean: 0.0, se: f64::NAN }; 3];
    for k in 0..3 {
        params[k].mean = weighted_mean(&pooled_vals[k], &pooled_lw)?;
        if traces.len() > 1 {
            let mu = per_run_means.iter().map(|m| m[k]).sum::<f64>() / r;
            let var = per_run_means.iter().map(|m| (m[k] - mu).powi(2)).sum::<f64>() / (r - 1.0);
            params[k].se = (var / r).sqrt();
        }
    }
    let ess = effective_sample_size(&pooled_lw)?;
    let low_ess = ess < LOW_ESS;
    if low_ess {
        log::warn!("importance-weight effective sample size {ess:.1} is below {LOW_ESS}");
    }
    Ok(PosteriorSummary {
        weighted,
        runs: traces.len(),
        params,
        per_run_means,
        ess,
        low_ess,
    })
}

/// One row of an ACT x time table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub scheme: Scheme,
    pub l_x: Option<usize>,
    pub l_eta: Option<usize>,
    pub iterations: usize,
    pub seconds_per_iter: f64,
    pub act_c: f64,
    pub act_gamma: f64,
    pub act_eta: f64,
    pub act_time_c: f64,
    pub act_time_gamma: f64,
    pub act_time_eta: f64,
}

impl EfficiencyRow {
    pub fn new(
        scheme: Scheme,
        pools: Option<(usize, usize)>,
        iterations: usize,
        acts: [f64; 3],
        seconds_per_iter: f64,
    ) -> Self {
        Self {
            scheme,
            l_x: pools.map(|p| p.0),
            l_eta: pools.map(|p| p.1),
            iterations,
            seconds_per_iter,
            act_c: acts[0],
            act_gamma: acts[1],
            act_eta: acts[2],
            act_time_c: acts[0] * seconds_per_iter,
            act_time_gamma: acts[1] * seconds_per_iter,
            act_time_eta: acts[2] * seconds_per_iter,
        }
    }
}

/// Builds rows from per-configuration ACT tables and timings, matched by position.
pub fn efficiency_table(entries: &[(Scheme, Option<(usize, usize)>, usize, [f64; 3], f64)]) -> Vec<EfficiencyRow> {
    entries
        .iter()
        .map(|&(s, p, it, acts, secs)| EfficiencyRow::new(s, p, it, acts, secs))
        .collect()
}

/// Fixed-width text rendering of an efficiency table.
pub fn format_efficiency(rows: &[EfficiencyRow]) -> String {
    let mut out = format!(
        "{:<6} {:>5} {:>5} {:>10} {:>12} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
        "scheme", "L_x", "L_eta", "iters", "s/iter", "ACT c", "ACT g", "ACT e", "ACTxT c", "ACTxT g", "ACTxT e"
    );
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
    for r in rows {
        out.push_str(&format!(
            "{:<6} {:>5} {:>5} {:>10} {:>12.6} {:>8.2} {:>8.2} {:>8.2} {:>10.5} {:>10.5} {:>10.5}\n",
            r.scheme.to_string(),
            opt(r.l_x),
            opt(r.l_eta),
            r.iterations,
            r.seconds_per_iter,
            r.act_c,
            r.act_gamma,
            r.act_eta,
            r.act_time_c,
            r.act_time_gamma,
            r.act_time_eta
        ));
    }
    out
}
