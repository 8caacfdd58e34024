//! Ten-component normal mixture approximating the `log chi^2_1` noise of
//! `log(y_i^2) = c + sigma * x_i + zeta_i`, the indicator draws that pick a
//! component per time step, and the importance weights that correct draws
//! made under the approximation.

use std::io::{BufRead, Write};

use crate::error::{Result, SvError};
use crate::model::{log_obs_density, Dataset};
use crate::rng::RandomStream;

pub const N_COMPONENTS: usize = 10;

/// Component used to initialise indicators; its mean is closest to the
/// median of `log chi^2_1`.
pub const INITIAL_COMPONENT: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTable {
    pub weights: [f64; N_COMPONENTS],
    pub means: [f64; N_COMPONENTS],
    pub variances: [f64; N_COMPONENTS],
    log_weights: [f64; N_COMPONENTS],
    log_variances: [f64; N_COMPONENTS],
}

impl MixtureTable {
    /// The ten-component approximation of Omori, Chib, Shephard and
    /// Nakajima (2007).
    pub fn omori() -> Self {
        Self::new(
            [
                0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575,
                0.00115,
            ],
            [
                1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246,
                -8.68384, -14.65000,
            ],
            [
                0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591,
                7.33342,
            ],
        )
        .expect("embedded constants are valid")
    }

    pub fn new(
        weights: [f64; N_COMPONENTS],
        means: [f64; N_COMPONENTS],
        variances: [f64; N_COMPONENTS],
    ) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(SvError::Domain(format!(
                "mixture weights must be non-negative and sum to 1 (sum = {total})"
            )));
        }
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(SvError::Domain("mixture variances must be positive".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
            log_weights: weights.map(f64::ln),
            log_variances: variances.map(f64::ln),
        })
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(p, m)| p * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(p, (m, v))| p * (v + m * m))
            .sum::<f64>()
            - mu * mu
    }

    /// `log N(log_y2 | m_k + offset, tau_k^2)`.
    #[inline]
    pub fn component_log_density(&self, k: usize, log_y2: f64, offset: f64) -> f64 {
        let d = log_y2 - offset - self.means[k];
        -0.5 * (crate::model::LN_2PI + self.log_variances[k] + d * d / self.variances[k])
    }

    /// Unnormalised log-probabilities of each component given the residual
    /// `log_y2 - offset`.
    #[inline]
    fn indicator_log_weights(&self, log_y2: f64, offset: f64) -> [f64; N_COMPONENTS] {
        let mut lw = [0.0; N_COMPONENTS];
        for (k, slot) in lw.iter_mut().enumerate() {
            let d = log_y2 - offset - self.means[k];
            *slot = self.log_weights[k] - 0.5 * self.log_variances[k]
                - 0.5 * d * d / self.variances[k];
        }
        lw
    }

    /// Normalised component probabilities for one observation.
    pub fn indicator_probabilities(&self, log_y2: f64, offset: f64) -> [f64; N_COMPONENTS] {
        let lw = self.indicator_log_weights(log_y2, offset);
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p = lw.map(|v| (v - max).exp());
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for k in 0..N_COMPONENTS {
            writeln!(w, "{},{},{}", self.weights[k], self.means[k], self.variances[k])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::with_capacity(N_COMPONENTS);
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| SvError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match vals {
                Ok(v) if v.len() == 3 => rows.push([v[0], v[1], v[2]]),
                _ => {
                    return Err(SvError::Parse {
                        line: idx + 1,
                        msg: "expected `weight,mean,variance`".into(),
                    })
                }
            }
        }
        if rows.len() != N_COMPONENTS {
            return Err(SvError::Parse {
                line: rows.len(),
                msg: format!("expected {N_COMPONENTS} rows, got {}", rows.len()),
            });
        }
        let col = |j: usize| std::array::from_fn(|k| rows[k][j]);
        Self::new(col(0), col(1), col(2))
    }
}

/// Density of `log(y^2)` given the offset `c + sigma * x`, used as the
/// denominator of the importance weights.
pub trait NoiseDensity {
    fn log_density(&self, log_y2: f64, offset: f64) -> f64;
}

impl NoiseDensity for MixtureTable {
    fn log_density(&self, log_y2: f64, offset: f64) -> f64 {
        let mut terms = [0.0; N_COMPONENTS];
        for (k, t) in terms.iter_mut().enumerate() {
            *t = self.log_weights[k] + self.component_log_density(k, log_y2, offset);
        }
        log_sum_exp(&terms)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Mixture component per time step, stored zero-based (`0..10`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorPath {
    r: Vec<u8>,
}

impl IndicatorPath {
    pub fn new(r: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = r.iter().find(|&&k| k as usize >= N_COMPONENTS) {
            return Err(SvError::Domain(format!("indicator {bad} out of range")));
        }
        Ok(Self { r })
    }

    pub fn constant(n: usize, component: u8) -> Self {
        Self::new(vec![component; n]).expect("in-range component")
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.r
    }

    pub fn get(&self, i: usize) -> usize {
        self.r[i] as usize
    }
}

/// Draws each `r_i` independently with
/// `P(r_i = k) ∝ pi_k / tau_k * exp(-(log y_i^2 - c - sigma x_i - m_k)^2 / (2 tau_k^2))`.
pub fn sample_indicators(
    dataset: &Dataset,
    x: &[f64],
    c: f64,
    sigma: f64,
    table: &MixtureTable,
    rng: &mut RandomStream,
) -> Result<IndicatorPath> {
    check_len(dataset.len(), x.len())?;
    let mut r = Vec::with_capacity(x.len());
    for (&ly, &xi) in dataset.log_y2.iter().zip(x) {
        let lw = table.indicator_log_weights(ly, c + sigma * xi);
        r.push(rng.categorical_log(&lw)? as u8);
    }
    Ok(IndicatorPath { r })
}

/// `log N(log y_i^2 | m_r + c + sigma x_i, tau_r^2)`.
pub fn approx_obs_loglik(
    log_y2: f64,
    x: f64,
    component: usize,
    c: f64,
    sigma: f64,
    table: &MixtureTable,
) -> f64 {
    table.component_log_density(component, log_y2, c + sigma * x)
}

/// Whole-path approximate log-likelihood given indicators.
pub fn approx_path_loglik(
    dataset: &Dataset,
    x: &[f64],
    r: &IndicatorPath,
    c: f64,
    sigma: f64,
    table: &MixtureTable,
) -> f64 {
    dataset
        .log_y2
        .iter()
        .zip(x)
        .zip(r.as_slice())
        .map(|((&ly, &xi), &k)| table.component_log_density(k as usize, ly, c + sigma * xi))
        .sum()
}

/// `sum_i [log f(y_i | x_i, c, sigma) - log sum_k pi_k g(log y_i^2 | ...)]`
/// where `f` is the exact density of `y_i` and the denominator is the
/// approximating density of `log y_i^2`.
pub fn importance_log_weight<D: NoiseDensity + ?Sized>(
    dataset: &Dataset,
    x: &[f64],
    c: f64,
    sigma: f64,
    approx: &D,
) -> Result<f64> {
    check_len(dataset.len(), x.len())?;
    Ok(dataset
        .y
        .iter()
        .zip(&dataset.log_y2)
        .zip(x)
        .map(|((&y, &ly), &xi)| {
            let h = c + sigma * xi;
            log_obs_density(y * y, h) - approx.log_density(ly, h)
        })
        .sum())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SvError::LengthMismatch { expected, got })
    }
}
