//! Sufficient statistics for the NC and C parametrizations and the
//! interweaved (GIS-NC) Metropolis parameter block.
//!
//! Given a latent path the `phi` likelihood in NC and the full `(c, phi,
//! sigma^2)` likelihood in C depend on the path only through a handful of
//! sums, so many Metropolis steps can be taken for the price of one pass
//! over the data.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvError};
use crate::mixture::{approx_path_loglik, IndicatorPath, MixtureTable};
use crate::model::{exact_obs_loglik_unchecked, log_prior, phi_of_gamma, Dataset, PriorSpec, TransformedParams};
use crate::rng::RandomStream;

/// `t1 = sum x_i^2`, `t2 = sum x_{i-1} x_i`, `t3 = x_1^2 + x_N^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuffStatsNC {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

pub fn suff_stats_nc(x: &[f64]) -> Result<SuffStatsNC> {
    let n = x.len();
    if n < 2 {
        return Err(SvError::TooShort { need: 2, got: n });
    }
    let t1 = x.iter().map(|v| v * v).sum();
    let t2 = x.windows(2).map(|w| w[0] * w[1]).sum();
    let t3 = x[0] * x[0] + x[n - 1] * x[n - 1];
    Ok(SuffStatsNC { t1, t2, t3 })
}

/// `log L(phi | t) = (1/2) log(1 - phi^2) - (1/2)(phi^2 (t1 - t3) - 2 phi t2 + t1)`.
pub fn loglik_phi_nc(phi: f64, t: &SuffStatsNC) -> f64 {
    if !(phi.abs() < 1.0) {
        return f64::NEG_INFINITY;
    }
    0.5 * (1.0 - phi * phi).ln() - 0.5 * (phi * phi * (t.t1 - t.t3) - 2.0 * phi * t.t2 + t.t1)
}

/// Centred-path statistics:
/// `tt1 = sum_{1..N} x~^2`, `tt2 = sum_{2..N-1} x~^2`, `tt3 = sum_{2..N} x~_{i-1} x~_i`,
/// `tt4 = sum_{2..N-1} x~`, `tt5 = x~_1 + x~_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuffStatsC {
    pub tt1: f64,
    pub tt2: f64,
    pub tt3: f64,
    pub tt4: f64,
    pub tt5: f64,
    pub n: usize,
}

pub fn suff_stats_c(xt: &[f64]) -> Result<SuffStatsC> {
    let n = xt.len();
    if n < 3 {
        return Err(SvError::TooShort { need: 3, got: n });
    }
    let interior = &xt[1..n - 1];
    Ok(SuffStatsC {
        tt1: xt.iter().map(|v| v * v).sum(),
        tt2: interior.iter().map(|v| v * v).sum(),
        tt3: xt.windows(2).map(|w| w[0] * w[1]).sum(),
        tt4: interior.iter().sum(),
        tt5: xt[0] + xt[n - 1],
        n,
    })
}

/// Log density of the centred path given `(c, phi, sigma^2)`, up to the
/// constant `-(N/2) log(2 pi)`.
pub fn loglik_c(c: f64, phi: f64, sigma2: f64, tt: &SuffStatsC) -> f64 {
    if !(phi.abs() < 1.0) || !(sigma2 > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = tt.n as f64;
    let quad = tt.tt1 + phi * phi * tt.tt2 - 2.0 * phi * tt.tt3 - 2.0 * c * phi * phi * tt.tt4
        - 2.0 * c * (tt.tt4 + tt.tt5)
        + 4.0 * c * phi * tt.tt4
        + 2.0 * c * phi * tt.tt5
        + (n - 1.0) * (c * (phi - 1.0)).powi(2)
        + c * c * (1.0 - phi * phi);
    -(n / 2.0) * sigma2.ln() + 0.5 * (1.0 - phi * phi).ln() - 0.5 * quad / sigma2
}

/// Observation density used by the NC `(c, eta)` update.
#[derive(Debug, Clone, Copy)]
pub enum ObsModel<'a> {
    Exact,
    MixtureApprox {
        indicators: &'a IndicatorPath,
        table: &'a MixtureTable,
    },
}

impl ObsModel<'_> {
    pub fn loglik(&self, dataset: &Dataset, x: &[f64], c: f64, sigma: f64) -> f64 {
        match self {
            ObsModel::Exact => exact_obs_loglik_unchecked(&dataset.y, x, c, sigma),
            ObsModel::MixtureApprox { indicators, table } => {
                approx_path_loglik(dataset, x, indicators, c, sigma, table)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceCounter {
    pub accepted: u64,
    pub proposed: u64,
}

impl AcceptanceCounter {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: &AcceptanceCounter) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// Per-update-type acceptance counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub phi_nc: AcceptanceCounter,
    pub c_eta_nc: AcceptanceCounter,
    pub c_joint: AcceptanceCounter,
    pub ensemble_gamma: AcceptanceCounter,
}

impl AcceptanceStats {
    pub fn merge(&mut self, other: &AcceptanceStats) {
        self.phi_nc.merge(&other.phi_nc);
        self.c_eta_nc.merge(&other.c_eta_nc);
        self.c_joint.merge(&other.c_joint);
        self.ensemble_gamma.merge(&other.ensemble_gamma);
    }
}

/// Log acceptance probability of a symmetric-proposal Metropolis move.
#[inline]
pub fn log_accept_prob(log_target_current: f64, log_target_proposed: f64) -> f64 {
    if log_target_proposed == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (log_target_proposed - log_target_current).min(0.0)
}

#[inline]
pub(crate) fn metropolis_accept(log_alpha: f64, rng: &mut RandomStream) -> bool {
    if log_alpha >= 0.0 {
        // still consume a uniform so the stream position does not depend on the outcome
        let _ = rng.uniform01();
        true
    } else {
        rng.uniform01().ln() < log_alpha
    }
}

/// `n_updates` random-walk steps on `gamma` targeting
/// `loglik_phi_nc(phi(gamma)) + log prior(gamma)`.
pub fn metropolis_phi_nc(
    gamma: f64,
    t: &SuffStatsNC,
    prior: &PriorSpec,
    n_updates: usize,
    prop_sd: f64,
    rng: &mut RandomStream,
    counter: &mut AcceptanceCounter,
) -> f64 {
    let target = |g: f64| {
        let lp = prior.log_prior_gamma(g);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + loglik_phi_nc(phi_of_gamma(g), t)
        }
    };
    let mut gamma = gamma;
    let mut current = target(gamma);
    for _ in 0..n_updates {
        let proposal = gamma + prop_sd * rng.normal01();
        let lt = target(proposal);
        let ok = metropolis_accept(log_accept_prob(current, lt), rng);
        counter.record(ok);
        if ok {
            gamma = proposal;
            current = lt;
        }
    }
    gamma
}

/// One joint random-walk step on `(c, eta)` with the latent NC path held
/// fixed. O(N) through the observation density.
#[allow(clippy::too_many_arguments)]
pub fn metropolis_c_eta_nc(
    t: TransformedParams,
    x: &[f64],
    dataset: &Dataset,
    obs: ObsModel<'_>,
    prior: &PriorSpec,
    prop_sds: (f64, f64),
    rng: &mut RandomStream,
    counter: &mut AcceptanceCounter,
) -> TransformedParams {
    let target = |c: f64, eta: f64| {
        obs.loglik(dataset, x, c, (0.5 * eta).exp()) + prior.log_prior_c(c) + prior.log_prior_eta(eta)
    };
    let c_new = t.c + prop_sds.0 * rng.normal01();
    let eta_new = t.eta + prop_sds.1 * rng.normal01();
    let current = target(t.c, t.eta);
    let proposed = target(c_new, eta_new);
    let ok = metropolis_accept(log_accept_prob(current, proposed), rng);
    counter.record(ok);
    if ok {
        TransformedParams::new(c_new, t.gamma, eta_new)
    } else {
        t
    }
}

/// Log target of the centred update: path density given the statistics
/// plus the prior in `(c, gamma, eta)`.
pub fn log_target_c(t: &TransformedParams, tt: &SuffStatsC, prior: &PriorSpec) -> f64 {
    let lp = log_prior(t, prior);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + loglik_c(t.c, t.phi(), t.sigma2(), tt)
}

/// `n_updates` joint steps on `(c, gamma, eta)` given centred statistics.
/// Costs O(1) per step.
pub fn metropolis_c_joint(
    t: TransformedParams,
    tt: &SuffStatsC,
    prior: &PriorSpec,
    n_updates: usize,
    prop_sds: (f64, f64, f64),
    rng: &mut RandomStream,
    counter: &mut AcceptanceCounter,
) -> TransformedParams {
    let mut t = t;
    let mut current = log_target_c(&t, tt, prior);
    for _ in 0..n_updates {
        let proposal = TransformedParams::new(
            t.c + prop_sds.0 * rng.normal01(),
            t.gamma + prop_sds.1 * rng.normal01(),
            t.eta + prop_sds.2 * rng.normal01(),
        );
        let lt = log_target_c(&proposal, tt, prior);
        let ok = metropolis_accept(log_accept_prob(current, lt), rng);
        counter.record(ok);
        if ok {
            t = proposal;
            current = lt;
        }
    }
    t
}

/// Proposal standard deviations and repeat counts for the parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub n_metropolis: usize,
    /// `(c, gamma, eta)` in NC.
    pub nc_sds: (f64, f64, f64),
    /// `(c, gamma, eta)` in C.
    pub c_sds: (f64, f64, f64),
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            n_metropolis: 80,
            nc_sds: (0.21, 0.5, 0.36),
            c_sds: (0.105, 0.25, 0.18),
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.nc_sds.0,
            self.nc_sds.1,
            self.nc_sds.2,
            self.c_sds.0,
            self.c_sds.1,
            self.c_sds.2,
        ];
        if all.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(SvError::Config(
                "proposal standard deviations must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// GIS-NC parameter block: NC updates (`phi` repeatedly, then `(c, eta)`
/// once), move to C with the current `(c, sigma)`, repeated joint C
/// updates, and move back to NC with the new `(c, sigma)`. The latent path
/// changes only through the re-mapping.
#[allow(clippy::too_many_arguments)]
pub fn gis_nc_parameter_block(
    t: TransformedParams,
    x: &mut [f64],
    dataset: &Dataset,
    obs: ObsModel<'_>,
    prior: &PriorSpec,
    cfg: &BlockConfig,
    rng: &mut RandomStream,
    stats: &mut AcceptanceStats,
) -> Result<TransformedParams> {
    if x.len() != dataset.len() {
        return Err(SvError::LengthMismatch {
            expected: dataset.len(),
            got: x.len(),
        });
    }
    let nc = suff_stats_nc(x)?;
    let gamma = metropolis_phi_nc(
        t.gamma,
        &nc,
        prior,
        cfg.n_metropolis,
        cfg.nc_sds.1,
        rng,
        &mut stats.phi_nc,
    );
    let t = TransformedParams::new(t.c, gamma, t.eta);
    let t = metropolis_c_eta_nc(
        t,
        x,
        dataset,
        obs,
        prior,
        (cfg.nc_sds.0, cfg.nc_sds.2),
        rng,
        &mut stats.c_eta_nc,
    );

    let (c_old, sigma_old) = (t.c, t.sigma());
    let centred: Vec<f64> = x.iter().map(|&v| c_old + sigma_old * v).collect();
    let tt = suff_stats_c(&centred)?;
    let t_new = metropolis_c_joint(t, &tt, prior, cfg.n_metropolis, cfg.c_sds, rng, &mut stats.c_joint);

    // without a location/scale move the round trip is the identity; skip it
    // so the NC path is kept bit-for-bit
    if t_new.c != c_old || t_new.eta != t.eta {
        let (c_new, sigma_new) = (t_new.c, t_new.sigma());
        for (v, &ct) in x.iter_mut().zip(&centred) {
            *v = (ct - c_new) / sigma_new;
        }
    }
    Ok(t_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gamma_of_phi, log_latent_density_nc};

    #[test]
    fn nc_stats_examples() {
        assert_eq!(
            suff_stats_nc(&[0.0, 0.0, 0.0]).unwrap(),
            SuffStatsNC { t1: 0.0, t2: 0.0, t3: 0.0 }
        );
        assert_eq!(
            suff_stats_nc(&[1.0, 2.0, 3.0]).unwrap(),
            SuffStatsNC { t1: 14.0, t2: 8.0, t3: 10.0 }
        );
        assert!(suff_stats_nc(&[1.0]).is_err());
    }

    #[test]
    fn nc_stats_sign_symmetry() {
        let mut rng = RandomStream::new(1, 2);
        let x: Vec<f64> = (0..25).map(|_| rng.normal01()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(suff_stats_nc(&x).unwrap(), suff_stats_nc(&neg).unwrap());
    }

    #[test]
    fn phi_loglik_examples() {
        let t = SuffStatsNC { t1: 14.0, t2: 8.0, t3: 10.0 };
        assert_eq!(loglik_phi_nc(0.0, &t), -7.0);
        let v = loglik_phi_nc(0.5, &t);
        assert!((v - (0.5 * 0.75f64.ln() - 3.5)).abs() < 1e-14);
        assert!((v - (-3.6438)).abs() < 1e-4);
        let direct = log_latent_density_nc(&[1.0, 2.0, 3.0], 0.5) + 1.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - direct).abs() < 1e-12);
        assert_eq!(loglik_phi_nc(1.0, &t), f64::NEG_INFINITY);
        assert_eq!(loglik_phi_nc(-1.2, &t), f64::NEG_INFINITY);
    }

    #[test]
    fn c_stats_examples() {
        let z = suff_stats_c(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((z.tt1, z.tt2, z.tt3, z.tt4, z.tt5), (0.0, 0.0, 0.0, 0.0, 0.0));
        let s = suff_stats_c(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.tt1, s.tt2, s.tt3, s.tt4, s.tt5), (14.0, 4.0, 8.0, 2.0, 4.0));
        let a = 1.7;
        let s = suff_stats_c(&[a, a, a]).unwrap();
        let close = |u: f64, v: f64| (u - v).abs() < 1e-12;
        assert!(close(s.tt1, 3.0 * a * a) && close(s.tt2, a * a) && close(s.tt3, 2.0 * a * a));
        assert!(close(s.tt4, a) && close(s.tt5, 2.0 * a));
        assert!(suff_stats_c(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn c_loglik_reduces_to_nc_at_identity() {
        let s = suff_stats_c(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(loglik_c(0.0, 0.0, 1.0, &s), -7.0);
        let nc = suff_stats_nc(&[1.0, 2.0, 3.0]).unwrap();
        for phi in [0.0, 0.3, 0.9, -0.5] {
            assert!((loglik_c(0.0, phi, 1.0, &s) - loglik_phi_nc(phi, &nc)).abs() < 1e-12);
        }
        assert_eq!(loglik_c(0.0, 1.0, 1.0, &s), f64::NEG_INFINITY);
        assert_eq!(loglik_c(0.0, 0.5, 0.0, &s), f64::NEG_INFINITY);
    }

    #[test]
    fn zero_sd_phi_chain_never_moves() {
        let t = SuffStatsNC { t1: 14.0, t2: 8.0, t3: 10.0 };
        let mut rng = RandomStream::new(1, 1);
        let mut ctr = AcceptanceCounter::default();
        let g = metropolis_phi_nc(1.3, &t, &PriorSpec::default(), 50, 0.0, &mut rng, &mut ctr);
        assert_eq!(g, 1.3);
        assert_eq!(ctr.proposed, 50);
    }

    #[test]
    fn zero_sd_c_eta_never_moves() {
        let ds = Dataset::from_returns(vec![0.3, -0.2, 1.1]).unwrap();
        let t = TransformedParams::new(0.1, 2.0, -2.0);
        let mut rng = RandomStream::new(2, 2);
        let mut ctr = AcceptanceCounter::default();
        let out = metropolis_c_eta_nc(
            t,
            &[0.1, 0.2, 0.3],
            &ds,
            ObsModel::Exact,
            &PriorSpec::default(),
            (0.0, 0.0),
            &mut rng,
            &mut ctr,
        );
        assert_eq!(out, t);
    }

    #[test]
    fn zero_updates_is_identity() {
        let s = suff_stats_c(&[1.0, 2.0, 3.0]).unwrap();
        let t = TransformedParams::new(0.1, 2.0, -2.0);
        let mut rng = RandomStream::new(2, 2);
        let before = rng.clone().uniform01();
        let out = metropolis_c_joint(t, &s, &PriorSpec::default(), 0, (0.1, 0.1, 0.1), &mut rng, &mut AcceptanceCounter::default());
        assert_eq!(out, t);
        assert_eq!(rng.uniform01(), before, "no randomness consumed");
    }

    #[test]
    fn rejected_block_leaves_path_unchanged() {
        let ds = Dataset::from_returns(vec![0.3, -0.2, 1.1, 0.05, -0.7]).unwrap();
        let t = TransformedParams::new(0.1, gamma_of_phi(0.7), -2.0);
        let mut x = vec![0.4, -1.3, 0.2, 2.2, 0.0];
        let orig = x.clone();
        let cfg = BlockConfig {
            n_metropolis: 10,
            nc_sds: (0.0, 0.0, 0.0),
            c_sds: (0.0, 0.0, 0.0),
        };
        let mut stats = AcceptanceStats::default();
        let out = gis_nc_parameter_block(
            t,
            &mut x,
            &ds,
            ObsModel::Exact,
            &PriorSpec::default(),
            &cfg,
            &mut RandomStream::new(4, 4),
            &mut stats,
        )
        .unwrap();
        assert_eq!(out, t);
        assert_eq!(x, orig);
        assert_eq!(stats.phi_nc.proposed, 10);
        assert_eq!(stats.c_eta_nc.proposed, 1);
        assert_eq!(stats.c_joint.proposed, 10);
    }

    #[test]
    fn frozen_centred_step_round_trips_path() {
        // NC moves change (c, eta), but with C proposals frozen the map to C
        // and back uses the same (c, sigma), so x is preserved.
        let mut rng = RandomStream::new(5, 5);
        let n = 30;
        let y: Vec<f64> = (0..n).map(|_| rng.normal01() * 0.3).collect();
        let ds = Dataset::from_returns(y).unwrap();
        let t = TransformedParams::new(0.1, gamma_of_phi(0.8), -2.0);
        let mut x: Vec<f64> = crate::model::simulate_latent(0.8, n, &mut rng);
        let orig = x.clone();
        let cfg = BlockConfig {
            c_sds: (0.0, 0.0, 0.0),
            ..BlockConfig::default()
        };
        let mut stats = AcceptanceStats::default();
        gis_nc_parameter_block(t, &mut x, &ds, ObsModel::Exact, &PriorSpec::default(), &cfg, &mut rng, &mut stats)
            .unwrap();
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
