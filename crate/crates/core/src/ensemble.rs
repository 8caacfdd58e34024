//! Ensemble updates over pools of latent states and of `eta`.
//!
//! The current state is placed in slot 0 of every pool; the remaining slots
//! are drawn independently (x from a widened AR(1) stationary law, eta from
//! its prior). The ensemble contains every sequence through the x pools
//! paired with every eta in the eta pool, `L_eta * L_x^N` elements in all.
//! A forward recursion evaluates the ensemble density of each eta column in
//! `O(L_eta * L_x^2 * N)`, reusing the per-time transition matrices across
//! the eta pool.
//!
//! The eta pool is drawn from the eta prior, so the prior/pool ratio for eta
//! is identically one and never appears in the column densities `rho[l]`.

use serde::{Deserialize, Serialize};

use crate::asis::{metropolis_accept, AcceptanceCounter};
use crate::error::{Result, SvError};
use crate::mixture::log_sum_exp;
use crate::model::{log_normal_pdf, phi_of_gamma, Dataset, PriorSpec, TransformedParams, LN_2PI};
use crate::par::{self, Execution};
use crate::rng::RandomStream;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Forward sums below this are recomputed in log space.
const RESCALE_FLOOR: f64 = 1e-250;

/// Times handled per parallel work item.
const TIMES_PER_TASK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub l_x: usize,
    pub l_eta: usize,
    /// Multiplier on the stationary standard deviation used to draw x pools.
    pub pool_scale: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            l_x: 50,
            l_eta: 10,
            pool_scale: 2.0,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_x == 0 || self.l_eta == 0 {
            return Err(SvError::Config("pool sizes l_x and l_eta must be >= 1".into()));
        }
        if !(self.pool_scale > 0.0 && self.pool_scale.is_finite()) {
            return Err(SvError::Config("pool_scale must be positive".into()));
        }
        Ok(())
    }

    /// `pool_scale / sqrt(1 - phi^2)`.
    pub fn x_pool_sd(&self, phi: f64) -> f64 {
        self.pool_scale / (1.0 - phi * phi).sqrt()
    }
}

/// Pool states. Row `i` of `x_pools` holds the `L_x` candidates for `x_i`,
/// with the current value in column 0; `eta_pool[0]` is the current eta.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolGrid {
    n: usize,
    l_x: usize,
    x_pools: Vec<f64>,
    eta_pool: Vec<f64>,
    pool_log_density: Vec<f64>,
}

impl PoolGrid {
    /// Builds a grid from explicit pool values; `log_kappa` is the log density
    /// of the x-pool generator at each entry.
    pub fn from_parts(
        n: usize,
        l_x: usize,
        x_pools: Vec<f64>,
        eta_pool: Vec<f64>,
        log_kappa: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || l_x == 0 || eta_pool.is_empty() {
            return Err(SvError::Config("empty pool grid".into()));
        }
        if x_pools.len() != n * l_x || log_kappa.len() != n * l_x {
            return Err(SvError::LengthMismatch {
                expected: n * l_x,
                got: x_pools.len().min(log_kappa.len()),
            });
        }
        Ok(Self {
            n,
            l_x,
            x_pools,
            eta_pool,
            pool_log_density: log_kappa,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_x(&self) -> usize {
        self.l_x
    }

    pub fn l_eta(&self) -> usize {
        self.eta_pool.len()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x_pools[i * self.l_x..(i + 1) * self.l_x]
    }

    pub fn log_kappa_row(&self, i: usize) -> &[f64] {
        &self.pool_log_density[i * self.l_x..(i + 1) * self.l_x]
    }

    pub fn eta_pool(&self) -> &[f64] {
        &self.eta_pool
    }

    pub fn dump(&self, cache: Option<&ForwardCache>) -> EnsembleDump {
        EnsembleDump {
            x_pools: (0..self.n).map(|i| self.x_row(i).to_vec()).collect(),
            eta_pool: self.eta_pool.clone(),
            log_rho: cache.map(|c| c.log_rho.clone()),
        }
    }
}

/// JSON fixture format for pools and column densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDump {
    pub x_pools: Vec<Vec<f64>>,
    pub eta_pool: Vec<f64>,
    pub log_rho: Option<Vec<f64>>,
}

impl EnsembleDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Draws pools around the current `(x, eta)`. x slots `1..L_x` are i.i.d.
/// `N(0, pool_scale^2 / (1 - phi^2))` per time, eta slots `1..L_eta` come
/// from the eta prior.
pub fn build_pools(
    x: &[f64],
    eta: f64,
    prior: &PriorSpec,
    cfg: &PoolConfig,
    phi_for_scale: f64,
    rng: &mut RandomStream,
) -> Result<PoolGrid> {
    cfg.validate()?;
    if !(phi_for_scale.abs() < 1.0) {
        return Err(SvError::Domain(format!(
            "pool phi must satisfy |phi| < 1, got {phi_for_scale}"
        )));
    }
    let n = x.len();
    if n == 0 {
        return Err(SvError::TooShort { need: 1, got: 0 });
    }
    let sd = cfg.x_pool_sd(phi_for_scale);
    let var = sd * sd;
    let l_x = cfg.l_x;
    let mut x_pools = Vec::with_capacity(n * l_x);
    for &xi in x {
        x_pools.push(xi);
        for _ in 1..l_x {
            x_pools.push(sd * rng.normal01());
        }
    }
    let pool_log_density = x_pools.iter().map(|&v| log_normal_pdf(v, 0.0, var)).collect();
    let mut eta_pool = Vec::with_capacity(cfg.l_eta);
    eta_pool.push(eta);
    for _ in 1..cfg.l_eta {
        eta_pool.push(prior.sample_eta(rng));
    }
    Ok(PoolGrid {
        n,
        l_x,
        x_pools,
        eta_pool,
        pool_log_density,
    })
}

/// Transition kernel between consecutive pools, row `k2` (previous state)
/// by column `k1` (current state): `N(x_i^[k1] | phi x_{i-1}^[k2], 1)`.
pub fn transition_probs(x_prev_pool: &[f64], x_pool: &[f64], phi: f64) -> Vec<f64> {
    let mut out = vec![0.0; x_prev_pool.len() * x_pool.len()];
    fill_transition(x_prev_pool, x_pool, phi, &mut out);
    out
}

#[inline]
fn fill_transition(prev: &[f64], cur: &[f64], phi: f64, out: &mut [f64]) {
    let l = cur.len();
    for (k2, &xp) in prev.iter().enumerate() {
        let mean = phi * xp;
        let row = &mut out[k2 * l..(k2 + 1) * l];
        for (slot, &xc) in row.iter_mut().zip(cur) {
            let d = xc - mean;
            *slot = INV_SQRT_2PI * (-0.5 * d * d).exp();
        }
    }
}

#[inline]
fn fill_obs_row(y2: f64, c: f64, sigma: f64, xs: &[f64], log_kappa: &[f64], out: &mut [f64]) {
    for ((slot, &x), &lk) in out.iter_mut().zip(xs).zip(log_kappa) {
        let h = c + sigma * x;
        *slot = -0.5 * (LN_2PI + h + y2 * (-h).exp()) - lk;
    }
}

/// `log p(y_i | x, eta[l]) - log kappa_i(x)` for every pool entry, shared by
/// every forward pass on the same pools and `c` (it does not depend on phi).
#[derive(Debug, Clone)]
pub struct EnsembleLikelihood<'a> {
    pools: &'a PoolGrid,
    /// `[i][l][k]`
    obs_log: Vec<f64>,
    /// `exp(obs_log - obs_max)` per `(i, l)` row
    obs_scaled: Vec<f64>,
    /// `[i][l]`
    obs_max: Vec<f64>,
}

impl<'a> EnsembleLikelihood<'a> {
    pub fn new(dataset: &Dataset, pools: &'a PoolGrid, c: f64, exec: Execution) -> Result<Self> {
        if dataset.len() != pools.n {
            return Err(SvError::LengthMismatch {
                expected: pools.n,
                got: dataset.len(),
            });
        }
        let (n, l_x, l_eta) = (pools.n, pools.l_x, pools.l_eta());
        let row = l_eta * l_x;
        let sigmas: Vec<f64> = pools.eta_pool.iter().map(|e| (0.5 * e).exp()).collect();
        let mut obs_log = vec![0.0; n * row];
        par::for_each_chunk_mut(exec, &mut obs_log, row * TIMES_PER_TASK, |task, chunk| {
            for (j, block) in chunk.chunks_mut(row).enumerate() {
                let i = task * TIMES_PER_TASK + j;
                let y = dataset.y[i];
                for (l, out) in block.chunks_mut(l_x).enumerate() {
                    fill_obs_row(y * y, c, sigmas[l], pools.x_row(i), pools.log_kappa_row(i), out);
                }
            }
        });
        let obs_max: Vec<f64> = obs_log
            .chunks(l_x)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut obs_scaled = obs_log.clone();
        par::for_each_chunk_mut(exec, &mut obs_scaled, l_x * 256, |task, chunk| {
            for (j, r) in chunk.chunks_mut(l_x).enumerate() {
                let m = obs_max[task * 256 + j];
                r.iter_mut().for_each(|v| *v = (*v - m).exp());
            }
        });
        Ok(Self {
            pools,
            obs_log,
            obs_scaled,
            obs_max,
        })
    }

    pub fn pools(&self) -> &PoolGrid {
        self.pools
    }

    #[inline]
    fn row(&self, i: usize, l: usize) -> (&[f64], &[f64], f64) {
        let l_x = self.pools.l_x;
        let r = (i * self.pools.l_eta() + l) * l_x;
        (
            &self.obs_log[r..r + l_x],
            &self.obs_scaled[r..r + l_x],
            self.obs_max[i * self.pools.l_eta() + l],
        )
    }

    /// Forward recursion for every eta column at the given phi.
    pub fn forward_pass(&self, phi: f64, exec: Execution) -> ForwardCache {
        let pools = self.pools;
        let (n, l_x, l_eta) = (pools.n, pools.l_x, pools.l_eta());
        let block = l_x * l_x;
        let mut transitions = vec![0.0; n.saturating_sub(1) * block];
        par::for_each_chunk_mut(exec, &mut transitions, block * TIMES_PER_TASK, |task, chunk| {
            for (j, out) in chunk.chunks_mut(block).enumerate() {
                let i = task * TIMES_PER_TASK + j + 1;
                fill_transition(pools.x_row(i - 1), pools.x_row(i), phi, out);
            }
        });
        let init_log = initial_log_density(pools.x_row(0), phi);
        let init_lin: Vec<f64> = init_log.iter().map(|v| v.exp()).collect();

        let mut cache = ForwardCache::empty(n, l_x, l_eta, phi, transitions);
        let mut scratch = Scratch::new(l_x);
        for i in 0..n {
            for l in 0..l_eta {
                if cache.dead[l] {
                    continue;
                }
                let (obs_log, obs_scaled, obs_max) = self.row(i, l);
                let ok = cache.step(i, l, obs_log, obs_scaled, obs_max, &init_log, &init_lin, &mut scratch);
                if !ok {
                    cache.kill(l, i);
                }
            }
        }
        cache.finish();
        cache
    }
}

fn initial_log_density(row: &[f64], phi: f64) -> Vec<f64> {
    let var = 1.0 / (1.0 - phi * phi);
    row.iter().map(|&x| log_normal_pdf(x, 0.0, var)).collect()
}

struct Scratch {
    s: Vec<f64>,
    a: Vec<f64>,
}

impl Scratch {
    fn new(l_x: usize) -> Self {
        Self {
            s: vec![0.0; l_x],
            a: vec![0.0; l_x],
        }
    }
}

/// Stored forward quantities. `alpha[l][i]` is the normalised forward vector
/// of column `l` at time `i`; `log_c[l][i]` its log normaliser; `log_rho[l]`
/// the log ensemble density of column `l`. A dead column (forward sum
/// exactly zero at some time) has `log_rho = -inf` and zero alphas from the
/// time it died.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    n: usize,
    l_x: usize,
    l_eta: usize,
    phi: f64,
    transitions: Vec<f64>,
    alpha: Vec<f64>,
    log_c: Vec<f64>,
    log_rho: Vec<f64>,
    dead: Vec<bool>,
}

impl ForwardCache {
    fn empty(n: usize, l_x: usize, l_eta: usize, phi: f64, transitions: Vec<f64>) -> Self {
        Self {
            n,
            l_x,
            l_eta,
            phi,
            transitions,
            alpha: vec![0.0; l_eta * n * l_x],
            log_c: vec![0.0; l_eta * n],
            log_rho: vec![0.0; l_eta],
            dead: vec![false; l_eta],
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn l_eta(&self) -> usize {
        self.l_eta
    }

    pub fn log_rho(&self) -> &[f64] {
        &self.log_rho
    }

    /// `log sum_l rho[l]`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(&self.log_rho)
    }

    pub fn is_dead(&self, l: usize) -> bool {
        self.dead[l]
    }

    pub fn alpha(&self, l: usize, i: usize) -> &[f64] {
        let o = (l * self.n + i) * self.l_x;
        &self.alpha[o..o + self.l_x]
    }

    pub fn log_c(&self, l: usize) -> &[f64] {
        &self.log_c[l * self.n..(l + 1) * self.n]
    }

    /// Matrix between times `i - 1` and `i` (`i >= 1`), row-major by previous state.
    pub fn transition(&self, i: usize) -> &[f64] {
        let b = self.l_x * self.l_x;
        &self.transitions[(i - 1) * b..i * b]
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn step(
        &mut self,
        i: usize,
        l: usize,
        obs_log: &[f64],
        obs_scaled: &[f64],
        obs_max: f64,
        init_log: &[f64],
        init_lin: &[f64],
        scratch: &mut Scratch,
    ) -> bool {
        let l_x = self.l_x;
        let s = &mut scratch.s;
        if i == 0 {
            s.copy_from_slice(init_lin);
        } else {
            s.iter_mut().for_each(|v| *v = 0.0);
            let prev_off = (l * self.n + i - 1) * l_x;
            let b = l_x * l_x;
            let p = &self.transitions[(i - 1) * b..i * b];
            for k2 in 0..l_x {
                let a = self.alpha[prev_off + k2];
                if a == 0.0 {
                    continue;
                }
                let row = &p[k2 * l_x..(k2 + 1) * l_x];
                for (sv, &pv) in s.iter_mut().zip(row) {
                    *sv += a * pv;
                }
            }
        }
        let a = &mut scratch.a;
        let mut sum = 0.0;
        for ((av, &sv), &ov) in a.iter_mut().zip(s.iter()).zip(obs_scaled) {
            *av = sv * ov;
            sum += *av;
        }
        let log_norm = if sum >= RESCALE_FLOOR && sum.is_finite() {
            obs_max + sum.ln()
        } else {
            // linear-space products underflowed; redo this step in log space
            let mut m = f64::NEG_INFINITY;
            for (k, av) in a.iter_mut().enumerate() {
                let ls = if i == 0 { init_log[k] } else { s[k].ln() };
                *av = obs_log[k] + ls;
                m = m.max(*av);
            }
            if m == f64::NEG_INFINITY {
                return false;
            }
            sum = 0.0;
            for av in a.iter_mut() {
                *av = (*av - m).exp();
                sum += *av;
            }
            m + sum.ln()
        };
        let off = (l * self.n + i) * l_x;
        let inv = 1.0 / sum;
        for (dst, &av) in self.alpha[off..off + l_x].iter_mut().zip(a.iter()) {
            *dst = av * inv;
        }
        self.log_c[l * self.n + i] = log_norm;
        true
    }

    fn kill(&mut self, l: usize, from: usize) {
        self.dead[l] = true;
        let l_x = self.l_x;
        for i in from..self.n {
            let off = (l * self.n + i) * l_x;
            self.alpha[off..off + l_x].iter_mut().for_each(|v| *v = 0.0);
            self.log_c[l * self.n + i] = f64::NEG_INFINITY;
        }
    }

    fn finish(&mut self) {
        for l in 0..self.l_eta {
            self.log_rho[l] = if self.dead[l] {
                f64::NEG_INFINITY
            } else {
                self.log_c(l).iter().sum()
            };
        }
        assert!(
            !self.dead[0],
            "forward recursion died for the current eta; the current state must have positive density"
        );
    }
}

/// Convenience wrapper computing observation weights and running one pass.
pub fn forward_pass(dataset: &Dataset, pools: &PoolGrid, phi: f64, c: f64, exec: Execution) -> Result<ForwardCache> {
    Ok(EnsembleLikelihood::new(dataset, pools, c, exec)?.forward_pass(phi, exec))
}

/// Reference recursion that recomputes transition matrices and observation
/// weights separately for every eta column. Same arithmetic as
/// [`forward_pass`], roughly `L_eta` times the transcendental work.
pub fn forward_pass_uncached(dataset: &Dataset, pools: &PoolGrid, phi: f64, c: f64) -> Result<ForwardCache> {
    if dataset.len() != pools.n {
        return Err(SvError::LengthMismatch {
            expected: pools.n,
            got: dataset.len(),
        });
    }
    let (n, l_x, l_eta) = (pools.n, pools.l_x, pools.l_eta());
    let block = l_x * l_x;
    let init_log = initial_log_density(pools.x_row(0), phi);
    let init_lin: Vec<f64> = init_log.iter().map(|v| v.exp()).collect();
    let mut cache = ForwardCache::empty(n, l_x, l_eta, phi, vec![0.0; n.saturating_sub(1) * block]);
    let mut scratch = Scratch::new(l_x);
    let mut obs_log = vec![0.0; l_x];
    let mut obs_scaled = vec![0.0; l_x];
    for l in 0..l_eta {
        let sigma = (0.5 * pools.eta_pool[l]).exp();
        for i in 0..n {
            if i > 0 {
                let (lo, hi) = ((i - 1) * block, i * block);
                fill_transition(pools.x_row(i - 1), pools.x_row(i), phi, &mut cache.transitions[lo..hi]);
            }
            let y = dataset.y[i];
            fill_obs_row(y * y, c, sigma, pools.x_row(i), pools.log_kappa_row(i), &mut obs_log);
            let m = obs_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (d, &v) in obs_scaled.iter_mut().zip(&obs_log) {
                *d = (v - m).exp();
            }
            if !cache.step(i, l, &obs_log, &obs_scaled, m, &init_log, &init_lin, &mut scratch) {
                cache.kill(l, i);
                break;
            }
        }
    }
    cache.finish();
    Ok(cache)
}

/// A draw from the ensemble: the eta column index, its eta, and the chosen
/// pool index and value at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDraw {
    pub eta_index: usize,
    pub eta: f64,
    pub indices: Vec<usize>,
    pub x: Vec<f64>,
}

/// Picks `l ∝ rho[l]`, then samples a sequence backwards:
/// `x_N ∝ alpha_N[l]`, `x_{i-1} ∝ p(x_i | x_{i-1}) alpha_{i-1}[l](x_{i-1})`.
pub fn sample_eta_and_sequence(cache: &ForwardCache, pools: &PoolGrid, rng: &mut RandomStream) -> Result<EnsembleDraw> {
    let (n, l_x) = (cache.n, cache.l_x);
    let l = rng.categorical_log(&cache.log_rho)?;
    let mut indices = vec![0usize; n];
    indices[n - 1] = rng.categorical(cache.alpha(l, n - 1))?;
    let mut w = vec![0.0; l_x];
    for i in (1..n).rev() {
        let p = cache.transition(i);
        let k1 = indices[i];
        let prev = cache.alpha(l, i - 1);
        for (k2, wk) in w.iter_mut().enumerate() {
            *wk = p[k2 * l_x + k1] * prev[k2];
        }
        indices[i - 1] = rng.categorical(&w)?;
    }
    let x = indices.iter().enumerate().map(|(i, &k)| pools.x_row(i)[k]).collect();
    Ok(EnsembleDraw {
        eta_index: l,
        eta: pools.eta_pool[l],
        indices,
        x,
    })
}

/// Map to an ensemble of `(eta, x)` built around the current phi and map
/// straight back with a draw from it.
pub fn ens1_update(
    dataset: &Dataset,
    t: TransformedParams,
    x: &[f64],
    prior: &PriorSpec,
    cfg: &PoolConfig,
    exec: Execution,
    rng: &mut RandomStream,
) -> Result<(TransformedParams, Vec<f64>)> {
    let phi = t.phi();
    let pools = build_pools(x, t.eta, prior, cfg, phi, rng)?;
    let cache = forward_pass(dataset, &pools, phi, t.c, exec)?;
    let draw = sample_eta_and_sequence(&cache, &pools, rng)?;
    Ok((TransformedParams::new(t.c, t.gamma, draw.eta), draw.x))
}

/// `log sum_l rho[l] + log prior(gamma)`, the log target of the ensemble
/// gamma update on fixed pools.
pub fn ensemble_log_target(cache: &ForwardCache, gamma: f64, prior: &PriorSpec) -> f64 {
    let lp = prior.log_prior_gamma(gamma);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    cache.log_total() + lp
}

/// Outcome of the ensemble gamma proposal, exposed for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ens2Proposal {
    pub gamma_proposed: f64,
    /// Unclipped log ratio of the ensemble targets, proposed over current.
    pub log_accept_ratio: f64,
    pub accepted: bool,
}

/// Ensemble Metropolis update of gamma followed by a draw of `(eta, x)`.
///
/// Pools are built once at `phi_avg = (phi + phi*) / 2` and shared by the
/// forward passes at `phi` and `phi*`, which keeps the pool construction
/// symmetric under swapping the two.
#[allow(clippy::too_many_arguments)]
pub fn ens2_update(
    dataset: &Dataset,
    t: TransformedParams,
    x: &[f64],
    prior: &PriorSpec,
    cfg: &PoolConfig,
    gamma_prop_sd: f64,
    exec: Execution,
    rng: &mut RandomStream,
    counter: &mut AcceptanceCounter,
) -> Result<(TransformedParams, Vec<f64>, Ens2Proposal)> {
    let gamma_star = t.gamma + gamma_prop_sd * rng.normal01();
    let (phi, phi_star) = (t.phi(), phi_of_gamma(gamma_star));
    let phi_avg = 0.5 * (phi + phi_star);
    let pools = build_pools(x, t.eta, prior, cfg, phi_avg, rng)?;
    let lik = EnsembleLikelihood::new(dataset, &pools, t.c, exec)?;
    let current = lik.forward_pass(phi, exec);
    let (log_ratio, proposed) = if prior.log_prior_gamma(gamma_star) == f64::NEG_INFINITY {
        (f64::NEG_INFINITY, None)
    } else {
        let cache_star = lik.forward_pass(phi_star, exec);
        let lr = ensemble_log_target(&cache_star, gamma_star, prior) - ensemble_log_target(&current, t.gamma, prior);
        (lr, Some(cache_star))
    };
    let accepted = metropolis_accept(log_ratio, rng);
    counter.record(accepted);
    let (cache, gamma) = match (accepted, proposed) {
        (true, Some(c)) => (c, gamma_star),
        _ => (current, t.gamma),
    };
    let draw = sample_eta_and_sequence(&cache, &pools, rng)?;
    Ok((
        TransformedParams::new(t.c, gamma, draw.eta),
        draw.x,
        Ens2Proposal {
            gamma_proposed: gamma_star,
            log_accept_ratio: log_ratio,
            accepted,
        },
    ))
}
