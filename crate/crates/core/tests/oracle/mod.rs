//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

/// Every index sequence of length `n` over `0..l`, first index slowest.
pub fn sequences(n: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..l).map(move |k| {
                    let mut t = s.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    out
}

/// Ensemble problem written out explicitly.
pub struct Ensemble {
    pub y: Vec<f64>,
    /// `x_pools[i][k]`
    pub x_pools: Vec<Vec<f64>>,
    pub log_kappa: Vec<Vec<f64>>,
    pub eta_pool: Vec<f64>,
    pub c: f64,
}

impl Ensemble {
    /// `log [ p(x_1) prod p(x_i | x_{i-1}) prod p(y_i | x_i, eta) / kappa_i(x_i) ]`
    /// for one element, summed term by term.
    pub fn log_element(&self, phi: f64, l: usize, seq: &[usize]) -> f64 {
        let sigma = (self.eta_pool[l] / 2.0).exp();
        let mut total = 0.0;
        for (i, &k) in seq.iter().enumerate() {
            let x = self.x_pools[i][k];
            total += if i == 0 {
                normal_logpdf(x, 0.0, 1.0 / (1.0 - phi * phi))
            } else {
                normal_logpdf(x, phi * self.x_pools[i - 1][seq[i - 1]], 1.0)
            };
            let var = (self.c + sigma * x).exp();
            total += normal_logpdf(self.y[i], 0.0, var) - self.log_kappa[i][k];
        }
        total
    }

    /// Log density of every element, indexed `[l][sequence]`.
    pub fn all_elements(&self, phi: f64) -> Vec<Vec<f64>> {
        let seqs = sequences(self.y.len(), self.x_pools[0].len());
        (0..self.eta_pool.len())
            .map(|l| seqs.iter().map(|s| self.log_element(phi, l, s)).collect())
            .collect()
    }

    /// `log rho[l]` by summing all `L_x^N` sequences.
    pub fn log_rho(&self, phi: f64) -> Vec<f64> {
        self.all_elements(phi).iter().map(|e| log_sum(e)).collect()
    }
}

pub fn log_sum(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Joint Gaussian model `z = sigma x + v`, `x` a stationary AR(1) with unit
/// innovations and `v ~ N(0, diag(tau2))`.
pub struct DenseLinearGaussian {
    pub prior_cov: DMatrix<f64>,
    pub sigma: f64,
    pub tau2: Vec<f64>,
}

impl DenseLinearGaussian {
    pub fn new(phi: f64, sigma: f64, tau2: Vec<f64>) -> Self {
        let n = tau2.len();
        let prior_cov = DMatrix::from_fn(n, n, |i, j| phi.powi((i as i32 - j as i32).abs()) / (1.0 - phi * phi));
        Self { prior_cov, sigma, tau2 }
    }

    fn obs_cov(&self, m: usize) -> DMatrix<f64> {
        let s = &self.prior_cov.view((0, 0), (m, m)) * (self.sigma * self.sigma);
        s + DMatrix::from_diagonal(&DVector::from_row_slice(&self.tau2[..m]))
    }

    /// `(mean, var)` of `x_i` given `z_1..z_m` (0-based `i`, first `m` observations).
    pub fn conditional(&self, z: &[f64], i: usize, m: usize) -> (f64, f64) {
        if m == 0 {
            return (0.0, self.prior_cov[(i, i)]);
        }
        let s_inv = self.obs_cov(m).try_inverse().expect("positive definite");
        let cross = DVector::from_fn(m, |j, _| self.sigma * self.prior_cov[(i, j)]);
        let zv = DVector::from_row_slice(&z[..m]);
        let mean = cross.dot(&(&s_inv * zv));
        let var = self.prior_cov[(i, i)] - cross.dot(&(&s_inv * &cross));
        (mean, var)
    }

    /// Full posterior of `x` given all observations.
    pub fn posterior(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = z.len();
        let s_inv = self.obs_cov(n).try_inverse().expect("positive definite");
        let cross = &self.prior_cov * self.sigma;
        let mean = &cross * (&s_inv * DVector::from_row_slice(z));
        let cov = &self.prior_cov - &cross * &s_inv * cross.transpose();
        (mean, cov)
    }

    /// `log N(z | 0, sigma^2 Sigma + diag(tau2))`.
    pub fn log_marginal(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let s = self.obs_cov(n);
        let det = s.clone().determinant();
        let zv = DVector::from_row_slice(z);
        let quad = zv.dot(&(s.try_inverse().unwrap() * &zv));
        -0.5 * (n as f64 * (2.0 * PI).ln() + det.ln() + quad)
    }
}

/// Upper tail probability of a chi-squared statistic.
pub fn chi2_p_value(stat: f64, df: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}
