//! Kalman filtering and backward sampling of the NC latent path under the
//! linear-Gaussian mixture approximation
//!
//! ```text
//! log y_i^2 - m_{r_i} - c = sigma * x_i + v_i,   v_i ~ N(0, tau_{r_i}^2)
//! x_1 ~ N(0, 1 / (1 - phi^2)),  x_i = phi * x_{i-1} + w_i,  w_i ~ N(0, 1)
//! ```

use crate::error::{Result, SvError};
use crate::mixture::{IndicatorPath, MixtureTable};
use crate::model::{log_normal_pdf, Dataset, LatentPath, TransformedParams};
use crate::rng::RandomStream;

const MIN_VARIANCE: f64 = 1e-12;

/// One-step predicted and filtered moments, plus the prediction-error
/// decomposition of the marginal log-likelihood of `log y^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub pred_mean: Vec<f64>,
    pub pred_var: Vec<f64>,
    pub filt_mean: Vec<f64>,
    pub filt_var: Vec<f64>,
    pub loglik: f64,
}

pub fn kalman_filter(
    dataset: &Dataset,
    r: &IndicatorPath,
    t: &TransformedParams,
    table: &MixtureTable,
) -> Result<FilterState> {
    let n = dataset.len();
    if r.len() != n {
        return Err(SvError::LengthMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let phi = t.phi();
    if !(phi.abs() < 1.0) {
        return Err(SvError::Domain(format!("|phi| must be < 1, got {phi}")));
    }
    let sigma = t.sigma();
    let mut fs = FilterState {
        pred_mean: Vec::with_capacity(n),
        pred_var: Vec::with_capacity(n),
        filt_mean: Vec::with_capacity(n),
        filt_var: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let mut a = 0.0;
    let mut p = 1.0 / (1.0 - phi * phi);
    for i in 0..n {
        if i > 0 {
            a = phi * fs.filt_mean[i - 1];
            p = phi * phi * fs.filt_var[i - 1] + 1.0;
        }
        p = p.max(MIN_VARIANCE);
        let k = r.get(i);
        let z = dataset.log_y2[i] - table.means[k] - t.c;
        let tau2 = table.variances[k];
        let f = sigma * sigma * p + tau2;
        let gain = p * sigma / f;
        let innovation = z - sigma * a;
        fs.loglik += log_normal_pdf(z, sigma * a, f);
        fs.pred_mean.push(a);
        fs.pred_var.push(p);
        fs.filt_mean.push(a + gain * innovation);
        fs.filt_var.push((p * tau2 / f).max(MIN_VARIANCE));
    }
    Ok(fs)
}

/// Backward sampling pass over a completed filter.
pub fn backward_sample(fs: &FilterState, phi: f64, rng: &mut RandomStream) -> LatentPath {
    let n = fs.filt_mean.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return LatentPath::non_centered(x);
    }
    x[n - 1] = rng.normal(fs.filt_mean[n - 1], fs.filt_var[n - 1].sqrt());
    for i in (0..n - 1).rev() {
        let c = fs.filt_var[i];
        let gain = c * phi / fs.pred_var[i + 1];
        let mean = fs.filt_mean[i] + gain * (x[i + 1] - fs.pred_mean[i + 1]);
        let var = (c - gain * phi * c).max(MIN_VARIANCE);
        x[i] = rng.normal(mean, var.sqrt());
    }
    LatentPath::non_centered(x)
}

/// Exact draw of `x | log y^2, r, theta` under the approximate model.
pub fn ffbs_sample(
    dataset: &Dataset,
    r: &IndicatorPath,
    t: &TransformedParams,
    table: &MixtureTable,
    rng: &mut RandomStream,
) -> Result<LatentPath> {
    let fs = kalman_filter(dataset, r, t, table)?;
    Ok(backward_sample(&fs, t.phi(), rng))
}
