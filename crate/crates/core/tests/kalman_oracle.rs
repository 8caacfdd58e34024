mod oracle;

use oracle::DenseLinearGaussian;
use sv_core::kalman::{backward_sample, kalman_filter};
use sv_core::mixture::{IndicatorPath, MixtureTable};
use sv_core::model::{gamma_of_phi, simulate_sv, Params};
use sv_core::{RandomStream, TransformedParams};

fn setup(seed: u64) -> (sv_core::Dataset, IndicatorPath, TransformedParams, MixtureTable, Vec<f64>, Vec<f64>) {
    let mut rng = RandomStream::new(seed, 0);
    let table = MixtureTable::omori();
    let (ds, _) = simulate_sv(&Params::new(0.4, 0.8, 0.3).unwrap(), 5, &mut rng).unwrap();
    let r = IndicatorPath::new((0..5).map(|_| (rng.uniform01() * 10.0) as u8).collect()).unwrap();
    let t = TransformedParams::new(0.4, gamma_of_phi(0.8), 0.3f64.ln());
    let z: Vec<f64> = (0..5).map(|i| ds.log_y2[i] - table.means[r.get(i)] - t.c).collect();
    let tau2: Vec<f64> = (0..5).map(|i| table.variances[r.get(i)]).collect();
    (ds, r, t, table, z, tau2)
}

#[test]
fn filter_moments_match_dense_gaussian() {
    for seed in 0..10 {
        let (ds, r, t, table, z, tau2) = setup(seed);
        let fs = kalman_filter(&ds, &r, &t, &table).unwrap();
        let dense = DenseLinearGaussian::new(t.phi(), t.sigma(), tau2);
        for i in 0..5 {
            let (pm, pv) = dense.conditional(&z, i, i);
            let (fm, fv) = dense.conditional(&z, i, i + 1);
            assert!((fs.pred_mean[i] - pm).abs() < 1e-8);
            assert!((fs.pred_var[i] - pv).abs() < 1e-8);
            assert!((fs.filt_mean[i] - fm).abs() < 1e-8);
            assert!((fs.filt_var[i] - fv).abs() < 1e-8);
        }
        assert!((fs.loglik - dense.log_marginal(&z)).abs() < 1e-8);
    }
}

#[test]
fn ffbs_samples_match_dense_posterior() {
    let (ds, r, t, table, z, tau2) = setup(42);
    let fs = kalman_filter(&ds, &r, &t, &table).unwrap();
    let (mean, cov) = DenseLinearGaussian::new(t.phi(), t.sigma(), tau2).posterior(&z);
    let m = 200_000;
    let mut rng = RandomStream::new(1, 9);
    let mut s1 = vec![0.0; 5];
    let mut s2 = vec![vec![0.0; 5]; 5];
    let draws: Vec<Vec<f64>> = (0..m).map(|_| backward_sample(&fs, t.phi(), &mut rng).values).collect();
    for d in &draws {
        for j in 0..5 {
            s1[j] += d[j] / m as f64;
        }
    }
    for d in &draws {
        for j in 0..5 {
            for k in 0..5 {
                s2[j][k] += (d[j] - mean[j]) * (d[k] - mean[k]) / m as f64;
            }
        }
    }
    for j in 0..5 {
        let se = (cov[(j, j)] / m as f64).sqrt();
        assert!((s1[j] - mean[j]).abs() < 3.0 * se, "mean {j}: {} vs {}", s1[j], mean[j]);
        for k in j..5 {
            let se = ((cov[(j, j)] * cov[(k, k)] + cov[(j, k)].powi(2)) / m as f64).sqrt();
            assert!((s2[j][k] - cov[(j, k)]).abs() < 3.0 * se, "cov {j},{k}: {} vs {}", s2[j][k], cov[(j, k)]);
        }
    }
}
