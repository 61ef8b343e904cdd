//! Monte Carlo oracle for the analytic task output covariance: twenty random
//! diagonal quadratic tasks (up to nine lags, up to three input dimensions)
//! against the sample variance of million-step target series.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use tdr::poly::MomentProvider;
use tdr::sim::{gen_input, InputSpec};
use tdr::tasks::{diag_quadratic_task, target_series, task_output_covariance};

#[test]
fn analytic_task_variance_matches_million_step_sampling() {
    let mut rng = ChaCha12Rng::seed_from_u64(61);
    let t_len = 1_000_000usize;
    for draw in 0..20 {
        let n = rng.random_range(1..=3);
        let lags = rng.random_range(0..=9);
        let weights: Vec<f64> = (0..=lags).map(|_| rng.random_range(-2.0..2.0)).collect();
        if weights.iter().all(|w| w.abs() < 0.05) {
            continue;
        }
        let task = diag_quadratic_task(lags, n, &weights).unwrap();
        let scale = rng.random_range(0.2..1.5);
        let sigma = DMatrix::identity(n, n) * scale;
        let provider = MomentProvider::gaussian(sigma.clone());
        let (trace, _) = task_output_covariance(&task, &provider).unwrap();

        let z = gen_input(&InputSpec { sigma_z: sigma }, t_len, 1000 + draw).unwrap();
        let y = target_series(&task, &z, lags).unwrap();
        let count = y.ncols() as f64;
        let mean = y.row(0).sum() / count;
        let centered_sq: Vec<f64> = y.row(0).iter().map(|v| (v - mean) * (v - mean)).collect();
        let m2 = centered_sq.iter().sum::<f64>() / count;

        // Overlapping lag windows correlate consecutive targets up to lag
        // `lags` and exactly zero beyond, so the variance of the variance
        // estimator is the truncated autocovariance sum of the squared
        // series.
        let sq_mean = m2;
        let mut long_run = 0.0;
        for k in 0..=lags {
            let mut acov = 0.0;
            for t in k..centered_sq.len() {
                acov += (centered_sq[t] - sq_mean) * (centered_sq[t - k] - sq_mean);
            }
            acov /= count;
            long_run += if k == 0 { acov } else { 2.0 * acov };
        }
        let se = (long_run.max(0.0) / count).sqrt();
        assert!(
            (m2 - trace).abs() <= 3.0 * se.max(1e-12),
            "draw {draw} (n={n}, lags={lags}): analytic {trace}, empirical {m2}, se {se}"
        );
    }
}
