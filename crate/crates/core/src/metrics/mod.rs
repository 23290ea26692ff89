//! Evaluation metrics: MSE, accumulated rollout error, windowed SSIM,
//! above-threshold step counts and the energy-consistency series, plus the
//! Matérn-correlated noise generator for robustness tests.

mod noise;
mod ssim;

pub use noise::{
    add_noise_to_input, add_noise_to_window, balgovind_correlation, matern_correlation,
    sample_correlated_noise,
    CorrelatedNoiseSampler, NoisePerturbation, NoiseSpec,
};
pub use ssim::{ssim_channel, ssim_field, SsimValue};

use crate::physics::{total_energy, FieldState};
use crate::{CoreError, Result};

/// Mean of squared elementwise differences.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(CoreError::Dimension(format!(
            "mse over lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// Prefix sums of the per-step MSE: the accumulated error along a rollout.
pub fn accumulated_error(per_step_mse: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(per_step_mse.len());
    let mut acc = 0.0;
    for &v in per_step_mse {
        acc += v;
        out.push(acc);
    }
    out
}

/// Number of leading steps before the series first dips below `threshold`
/// (values equal to the threshold still count as above).
pub fn step_count_above(series: &[f64], threshold: f64) -> usize {
    series.iter().take_while(|&&v| v >= threshold).count()
}

/// One evaluated rollout step.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: usize,
    pub latent_mse: f64,
    pub accumulated_error: f64,
    pub ssim: f64,
    pub energy_pred: Option<f64>,
    pub energy_true: Option<f64>,
}

/// Per-step evaluation records for one rollout.
#[derive(Debug, Clone, Default)]
pub struct EvalSeries {
    pub records: Vec<EvalRecord>,
}

impl EvalSeries {
    pub fn validate(&self) -> Result<()> {
        let mut prev_step = None;
        let mut prev_acc = f64::NEG_INFINITY;
        for r in &self.records {
            if let Some(p) = prev_step {
                if r.step <= p {
                    return Err(CoreError::Config("steps must strictly increase".into()));
                }
            }
            if r.accumulated_error < prev_acc {
                return Err(CoreError::Config("accumulated error must be non-decreasing".into()));
            }
            if !(-1.0..=1.0).contains(&r.ssim) {
                return Err(CoreError::Config(format!("ssim {} outside [-1, 1]", r.ssim)));
            }
            prev_step = Some(r.step);
            prev_acc = r.accumulated_error;
        }
        Ok(())
    }

    pub fn ssim_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ssim).collect()
    }
}

/// Total energy of each predicted state alongside the ground truth.
pub fn energy_consistency_series(
    decoded_rollout: &[FieldState],
    truth: &[FieldState],
    gravity: f64,
) -> Result<Vec<(f64, f64)>> {
    if decoded_rollout.len() != truth.len() {
        return Err(CoreError::Dimension("rollout and truth lengths differ".into()));
    }
    decoded_rollout
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| Ok((total_energy(p, gravity)?, total_energy(t, gravity)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::GridSpec;

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let n = 7;
        let zeros = vec![0.0; n];
        let ones = vec![1.0; n];
        assert_eq!(mse(&zeros, &ones).unwrap(), 1.0);
        assert!(mse(&zeros, &[1.0]).is_err());
    }

    #[test]
    fn mse_matches_explicit_loop() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from(1, 0, 0);
        let a: Vec<f64> = (0..100).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got = mse(&a, &b).unwrap();
        let mut acc = 0.0;
        for k in 0..100 {
            let d = a[k] - b[k];
            acc += d * d;
        }
        let expect = acc / 100.0;
        assert!((got - expect).abs() <= 1e-14);
    }

    #[test]
    fn accumulated_error_is_a_prefix_sum() {
        assert_eq!(accumulated_error(&[1.0, 2.0, 3.0]), vec![1.0, 3.0, 6.0]);
        assert_eq!(accumulated_error(&[0.0, 0.0]), vec![0.0, 0.0]);
        use rand::Rng;
        let mut rng = crate::seed::rng_from(2, 0, 0);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let acc = accumulated_error(&xs);
        let mut run = 0.0;
        for (k, &x) in xs.iter().enumerate() {
            run += x;
            assert!((acc[k] - run).abs() <= 1e-14);
        }
        // Non-decreasing.
        for w in acc.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn step_count_stops_at_first_crossing() {
        assert_eq!(step_count_above(&[0.9; 100], 0.8), 100);
        assert_eq!(step_count_above(&[0.9, 0.7, 0.9], 0.8), 1);
        assert_eq!(step_count_above(&[0.8, 0.8], 0.8), 2);
        assert_eq!(step_count_above(&[], 0.8), 0);
    }

    #[test]
    fn step_count_matches_scan_oracle_and_is_monotone_in_threshold() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from(3, 0, 0);
        for _ in 0..100 {
            let series: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
            let theta = rng.gen_range(0.0..1.0);
            let got = step_count_above(&series, theta);
            // Explicit scan oracle.
            let mut expect = 0;
            for &v in &series {
                if v < theta {
                    break;
                }
                expect += 1;
            }
            assert_eq!(got, expect);
            let stricter = step_count_above(&series, theta + 0.05);
            assert!(stricter <= got);
        }
    }

    #[test]
    fn energy_series_matches_per_step_oracle() {
        let grid = GridSpec::new(8, 8, 1.0, 1.0, 0.1).unwrap();
        let mut states = Vec::new();
        for k in 0..5 {
            let mut s = FieldState::zeros(grid, &["u", "v", "h"]);
            s.channel_mut("h").unwrap().fill(1.0 + 0.01 * k as f64);
            states.push(s);
        }
        let series = energy_consistency_series(&states, &states, 9.81).unwrap();
        for (k, (ep, et)) in series.iter().enumerate() {
            let oracle = total_energy(&states[k], 9.81).unwrap();
            assert!((ep - oracle).abs() <= 1e-12);
            assert_eq!(ep, et);
        }
    }
}
