//! Windowed structural similarity with the conventional recipe: 11×11
//! Gaussian window with σ = 1.5, K₁ = 0.01, K₂ = 0.03, and the data range
//! taken from the truth frame. Only fully interior window positions
//! contribute; multi-channel states average their channel scores.

use crate::physics::FieldState;
use crate::{CoreError, Result};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimValue {
    pub value: f64,
    /// Set when the truth frame had zero range and the fallback range 1 was
    /// used.
    pub degenerate_range: bool,
}

fn gaussian_kernel() -> [f64; WINDOW * WINDOW] {
    let mut k = [0.0; WINDOW * WINDOW];
    let c = (WINDOW as f64 - 1.0) / 2.0;
    let mut sum = 0.0;
    for i in 0..WINDOW {
        for j in 0..WINDOW {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            let w = (-d2 / (2.0 * SIGMA * SIGMA)).exp();
            k[i * WINDOW + j] = w;
            sum += w;
        }
    }
    for w in &mut k {
        *w /= sum;
    }
    k
}

/// SSIM between two 2-D channels of shape nx × ny (row-major, i·ny + j).
pub fn ssim_channel(pred: &[f64], truth: &[f64], nx: usize, ny: usize) -> Result<SsimValue> {
    if pred.len() != nx * ny || truth.len() != nx * ny {
        return Err(CoreError::Dimension("ssim inputs do not match the grid".into()));
    }
    if nx < WINDOW || ny < WINDOW {
        return Err(CoreError::Dimension(format!(
            "ssim needs at least {WINDOW}x{WINDOW}, got {nx}x{ny}"
        )));
    }
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for &v in truth {
        t_min = t_min.min(v);
        t_max = t_max.max(v);
    }
    let mut degenerate = false;
    let range = if t_max > t_min {
        t_max - t_min
    } else {
        degenerate = true;
        1.0
    };
    let c1 = (K1 * range) * (K1 * range);
    let c2 = (K2 * range) * (K2 * range);

    let kernel = gaussian_kernel();
    let mut total = 0.0;
    let mut count = 0usize;
    for i0 in 0..=(nx - WINDOW) {
        for j0 in 0..=(ny - WINDOW) {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            for wi in 0..WINDOW {
                for wj in 0..WINDOW {
                    let w = kernel[wi * WINDOW + wj];
                    let idx = (i0 + wi) * ny + (j0 + wj);
                    mu_x += w * pred[idx];
                    mu_y += w * truth[idx];
                }
            }
            let mut var_x = 0.0;
            let mut var_y = 0.0;
            let mut cov = 0.0;
            for wi in 0..WINDOW {
                for wj in 0..WINDOW {
                    let w = kernel[wi * WINDOW + wj];
                    let idx = (i0 + wi) * ny + (j0 + wj);
                    let dx = pred[idx] - mu_x;
                    let dy = truth[idx] - mu_y;
                    var_x += w * dx * dx;
                    var_y += w * dy * dy;
                    cov += w * dx * dy;
                }
            }
            let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
            let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(SsimValue { value: total / count as f64, degenerate_range: degenerate })
}

/// Mean of per-channel SSIM scores between two field states.
pub fn ssim_field(pred: &FieldState, truth: &FieldState) -> Result<SsimValue> {
    if pred.grid() != truth.grid() || pred.channel_names() != truth.channel_names() {
        return Err(CoreError::Dimension("ssim states do not match".into()));
    }
    let grid = truth.grid();
    let mut total = 0.0;
    let mut degen = false;
    for name in truth.channel_names() {
        let v = ssim_channel(pred.channel(name)?, truth.channel(name)?, grid.nx, grid.ny)?;
        total += v.value;
        degen |= v.degenerate_range;
    }
    Ok(SsimValue {
        value: total / truth.channel_count() as f64,
        degenerate_range: degen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_texture(nx: usize, ny: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
        let mut rng = crate::seed::rng_from(seed, 0, 0);
        (0..nx * ny).map(|_| rng.gen_range(lo..hi)).collect()
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        let x = random_texture(16, 16, 1, -1.0, 1.0);
        let v = ssim_channel(&x, &x, 16, 16).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(!v.degenerate_range);
    }

    #[test]
    fn symmetric_in_its_arguments_up_to_range_choice() {
        // With identical ranges the score is symmetric; use two textures on
        // the same interval so max-min agree.
        let a = random_texture(16, 16, 2, 0.0, 1.0);
        let mut b = random_texture(16, 16, 3, 0.0, 1.0);
        // Pin the extremes so both frames share the exact data range.
        b[0] = 0.0;
        b[1] = 1.0;
        let mut a2 = a.clone();
        a2[0] = 0.0;
        a2[1] = 1.0;
        let ab = ssim_channel(&a2, &b, 16, 16).unwrap().value;
        let ba = ssim_channel(&b, &a2, 16, 16).unwrap().value;
        assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn constant_shift_decreases_with_magnitude() {
        // Near-zero-mean texture: the luminance term collapses once the shift
        // reaches the data range. Bounds frozen from this reference recipe;
        // the small positive mean keeps the window-averaged score monotone.
        let truth = random_texture(20, 20, 4, -0.45, 0.55);
        let range = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - truth.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut prev = 1.0;
        for frac in [0.1, 0.3, 0.6, 1.0] {
            let shifted: Vec<f64> = truth.iter().map(|v| v + frac * range).collect();
            let v = ssim_channel(&shifted, &truth, 20, 20).unwrap().value;
            assert!(v < prev, "shift {frac}: ssim {v} did not decrease (prev {prev})");
            prev = v;
        }
        let full: Vec<f64> = truth.iter().map(|v| v + range).collect();
        let v = ssim_channel(&full, &truth, 20, 20).unwrap().value;
        assert!(v <= 0.5, "shift by the full range should drop ssim to <= 0.5, got {v}");
    }

    #[test]
    fn negated_zero_mean_texture_scores_negative() {
        // High-frequency zero-mean texture: structure term -1 dominates.
        let nx = 22;
        let truth: Vec<f64> = (0..nx * nx)
            .map(|k| {
                let (i, j) = (k / nx, k % nx);
                ((i as f64) * 2.1).sin() * ((j as f64) * 1.7).cos()
            })
            .collect();
        let negated: Vec<f64> = truth.iter().map(|v| -v).collect();
        let v = ssim_channel(&negated, &truth, nx, nx).unwrap().value;
        assert!(v < 0.0, "got {v}");
    }

    #[test]
    fn degenerate_truth_range_is_flagged() {
        let truth = vec![2.5; 12 * 12];
        let pred = random_texture(12, 12, 5, 2.0, 3.0);
        let v = ssim_channel(&pred, &truth, 12, 12).unwrap();
        assert!(v.degenerate_range);
    }

    #[test]
    fn too_small_grid_errors() {
        let x = vec![0.0; 64];
        assert!(ssim_channel(&x, &x, 8, 8).is_err());
    }
}
