//! Autoregressive training framework: the loss sums λ-weighted squared errors
//! over δ composed prediction steps and backpropagates through the entire
//! unrolled chain, so every composition's forward cache stays resident until
//! the backward pass completes.

use super::{check_finite, sample_starts, window_bytes, MemoryMeter, SgdDriver, TrainOutput, TrainerConfig};
use crate::reduction::LatentSeries;
use crate::surrogate::{next_window, ModelGrads, SurrogateModel, Trace};
use crate::{CoreError, Result, Tensor};

#[derive(Debug, Clone)]
pub struct AtfLoss {
    pub loss: f64,
    /// Unweighted ‖f^k(input) − target_k‖² per composition step, k = 1..δ.
    pub per_step: Vec<f64>,
    /// Bytes of forward caches retained for the backward pass.
    pub retained_trace_bytes: u64,
}

/// Σ_{k=1..δ} λ_k ‖f^k(input) − targets[k-1]‖² with λ₁ = 1 and full
/// backpropagation through all composition steps. `lambda` carries λ₂..λ_δ.
pub fn atf_loss(
    model: &SurrogateModel,
    input: &[Tensor],
    targets: &[&[Tensor]],
    lambda: &[f64],
    grads: &mut ModelGrads,
) -> Result<AtfLoss> {
    let delta = targets.len();
    if delta == 0 {
        return Err(CoreError::Config("ATF needs at least one target".into()));
    }
    if !lambda.is_empty() && lambda.len() != delta - 1 {
        return Err(CoreError::Config(format!(
            "lambda carries λ₂..λ_δ: expected {} weights, got {}",
            delta - 1,
            lambda.len()
        )));
    }
    let lambda_for =
        |k: usize| -> f64 { if k <= 1 { 1.0 } else { lambda.get(k - 2).copied().unwrap_or(1.0) } };
    let k_in = model.window_in();
    let k_out = model.window_out();

    // Unrolled forward chain, every trace retained.
    let mut windows: Vec<Vec<Tensor>> = vec![input.to_vec()];
    let mut outputs: Vec<Vec<Tensor>> = Vec::with_capacity(delta);
    let mut traces: Vec<Trace> = Vec::with_capacity(delta);
    for k in 0..delta {
        let (out, trace) = model.forward_traced(&windows[k])?;
        let next = next_window(&windows[k], out.clone(), k_in);
        windows.push(next);
        outputs.push(out);
        traces.push(trace);
    }

    let mut loss = 0.0;
    let mut per_step = Vec::with_capacity(delta);
    for k in 0..delta {
        if targets[k].len() != k_out {
            return Err(CoreError::Dimension(format!(
                "target {k} has {} latents, model emits {k_out}",
                targets[k].len()
            )));
        }
        let mut sq = 0.0;
        for (y_hat, y) in outputs[k].iter().zip(targets[k].iter()) {
            for i in 0..y_hat.len() {
                let d = y_hat[i] - y[i];
                sq += d * d;
            }
        }
        per_step.push(sq);
        loss += lambda_for(k + 1) * sq;
    }

    // Backward through the chain. `d_carry` holds the cotangent of window
    // w_k while processing composition step k; its entries split between the
    // previous window (the part w_k kept) and out_k (the freshly predicted
    // part), since w_k = last k_in of (w_{k-1} ++ out_k).
    let m = model.latent_dim();
    let mut d_carry: Vec<Tensor> = vec![Tensor::zeros(vec![m]); k_in];
    for k in (0..delta).rev() {
        let mut d_out: Vec<Tensor> = Vec::with_capacity(k_out);
        let lam = lambda_for(k + 1);
        for (y_hat, y) in outputs[k].iter().zip(targets[k].iter()) {
            let mut d = Tensor::zeros(vec![m]);
            for i in 0..m {
                d[i] = lam * (2.0 * (y_hat[i] - y[i]));
            }
            d_out.push(d);
        }
        // Fold the downstream window cotangent into (previous-window, output).
        let mut d_prev_extra: Vec<Tensor> = vec![Tensor::zeros(vec![m]); k_in];
        if k + 1 < delta {
            let kept_from_prev = k_in.saturating_sub(k_out);
            for (pos, d) in d_carry.iter().enumerate() {
                if pos < kept_from_prev {
                    // Element came from w_{k-1}[k_out + pos].
                    for i in 0..m {
                        d_prev_extra[k_out + pos][i] += d[i];
                    }
                } else {
                    // Element came from out_k[idx].
                    let idx = k_out - k_in + pos;
                    for i in 0..m {
                        d_out[idx][i] += d[i];
                    }
                }
            }
        }
        let d_win = model.backward(&traces[k], &d_out, grads)?;
        d_carry = d_win;
        for (a, b) in d_carry.iter_mut().zip(d_prev_extra.iter()) {
            for i in 0..m {
                a[i] += b[i];
            }
        }
    }

    let retained_trace_bytes = traces.iter().map(Trace::retained_bytes).sum();
    Ok(AtfLoss { loss, per_step, retained_trace_bytes })
}

/// Every iteration unrolls δ compositions and keeps all their activations for
/// backward; the meter records exactly that residency.
pub fn train_atf(
    model: &mut SurrogateModel,
    data: &[LatentSeries],
    cfg: &TrainerConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let delta = cfg.delta;
    let k_in = model.window_in();
    let k_out = model.window_out();
    let starts = sample_starts(data, k_in, delta * k_out)?;
    let lambda: Vec<f64> = if cfg.lambda.is_empty() && delta > 1 {
        vec![1.0; delta - 1]
    } else {
        cfg.lambda.clone()
    };

    let mut driver = SgdDriver::new(model, cfg.optimizer, cfg.batch_size);
    let mut meter = MemoryMeter::new();
    let mut history = Vec::with_capacity(cfg.n_epoch);
    for epoch in 0..cfg.n_epoch {
        let mut epoch_loss = 0.0;
        for (index, &(s_idx, start)) in starts.iter().enumerate() {
            let series = &data[s_idx];
            let input = series.window(start, k_in);
            let target_windows: Vec<&[Tensor]> = (1..=delta)
                .map(|k| series.window(start + k_in + (k - 1) * k_out, k_out))
                .collect();

            meter.begin_iteration();
            let result = atf_loss(model, input, &target_windows, &lambda, &mut driver.grads)?;
            meter.add(result.retained_trace_bytes);
            for t in &target_windows {
                meter.add(window_bytes(t));
            }
            meter.add(8 * lambda.len() as u64);
            meter.end_iteration();

            check_finite(result.loss, epoch, index)?;
            epoch_loss += result.loss;
            driver.sample_done(model)?;
        }
        driver.flush(model)?;
        meter.end_epoch();
        history.push(epoch_loss / starts.len() as f64);
    }
    Ok(TrainOutput { loss_history: history, meter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use crate::surrogate::{compose_delta, OneStepMlp};

    fn vecs(series: &[[f64; 2]]) -> Vec<Tensor> {
        series.iter().map(|v| Tensor::vector(v.to_vec()).unwrap()).collect()
    }

    #[test]
    fn delta_one_reduces_to_plain_step_loss() {
        let mut rng = rng_from(21, 0, 0);
        let model = SurrogateModel::OneStepMlp(OneStepMlp::init(2, &[3], &mut rng));
        let input = vecs(&[[0.2, -0.4]]);
        let target = vecs(&[[0.1, 0.5]]);
        let mut grads_a = model.zero_grads();
        let a = atf_loss(&model, &input, &[&target], &[], &mut grads_a).unwrap();
        let mut grads_b = model.zero_grads();
        let (b, _) =
            super::super::eval_step(&model, &input, &target, 1.0, None, &mut grads_b).unwrap();
        assert_eq!(a.loss, b);
        let mut fa = Vec::new();
        let mut fb = Vec::new();
        grads_a.flatten_into(&mut fa);
        grads_b.flatten_into(&mut fb);
        assert_eq!(fa, fb);
    }

    #[test]
    fn perfect_model_on_its_own_trajectory_has_zero_loss() {
        let model = SurrogateModel::OneStepMlp(OneStepMlp::identity(2));
        let x = vecs(&[[0.7, -0.1]]);
        let mut grads = model.zero_grads();
        let targets = [x.as_slice(), x.as_slice(), x.as_slice()];
        let r = atf_loss(&model, &x, &targets, &[1.0, 1.0], &mut grads).unwrap();
        assert_eq!(r.loss, 0.0);
        let mut flat = Vec::new();
        grads.flatten_into(&mut flat);
        assert!(flat.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_decomposes_into_per_step_terms_via_compose_oracle() {
        let mut rng = rng_from(22, 0, 0);
        let model = SurrogateModel::OneStepMlp(OneStepMlp::init(2, &[4], &mut rng));
        let input = vecs(&[[0.3, 0.9]]);
        let t1 = vecs(&[[0.0, 0.1]]);
        let t2 = vecs(&[[0.2, -0.3]]);
        let t3 = vecs(&[[-0.1, 0.4]]);
        let lambda = [0.5, 0.25];
        let mut grads = model.zero_grads();
        let r = atf_loss(
            &model,
            &input,
            &[t1.as_slice(), t2.as_slice(), t3.as_slice()],
            &lambda,
            &mut grads,
        )
        .unwrap();

        // Independent per-step decomposition through compose_delta.
        let mut expect = 0.0;
        for (k, target) in [(1usize, &t1), (2, &t2), (3, &t3)] {
            let pred = compose_delta(&model, &input, k).unwrap();
            let sq: f64 = pred[0]
                .iter()
                .zip(target[0].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let lam = if k == 1 { 1.0 } else { lambda[k - 2] };
            expect += lam * sq;
            assert!((r.per_step[k - 1] - sq).abs() <= 1e-12 * sq.max(1.0));
        }
        assert!((r.loss - expect).abs() <= 1e-12 * expect.max(1.0));
    }

    #[test]
    fn lambda_length_mismatch_is_a_config_error() {
        let model = SurrogateModel::OneStepMlp(OneStepMlp::identity(2));
        let x = vecs(&[[1.0, 1.0]]);
        let mut grads = model.zero_grads();
        let targets = [x.as_slice(), x.as_slice()];
        assert!(atf_loss(&model, &x, &targets, &[1.0, 1.0, 1.0], &mut grads).is_err());
    }
}
