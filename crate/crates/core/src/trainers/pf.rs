//! Pushforward trainer: unroll δ steps but backpropagate only through the
//! final one. The first δ−1 applications run as pure inference on a frozen
//! parameter snapshot; since the snapshot is refreshed at every iteration
//! start and parameters do not change mid-iteration, the live model serves as
//! its own frozen copy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_finite, eval_step, sample_starts, window_bytes, MemoryMeter, SgdDriver, TrainOutput, TrainerConfig};
use crate::reduction::LatentSeries;
use crate::seed::{rng_from, tags};
use crate::surrogate::{compose_delta, ModelGrads, SurrogateModel};
use crate::{CoreError, Result, Tensor};

/// Uniform draw from the integers 1..=δ_max.
pub fn sample_rollout_length(rng: &mut ChaCha8Rng, delta_max: usize) -> usize {
    if delta_max <= 1 {
        1
    } else {
        rng.gen_range(1..=delta_max)
    }
}

/// ‖f(f^{δ−1,*}(input)) − target‖²: the frozen model produces the prefix
/// without retaining gradient state, then one differentiable application of
/// the live model computes the loss. Returns (loss, trace bytes, frozen
/// rolling-buffer bytes).
pub fn pf_loss(
    model: &SurrogateModel,
    frozen: &SurrogateModel,
    input: &[Tensor],
    target: &[Tensor],
    delta: usize,
    grads: &mut ModelGrads,
) -> Result<(f64, u64, u64)> {
    if delta < 1 {
        return Err(CoreError::Config("PF depth must be at least 1".into()));
    }
    let prefix = compose_delta(frozen, input, delta - 1)?;
    let buffer_bytes = window_bytes(&prefix);
    let (loss, trace_bytes) = eval_step(model, &prefix, target, 1.0, None, grads)?;
    Ok((loss, trace_bytes, buffer_bytes))
}

/// Per-iteration δ is drawn from the trainer's seeded stream; retained bytes
/// stay constant across draws (one step's activations plus the rolling
/// frozen-forward window).
pub fn train_pf(
    model: &mut SurrogateModel,
    data: &[LatentSeries],
    cfg: &TrainerConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let delta_max = cfg.delta_max;
    let k_in = model.window_in();
    let k_out = model.window_out();
    // Fixed sweep independent of the drawn δ: every start can host δ_max.
    let starts = sample_starts(data, k_in, delta_max * k_out)?;
    let mut rng = rng_from(cfg.seed, tags::PF_DELTA, 0);

    let mut driver = SgdDriver::new(model, cfg.optimizer, cfg.batch_size);
    let mut meter = MemoryMeter::new();
    let mut history = Vec::with_capacity(cfg.n_epoch);
    for epoch in 0..cfg.n_epoch {
        let mut epoch_loss = 0.0;
        for (index, &(s_idx, start)) in starts.iter().enumerate() {
            let delta = sample_rollout_length(&mut rng, delta_max);
            let series = &data[s_idx];
            let input = series.window(start, k_in);
            let target = series.window(start + k_in + (delta - 1) * k_out, k_out);

            meter.begin_iteration();
            let (loss, trace_bytes, prefix_bytes) =
                pf_loss(model, model, input, target, delta, &mut driver.grads)?;
            meter.add(trace_bytes);
            meter.add(window_bytes(target));
            meter.add(prefix_bytes);
            meter.end_iteration();

            check_finite(loss, epoch, index)?;
            epoch_loss += loss;
            driver.sample_done(model)?;
        }
        driver.flush(model)?;
        meter.end_epoch();
        history.push(epoch_loss / starts.len() as f64);
    }
    Ok(TrainOutput { loss_history: history, meter })
}
