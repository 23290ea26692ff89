//! Baseline trainer: plain one-step-ahead sweeps over all (input, target)
//! pairs in index order.

use super::{run_one_step_epoch, sample_starts, MemoryMeter, SgdDriver, TrainOutput};
#[cfg(test)]
use super::eval_step;
use crate::nn::AdamConfig;
use crate::reduction::LatentSeries;
use crate::surrogate::SurrogateModel;
use crate::Result;

/// Train on ‖f(window_t) − window_{t+1}‖² for every valid start, epoch by
/// epoch. The per-epoch mean loss is recorded; `batch_size = 1` steps Adam
/// after every pair.
pub fn train_one_step(
    model: &mut SurrogateModel,
    data: &[LatentSeries],
    epochs: usize,
    opt: &AdamConfig,
    batch_size: usize,
) -> Result<TrainOutput> {
    let starts = sample_starts(data, model.window_in(), model.window_out())?;
    let mut driver = SgdDriver::new(model, *opt, batch_size);
    let mut meter = MemoryMeter::new();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        history.push(run_one_step_epoch(model, data, &starts, &mut driver, &mut meter, epoch)?);
    }
    Ok(TrainOutput { loss_history: history, meter })
}
