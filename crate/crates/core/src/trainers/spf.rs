//! Stochastic pushforward: one-step-ahead training over a combined dataset.
//! Between epochs the current model's δ-step predictions are materialized
//! into a supplementary dataset; during an epoch each sample's input is drawn
//! from the original or the supplementary store by a Bernoulli(p) coin while
//! the target always comes from the original data. Every gradient step is
//! one-step-ahead, so retained memory does not grow with δ.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    check_finite, eval_step, sample_starts, window_bytes, MemoryMeter, SgdDriver, TrainerConfig,
};
use crate::physics::{total_energy, FieldState};
use crate::reduction::{decode, pullback_decode, LatentSeries, Reducer};
use crate::seed::{rng_from, tags};
use crate::surrogate::{compose_delta, SurrogateModel};
use crate::tensor::fingerprint;
use crate::{CoreError, Result, Tensor};

/// Model-generated δ-step prediction windows, indexed like the original data.
/// Entry `windows[series][s]` is the input window starting at latent index
/// `s`: the frozen model's δ-fold prediction for `s ≥ δ·k_out`, a ground-truth
/// copy below that (where no prediction source exists yet).
#[derive(Debug, Clone)]
pub struct SupplementaryDataset {
    pub delta: usize,
    /// Latent steps one composition advances (k_out; 1 for one-step models).
    pub shift_per_step: usize,
    pub windows: Vec<Vec<Vec<Tensor>>>,
    pub generation_epoch: usize,
    pub model_fingerprint: u64,
}

impl SupplementaryDataset {
    /// Number of genuinely predicted (non-copied) entries.
    pub fn predicted_entries(&self) -> usize {
        let shift = self.delta * self.shift_per_step;
        self.windows.iter().map(|s| s.len().saturating_sub(shift)).sum()
    }
}

/// Original data plus its supplementary store.
#[derive(Debug)]
pub struct CombinedDataset<'a> {
    pub original: &'a [LatentSeries],
    pub supplementary: &'a SupplementaryDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Original,
    Supplementary,
}

#[derive(Debug, Clone)]
pub struct AcquiredSample {
    pub input: Vec<Tensor>,
    pub target_start: usize,
    pub source: SampleSource,
}

/// Apply the frozen model δ-fold to every admissible start of the original
/// data. Pure inference; start indices are evaluated concurrently and written
/// by index.
pub fn build_supplementary(
    frozen: &SurrogateModel,
    original: &[LatentSeries],
    delta: usize,
    generation_epoch: usize,
) -> Result<SupplementaryDataset> {
    if delta < 1 {
        return Err(CoreError::Config("supplementary depth must be at least 1".into()));
    }
    let k_in = frozen.window_in();
    let k_out = frozen.window_out();
    let shift = delta * k_out;
    let mut windows = Vec::with_capacity(original.len());
    for series in original {
        if series.t_len() < k_in + shift {
            return Err(CoreError::Config(format!(
                "series of length {} cannot host depth {delta}",
                series.t_len()
            )));
        }
        let n_starts = series.t_len() - k_in + 1;
        let per_start: Vec<Vec<Tensor>> = (0..n_starts)
            .into_par_iter()
            .map(|s| {
                if s < shift {
                    Ok(series.window(s, k_in).to_vec())
                } else {
                    compose_delta(frozen, series.window(s - shift, k_in), delta)
                }
            })
            .collect::<Result<_>>()?;
        windows.push(per_start);
    }
    let mut params = Vec::new();
    frozen.collect_params(&mut params);
    Ok(SupplementaryDataset {
        delta,
        shift_per_step: k_out,
        windows,
        generation_epoch,
        model_fingerprint: fingerprint(&params),
    })
}

/// Bernoulli(p) acquisition: input from the original data when the coin is 1,
/// from the supplementary store when 0; the target is always the original
/// next window.
pub fn acquire(
    rng: &mut ChaCha8Rng,
    series_idx: usize,
    start: usize,
    data: &CombinedDataset,
    p: f64,
) -> Result<AcquiredSample> {
    let series = data.original.get(series_idx).ok_or_else(|| {
        CoreError::Config(format!("series index {series_idx} out of range"))
    })?;
    let supp = data
        .supplementary
        .windows
        .get(series_idx)
        .and_then(|s| s.get(start))
        .ok_or_else(|| CoreError::Config(format!("start {start} out of supplementary range")))?;
    let k_in = supp.len();
    if start + k_in >= series.t_len() {
        return Err(CoreError::Config(format!("start {start} has no target")));
    }
    let take_original = rng.gen_bool(p);
    let input = if take_original { series.window(start, k_in).to_vec() } else { supp.clone() };
    Ok(AcquiredSample {
        input,
        target_start: start + k_in,
        source: if take_original { SampleSource::Original } else { SampleSource::Supplementary },
    })
}

/// γ·‖f(input) − target‖² with γ = 1 for original-sourced inputs and γ = α
/// for supplementary ones. Gradients scale by exactly γ.
pub fn spf_weighted_loss(
    model: &SurrogateModel,
    sample_input: &[Tensor],
    target: &[Tensor],
    source: SampleSource,
    alpha: f64,
    grads: &mut crate::surrogate::ModelGrads,
) -> Result<(f64, u64)> {
    let gamma = match source {
        SampleSource::Original => 1.0,
        SampleSource::Supplementary => alpha,
    };
    eval_step(model, sample_input, target, gamma, None, grads)
}

/// Physics constraint: λ_PC·|E_pred − E_true| evaluated on decoded latents.
pub struct EnergyPenalty<'a> {
    pub reducer: &'a Reducer,
    pub gravity: f64,
    pub lambda_pc: f64,
}

impl EnergyPenalty<'_> {
    /// Penalty value and its gradient with respect to the predicted latent.
    pub fn penalty_and_grad(&self, eta_pred: &Tensor, eta_true: &Tensor) -> Result<(f64, Tensor)> {
        let pred_state = decode(self.reducer, eta_pred)?;
        let true_state = decode(self.reducer, eta_true)?;
        let e_pred = total_energy(&pred_state, self.gravity)?;
        let e_true = total_energy(&true_state, self.gravity)?;
        let diff = e_pred - e_true;
        let penalty = self.lambda_pc * diff.abs();
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        // dE/d(field): (u, v, g·h) per cell, times the cell area.
        let grid = pred_state.grid();
        let cell = grid.dx * grid.dy;
        let mut d_field = Vec::with_capacity(pred_state.flat_len());
        for name in pred_state.channel_names() {
            let ch = pred_state.channel(name)?;
            let factor = if name == "h" { self.gravity } else { 1.0 };
            d_field.extend(ch.iter().map(|v| factor * v * cell));
        }
        let mut d_eta = pullback_decode(self.reducer, eta_pred, &d_field)?;
        let scale = self.lambda_pc * sign;
        for k in 0..d_eta.len() {
            d_eta[k] *= scale;
        }
        Ok((penalty, d_eta))
    }
}

/// L = base + λ_PC·|E_pred − E_true| on already-decoded states.
pub fn energy_penalty_loss(
    base_loss: f64,
    decoded_pred: &FieldState,
    decoded_truth: &FieldState,
    lambda_pc: f64,
    gravity: f64,
) -> Result<f64> {
    let e_pred = total_energy(decoded_pred, gravity)?;
    let e_true = total_energy(decoded_truth, gravity)?;
    Ok(base_loss + lambda_pc * (e_pred - e_true).abs())
}

#[derive(Debug, Clone)]
pub struct DatasetUpdate {
    /// Phase-2 epoch (1-based) at which the rebuild ran.
    pub epoch: usize,
    pub predicted_entries: usize,
    pub model_fingerprint: u64,
}

/// Test hook capturing the exact state at a rebuild.
#[derive(Debug, Clone)]
pub struct RebuildSnapshot {
    pub epoch: usize,
    pub params: Vec<f64>,
    pub supplementary: SupplementaryDataset,
}

#[derive(Debug, Clone)]
pub struct SpfOutput {
    /// Phase-1 (plain one-step) per-epoch mean losses.
    pub init_history: Vec<f64>,
    /// Phase-2 per-epoch γ-weighted mean losses.
    pub main_history: Vec<f64>,
    pub meter: MemoryMeter,
    /// Scheduled rebuilds, at phase-2 epochs N_UI, 2·N_UI, …
    pub updates: Vec<DatasetUpdate>,
    pub samples_served: u64,
    pub targets_from_original: u64,
    pub rebuild_snapshots: Vec<RebuildSnapshot>,
}

/// Full two-phase training: N_init one-step epochs, then N_epoch combined
/// epochs with the supplementary store rebuilt whenever the epoch index is a
/// multiple of N_UI (an initial build runs before the first epoch so the
/// combined dataset is always defined).
pub fn train_spf(
    model: &mut SurrogateModel,
    original: &[LatentSeries],
    cfg: &TrainerConfig,
    penalty: Option<&EnergyPenalty>,
) -> Result<SpfOutput> {
    cfg.validate()?;
    let k_in = model.window_in();
    let k_out = model.window_out();
    let starts = sample_starts(original, k_in, k_out)?;
    let depth_schedule: Vec<usize> = if cfg.progressive_delta.is_empty() {
        vec![cfg.delta]
    } else {
        cfg.progressive_delta.clone()
    };
    for &d in &depth_schedule {
        if d < 1 {
            return Err(CoreError::Config("progressive depths must be at least 1".into()));
        }
    }

    // One driver across both phases: the Adam state carries over, so with
    // p = 1 the whole run is indistinguishable from plain one-step training.
    let mut driver = SgdDriver::new(model, cfg.optimizer, cfg.batch_size);
    let mut meter = MemoryMeter::new();
    let mut init_history = Vec::with_capacity(cfg.n_init);
    for epoch in 0..cfg.n_init {
        init_history.push(super::run_one_step_epoch(
            model,
            original,
            &starts,
            &mut driver,
            &mut meter,
            epoch,
        )?);
    }

    let mut acquire_rng = rng_from(cfg.seed, tags::SPF_ACQUIRE, 0);
    let mut main_history = Vec::with_capacity(cfg.n_epoch);
    let mut updates = Vec::new();
    let mut snapshots = Vec::new();
    let mut samples_served = 0u64;
    let mut targets_from_original = 0u64;

    // Epochs are split evenly across the progressive depth schedule; the
    // plain configuration is a one-entry schedule.
    let per_stage = cfg.n_epoch / depth_schedule.len();
    let depth_for = |epoch1: usize| -> usize {
        if per_stage == 0 {
            return depth_schedule[0];
        }
        let idx = ((epoch1 - 1) / per_stage).min(depth_schedule.len() - 1);
        depth_schedule[idx]
    };

    let mut current_delta = depth_for(1);
    let mut supplementary = build_supplementary(model, original, current_delta, 0)?;
    if cfg.record_rebuilds {
        let mut params = Vec::new();
        model.collect_params(&mut params);
        snapshots.push(RebuildSnapshot { epoch: 0, params, supplementary: supplementary.clone() });
    }

    for epoch1 in 1..=cfg.n_epoch {
        let depth = depth_for(epoch1);
        if epoch1 % cfg.n_ui == 0 || depth != current_delta {
            current_delta = depth;
            supplementary = build_supplementary(model, original, current_delta, epoch1)?;
            if epoch1 % cfg.n_ui == 0 {
                updates.push(DatasetUpdate {
                    epoch: epoch1,
                    predicted_entries: supplementary.predicted_entries(),
                    model_fingerprint: supplementary.model_fingerprint,
                });
            }
            if cfg.record_rebuilds {
                let mut params = Vec::new();
                model.collect_params(&mut params);
                snapshots.push(RebuildSnapshot {
                    epoch: epoch1,
                    params,
                    supplementary: supplementary.clone(),
                });
            }
        }
        let combined = CombinedDataset { original, supplementary: &supplementary };

        let mut epoch_loss = 0.0;
        for (index, &(s_idx, start)) in starts.iter().enumerate() {
            let sample = acquire(&mut acquire_rng, s_idx, start, &combined, cfg.p)?;
            let target = original[s_idx].window(sample.target_start, k_out);
            samples_served += 1;
            targets_from_original += 1; // targets only ever read the original data

            meter.begin_iteration();
            let gamma = match sample.source {
                SampleSource::Original => 1.0,
                SampleSource::Supplementary => cfg.alpha,
            };
            let (loss, trace_bytes) =
                eval_step(model, &sample.input, target, gamma, penalty, &mut driver.grads)?;
            meter.add(trace_bytes);
            meter.add(window_bytes(target));
            meter.add(8); // the γ weight read by the backward pass
            meter.end_iteration();

            check_finite(loss, epoch1, index)?;
            epoch_loss += loss;
            driver.sample_done(model)?;
        }
        driver.flush(model)?;
        meter.end_epoch();
        main_history.push(epoch_loss / starts.len() as f64);
    }

    Ok(SpfOutput {
        init_history,
        main_history,
        meter,
        updates,
        samples_served,
        targets_from_original,
        rebuild_snapshots: snapshots,
    })
}
