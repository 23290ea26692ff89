//! The four training frameworks: one-step baseline, autoregressive (ATF),
//! pushforward (PF) and stochastic pushforward (SPF), plus the supplementary
//! dataset machinery and the retained-memory meter.
//!
//! All frameworks sweep (input window, target window) pairs in index order,
//! series by series, and update parameters with Adam. They share one
//! single-step loss kernel, so the reductions ATF(δ=1), PF(δ_max=1) and
//! SPF(p=1) reproduce the baseline's loss history bitwise.

mod atf;
mod memory;
mod one_step;
mod pf;
mod spf;

pub use atf::{atf_loss, train_atf, AtfLoss};
pub use memory::{retained_memory_report, MemoryMeter, MemoryReport, MeterRow};
pub use one_step::train_one_step;
pub use pf::{pf_loss, sample_rollout_length, train_pf};
pub use spf::{
    acquire, build_supplementary, energy_penalty_loss, spf_weighted_loss, train_spf,
    AcquiredSample, CombinedDataset, DatasetUpdate, EnergyPenalty, RebuildSnapshot, SampleSource,
    SpfOutput, SupplementaryDataset,
};

use crate::nn::{adam_step, AdamConfig, AdamState};
use crate::reduction::LatentSeries;
use crate::surrogate::{ModelGrads, SurrogateModel};
use crate::{CoreError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Framework {
    OneStep,
    Atf,
    Pf,
    Spf,
}

impl Framework {
    pub fn name(self) -> &'static str {
        match self {
            Framework::OneStep => "one_step",
            Framework::Atf => "atf",
            Framework::Pf => "pf",
            Framework::Spf => "spf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "one_step" => Ok(Framework::OneStep),
            "atf" => Ok(Framework::Atf),
            "pf" => Ok(Framework::Pf),
            "spf" => Ok(Framework::Spf),
            other => Err(CoreError::Config(format!("unknown framework `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub framework: Framework,
    /// Composition depth for ATF and SPF.
    pub delta: usize,
    /// λ₂..λ_δ for ATF; λ₁ is implicitly 1. Empty means all ones.
    pub lambda: Vec<f64>,
    /// Maximum rollout length for PF.
    pub delta_max: usize,
    /// SPF acquisition probability of drawing from the original dataset.
    pub p: f64,
    /// SPF loss weight for supplementary-sourced samples.
    pub alpha: f64,
    /// SPF phase-1 epochs.
    pub n_init: usize,
    /// Main training epochs (phase 2 for SPF).
    pub n_epoch: usize,
    /// SPF supplementary dataset update interval.
    pub n_ui: usize,
    /// Energy-constraint weight; 0 disables the penalty.
    pub lambda_pc: f64,
    /// Samples per Adam step; 1 reproduces the per-pair stepping exactly.
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Optional progressive SPF depth schedule; overrides `delta` when
    /// non-empty, splitting the phase-2 epochs evenly across the list.
    pub progressive_delta: Vec<usize>,
    /// Keep a parameter + dataset snapshot at every SPF rebuild (test hook).
    pub record_rebuilds: bool,
}

impl TrainerConfig {
    pub fn new(framework: Framework, seed: u64) -> Self {
        Self {
            framework,
            delta: 1,
            lambda: Vec::new(),
            delta_max: 1,
            p: 0.5,
            alpha: 0.5,
            n_init: 1,
            n_epoch: 1,
            n_ui: 1,
            lambda_pc: 0.0,
            batch_size: 1,
            optimizer: AdamConfig::default(),
            seed,
            progressive_delta: Vec::new(),
            record_rebuilds: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_epoch < 1 {
            return Err(CoreError::Config("n_epoch must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(CoreError::Config("batch_size must be at least 1".into()));
        }
        match self.framework {
            Framework::OneStep => {}
            Framework::Atf => {
                if self.delta < 1 {
                    return Err(CoreError::Config("ATF depth must be at least 1".into()));
                }
                if !self.lambda.is_empty() && self.lambda.len() != self.delta - 1 {
                    return Err(CoreError::Config(format!(
                        "ATF needs {} lambda weights (λ₂..λ_δ), got {}",
                        self.delta - 1,
                        self.lambda.len()
                    )));
                }
            }
            Framework::Pf => {
                if self.delta_max < 1 {
                    return Err(CoreError::Config("PF delta_max must be at least 1".into()));
                }
            }
            Framework::Spf => {
                if !(0.0..=1.0).contains(&self.p) {
                    return Err(CoreError::Config(format!("SPF p = {} outside [0, 1]", self.p)));
                }
                if self.alpha <= 0.0 {
                    return Err(CoreError::Config("SPF alpha must be positive".into()));
                }
                if self.n_init < 1 || self.n_ui < 1 {
                    return Err(CoreError::Config("SPF needs n_init >= 1 and n_ui >= 1".into()));
                }
                if self.delta < 1 {
                    return Err(CoreError::Config("SPF depth must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// λ_k for composition step k (1-based); λ₁ = 1, unspecified weights 1.
    pub fn lambda_for(&self, k: usize) -> f64 {
        if k <= 1 {
            1.0
        } else {
            self.lambda.get(k - 2).copied().unwrap_or(1.0)
        }
    }
}

/// Per-framework training result.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Mean loss per epoch.
    pub loss_history: Vec<f64>,
    pub meter: MemoryMeter,
}

/// Enumerate (series, start) sample positions in index order. `max_shift` is
/// the number of latent steps the deepest target reaches past the input
/// window (k_out for one-step training, δ·k_out for ATF).
pub(crate) fn sample_starts(
    data: &[LatentSeries],
    window_in: usize,
    max_shift: usize,
) -> Result<Vec<(usize, usize)>> {
    if data.is_empty() {
        return Err(CoreError::Config("no training series".into()));
    }
    let mut out = Vec::new();
    for (s_idx, series) in data.iter().enumerate() {
        let needed = window_in + max_shift;
        if series.t_len() < needed {
            return Err(CoreError::Config(format!(
                "series {s_idx} has {} steps, needs at least {needed}",
                series.t_len()
            )));
        }
        for start in 0..=(series.t_len() - needed) {
            out.push((s_idx, start));
        }
    }
    Ok(out)
}

/// Gradient-descent bookkeeping shared by every trainer: accumulate grads
/// over a minibatch, average, and apply one Adam step.
pub(crate) struct SgdDriver {
    adam: AdamState,
    params: Vec<f64>,
    flat_grads: Vec<f64>,
    pub grads: ModelGrads,
    batch_size: usize,
    in_batch: usize,
}

impl SgdDriver {
    pub fn new(model: &SurrogateModel, opt: AdamConfig, batch_size: usize) -> Self {
        let n = model.param_count();
        Self {
            adam: AdamState::new(n, opt),
            params: Vec::with_capacity(n),
            flat_grads: Vec::with_capacity(n),
            grads: model.zero_grads(),
            batch_size,
            in_batch: 0,
        }
    }

    /// Call once per sample after backward accumulated into `self.grads`.
    pub fn sample_done(&mut self, model: &mut SurrogateModel) -> Result<()> {
        self.in_batch += 1;
        if self.in_batch >= self.batch_size {
            self.step(model)?;
        }
        Ok(())
    }

    /// Apply any pending partial batch (end of epoch).
    pub fn flush(&mut self, model: &mut SurrogateModel) -> Result<()> {
        if self.in_batch > 0 {
            self.step(model)?;
        }
        Ok(())
    }

    fn step(&mut self, model: &mut SurrogateModel) -> Result<()> {
        self.grads.scale(1.0 / self.in_batch as f64);
        self.grads.flatten_into(&mut self.flat_grads);
        model.collect_params(&mut self.params);
        adam_step(&mut self.params, &self.flat_grads, &mut self.adam)?;
        model.assign_params(&self.params)?;
        self.grads = model.zero_grads();
        self.in_batch = 0;
        Ok(())
    }
}

/// One-step-ahead loss kernel: forward the input window, compare against the
/// target window, backpropagate γ-weighted cotangents. Loss is
/// γ·‖f(input) − target‖² plus, when a penalty is supplied, the unweighted
/// energy term. Returns the loss and the trace bytes a backward pass read.
pub(crate) fn eval_step(
    model: &SurrogateModel,
    input: &[Tensor],
    target: &[Tensor],
    gamma: f64,
    penalty: Option<&EnergyPenalty>,
    grads: &mut ModelGrads,
) -> Result<(f64, u64)> {
    let (outputs, trace) = model.forward_traced(input)?;
    if outputs.len() != target.len() {
        return Err(CoreError::Dimension(format!(
            "target window length {} != model output {}",
            target.len(),
            outputs.len()
        )));
    }
    let mut sq = 0.0;
    let mut d_outs: Vec<Tensor> = Vec::with_capacity(outputs.len());
    for (y_hat, y) in outputs.iter().zip(target.iter()) {
        let mut d = Tensor::zeros(vec![y_hat.len()]);
        for k in 0..y_hat.len() {
            let diff = y_hat[k] - y[k];
            sq += diff * diff;
            d[k] = gamma * (2.0 * diff);
        }
        d_outs.push(d);
    }
    let mut loss = gamma * sq;
    if let Some(pen) = penalty {
        for (j, (y_hat, y)) in outputs.iter().zip(target.iter()).enumerate() {
            let (term, d_eta) = pen.penalty_and_grad(y_hat, y)?;
            loss += term;
            for k in 0..y_hat.len() {
                d_outs[j][k] += d_eta[k];
            }
        }
    }
    let trace_bytes = trace.retained_bytes();
    model.backward(&trace, &d_outs, grads)?;
    Ok((loss, trace_bytes))
}

pub(crate) fn window_bytes(window: &[Tensor]) -> u64 {
    window.iter().map(Tensor::retained_bytes).sum()
}

/// One plain one-step epoch over the given starts, shared by the baseline
/// trainer and SPF's phase 1 so the two produce identical float sequences.
pub(crate) fn run_one_step_epoch(
    model: &mut SurrogateModel,
    data: &[LatentSeries],
    starts: &[(usize, usize)],
    driver: &mut SgdDriver,
    meter: &mut MemoryMeter,
    epoch: usize,
) -> Result<f64> {
    let k_in = model.window_in();
    let k_out = model.window_out();
    let mut epoch_loss = 0.0;
    for (index, &(s_idx, start)) in starts.iter().enumerate() {
        let series = &data[s_idx];
        let input = series.window(start, k_in);
        let target = series.window(start + k_in, k_out);

        meter.begin_iteration();
        let (loss, trace_bytes) = eval_step(model, input, target, 1.0, None, &mut driver.grads)?;
        meter.add(trace_bytes);
        meter.add(window_bytes(target));
        meter.end_iteration();

        check_finite(loss, epoch, index)?;
        epoch_loss += loss;
        driver.sample_done(model)?;
    }
    driver.flush(model)?;
    meter.end_epoch();
    Ok(epoch_loss / starts.len() as f64)
}

pub(crate) fn check_finite(loss: f64, epoch: usize, index: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(CoreError::Divergence { epoch, index, loss })
    }
}
