//! Rollout evaluation: encode the test inputs, roll the surrogate out over
//! the horizon, decode, and compute latent MSE, accumulated error, SSIM and
//! (for shallow water) the energy-consistency series. Used by `evaluate`,
//! `extrapolate` and `noise-eval`.

use super::{load_model, load_reducer, load_split, write_resolved_config, RunPaths};
use crate::csvio::{format_f64, write_csv, CsvTable};
use crate::{CliError, ExperimentConfig, Result};
use spf_core::metrics::{add_noise_to_window, mse, ssim_field, step_count_above, NoiseSpec};
use spf_core::physics::{total_energy, Trajectory};
use spf_core::reduction::{decode, encode, Reducer};
use spf_core::seed::derive_seed;
use spf_core::surrogate::{rollout, RolloutConfig, SurrogateModel};

#[derive(Debug, Clone)]
pub struct TrajectorySummary {
    pub mse_step1: f64,
    pub mse_final: f64,
    pub ssim_step1: f64,
    pub ssim_final: f64,
    pub acc_final: f64,
    pub steps_above_08: usize,
    pub mean_abs_energy_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalAggregate {
    /// Per-step means across trajectories: (step, mse, acc, ssim,
    /// recon_ssim?, energy_pred?, energy_true?).
    pub steps: Vec<StepRow>,
    pub summaries: Vec<TrajectorySummary>,
}

#[derive(Debug, Clone)]
pub struct StepRow {
    pub step: usize,
    pub mse: f64,
    pub acc_error: f64,
    pub ssim: f64,
    pub recon_ssim: Option<f64>,
    pub energy_pred: Option<f64>,
    pub energy_true: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub input_start: usize,
    pub horizon: usize,
    /// Perturb the physical input window before encoding.
    pub noise_amplitude: f64,
    pub noise_length: f64,
    /// Add the reducer-only reconstruction SSIM reference column.
    pub recon_reference: bool,
}

pub fn evaluate_model(
    cfg: &ExperimentConfig,
    model: &SurrogateModel,
    reducer: &Reducer,
    test: &[Trajectory],
    opts: &EvalOptions,
) -> Result<EvalAggregate> {
    let k_in = model.window_in();
    let needed = opts.input_start + k_in + opts.horizon;
    let is_sw = cfg.system == "shallow_water";
    let mut per_traj_steps: Vec<Vec<StepRow>> = Vec::with_capacity(test.len());
    let mut summaries = Vec::with_capacity(test.len());

    for (t_idx, traj) in test.iter().enumerate() {
        if traj.len() < needed {
            return Err(CliError::Config(format!(
                "trajectory {t_idx} has {} steps, evaluation needs {needed}",
                traj.len()
            )));
        }
        // Input window, optionally noise-perturbed in physical space.
        let window_states: Vec<_> =
            traj.states[opts.input_start..opts.input_start + k_in].to_vec();
        let window_states = if opts.noise_amplitude > 0.0 {
            let spec = NoiseSpec::new(
                opts.noise_length,
                opts.noise_amplitude,
                derive_seed(cfg.seed, super::split_tags::NOISE, t_idx as u64),
            )?;
            add_noise_to_window(&window_states, &spec)?
                .into_iter()
                .map(|p| p.state)
                .collect()
        } else {
            window_states
        };
        let teacher_window = window_states
            .iter()
            .map(|s| encode(reducer, s))
            .collect::<spf_core::Result<Vec<_>>>()?;

        let preds = rollout(model, &RolloutConfig { horizon: opts.horizon, teacher_window })?;

        let mut rows = Vec::with_capacity(opts.horizon);
        let mut acc = 0.0;
        let mut ssim_series = Vec::with_capacity(opts.horizon);
        let mut energy_gaps = Vec::new();
        for (j, pred_latent) in preds.iter().enumerate() {
            let truth_idx = opts.input_start + k_in + j;
            let truth_state = &traj.states[truth_idx];
            let truth_latent = encode(reducer, truth_state)?;
            let step_mse = mse(pred_latent.values(), truth_latent.values())?;
            acc += step_mse;
            let decoded = decode(reducer, pred_latent)?;
            let ssim = ssim_field(&decoded, truth_state)?.value;
            ssim_series.push(ssim);
            let (energy_pred, energy_true) = if is_sw {
                let ep = total_energy(&decoded, cfg.sw_g)?;
                let et = total_energy(truth_state, cfg.sw_g)?;
                energy_gaps.push((ep - et).abs());
                (Some(ep), Some(et))
            } else {
                (None, None)
            };
            let recon_ssim = if opts.recon_reference {
                let recon = decode(reducer, &truth_latent)?;
                Some(ssim_field(&recon, truth_state)?.value)
            } else {
                None
            };
            rows.push(StepRow {
                step: j + 1,
                mse: step_mse,
                acc_error: acc,
                ssim,
                recon_ssim,
                energy_pred,
                energy_true,
            });
        }
        summaries.push(TrajectorySummary {
            mse_step1: rows[0].mse,
            mse_final: rows.last().unwrap().mse,
            ssim_step1: rows[0].ssim,
            ssim_final: rows.last().unwrap().ssim,
            acc_final: rows.last().unwrap().acc_error,
            steps_above_08: step_count_above(&ssim_series, 0.8),
            mean_abs_energy_gap: if energy_gaps.is_empty() {
                None
            } else {
                Some(energy_gaps.iter().sum::<f64>() / energy_gaps.len() as f64)
            },
        });
        per_traj_steps.push(rows);
    }

    // Aggregate per-step means across trajectories (fixed order).
    let n = test.len() as f64;
    let mut steps = Vec::with_capacity(opts.horizon);
    for j in 0..opts.horizon {
        let mean = |f: &dyn Fn(&StepRow) -> f64| -> f64 {
            per_traj_steps.iter().map(|rows| f(&rows[j])).sum::<f64>() / n
        };
        let mean_opt = |f: &dyn Fn(&StepRow) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = per_traj_steps.iter().filter_map(|rows| f(&rows[j])).collect();
            if vals.len() == per_traj_steps.len() {
                Some(vals.iter().sum::<f64>() / n)
            } else {
                None
            }
        };
        steps.push(StepRow {
            step: j + 1,
            mse: mean(&|r| r.mse),
            acc_error: mean(&|r| r.acc_error),
            ssim: mean(&|r| r.ssim),
            recon_ssim: mean_opt(&|r| r.recon_ssim),
            energy_pred: mean_opt(&|r| r.energy_pred),
            energy_true: mean_opt(&|r| r.energy_true),
        });
    }
    Ok(EvalAggregate { steps, summaries })
}

pub fn eval_table(agg: &EvalAggregate, with_recon: bool) -> CsvTable {
    let header: Vec<&str> = if with_recon {
        vec!["step", "mse", "acc_error", "ssim", "recon_ssim", "energy_pred", "energy_true"]
    } else {
        vec!["step", "mse", "acc_error", "ssim", "energy_pred", "energy_true"]
    };
    let mut t = CsvTable::new(&header);
    for r in &agg.steps {
        let mut row = vec![
            r.step.to_string(),
            format_f64(r.mse),
            format_f64(r.acc_error),
            format_f64(r.ssim),
        ];
        if with_recon {
            row.push(format_f64(r.recon_ssim.unwrap_or(f64::NAN)));
        }
        row.push(format_f64(r.energy_pred.unwrap_or(f64::NAN)));
        row.push(format_f64(r.energy_true.unwrap_or(f64::NAN)));
        t.push_row(row);
    }
    t
}

pub fn summary_table(agg: &EvalAggregate) -> CsvTable {
    let mut t = CsvTable::new(&["metric", "mean", "std"]);
    let stats = |f: &dyn Fn(&TrajectorySummary) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = agg.summaries.iter().map(f).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        (mean, var.sqrt())
    };
    let rows: Vec<(&str, Box<dyn Fn(&TrajectorySummary) -> f64>)> = vec![
        ("mse_step1", Box::new(|s: &TrajectorySummary| s.mse_step1)),
        ("mse_final", Box::new(|s: &TrajectorySummary| s.mse_final)),
        ("ssim_step1", Box::new(|s: &TrajectorySummary| s.ssim_step1)),
        ("ssim_final", Box::new(|s: &TrajectorySummary| s.ssim_final)),
        ("acc_error_final", Box::new(|s: &TrajectorySummary| s.acc_final)),
        ("steps_above_0.8", Box::new(|s: &TrajectorySummary| s.steps_above_08 as f64)),
    ];
    for (name, f) in rows {
        let (mean, std) = stats(&*f);
        t.push_row(vec![name.into(), format_f64(mean), format_f64(std)]);
    }
    if agg.summaries.iter().all(|s| s.mean_abs_energy_gap.is_some()) {
        let (mean, std) = stats(&|s: &TrajectorySummary| s.mean_abs_energy_gap.unwrap());
        t.push_row(vec!["mean_abs_energy_gap".into(), format_f64(mean), format_f64(std)]);
    }
    t
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, model_path: Option<&std::path::Path>) -> Result<()> {
    write_resolved_config(cfg, "evaluate")?;
    let paths = RunPaths::new(&cfg.out_dir);
    let model = load_model(model_path.unwrap_or(&paths.model()))?;
    let reducer = load_reducer(cfg)?;
    let test = load_split(cfg, "test")?;
    let opts = EvalOptions {
        input_start: cfg.eval_input_start,
        horizon: cfg.horizon,
        noise_amplitude: 0.0,
        noise_length: cfg.noise_length,
        recon_reference: false,
    };
    let agg = evaluate_model(cfg, &model, &reducer, &test, &opts)?;
    write_csv(&cfg.out_dir.join("eval.csv"), &eval_table(&agg, false))?;
    write_csv(&cfg.out_dir.join("summary.csv"), &summary_table(&agg))?;
    Ok(())
}

/// Rollout beyond the training time range: the final training-window latents
/// seed the prediction, and the reducer-only reconstruction SSIM rides along
/// as the no-dynamics reference.
pub fn cmd_extrapolate(cfg: &ExperimentConfig, model_path: Option<&std::path::Path>) -> Result<()> {
    write_resolved_config(cfg, "extrapolate")?;
    let paths = RunPaths::new(&cfg.out_dir);
    let model = load_model(model_path.unwrap_or(&paths.model()))?;
    let reducer = load_reducer(cfg)?;
    let test = load_split(cfg, "test")?;
    let k_in = model.window_in();
    if cfg.extra_test_steps == 0 {
        return Err(CliError::Config("no extrapolation steps were generated".into()));
    }
    if cfg.saved_steps < k_in {
        return Err(CliError::Config("training range shorter than the input window".into()));
    }
    let opts = EvalOptions {
        input_start: cfg.saved_steps - k_in,
        horizon: cfg.extra_test_steps,
        noise_amplitude: 0.0,
        noise_length: cfg.noise_length,
        recon_reference: true,
    };
    let agg = evaluate_model(cfg, &model, &reducer, &test, &opts)?;
    write_csv(&cfg.out_dir.join("extrapolate.csv"), &eval_table(&agg, true))?;
    Ok(())
}
