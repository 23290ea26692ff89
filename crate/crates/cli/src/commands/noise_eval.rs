//! Robustness evaluation: only the rollout's initial inputs are perturbed
//! with Matérn-correlated noise; targets stay clean. Amplitude 0 reproduces
//! the plain evaluation bit for bit.

use super::evaluate::{eval_table, evaluate_model, EvalOptions};
use super::{load_model, load_reducer, load_split, write_resolved_config, RunPaths};
use crate::csvio::{format_f64, write_csv, CsvTable};
use crate::{ExperimentConfig, Result};

pub fn cmd_noise_eval(cfg: &ExperimentConfig, model_path: Option<&std::path::Path>) -> Result<()> {
    write_resolved_config(cfg, "noise_eval")?;
    let paths = RunPaths::new(&cfg.out_dir);
    let model = load_model(model_path.unwrap_or(&paths.model()))?;
    let reducer = load_reducer(cfg)?;
    let test = load_split(cfg, "test")?;
    let amplitudes = ExperimentConfig::parse_f64_list(&cfg.noise_amplitudes)?;

    let mut summary = CsvTable::new(&[
        "amplitude",
        "correlation_length",
        "ssim_step1",
        "ssim_final",
        "steps_above_0.8",
        "acc_error_final",
    ]);
    for (k, &amplitude) in amplitudes.iter().enumerate() {
        let opts = EvalOptions {
            input_start: cfg.eval_input_start,
            horizon: cfg.horizon,
            noise_amplitude: amplitude,
            noise_length: cfg.noise_length,
            recon_reference: false,
        };
        let agg = evaluate_model(cfg, &model, &reducer, &test, &opts)?;
        write_csv(&cfg.out_dir.join(format!("noise_{k:02}.csv")), &eval_table(&agg, false))?;
        let n = agg.summaries.len() as f64;
        let mean = |f: &dyn Fn(&super::TrajectorySummary) -> f64| {
            agg.summaries.iter().map(f).sum::<f64>() / n
        };
        summary.push_row(vec![
            format_f64(amplitude),
            format_f64(cfg.noise_length),
            format_f64(mean(&|s| s.ssim_step1)),
            format_f64(mean(&|s| s.ssim_final)),
            format_f64(mean(&|s| s.steps_above_08 as f64)),
            format_f64(mean(&|s| s.acc_final)),
        ]);
    }
    write_csv(&cfg.out_dir.join("noise_summary.csv"), &summary)?;
    Ok(())
}
