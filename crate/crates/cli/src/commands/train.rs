//! Train the configured framework on the encoded training split and persist
//! the model, loss history, memory meter and (for SPF) the dataset-update log.

use serde::Serialize;

use super::{build_surrogate, encode_split, load_reducer, load_split, write_resolved_config, RunPaths};
use crate::csvio::{format_f64, write_csv, CsvTable};
use crate::error::io_err;
use crate::spfd::{model_to_payload, write_container};
use crate::{CliError, ExperimentConfig, Result};
use spf_core::trainers::{
    train_atf, train_one_step, train_pf, train_spf, EnergyPenalty, Framework, MemoryMeter,
};

#[derive(Serialize)]
pub struct RunInfo {
    pub framework: String,
    pub delta: usize,
    pub model_params: usize,
    pub peak_retained_bytes: u64,
    pub final_loss: f64,
    pub epochs: usize,
}

fn loss_table(history: &[(usize, f64, &str)]) -> CsvTable {
    let mut t = CsvTable::new(&["epoch", "loss", "phase"]);
    for (epoch, loss, phase) in history {
        t.push_row(vec![epoch.to_string(), format_f64(*loss), phase.to_string()]);
    }
    t
}

fn meter_table(meter: &MemoryMeter) -> CsvTable {
    let mut t = CsvTable::new(&["epoch", "peak_retained_bytes"]);
    for (epoch, peak) in meter.epoch_peaks().iter().enumerate() {
        t.push_row(vec![epoch.to_string(), peak.to_string()]);
    }
    t
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    write_resolved_config(cfg, "train")?;
    let paths = RunPaths::new(&cfg.out_dir);

    let reducer = load_reducer(cfg)?;
    let train = load_split(cfg, "train")?;
    let data = encode_split(&reducer, &train, "train")?;
    let mut model = build_surrogate(cfg)?;
    model.set_scaler(spf_core::surrogate::LatentScaler::fit(&data)?)?;
    let trainer = cfg.trainer()?;

    let mut history: Vec<(usize, f64, &str)> = Vec::new();
    let meter;
    let mut updates_table: Option<CsvTable> = None;

    match trainer.framework {
        Framework::OneStep => {
            let out = train_one_step(
                &mut model,
                &data,
                trainer.n_epoch,
                &trainer.optimizer,
                trainer.batch_size,
            )?;
            for (k, loss) in out.loss_history.iter().enumerate() {
                history.push((k, *loss, "main"));
            }
            meter = out.meter;
        }
        Framework::Atf => {
            let out = train_atf(&mut model, &data, &trainer)?;
            for (k, loss) in out.loss_history.iter().enumerate() {
                history.push((k, *loss, "main"));
            }
            meter = out.meter;
        }
        Framework::Pf => {
            let out = train_pf(&mut model, &data, &trainer)?;
            for (k, loss) in out.loss_history.iter().enumerate() {
                history.push((k, *loss, "main"));
            }
            meter = out.meter;
        }
        Framework::Spf => {
            let penalty_holder;
            let penalty = if trainer.lambda_pc > 0.0 {
                if cfg.system != "shallow_water" {
                    return Err(CliError::Config(
                        "the energy constraint needs the shallow-water h channel".into(),
                    ));
                }
                penalty_holder = EnergyPenalty {
                    reducer: &reducer,
                    gravity: cfg.sw_g,
                    lambda_pc: trainer.lambda_pc,
                };
                Some(&penalty_holder)
            } else {
                None
            };
            let out = train_spf(&mut model, &data, &trainer, penalty)?;
            for (k, loss) in out.init_history.iter().enumerate() {
                history.push((k, *loss, "init"));
            }
            let offset = out.init_history.len();
            for (k, loss) in out.main_history.iter().enumerate() {
                history.push((offset + k, *loss, "main"));
            }
            meter = out.meter;
            let mut t = CsvTable::new(&["epoch", "predicted_entries", "model_fingerprint"]);
            for u in &out.updates {
                t.push_row(vec![
                    u.epoch.to_string(),
                    u.predicted_entries.to_string(),
                    format!("{:016x}", u.model_fingerprint),
                ]);
            }
            updates_table = Some(t);
        }
    }

    write_container(&paths.model(), &model_to_payload(&model)?)?;
    write_csv(&cfg.out_dir.join("loss.csv"), &loss_table(&history))?;
    write_csv(&cfg.out_dir.join("meter.csv"), &meter_table(&meter))?;
    if let Some(t) = updates_table {
        write_csv(&cfg.out_dir.join("updates.csv"), &t)?;
    }

    let info = RunInfo {
        framework: trainer.framework.name().to_string(),
        delta: match trainer.framework {
            Framework::Pf => trainer.delta_max,
            Framework::OneStep => 1,
            _ => trainer.delta,
        },
        model_params: model.param_count(),
        peak_retained_bytes: meter.peak_bytes(),
        final_loss: history.last().map(|(_, l, _)| *l).unwrap_or(f64::NAN),
        epochs: history.len(),
    };
    let text =
        serde_json::to_string_pretty(&info).map_err(|e| CliError::Meta(e.to_string()))?;
    let path = paths.run_info();
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
    Ok(())
}
