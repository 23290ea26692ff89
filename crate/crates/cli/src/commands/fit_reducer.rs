//! Fit the reducer on the training split only and report reconstruction MSE
//! on train and held-out data.

use super::{fit_reducer_on, load_split, write_resolved_config, RunPaths};
use crate::csvio::{format_f64, write_csv, CsvTable};
use crate::spfd::{reducer_to_payload, write_container};
use crate::{ExperimentConfig, Result};
use spf_core::physics::FieldState;
use spf_core::reduction::reconstruction_mse;

pub fn cmd_fit_reducer(cfg: &ExperimentConfig) -> Result<()> {
    write_resolved_config(cfg, "fit_reducer")?;
    let paths = RunPaths::new(&cfg.out_dir);

    let train = load_split(cfg, "train")?;
    let reducer = fit_reducer_on(cfg, &train)?;
    write_container(&paths.reducer(), &reducer_to_payload(&reducer)?)?;

    let collect = |trajs: &[spf_core::physics::Trajectory]| -> Vec<FieldState> {
        trajs.iter().flat_map(|t| t.states.iter().cloned()).collect()
    };
    let mut table = CsvTable::new(&["split", "snapshots", "reconstruction_mse"]);
    let train_states = collect(&train);
    table.push_row(vec![
        "train".into(),
        train_states.len().to_string(),
        format_f64(reconstruction_mse(&reducer, &train_states)?),
    ]);
    for split in ["val", "test"] {
        if let Ok(trajs) = load_split(cfg, split) {
            let states = collect(&trajs);
            table.push_row(vec![
                split.into(),
                states.len().to_string(),
                format_f64(reconstruction_mse(&reducer, &states)?),
            ]);
        }
    }
    write_csv(&cfg.out_dir.join("reducer_report.csv"), &table)?;
    Ok(())
}
