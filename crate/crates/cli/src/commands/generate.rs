//! Dataset generation: train/val/test splits with split-stable seeds plus a
//! manifest recording counts, ranges and the drawn IC parameters.

use serde::Serialize;

use super::{split_seed, split_tags, write_resolved_config, RunPaths};
use crate::error::io_err;
use crate::spfd::{trajectory_to_payload, write_container};
use crate::{ExperimentConfig, Result};
use spf_core::physics::generate_dataset;

#[derive(Serialize)]
struct ManifestSim {
    index: usize,
    seed: u64,
    ic_params: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct ManifestSplit {
    count: usize,
    seed: u64,
    sims: Vec<ManifestSim>,
}

#[derive(Serialize)]
struct Manifest {
    system: String,
    saved_steps: usize,
    extra_test_steps: usize,
    ranges: Vec<(String, f64, f64)>,
    train: ManifestSplit,
    val: ManifestSplit,
    test: ManifestSplit,
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    write_resolved_config(cfg, "generate")?;
    let paths = RunPaths::new(&cfg.out_dir);

    // Test simulations run longer so extrapolation has ground truth; all
    // trajectories are generated before anything is written, so a solver
    // failure leaves no partial outputs.
    let base_spec = cfg.dataset_spec(0)?;
    let test_spec = cfg.dataset_spec(cfg.extra_test_steps)?;
    let splits = [
        ("train", cfg.n_train, &base_spec, split_seed(cfg.seed, split_tags::TRAIN)),
        ("val", cfg.n_val, &base_spec, split_seed(cfg.seed, split_tags::VAL)),
        ("test", cfg.n_test, &test_spec, split_seed(cfg.seed, split_tags::TEST)),
    ];

    let mut manifest_splits = Vec::new();
    let mut all = Vec::new();
    for (name, count, spec, seed) in &splits {
        let trajs = generate_dataset(spec, *count, *seed)?;
        let sims = trajs
            .iter()
            .enumerate()
            .map(|(index, t)| ManifestSim {
                index,
                seed: t.meta.seed,
                ic_params: t.meta.ic_params.clone(),
            })
            .collect();
        manifest_splits.push(ManifestSplit { count: *count, seed: *seed, sims });
        all.push((*name, trajs));
    }

    for (name, trajs) in &all {
        for (k, traj) in trajs.iter().enumerate() {
            write_container(&paths.split_file(name, k), &trajectory_to_payload(traj)?)?;
        }
    }

    let ranges = match cfg.system.as_str() {
        "shallow_water" => vec![
            ("height".to_string(), cfg.sw_height_min, cfg.sw_height_max),
            ("radius".to_string(), cfg.sw_radius_min, cfg.sw_radius_max),
        ],
        _ => vec![("speed".to_string(), cfg.burgers_v_min, cfg.burgers_v_max)],
    };
    let mut split_iter = manifest_splits.into_iter();
    let manifest = Manifest {
        system: cfg.system.clone(),
        saved_steps: cfg.saved_steps,
        extra_test_steps: cfg.extra_test_steps,
        ranges,
        train: split_iter.next().unwrap(),
        val: split_iter.next().unwrap(),
        test: split_iter.next().unwrap(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| crate::CliError::Meta(e.to_string()))?;
    let path = paths.manifest();
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
    Ok(())
}
