//! Subcommand implementations. Every command is a pure function of its
//! configuration and input files: identical inputs yield byte-identical
//! outputs, and all writes go through atomic temp-file renames.

mod evaluate;
mod generate;
mod fit_reducer;
mod noise_eval;
mod report;
mod sweep;
mod train;

pub use evaluate::{
    cmd_evaluate, cmd_extrapolate, eval_table, evaluate_model, summary_table, EvalAggregate,
    EvalOptions, StepRow, TrajectorySummary,
};
pub use fit_reducer::cmd_fit_reducer;
pub use generate::cmd_generate;
pub use noise_eval::cmd_noise_eval;
pub use report::cmd_report;
pub use sweep::cmd_sweep;
pub use train::cmd_train;

use std::path::{Path, PathBuf};

use crate::error::io_err;
use crate::spfd::{latent_from_payload, read_container, trajectory_from_payload};
use crate::{CliError, ExperimentConfig, Result};
use spf_core::physics::Trajectory;
use spf_core::reduction::{encode_trajectory, LatentSeries, Reducer};
use spf_core::seed::derive_seed;
use spf_core::surrogate::{OneStepMlp, Seq2SeqLstm, SurrogateModel};

/// Stream tags for the driver's seed derivations.
pub mod split_tags {
    pub const TRAIN: u64 = 0;
    pub const VAL: u64 = 1;
    pub const TEST: u64 = 2;
    pub const SPLIT: u64 = 0x53504C54;
    pub const MODEL: u64 = 0x4D4F444C;
    pub const SWEEP: u64 = 0x53574550;
    pub const NOISE: u64 = 0x4E4F4956;
}

pub fn split_seed(master: u64, split: u64) -> u64 {
    derive_seed(master, split_tags::SPLIT, split)
}

#[derive(Debug, Clone)]
pub struct RunPaths {
    pub out: PathBuf,
}

impl RunPaths {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn split_file(&self, split: &str, index: usize) -> PathBuf {
        self.data_dir().join(format!("{split}_{index:03}.spfd"))
    }

    pub fn manifest(&self) -> PathBuf {
        self.data_dir().join("manifest.json")
    }

    pub fn reducer(&self) -> PathBuf {
        self.out.join("reducer.spfd")
    }

    pub fn model(&self) -> PathBuf {
        self.out.join("model.spfd")
    }

    pub fn run_info(&self) -> PathBuf {
        self.out.join("run_info.json")
    }
}

/// Write the resolved configuration next to the command's outputs.
pub fn write_resolved_config(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(format!("{command}_config.toml"));
    let tmp = path.with_extension("toml.tmp");
    std::fs::write(&tmp, cfg.to_toml_string()).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Load a split's trajectories, honoring the limited-data prefix for train.
pub fn load_split(cfg: &ExperimentConfig, split: &str) -> Result<Vec<Trajectory>> {
    let paths = RunPaths::new(&cfg.out_dir);
    let count = match split {
        "train" => cfg.effective_train_count(),
        "val" => cfg.n_val,
        "test" => cfg.n_test,
        other => return Err(CliError::Config(format!("unknown split `{other}`"))),
    };
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let path = paths.split_file(split, k);
        let payload = read_container(&path)?;
        out.push(trajectory_from_payload(&payload)?);
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("split `{split}` is empty")));
    }
    Ok(out)
}

pub fn load_reducer(cfg: &ExperimentConfig) -> Result<Reducer> {
    let paths = RunPaths::new(&cfg.out_dir);
    crate::spfd::reducer_from_payload(&read_container(&paths.reducer())?)
}

pub fn load_model(path: &Path) -> Result<SurrogateModel> {
    crate::spfd::model_from_payload(&read_container(path)?)
}

/// Encode a list of trajectories; sources carry the split and index.
pub fn encode_split(
    reducer: &Reducer,
    trajs: &[Trajectory],
    split: &str,
) -> Result<Vec<LatentSeries>> {
    trajs
        .iter()
        .enumerate()
        .map(|(k, t)| {
            encode_trajectory(reducer, t, &format!("{split}_{k:03}")).map_err(CliError::from)
        })
        .collect()
}

/// Fresh surrogate with the run's model-init stream.
pub fn build_surrogate(cfg: &ExperimentConfig) -> Result<SurrogateModel> {
    let mut rng = spf_core::seed::rng_from(cfg.seed, split_tags::MODEL, 0);
    match cfg.surrogate.as_str() {
        "seq2seq_lstm" => Ok(SurrogateModel::Seq2SeqLstm(
            Seq2SeqLstm::init(
                cfg.latent_dim,
                cfg.hidden_size,
                cfg.lstm_layers,
                cfg.k_in,
                cfg.k_out,
                &mut rng,
            )
            .map_err(CliError::from)?,
        )),
        "one_step_mlp" => {
            let hidden = ExperimentConfig::parse_usize_list(&cfg.mlp_hidden)?;
            Ok(SurrogateModel::OneStepMlp(OneStepMlp::init(cfg.latent_dim, &hidden, &mut rng)))
        }
        other => Err(CliError::Config(format!("unknown surrogate `{other}`"))),
    }
}

/// Fit the configured reducer on already-loaded training trajectories.
pub fn fit_reducer_on(cfg: &ExperimentConfig, train: &[Trajectory]) -> Result<Reducer> {
    match cfg.reducer.as_str() {
        "pod" => spf_core::reduction::fit_pod(train, cfg.latent_dim).map_err(CliError::from),
        "dense_ae" => {
            let (reducer, _history) = spf_core::reduction::fit_dense_ae(
                train,
                cfg.latent_dim,
                cfg.ae_epochs,
                cfg.ae_learning_rate,
                derive_seed(cfg.seed, split_tags::MODEL, 1),
            )
            .map_err(CliError::from)?;
            Ok(reducer)
        }
        other => Err(CliError::Config(format!("unknown reducer `{other}`"))),
    }
}

#[allow(dead_code)]
pub fn load_latent(path: &Path) -> Result<LatentSeries> {
    latent_from_payload(&read_container(path)?)
}
