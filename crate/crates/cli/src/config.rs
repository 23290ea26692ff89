//! Flat key/value experiment configuration: a TOML file of top-level scalars
//! plus repeatable `--override KEY=VALUE` command-line patches. Every run
//! writes its resolved configuration next to its outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use toml::Value;

use crate::error::io_err;
use crate::{CliError, Result};
use spf_core::nn::AdamConfig;
use spf_core::physics::{
    burgers_default_dt, shallow_water_default_dt, BurgersConfig, DatasetSpec, GridSpec, IcRanges,
    SimulateSpec,
};
use spf_core::trainers::{Framework, TrainerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: String,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub grid_dx: f64,
    pub grid_dy: f64,
    /// 0 selects the solver's default CFL-derived step.
    pub dt: f64,
    pub warmup_steps: usize,
    pub saved_steps: usize,
    pub save_stride: usize,
    /// Extra saved steps appended to test simulations for extrapolation.
    pub extra_test_steps: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Fraction of training simulations used (whole-simulation prefix).
    pub data_fraction: f64,

    pub burgers_viscosity: f64,
    pub burgers_length: f64,
    pub burgers_v_min: f64,
    pub burgers_v_max: f64,

    pub sw_g: f64,
    pub sw_depth: f64,
    pub sw_lax_weight: f64,
    pub sw_height_min: f64,
    pub sw_height_max: f64,
    pub sw_radius_min: f64,
    pub sw_radius_max: f64,

    pub reducer: String,
    pub latent_dim: usize,
    pub ae_epochs: usize,
    pub ae_learning_rate: f64,

    pub surrogate: String,
    pub hidden_size: usize,
    pub lstm_layers: usize,
    pub k_in: usize,
    pub k_out: usize,
    pub mlp_hidden: String,

    pub framework: String,
    pub delta: usize,
    pub lambda: String,
    pub delta_max: usize,
    pub p: f64,
    pub alpha: f64,
    pub n_init: usize,
    pub n_epoch: usize,
    pub n_ui: usize,
    pub lambda_pc: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub progressive_delta: String,

    pub eval_input_start: usize,
    pub horizon: usize,
    pub noise_length: f64,
    pub noise_amplitudes: String,
    pub sweep_p: String,
    pub sweep_alpha: String,
    pub sweep_delta: usize,
    pub sweep_n_init: usize,
    pub sweep_n_epoch: usize,

    pub seed: u64,
    pub out_dir: PathBuf,
}

fn get_str(t: &toml::Table, key: &str, default: &str) -> Result<String> {
    match t.get(key) {
        None => Ok(default.to_string()),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(CliError::Config(format!("`{key}` must be a string, got {other}"))),
    }
}

fn get_f64(t: &toml::Table, key: &str, default: f64) -> Result<f64> {
    match t.get(key) {
        None => Ok(default),
        Some(Value::Float(v)) => Ok(*v),
        Some(Value::Integer(v)) => Ok(*v as f64),
        Some(other) => Err(CliError::Config(format!("`{key}` must be a number, got {other}"))),
    }
}

fn get_usize(t: &toml::Table, key: &str, default: usize) -> Result<usize> {
    match t.get(key) {
        None => Ok(default),
        Some(Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
        Some(other) => {
            Err(CliError::Config(format!("`{key}` must be a non-negative integer, got {other}")))
        }
    }
}

impl ExperimentConfig {
    /// Resolve from an optional TOML file, override patches and the global
    /// flags. The seed is mandatory: it must come from the file, an override
    /// or `--seed`.
    pub fn resolve(
        config_path: Option<&Path>,
        overrides: &[String],
        seed_flag: Option<u64>,
        out_flag: Option<&Path>,
    ) -> Result<Self> {
        let mut table = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for patch in overrides {
            let (key, raw) = patch
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{patch}` is not KEY=VALUE")))?;
            let value = if let Ok(i) = raw.parse::<i64>() {
                Value::Integer(i)
            } else if let Ok(f) = raw.parse::<f64>() {
                Value::Float(f)
            } else if let Ok(b) = raw.parse::<bool>() {
                Value::Boolean(b)
            } else {
                Value::String(raw.to_string())
            };
            table.insert(key.trim().to_string(), value);
        }
        if let Some(seed) = seed_flag {
            table.insert("seed".into(), Value::Integer(seed as i64));
        }
        if let Some(out) = out_flag {
            table.insert("out_dir".into(), Value::String(out.display().to_string()));
        }
        Self::from_table(&table)
    }

    pub fn from_table(t: &toml::Table) -> Result<Self> {
        let seed = match t.get("seed") {
            Some(Value::Integer(v)) if *v >= 0 => *v as u64,
            Some(other) => {
                return Err(CliError::Config(format!("`seed` must be a non-negative integer, got {other}")))
            }
            None => return Err(CliError::Config("`seed` is mandatory (file, override or --seed)".into())),
        };
        let cfg = Self {
            system: get_str(t, "system", "shallow_water")?,
            grid_nx: get_usize(t, "grid_nx", 32)?,
            grid_ny: get_usize(t, "grid_ny", 32)?,
            grid_dx: get_f64(t, "grid_dx", 1.0)?,
            grid_dy: get_f64(t, "grid_dy", 1.0)?,
            dt: get_f64(t, "dt", 0.0)?,
            warmup_steps: get_usize(t, "warmup_steps", 20)?,
            saved_steps: get_usize(t, "saved_steps", 120)?,
            save_stride: get_usize(t, "save_stride", 1)?,
            extra_test_steps: get_usize(t, "extra_test_steps", 40)?,
            n_train: get_usize(t, "n_train", 30)?,
            n_val: get_usize(t, "n_val", 10)?,
            n_test: get_usize(t, "n_test", 10)?,
            data_fraction: get_f64(t, "data_fraction", 1.0)?,
            burgers_viscosity: get_f64(t, "burgers_viscosity", 0.01)?,
            burgers_length: get_f64(t, "burgers_length", 32.0)?,
            burgers_v_min: get_f64(t, "burgers_v_min", 1.5)?,
            burgers_v_max: get_f64(t, "burgers_v_max", 5.0)?,
            sw_g: get_f64(t, "sw_g", 9.81)?,
            sw_depth: get_f64(t, "sw_depth", 1.0)?,
            sw_lax_weight: get_f64(t, "sw_lax_weight", 0.15)?,
            sw_height_min: get_f64(t, "sw_height_min", 0.2)?,
            sw_height_max: get_f64(t, "sw_height_max", 1.0)?,
            sw_radius_min: get_f64(t, "sw_radius_min", 2.0)?,
            sw_radius_max: get_f64(t, "sw_radius_max", 8.0)?,
            reducer: get_str(t, "reducer", "pod")?,
            latent_dim: get_usize(t, "latent_dim", 64)?,
            ae_epochs: get_usize(t, "ae_epochs", 50)?,
            ae_learning_rate: get_f64(t, "ae_learning_rate", 1e-3)?,
            surrogate: get_str(t, "surrogate", "seq2seq_lstm")?,
            hidden_size: get_usize(t, "hidden_size", 64)?,
            lstm_layers: get_usize(t, "lstm_layers", 1)?,
            k_in: get_usize(t, "k_in", 3)?,
            k_out: get_usize(t, "k_out", 3)?,
            mlp_hidden: get_str(t, "mlp_hidden", "64")?,
            framework: get_str(t, "framework", "spf")?,
            delta: get_usize(t, "delta", 3)?,
            lambda: get_str(t, "lambda", "")?,
            delta_max: get_usize(t, "delta_max", 3)?,
            p: get_f64(t, "p", 0.5)?,
            alpha: get_f64(t, "alpha", 0.5)?,
            n_init: get_usize(t, "n_init", 15)?,
            n_epoch: get_usize(t, "n_epoch", 45)?,
            n_ui: get_usize(t, "n_ui", 10)?,
            lambda_pc: get_f64(t, "lambda_pc", 0.0)?,
            batch_size: get_usize(t, "batch_size", 8)?,
            learning_rate: get_f64(t, "learning_rate", 1e-3)?,
            beta1: get_f64(t, "beta1", 0.9)?,
            beta2: get_f64(t, "beta2", 0.999)?,
            epsilon: get_f64(t, "epsilon", 1e-8)?,
            progressive_delta: get_str(t, "progressive_delta", "")?,
            eval_input_start: get_usize(t, "eval_input_start", 50)?,
            horizon: get_usize(t, "horizon", 60)?,
            noise_length: get_f64(t, "noise_length", 4.0)?,
            noise_amplitudes: get_str(t, "noise_amplitudes", "0.0,0.01,0.03")?,
            sweep_p: get_str(t, "sweep_p", "0.25,0.5,0.75")?,
            sweep_alpha: get_str(t, "sweep_alpha", "0.25,0.5,0.75,1.0")?,
            sweep_delta: get_usize(t, "sweep_delta", 2)?,
            sweep_n_init: get_usize(t, "sweep_n_init", 8)?,
            sweep_n_epoch: get_usize(t, "sweep_n_epoch", 24)?,
            seed,
            out_dir: PathBuf::from(get_str(t, "out_dir", "out")?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.system != "shallow_water" && self.system != "burgers" {
            return Err(CliError::Config(format!("unknown system `{}`", self.system)));
        }
        if self.reducer != "pod" && self.reducer != "dense_ae" {
            return Err(CliError::Config(format!("unknown reducer `{}`", self.reducer)));
        }
        if self.surrogate != "seq2seq_lstm" && self.surrogate != "one_step_mlp" {
            return Err(CliError::Config(format!("unknown surrogate `{}`", self.surrogate)));
        }
        Framework::parse(&self.framework)?;
        if !(0.0..=1.0).contains(&self.data_fraction) || self.data_fraction <= 0.0 {
            return Err(CliError::Config(format!(
                "data_fraction {} outside (0, 1]",
                self.data_fraction
            )));
        }
        if self.sw_height_min > self.sw_height_max || self.sw_radius_min > self.sw_radius_max {
            return Err(CliError::Config("shallow-water IC ranges are inverted".into()));
        }
        if self.burgers_v_min > self.burgers_v_max {
            return Err(CliError::Config("burgers speed range is inverted".into()));
        }
        if self.saved_steps < 2 {
            return Err(CliError::Config("saved_steps must be at least 2".into()));
        }
        Ok(())
    }

    pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Config(format!("bad list entry `{tok}`: {e}")))
            })
            .collect()
    }

    pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::Config(format!("bad list entry `{tok}`: {e}")))
            })
            .collect()
    }

    /// Solver time step: the configured dt, or the CFL-derived default.
    pub fn resolved_dt(&self) -> Result<f64> {
        if self.dt > 0.0 {
            return Ok(self.dt);
        }
        match self.system.as_str() {
            "shallow_water" => Ok(shallow_water_default_dt(
                self.grid_dx,
                self.grid_dy,
                self.sw_g,
                self.sw_depth + self.sw_height_max,
            )),
            "burgers" => {
                let cfg = BurgersConfig::new(
                    self.burgers_viscosity,
                    self.burgers_v_max,
                    self.burgers_length,
                )?;
                Ok(burgers_default_dt(self.grid_dx, self.grid_dy, &cfg))
            }
            other => Err(CliError::Config(format!("unknown system `{other}`"))),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_nx, self.grid_ny, self.grid_dx, self.grid_dy, self.resolved_dt()?)
            .map_err(CliError::from)
    }

    pub fn dataset_spec(&self, extra_steps: usize) -> Result<DatasetSpec> {
        let ranges = match self.system.as_str() {
            "shallow_water" => IcRanges::ShallowWater {
                height: (self.sw_height_min, self.sw_height_max),
                radius: (self.sw_radius_min, self.sw_radius_max),
            },
            _ => IcRanges::Burgers { speed: (self.burgers_v_min, self.burgers_v_max) },
        };
        Ok(DatasetSpec {
            grid: self.grid()?,
            ranges,
            sim: SimulateSpec {
                n_steps: (self.saved_steps - 1 + extra_steps) * self.save_stride,
                save_stride: self.save_stride,
                warmup_steps: self.warmup_steps,
            },
            burgers_viscosity: self.burgers_viscosity,
            burgers_length: self.burgers_length,
            sw_g: self.sw_g,
            sw_depth: self.sw_depth,
            sw_lax_weight: self.sw_lax_weight,
        })
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn trainer(&self) -> Result<TrainerConfig> {
        let framework = Framework::parse(&self.framework)?;
        let mut cfg = TrainerConfig::new(framework, self.seed);
        cfg.delta = self.delta;
        cfg.lambda = Self::parse_f64_list(&self.lambda)?;
        cfg.delta_max = self.delta_max;
        cfg.p = self.p;
        cfg.alpha = self.alpha;
        cfg.n_init = self.n_init;
        cfg.n_epoch = self.n_epoch;
        cfg.n_ui = self.n_ui;
        cfg.lambda_pc = self.lambda_pc;
        cfg.batch_size = self.batch_size;
        cfg.optimizer = self.adam();
        cfg.progressive_delta = Self::parse_usize_list(&self.progressive_delta)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of training simulations after limited-data subsampling: the
    /// prefix of ⌊fraction·n⌋ (at least 1), so smaller fractions are prefixes
    /// of larger ones.
    pub fn effective_train_count(&self) -> usize {
        (((self.n_train as f64) * self.data_fraction).floor() as usize).clamp(1, self.n_train)
    }

    /// Serialize back to flat TOML (stable field order) for provenance.
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let mut w_str = |k: &str, v: &str| {
            let _ = writeln!(s, "{k} = {:?}", v);
        };
        w_str("system", &self.system);
        w_str("reducer", &self.reducer);
        w_str("surrogate", &self.surrogate);
        w_str("framework", &self.framework);
        w_str("lambda", &self.lambda);
        w_str("progressive_delta", &self.progressive_delta);
        w_str("mlp_hidden", &self.mlp_hidden);
        w_str("noise_amplitudes", &self.noise_amplitudes);
        w_str("sweep_p", &self.sweep_p);
        w_str("sweep_alpha", &self.sweep_alpha);
        w_str("out_dir", &self.out_dir.display().to_string());
        let mut w_int = |k: &str, v: u64| {
            let _ = writeln!(s, "{k} = {v}");
        };
        w_int("grid_nx", self.grid_nx as u64);
        w_int("grid_ny", self.grid_ny as u64);
        w_int("warmup_steps", self.warmup_steps as u64);
        w_int("saved_steps", self.saved_steps as u64);
        w_int("save_stride", self.save_stride as u64);
        w_int("extra_test_steps", self.extra_test_steps as u64);
        w_int("n_train", self.n_train as u64);
        w_int("n_val", self.n_val as u64);
        w_int("n_test", self.n_test as u64);
        w_int("latent_dim", self.latent_dim as u64);
        w_int("ae_epochs", self.ae_epochs as u64);
        w_int("hidden_size", self.hidden_size as u64);
        w_int("lstm_layers", self.lstm_layers as u64);
        w_int("k_in", self.k_in as u64);
        w_int("k_out", self.k_out as u64);
        w_int("delta", self.delta as u64);
        w_int("delta_max", self.delta_max as u64);
        w_int("n_init", self.n_init as u64);
        w_int("n_epoch", self.n_epoch as u64);
        w_int("n_ui", self.n_ui as u64);
        w_int("batch_size", self.batch_size as u64);
        w_int("eval_input_start", self.eval_input_start as u64);
        w_int("horizon", self.horizon as u64);
        w_int("sweep_delta", self.sweep_delta as u64);
        w_int("sweep_n_init", self.sweep_n_init as u64);
        w_int("sweep_n_epoch", self.sweep_n_epoch as u64);
        w_int("seed", self.seed);
        let mut w_f = |k: &str, v: f64| {
            let _ = writeln!(s, "{k} = {}", crate::csvio::format_f64(v));
        };
        w_f("grid_dx", self.grid_dx);
        w_f("grid_dy", self.grid_dy);
        w_f("dt", self.dt);
        w_f("data_fraction", self.data_fraction);
        w_f("burgers_viscosity", self.burgers_viscosity);
        w_f("burgers_length", self.burgers_length);
        w_f("burgers_v_min", self.burgers_v_min);
        w_f("burgers_v_max", self.burgers_v_max);
        w_f("sw_g", self.sw_g);
        w_f("sw_depth", self.sw_depth);
        w_f("sw_lax_weight", self.sw_lax_weight);
        w_f("sw_height_min", self.sw_height_min);
        w_f("sw_height_max", self.sw_height_max);
        w_f("sw_radius_min", self.sw_radius_min);
        w_f("sw_radius_max", self.sw_radius_max);
        w_f("ae_learning_rate", self.ae_learning_rate);
        w_f("p", self.p);
        w_f("alpha", self.alpha);
        w_f("lambda_pc", self.lambda_pc);
        w_f("learning_rate", self.learning_rate);
        w_f("beta1", self.beta1);
        w_f("beta2", self.beta2);
        w_f("epsilon", self.epsilon);
        w_f("noise_length", self.noise_length);
        s
    }
}
