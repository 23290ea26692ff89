//! Trajectory driver and seeded dataset generation.

use rand::Rng;
use rayon::prelude::*;

use super::burgers::{burgers_step, make_burgers_ic, BurgersConfig};
use super::grid::{FieldState, GridSpec, Trajectory, TrajectoryMeta};
use super::shallow_water::{make_cylinder_ic, shallow_water_step, ShallowWaterConfig};
use crate::seed::{derive_seed, rng_from, tags};
use crate::{CoreError, Result};

/// Which solver advances the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemConfig {
    Burgers(BurgersConfig),
    ShallowWater(ShallowWaterConfig),
}

impl SystemConfig {
    pub fn step(&self, state: &FieldState) -> Result<FieldState> {
        match self {
            SystemConfig::Burgers(cfg) => burgers_step(state, cfg),
            SystemConfig::ShallowWater(cfg) => shallow_water_step(state, cfg),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemConfig::Burgers(_) => "burgers",
            SystemConfig::ShallowWater(_) => "shallow_water",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateSpec {
    /// Solver steps after the warm-up prefix.
    pub n_steps: usize,
    /// Save every this many steps.
    pub save_stride: usize,
    /// Steps run and discarded before the first saved state.
    pub warmup_steps: usize,
}

fn tag_step(err: CoreError, step: usize) -> CoreError {
    match err {
        CoreError::Stability { detail, .. } => CoreError::Stability { step, detail },
        CoreError::Drying { i, j, .. } => CoreError::Drying { step, i, j },
        other => other,
    }
}

/// Evolve `ic`, saving every `save_stride`-th state after the warm-up. With
/// `n_steps = 0` the trajectory is just the (post warm-up) initial state.
pub fn simulate(ic: &FieldState, system: &SystemConfig, spec: &SimulateSpec) -> Result<Trajectory> {
    if spec.save_stride == 0 {
        return Err(CoreError::Config("save_stride must be at least 1".into()));
    }
    let mut state = ic.clone();
    for k in 0..spec.warmup_steps {
        state = system.step(&state).map_err(|e| tag_step(e, k))?;
    }
    let mut states = vec![state.clone()];
    for k in 1..=spec.n_steps {
        state = system.step(&state).map_err(|e| tag_step(e, spec.warmup_steps + k))?;
        if k % spec.save_stride == 0 {
            states.push(state.clone());
        }
    }
    Ok(Trajectory {
        states,
        meta: TrajectoryMeta {
            system: system.name().to_string(),
            seed: 0,
            ic_params: Vec::new(),
            solver_steps: spec.n_steps,
            save_stride: spec.save_stride,
            warmup_steps: spec.warmup_steps,
        },
    })
}

/// Uniform sampling ranges for the per-simulation initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IcRanges {
    Burgers { speed: (f64, f64) },
    ShallowWater { height: (f64, f64), radius: (f64, f64) },
}

impl IcRanges {
    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let valid = match self {
            IcRanges::Burgers { speed } => ok(*speed) && speed.0 > 0.0,
            IcRanges::ShallowWater { height, radius } => {
                ok(*height) && ok(*radius) && height.0 >= 0.0 && radius.0 >= 0.0
            }
        };
        if valid {
            Ok(())
        } else {
            Err(CoreError::Config(format!("invalid IC ranges {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub grid: GridSpec,
    pub ranges: IcRanges,
    pub sim: SimulateSpec,
    /// Burgers: viscosity and characteristic length. Ignored for shallow water.
    pub burgers_viscosity: f64,
    pub burgers_length: f64,
    /// Shallow water: gravity, background depth, smoothing weight. Ignored for Burgers.
    pub sw_g: f64,
    pub sw_depth: f64,
    pub sw_lax_weight: f64,
}

impl DatasetSpec {
    /// Draw one simulation's IC parameters and build its solver + state.
    fn instantiate(&self, sim_seed: u64) -> Result<(SystemConfig, FieldState, Vec<(String, f64)>)> {
        let mut rng = rng_from(sim_seed, tags::IC_PARAMS, 1);
        match self.ranges {
            IcRanges::Burgers { speed } => {
                let v = if speed.0 == speed.1 { speed.0 } else { rng.gen_range(speed.0..=speed.1) };
                let cfg = BurgersConfig::new(self.burgers_viscosity, v, self.burgers_length)?;
                let ic = make_burgers_ic(&self.grid, &cfg, sim_seed);
                Ok((SystemConfig::Burgers(cfg), ic, vec![("speed".into(), v)]))
            }
            IcRanges::ShallowWater { height, radius } => {
                let h = if height.0 == height.1 {
                    height.0
                } else {
                    rng.gen_range(height.0..=height.1)
                };
                let r = if radius.0 == radius.1 {
                    radius.0
                } else {
                    rng.gen_range(radius.0..=radius.1)
                };
                let cfg = ShallowWaterConfig::new(self.sw_g, self.sw_depth, h, r)?
                    .with_lax_weight(self.sw_lax_weight)?;
                let ic = make_cylinder_ic(&self.grid, &cfg)?;
                Ok((
                    SystemConfig::ShallowWater(cfg),
                    ic,
                    vec![("height".into(), h), ("radius".into(), r)],
                ))
            }
        }
    }
}

/// Generate `n_sims` independent trajectories. Each simulation's stream is
/// derived from (master seed, index), so results do not depend on scheduling.
pub fn generate_dataset(spec: &DatasetSpec, n_sims: usize, master_seed: u64) -> Result<Vec<Trajectory>> {
    spec.ranges.validate()?;
    (0..n_sims)
        .into_par_iter()
        .map(|index| {
            let sim_seed = derive_seed(master_seed, tags::IC_PARAMS, index as u64);
            let (system, ic, ic_params) = spec
                .instantiate(sim_seed)
                .map_err(|e| CoreError::Config(format!("simulation {index}: {e}")))?;
            let mut traj = simulate(&ic, &system, &spec.sim).map_err(|e| match e {
                CoreError::Stability { step, detail } => CoreError::Stability {
                    step,
                    detail: format!("simulation {index}: {detail}"),
                },
                other => CoreError::Numeric(format!("simulation {index}: {other}")),
            })?;
            traj.meta.seed = sim_seed;
            traj.meta.ic_params = ic_params;
            Ok(traj)
        })
        .collect()
}
