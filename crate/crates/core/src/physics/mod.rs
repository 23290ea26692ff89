//! Ground-truth data generation: explicit finite-difference solvers for the
//! 2D Burgers and shallow-water equations, initial-condition samplers, the
//! energy diagnostic and the seeded dataset driver.

mod burgers;
mod grid;
mod shallow_water;
mod simulate;

pub use burgers::{burgers_default_dt, burgers_step, make_burgers_ic, BurgersConfig};
pub use grid::{FieldState, GridSpec, Trajectory, TrajectoryMeta};
pub use shallow_water::{
    make_cylinder_ic, shallow_water_default_dt, shallow_water_step, total_energy,
    total_energy_with, EnergyForm, ShallowWaterConfig,
};
pub use simulate::{generate_dataset, simulate, DatasetSpec, IcRanges, SimulateSpec, SystemConfig};
