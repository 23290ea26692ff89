//! Grid, field-state and trajectory containers shared by both solvers.

use crate::{CoreError, Result};

/// Uniform 2-D grid with a fixed explicit time step. Index convention:
/// `i` runs along x (0..nx), `j` along y (0..ny), storage row-major `i*ny + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, dt: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(CoreError::Config(format!("grid {nx}x{ny} too small, need at least 8x8")));
        }
        if dx <= 0.0 || dy <= 0.0 || dt <= 0.0 {
            return Err(CoreError::Config("dx, dy, dt must be positive".into()));
        }
        Ok(Self { nx, ny, dx, dy, dt })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }
}

/// One spatial snapshot: named 2-D channels on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: GridSpec,
    names: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn new(grid: GridSpec, channels: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = grid.cell_count();
        let mut names = Vec::with_capacity(channels.len());
        let mut data = Vec::with_capacity(channels.len());
        for (name, values) in channels {
            if values.len() != n {
                return Err(CoreError::Dimension(format!(
                    "channel `{name}` has {} cells, grid expects {n}",
                    values.len()
                )));
            }
            if names.contains(&name) {
                return Err(CoreError::Config(format!("duplicate channel `{name}`")));
            }
            names.push(name);
            data.push(values);
        }
        Ok(Self { grid, names, data })
    }

    pub fn zeros(grid: GridSpec, names: &[&str]) -> Self {
        let n = grid.cell_count();
        Self {
            grid,
            names: names.iter().map(|s| s.to_string()).collect(),
            data: names.iter().map(|_| vec![0.0; n]).collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn channel_names(&self) -> &[String] {
        &self.names
    }

    pub fn channel_count(&self) -> usize {
        self.names.len()
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.data[k].as_slice())
            .ok_or_else(|| CoreError::Config(format!("missing channel `{name}`")))
    }

    pub fn channel_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let k = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CoreError::Config(format!("missing channel `{name}`")))?;
        Ok(self.data[k].as_mut_slice())
    }

    pub fn channel_at(&self, k: usize) -> &[f64] {
        &self.data[k]
    }

    /// Total number of scalar values across channels.
    pub fn flat_len(&self) -> usize {
        self.channel_count() * self.grid.cell_count()
    }

    /// Channels concatenated in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for ch in &self.data {
            out.extend_from_slice(ch);
        }
        out
    }

    pub fn from_flat(grid: GridSpec, names: &[String], flat: &[f64]) -> Result<Self> {
        let n = grid.cell_count();
        if flat.len() != names.len() * n {
            return Err(CoreError::Dimension(format!(
                "flat length {} does not match {} channels of {} cells",
                flat.len(),
                names.len(),
                n
            )));
        }
        let channels = names
            .iter()
            .enumerate()
            .map(|(k, name)| (name.clone(), flat[k * n..(k + 1) * n].to_vec()))
            .collect();
        Self::new(grid, channels)
    }
}

/// Ordered sequence of saved states from one simulation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FieldState>,
    pub meta: TrajectoryMeta,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub system: String,
    pub seed: u64,
    pub ic_params: Vec<(String, f64)>,
    pub solver_steps: usize,
    pub save_stride: usize,
    pub warmup_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}
