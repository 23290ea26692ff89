//! 2D Burgers solver: explicit step with first-order upwind advection and
//! centered diffusion, advanced in nondimensional form with coefficient 1/Re,
//! Re = V·L/υ. Dirichlet boundaries are re-imposed from the input state every
//! step, so boundary values stay at their initial-condition values.

use rand::Rng;

use super::grid::{FieldState, GridSpec};
use crate::seed::{rng_from, tags};
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersConfig {
    /// Viscosity υ (N·s·m⁻²).
    pub viscosity: f64,
    /// Initial peak speed V (m/s); the paper-matching dataset range is [1.5, 5.0].
    pub speed: f64,
    /// Characteristic length L_c: the domain side length.
    pub length: f64,
}

impl BurgersConfig {
    pub fn new(viscosity: f64, speed: f64, length: f64) -> Result<Self> {
        if viscosity <= 0.0 {
            return Err(CoreError::Config("viscosity must be positive".into()));
        }
        if speed <= 0.0 || length <= 0.0 {
            return Err(CoreError::Config("speed and length must be positive".into()));
        }
        Ok(Self { viscosity, speed, length })
    }

    pub fn reynolds(&self) -> f64 {
        self.speed * self.length / self.viscosity
    }
}

/// dt at CFL number 0.4 against the advective speed plus diffusion.
pub fn burgers_default_dt(grid_dx: f64, grid_dy: f64, cfg: &BurgersConfig) -> f64 {
    let nu = 1.0 / cfg.reynolds();
    let rate = cfg.speed / grid_dx
        + cfg.speed / grid_dy
        + 2.0 * nu * (1.0 / (grid_dx * grid_dx) + 1.0 / (grid_dy * grid_dy));
    0.4 / rate
}

/// Smooth isotropic Gaussian bump: u = A·exp(-d²/2σ²), v = -u/2, σ = L_c/8,
/// amplitude scaled so the peak *speed* √(u²+v²) equals V exactly. The bump
/// center is snapped to a seeded grid node in the middle half of the domain so
/// the discrete maximum realizes the peak.
pub fn make_burgers_ic(grid: &GridSpec, cfg: &BurgersConfig, seed: u64) -> FieldState {
    let mut rng = rng_from(seed, tags::IC_PARAMS, 0);
    let ci = rng.gen_range(grid.nx / 4..=3 * grid.nx / 4);
    let cj = rng.gen_range(grid.ny / 4..=3 * grid.ny / 4);
    let x0 = ci as f64 * grid.dx;
    let y0 = cj as f64 * grid.dy;
    let sigma = cfg.length / 8.0;
    let amp = cfg.speed / 1.25_f64.sqrt();

    let mut state = FieldState::zeros(*grid, &["u", "v"]);
    {
        let n = grid.cell_count();
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let dx = i as f64 * grid.dx - x0;
                let dy = j as f64 * grid.dy - y0;
                let bump = amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                u[grid.idx(i, j)] = bump;
                v[grid.idx(i, j)] = -bump / 2.0;
            }
        }
        state.channel_mut("u").unwrap().copy_from_slice(&u);
        state.channel_mut("v").unwrap().copy_from_slice(&v);
    }
    state
}

/// One explicit step. Errors with a stability error (step index 0; callers
/// re-tag) when |u|dt/dx + |v|dt/dy + 2υ'dt(1/dx²+1/dy²) exceeds 1 anywhere,
/// υ' = 1/Re.
pub fn burgers_step(state: &FieldState, cfg: &BurgersConfig) -> Result<FieldState> {
    let grid = *state.grid();
    let u = state.channel("u")?;
    let v = state.channel("v")?;
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy, dt) = (grid.dx, grid.dy, grid.dt);
    let nu = 1.0 / cfg.reynolds();

    let diff_rate = 2.0 * nu * dt * (1.0 / (dx * dx) + 1.0 / (dy * dy));
    for idx in 0..grid.cell_count() {
        let cfl = u[idx].abs() * dt / dx + v[idx].abs() * dt / dy + diff_rate;
        if cfl > 1.0 {
            return Err(CoreError::Stability {
                step: 0,
                detail: format!("burgers CFL number {cfl:.3} > 1 at cell {idx}"),
            });
        }
    }

    let mut u_new = u.to_vec();
    let mut v_new = v.to_vec();
    let at = |f: &[f64], i: usize, j: usize| f[i * ny + j];
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let uc = at(u, i, j);
            let vc = at(v, i, j);

            // First-order upwind picks the difference against the flow.
            let d_dx = |f: &[f64]| {
                if uc > 0.0 {
                    (at(f, i, j) - at(f, i - 1, j)) / dx
                } else {
                    (at(f, i + 1, j) - at(f, i, j)) / dx
                }
            };
            let d_dy = |f: &[f64]| {
                if vc > 0.0 {
                    (at(f, i, j) - at(f, i, j - 1)) / dy
                } else {
                    (at(f, i, j + 1) - at(f, i, j)) / dy
                }
            };
            let lap = |f: &[f64]| {
                (at(f, i + 1, j) - 2.0 * at(f, i, j) + at(f, i - 1, j)) / (dx * dx)
                    + (at(f, i, j + 1) - 2.0 * at(f, i, j) + at(f, i, j - 1)) / (dy * dy)
            };

            u_new[i * ny + j] = uc + dt * (-uc * d_dx(u) - vc * d_dy(u) + nu * lap(u));
            v_new[i * ny + j] = vc + dt * (-uc * d_dx(v) - vc * d_dy(v) + nu * lap(v));
        }
    }

    FieldState::new(grid, vec![("u".into(), u_new), ("v".into(), v_new)])
}
