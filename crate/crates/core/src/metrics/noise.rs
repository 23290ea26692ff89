//! Correlated Gaussian noise with the Matérn/Balgovind correlation
//! ε(r) = (1 + r/L)·e^{−r/L} over the grid's Euclidean index distance.
//! Fields are realized by Cholesky factorization of the dense site
//! covariance (with escalating diagonal jitter), so grids are limited to
//! 64×64 sites per tile; larger grids are tiled.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::physics::{FieldState, GridSpec};
use crate::seed::{rng_from, tags};
use crate::{CoreError, Result};

/// Balgovind-type correlation; the two names denote the same formula.
pub fn matern_correlation(r: f64, length_scale: f64) -> f64 {
    debug_assert!(r >= 0.0 && length_scale > 0.0);
    (1.0 + r / length_scale) * (-r / length_scale).exp()
}

/// Alias kept because the literature uses both names for ε(r).
pub use matern_correlation as balgovind_correlation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Correlation length in grid units.
    pub length_scale: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(length_scale: f64, amplitude: f64, seed: u64) -> Result<Self> {
        if length_scale <= 0.0 {
            return Err(CoreError::Config("correlation length must be positive".into()));
        }
        if amplitude < 0.0 {
            return Err(CoreError::Config("amplitude must be non-negative".into()));
        }
        Ok(Self { length_scale, amplitude, seed })
    }
}

const MAX_TILE: usize = 64;

/// Dense-path sampler with a cached Cholesky factor. One tile covers up to
/// 64×64 sites; larger grids repeat the tile (unit-variance everywhere, with
/// correlation seams at tile borders).
pub struct CorrelatedNoiseSampler {
    tile_nx: usize,
    tile_ny: usize,
    grid_nx: usize,
    grid_ny: usize,
    chol: DMatrix<f64>,
    amplitude: f64,
}

impl CorrelatedNoiseSampler {
    pub fn new(grid: &GridSpec, spec: &NoiseSpec) -> Result<Self> {
        let tile_nx = grid.nx.min(MAX_TILE);
        let tile_ny = grid.ny.min(MAX_TILE);
        let sites = tile_nx * tile_ny;
        let mut cov = DMatrix::zeros(sites, sites);
        for a in 0..sites {
            let (ia, ja) = (a / tile_ny, a % tile_ny);
            for b in 0..sites {
                let (ib, jb) = (b / tile_ny, b % tile_ny);
                let r = ((ia as f64 - ib as f64).powi(2) + (ja as f64 - jb as f64).powi(2)).sqrt();
                cov[(a, b)] = matern_correlation(r, spec.length_scale);
            }
        }
        // Jitter escalation: ε(r) is positive-definite in theory, but the
        // dense factorization needs a little help at larger L.
        let mut jitter = 1e-8;
        let chol = loop {
            let mut jittered = cov.clone();
            for d in 0..sites {
                jittered[(d, d)] += jitter;
            }
            match jittered.cholesky() {
                Some(c) => break c.unpack(),
                None => {
                    jitter *= 10.0;
                    if jitter > 1e-2 {
                        return Err(CoreError::Numeric(
                            "covariance factorization failed even with jitter 1e-2".into(),
                        ));
                    }
                }
            }
        };
        Ok(Self {
            tile_nx,
            tile_ny,
            grid_nx: grid.nx,
            grid_ny: grid.ny,
            chol,
            amplitude: spec.amplitude,
        })
    }

    /// Draw one field (length nx·ny, row-major) scaled by the amplitude.
    pub fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        let sites = self.tile_nx * self.tile_ny;
        let z: Vec<f64> = (0..sites).map(|_| StandardNormal.sample(rng)).collect();
        let mut tile = vec![0.0; sites];
        for row in 0..sites {
            let mut acc = 0.0;
            // Lower-triangular factor.
            for (col, zv) in z.iter().enumerate().take(row + 1) {
                acc += self.chol[(row, col)] * zv;
            }
            tile[row] = acc;
        }
        let mut field = vec![0.0; self.grid_nx * self.grid_ny];
        for i in 0..self.grid_nx {
            for j in 0..self.grid_ny {
                let t = (i % self.tile_nx) * self.tile_ny + (j % self.tile_ny);
                field[i * self.grid_ny + j] = self.amplitude * tile[t];
            }
        }
        field
    }
}

/// One field drawn from the spec's own seed.
pub fn sample_correlated_noise(grid: &GridSpec, spec: &NoiseSpec) -> Result<Vec<f64>> {
    let sampler = CorrelatedNoiseSampler::new(grid, spec)?;
    let mut rng = rng_from(spec.seed, tags::NOISE, 0);
    Ok(sampler.sample(&mut rng))
}

/// Outcome of perturbing a state: the noisy copy plus how many h-cells had to
/// be clamped at the positivity floor.
#[derive(Debug, Clone)]
pub struct NoisePerturbation {
    pub state: FieldState,
    pub clamped_cells: usize,
}

const H_MIN: f64 = 1e-6;

fn perturb_state(
    state: &FieldState,
    sampler: &CorrelatedNoiseSampler,
    rng: &mut rand_chacha::ChaCha8Rng,
    amplitude: f64,
) -> Result<NoisePerturbation> {
    let mut out = state.clone();
    let mut clamped = 0usize;
    for name in state.channel_names().to_vec() {
        let ch = out.channel_mut(&name)?;
        if amplitude == 0.0 {
            continue;
        }
        let noise = sampler.sample(rng);
        for (v, n) in ch.iter_mut().zip(noise.iter()) {
            *v += n;
        }
        if name == "h" {
            for v in ch.iter_mut() {
                if *v < H_MIN {
                    *v = H_MIN;
                    clamped += 1;
                }
            }
        }
    }
    Ok(NoisePerturbation { state: out, clamped_cells: clamped })
}

/// Perturb one state: each channel gets an independent correlated field
/// scaled by the amplitude. Amplitude 0 returns an identical copy; water
/// depth is clamped at 1e-6 and the clamp count reported.
pub fn add_noise_to_input(state: &FieldState, spec: &NoiseSpec) -> Result<NoisePerturbation> {
    let sampler = CorrelatedNoiseSampler::new(state.grid(), spec)?;
    let mut rng = rng_from(spec.seed, tags::NOISE, 0);
    perturb_state(state, &sampler, &mut rng, spec.amplitude)
}

/// Perturb a whole input window from one stream (state by state, channel by
/// channel), so amplitude scaling shares the underlying noise realization.
pub fn add_noise_to_window(window: &[FieldState], spec: &NoiseSpec) -> Result<Vec<NoisePerturbation>> {
    if window.is_empty() {
        return Ok(Vec::new());
    }
    let sampler = CorrelatedNoiseSampler::new(window[0].grid(), spec)?;
    let mut rng = rng_from(spec.seed, tags::NOISE, 0);
    window.iter().map(|s| perturb_state(s, &sampler, &mut rng, spec.amplitude)).collect()
}
