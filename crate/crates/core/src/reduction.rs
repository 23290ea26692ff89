//! Reduced-order compression: encode field states to m-dimensional latent
//! vectors and reconstruct them. The default reducer is POD (top left
//! singular vectors of the centered, per-channel-normalized snapshot matrix);
//! a small dense autoencoder exercises the trained encoder/decoder path.

use nalgebra::DMatrix;

use crate::nn::{
    adam_step, dense_backward, dense_forward, Activation, AdamConfig, AdamState, DenseCache,
    DenseLayer,
};
use crate::physics::{FieldState, GridSpec, Trajectory};
use crate::seed::rng_from;
use crate::tensor::fingerprint;
use crate::{CoreError, Result, Tensor};

/// Per-channel z-score parameters. Scales are clamped away from zero so
/// normalization stays invertible on constant channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelNorm {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducerKind {
    Pod,
    DenseAe,
}

#[derive(Debug, Clone)]
enum ReducerBack {
    Pod {
        /// Row-major [m × n]; rows orthonormal.
        basis: Vec<f64>,
        /// Descending.
        singular_values: Vec<f64>,
        /// Mean of the normalized snapshots, length n.
        mean: Vec<f64>,
    },
    DenseAe {
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
    },
}

#[derive(Debug, Clone)]
pub struct Reducer {
    m: usize,
    n: usize,
    grid: GridSpec,
    channel_names: Vec<String>,
    norms: Vec<ChannelNorm>,
    back: ReducerBack,
}

impl Reducer {
    pub fn kind(&self) -> ReducerKind {
        match self.back {
            ReducerBack::Pod { .. } => ReducerKind::Pod,
            ReducerBack::DenseAe { .. } => ReducerKind::DenseAe,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn norms(&self) -> &[ChannelNorm] {
        &self.norms
    }

    pub fn singular_values(&self) -> Option<&[f64]> {
        match &self.back {
            ReducerBack::Pod { singular_values, .. } => Some(singular_values),
            ReducerBack::DenseAe { .. } => None,
        }
    }

    pub fn pod_parts(&self) -> Option<(&[f64], &[f64], &[f64])> {
        match &self.back {
            ReducerBack::Pod { basis, singular_values, mean } => {
                Some((basis, singular_values, mean))
            }
            ReducerBack::DenseAe { .. } => None,
        }
    }

    pub fn ae_parts(&self) -> Option<(&[DenseLayer], &[DenseLayer])> {
        match &self.back {
            ReducerBack::DenseAe { encoder, decoder } => Some((encoder, decoder)),
            ReducerBack::Pod { .. } => None,
        }
    }

    /// Rebuild a POD reducer from stored parts (used by persistence).
    pub fn pod_from_parts(
        grid: GridSpec,
        channel_names: Vec<String>,
        norms: Vec<ChannelNorm>,
        basis: Vec<f64>,
        singular_values: Vec<f64>,
        mean: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.cell_count() * channel_names.len();
        if singular_values.is_empty() || basis.len() != singular_values.len() * n || mean.len() != n
        {
            return Err(CoreError::Dimension("inconsistent POD parts".into()));
        }
        if norms.len() != channel_names.len() {
            return Err(CoreError::Dimension("one norm per channel required".into()));
        }
        Ok(Self {
            m: singular_values.len(),
            n,
            grid,
            channel_names,
            norms,
            back: ReducerBack::Pod { basis, singular_values, mean },
        })
    }

    /// Rebuild a dense-AE reducer from stored parts (used by persistence).
    pub fn dense_ae_from_parts(
        grid: GridSpec,
        channel_names: Vec<String>,
        norms: Vec<ChannelNorm>,
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
    ) -> Result<Self> {
        let n = grid.cell_count() * channel_names.len();
        if norms.len() != channel_names.len() {
            return Err(CoreError::Dimension("one norm per channel required".into()));
        }
        let enc_in = encoder.first().map(DenseLayer::input_size);
        let dec_out = decoder.last().map(DenseLayer::output_size);
        let m = encoder.last().map(DenseLayer::output_size).unwrap_or(0);
        if enc_in != Some(n) || dec_out != Some(n) || m == 0 {
            return Err(CoreError::Dimension("AE layer sizes do not match the state".into()));
        }
        Ok(Self { m, n, grid, channel_names, norms, back: ReducerBack::DenseAe { encoder, decoder } })
    }

    /// Cheap identity for provenance records.
    pub fn fingerprint(&self) -> u64 {
        match &self.back {
            ReducerBack::Pod { basis, .. } => fingerprint(basis),
            ReducerBack::DenseAe { encoder, decoder } => {
                let mut acc = 0xcbf2_9ce4_8422_2325_u64;
                for layer in encoder.iter().chain(decoder.iter()) {
                    acc ^= fingerprint(layer.weight.values()) ^ fingerprint(layer.bias.values());
                    acc = acc.wrapping_mul(0x1000_0000_01b3);
                }
                acc
            }
        }
    }

    fn check_state(&self, x: &FieldState) -> Result<()> {
        if x.grid() != &self.grid || x.channel_names() != self.channel_names.as_slice() {
            return Err(CoreError::Dimension(
                "state does not match the reducer's training shape".into(),
            ));
        }
        Ok(())
    }

    fn normalize_flat(&self, x: &FieldState) -> Vec<f64> {
        let cells = self.grid.cell_count();
        let mut flat = x.flatten();
        for (c, norm) in self.norms.iter().enumerate() {
            for v in &mut flat[c * cells..(c + 1) * cells] {
                *v = (*v - norm.mean) / norm.scale;
            }
        }
        flat
    }

    fn denormalize_flat(&self, mut flat: Vec<f64>) -> Result<FieldState> {
        let cells = self.grid.cell_count();
        for (c, norm) in self.norms.iter().enumerate() {
            for v in &mut flat[c * cells..(c + 1) * cells] {
                *v = *v * norm.scale + norm.mean;
            }
        }
        FieldState::from_flat(self.grid, &self.channel_names, &flat)
    }
}

/// η = F_e(x): basisᵀ·(normalize(flatten(x)) − mean) for POD, encoder net
/// output for the dense AE.
pub fn encode(reducer: &Reducer, x: &FieldState) -> Result<Tensor> {
    reducer.check_state(x)?;
    let flat = reducer.normalize_flat(x);
    match &reducer.back {
        ReducerBack::Pod { basis, mean, .. } => {
            let n = reducer.n;
            let mut eta = vec![0.0; reducer.m];
            let centered: Vec<f64> = flat.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
            for (r, out) in eta.iter_mut().enumerate() {
                let row = &basis[r * n..(r + 1) * n];
                *out = row.iter().zip(centered.iter()).map(|(a, b)| a * b).sum();
            }
            Tensor::new(vec![reducer.m], eta)
        }
        ReducerBack::DenseAe { encoder, .. } => {
            let mut t = Tensor::new(vec![reducer.n], flat)?;
            for layer in encoder {
                t = dense_forward(layer, &t)?.0;
            }
            Ok(t)
        }
    }
}

/// x^r = F_d(η): reconstruction in physical units.
pub fn decode(reducer: &Reducer, eta: &Tensor) -> Result<FieldState> {
    if eta.len() != reducer.m {
        return Err(CoreError::Dimension(format!(
            "latent length {} != reducer dimension {}",
            eta.len(),
            reducer.m
        )));
    }
    match &reducer.back {
        ReducerBack::Pod { basis, mean, .. } => {
            let n = reducer.n;
            let mut flat = mean.clone();
            for r in 0..reducer.m {
                let coeff = eta[r];
                let row = &basis[r * n..(r + 1) * n];
                for (f, b) in flat.iter_mut().zip(row.iter()) {
                    *f += coeff * b;
                }
            }
            reducer.denormalize_flat(flat)
        }
        ReducerBack::DenseAe { decoder, .. } => {
            let mut t = eta.clone();
            for layer in decoder {
                t = dense_forward(layer, &t)?.0;
            }
            reducer.denormalize_flat(t.into_values())
        }
    }
}

/// Pull a gradient on the decoded physical field back to the latent vector:
/// given dL/d(decode(η)) as a flat field, returns dL/dη.
pub fn pullback_decode(reducer: &Reducer, eta: &Tensor, d_phys: &[f64]) -> Result<Tensor> {
    if d_phys.len() != reducer.n {
        return Err(CoreError::Dimension("physical gradient length mismatch".into()));
    }
    // Denormalization contributes a factor scale_c per element.
    let cells = reducer.grid.cell_count();
    let mut d_norm = d_phys.to_vec();
    for (c, norm) in reducer.norms.iter().enumerate() {
        for v in &mut d_norm[c * cells..(c + 1) * cells] {
            *v *= norm.scale;
        }
    }
    match &reducer.back {
        ReducerBack::Pod { basis, .. } => {
            let n = reducer.n;
            let mut d_eta = vec![0.0; reducer.m];
            for (r, out) in d_eta.iter_mut().enumerate() {
                let row = &basis[r * n..(r + 1) * n];
                *out = row.iter().zip(d_norm.iter()).map(|(a, b)| a * b).sum();
            }
            Tensor::new(vec![reducer.m], d_eta)
        }
        ReducerBack::DenseAe { decoder, .. } => {
            let mut t = eta.clone();
            let mut caches: Vec<DenseCache> = Vec::with_capacity(decoder.len());
            for layer in decoder {
                let (out, cache) = dense_forward(layer, &t)?;
                caches.push(cache);
                t = out;
            }
            let mut cotangent = Tensor::new(vec![reducer.n], d_norm)?;
            for (layer, cache) in decoder.iter().zip(caches.iter()).rev() {
                let mut scratch = layer.zero_grads();
                cotangent = dense_backward(layer, cache, &cotangent, &mut scratch)?;
            }
            Ok(cotangent)
        }
    }
}

fn collect_snapshots(train: &[Trajectory]) -> Result<Vec<&FieldState>> {
    let mut snaps = Vec::new();
    for traj in train {
        for s in &traj.states {
            snaps.push(s);
        }
    }
    if snaps.is_empty() {
        return Err(CoreError::Config("no snapshots to fit on".into()));
    }
    let first = snaps[0];
    for s in &snaps {
        if s.grid() != first.grid() || s.channel_names() != first.channel_names() {
            return Err(CoreError::Dimension("snapshots disagree on grid/channels".into()));
        }
    }
    Ok(snaps)
}

fn channel_norms(snaps: &[&FieldState]) -> Vec<ChannelNorm> {
    let n_ch = snaps[0].channel_count();
    let cells = snaps[0].grid().cell_count();
    let count = (snaps.len() * cells) as f64;
    (0..n_ch)
        .map(|c| {
            let mut sum = 0.0;
            for s in snaps {
                sum += s.channel_at(c).iter().sum::<f64>();
            }
            let mean = sum / count;
            let mut var = 0.0;
            for s in snaps {
                var += s.channel_at(c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            let std = (var / count).sqrt();
            ChannelNorm { mean, scale: if std > 0.0 { std } else { 1.0 } }
        })
        .collect()
}

fn normalized_flat(s: &FieldState, norms: &[ChannelNorm]) -> Vec<f64> {
    let cells = s.grid().cell_count();
    let mut flat = s.flatten();
    for (c, norm) in norms.iter().enumerate() {
        for v in &mut flat[c * cells..(c + 1) * cells] {
            *v = (*v - norm.mean) / norm.scale;
        }
    }
    flat
}

/// Make the first component of each basis row with magnitude above 1e-12
/// positive, so encodings are reproducible across runs.
fn fix_signs(basis: &mut [f64], m: usize, n: usize) {
    for r in 0..m {
        let row = &mut basis[r * n..(r + 1) * n];
        if let Some(&lead) = row.iter().find(|v| v.abs() > 1e-12) {
            if lead < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
}

/// Problems up to this size take the exact dense-SVD path; larger snapshot
/// matrices use randomized subspace iteration.
const EXACT_SVD_LIMIT: usize = 512;

/// Fit the POD reducer: top-m left singular vectors of the centered,
/// per-channel-normalized snapshot matrix, singular values stored descending.
pub fn fit_pod(train: &[Trajectory], m: usize) -> Result<Reducer> {
    let snaps = collect_snapshots(train)?;
    let t_len = snaps.len();
    let n = snaps[0].flat_len();
    if m > t_len || m > n {
        return Err(CoreError::Rank(format!(
            "m = {m} exceeds snapshot count {t_len} or state dimension {n}"
        )));
    }
    let norms = channel_norms(&snaps);

    let mut columns: Vec<Vec<f64>> = snaps.iter().map(|s| normalized_flat(s, &norms)).collect();
    let mut mean = vec![0.0; n];
    for col in &columns {
        for (acc, v) in mean.iter_mut().zip(col.iter()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= t_len as f64;
    }
    for col in &mut columns {
        for (v, mu) in col.iter_mut().zip(mean.iter()) {
            *v -= mu;
        }
    }

    let (mut basis, mut singular_values) = if n.min(t_len) <= EXACT_SVD_LIMIT {
        svd_exact(&columns, n, m)?
    } else {
        svd_randomized(&columns, n, m)?
    };
    fix_signs(&mut basis, m, n);
    singular_values.truncate(m);

    Ok(Reducer {
        m,
        n,
        grid: *snaps[0].grid(),
        channel_names: snaps[0].channel_names().to_vec(),
        norms,
        back: ReducerBack::Pod { basis, singular_values, mean },
    })
}

fn svd_exact(columns: &[Vec<f64>], n: usize, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_len = columns.len();
    let x = DMatrix::from_fn(n, t_len, |r, c| columns[c][r]);
    let svd = x.svd(true, false);
    let u = svd.u.as_ref().ok_or_else(|| CoreError::Numeric("SVD did not return U".into()))?;
    // nalgebra does not guarantee ordering; sort by singular value descending.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap()
    });
    let mut basis = vec![0.0; m * n];
    let mut svals = Vec::with_capacity(m);
    for (row, &k) in order.iter().take(m).enumerate() {
        svals.push(svd.singular_values[k]);
        for i in 0..n {
            basis[row * n + i] = u[(i, k)];
        }
    }
    Ok((basis, svals))
}

/// Randomized range finder with power iterations and a Rayleigh–Ritz step;
/// deterministic via a fixed internal seed. Accurate for the fast-decaying
/// spectra POD sees, and never forms an n×n or T×T Gram matrix.
fn svd_randomized(columns: &[Vec<f64>], n: usize, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_len = columns.len();
    let k = (m + 8).min(t_len).min(n);
    let mut rng = rng_from(0, crate::seed::tags::REDUCER, 0);
    use rand_distr::{Distribution, StandardNormal};
    let omega = DMatrix::from_fn(t_len, k, |_, _| StandardNormal.sample(&mut rng));

    let x = DMatrix::from_fn(n, t_len, |r, c| columns[c][r]);
    let mut q = (&x * omega).qr().q();
    for _ in 0..4 {
        let z = x.transpose() * &q;
        q = (&x * z).qr().q();
    }
    let c = q.transpose() * &x; // k × T
    let svd = c.svd(true, false);
    let u_small = svd.u.as_ref().ok_or_else(|| CoreError::Numeric("SVD did not return U".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap()
    });
    let u = q * u_small;
    let mut basis = vec![0.0; m * n];
    let mut svals = Vec::with_capacity(m);
    for (row, &idx) in order.iter().take(m).enumerate() {
        svals.push(svd.singular_values[idx]);
        for i in 0..n {
            basis[row * n + i] = u[(i, idx)];
        }
    }
    Ok((basis, svals))
}

/// Mean over snapshots of the squared reconstruction norm,
/// (1/T) Σ ‖decode(encode(x_i)) − x_i‖².
pub fn reconstruction_mse(reducer: &Reducer, data: &[FieldState]) -> Result<f64> {
    if data.is_empty() {
        return Err(CoreError::Config("reconstruction_mse needs data".into()));
    }
    let mut total = 0.0;
    for x in data {
        let recon = decode(reducer, &encode(reducer, x)?)?;
        let a = recon.flatten();
        let b = x.flatten();
        total += a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct DenseAeSpec {
    pub m: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden_activation: Activation,
    /// Start from identity weights (requires m == n).
    pub identity_init: bool,
}

/// Train a single-hidden-pair dense autoencoder with Adam on the
/// reconstruction loss. Returns the reducer and the per-epoch mean loss.
pub fn fit_dense_ae(
    train: &[Trajectory],
    m: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(Reducer, Vec<f64>)> {
    fit_dense_ae_with(
        train,
        DenseAeSpec {
            m,
            epochs,
            learning_rate,
            seed,
            hidden_activation: Activation::Tanh,
            identity_init: false,
        },
    )
}

pub fn fit_dense_ae_with(train: &[Trajectory], spec: DenseAeSpec) -> Result<(Reducer, Vec<f64>)> {
    let snaps = collect_snapshots(train)?;
    let n = snaps[0].flat_len();
    if spec.identity_init && spec.m != n {
        return Err(CoreError::Config("identity init requires m == n".into()));
    }
    let norms = channel_norms(&snaps);
    let flats: Vec<Vec<f64>> = snaps.iter().map(|s| normalized_flat(s, &norms)).collect();
    let physical: Vec<Vec<f64>> = snaps.iter().map(|s| s.flatten()).collect();
    let cells = snaps[0].grid().cell_count();
    let scales: Vec<f64> = (0..n).map(|k| norms[k / cells].scale).collect();
    let means: Vec<f64> = (0..n).map(|k| norms[k / cells].mean).collect();

    let mut rng = rng_from(spec.seed, crate::seed::tags::REDUCER, 1);
    let (mut encoder, mut decoder) = if spec.identity_init {
        (
            vec![DenseLayer::identity(n, Activation::Identity)],
            vec![DenseLayer::identity(n, Activation::Identity)],
        )
    } else {
        (
            vec![DenseLayer::init(spec.m, n, spec.hidden_activation, &mut rng)],
            vec![DenseLayer::init(n, spec.m, Activation::Identity, &mut rng)],
        )
    };

    let param_count =
        encoder.iter().chain(decoder.iter()).map(DenseLayer::param_count).sum::<usize>();
    let mut adam = AdamState::new(
        param_count,
        AdamConfig { learning_rate: spec.learning_rate, ..Default::default() },
    );
    let mut params = vec![0.0; param_count];
    let mut grads_flat = vec![0.0; param_count];

    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        let mut epoch_loss = 0.0;
        for (index, flat) in flats.iter().enumerate() {
            let x = Tensor::from_parts_unchecked(vec![n], flat.clone());
            let (eta, e_cache) = dense_forward(&encoder[0], &x)?;
            let (y_norm, d_cache) = dense_forward(&decoder[0], &eta)?;

            // Loss in physical units; denormalization is affine so the
            // cotangent picks up one scale factor per element.
            let mut loss = 0.0;
            let mut d_norm = vec![0.0; n];
            for k in 0..n {
                let recon = y_norm[k] * scales[k] + means[k];
                let diff = recon - physical[index][k];
                loss += diff * diff;
                d_norm[k] = 2.0 * diff * scales[k];
            }
            if !loss.is_finite() {
                return Err(CoreError::Divergence { epoch, index, loss });
            }
            epoch_loss += loss;

            let mut d_grads = decoder[0].zero_grads();
            let d_eta = dense_backward(
                &decoder[0],
                &d_cache,
                &Tensor::from_parts_unchecked(vec![n], d_norm),
                &mut d_grads,
            )?;
            let mut e_grads = encoder[0].zero_grads();
            dense_backward(&encoder[0], &e_cache, &d_eta, &mut e_grads)?;

            let mut off = 0;
            for (layer, g) in
                [(&mut encoder[0], &e_grads), (&mut decoder[0], &d_grads)]
            {
                let w_len = layer.weight.len();
                params[off..off + w_len].copy_from_slice(layer.weight.values());
                grads_flat[off..off + w_len].copy_from_slice(g.d_weight.values());
                off += w_len;
                let b_len = layer.bias.len();
                params[off..off + b_len].copy_from_slice(layer.bias.values());
                grads_flat[off..off + b_len].copy_from_slice(g.d_bias.values());
                off += b_len;
            }
            adam_step(&mut params, &grads_flat, &mut adam)?;
            let mut off = 0;
            for layer in [&mut encoder[0], &mut decoder[0]] {
                let w_len = layer.weight.len();
                layer.weight.values_mut().copy_from_slice(&params[off..off + w_len]);
                off += w_len;
                let b_len = layer.bias.len();
                layer.bias.values_mut().copy_from_slice(&params[off..off + b_len]);
                off += b_len;
            }
        }
        history.push(epoch_loss / flats.len() as f64);
    }

    let reducer = Reducer {
        m: if spec.identity_init { n } else { spec.m },
        n,
        grid: *snaps[0].grid(),
        channel_names: snaps[0].channel_names().to_vec(),
        norms,
        back: ReducerBack::DenseAe { encoder, decoder },
    };
    Ok((reducer, history))
}

/// Encoded trajectory η₁..η_T.
#[derive(Debug, Clone)]
pub struct LatentSeries {
    vectors: Vec<Tensor>,
    pub source: String,
    pub reducer_fingerprint: u64,
}

impl LatentSeries {
    pub fn new(vectors: Vec<Tensor>, source: String, reducer_fingerprint: u64) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(CoreError::Config("latent series needs at least 2 steps".into()));
        }
        let m = vectors[0].len();
        if vectors.iter().any(|v| v.len() != m) {
            return Err(CoreError::Dimension("latent rows disagree on length".into()));
        }
        Ok(Self { vectors, source, reducer_fingerprint })
    }

    pub fn t_len(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn at(&self, t: usize) -> &Tensor {
        &self.vectors[t]
    }

    pub fn window(&self, start: usize, len: usize) -> &[Tensor] {
        &self.vectors[start..start + len]
    }

    pub fn vectors(&self) -> &[Tensor] {
        &self.vectors
    }
}

/// Encode every state of a trajectory.
pub fn encode_trajectory(reducer: &Reducer, traj: &Trajectory, source: &str) -> Result<LatentSeries> {
    let vectors = traj
        .states
        .iter()
        .map(|s| encode(reducer, s))
        .collect::<Result<Vec<_>>>()?;
    LatentSeries::new(vectors, source.to_string(), reducer.fingerprint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{GridSpec, TrajectoryMeta};

    fn toy_trajectory(states: Vec<FieldState>) -> Trajectory {
        Trajectory { states, meta: TrajectoryMeta::default() }
    }

    fn random_states(n_states: usize, seed: u64) -> (GridSpec, Vec<FieldState>) {
        use rand::Rng;
        let grid = GridSpec::new(8, 8, 1.0, 1.0, 0.1).unwrap();
        let mut rng = rng_from(seed, 99, 0);
        let states = (0..n_states)
            .map(|_| {
                let mut s = FieldState::zeros(grid, &["u"]);
                for v in s.channel_mut("u").unwrap() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                s
            })
            .collect();
        (grid, states)
    }

    fn rank2_states() -> (GridSpec, Vec<FieldState>) {
        let grid = GridSpec::new(8, 8, 1.0, 1.0, 0.1).unwrap();
        let phi1: Vec<f64> = (0..64).map(|k| ((k as f64) * 0.3).sin()).collect();
        let phi2: Vec<f64> = (0..64).map(|k| ((k as f64) * 0.11).cos()).collect();
        let states = (0..12)
            .map(|t| {
                let a = (t as f64 * 0.7).sin();
                let b = (t as f64 * 0.41).cos();
                let u: Vec<f64> = phi1.iter().zip(&phi2).map(|(p, q)| a * p + b * q).collect();
                FieldState::new(grid, vec![("u".into(), u)]).unwrap()
            })
            .collect();
        (grid, states)
    }

    #[test]
    fn rank2_data_is_recovered_exactly_with_two_modes() {
        let (_, states) = rank2_states();
        let traj = toy_trajectory(states.clone());
        let r = fit_pod(&[traj], 2).unwrap();
        let mse = reconstruction_mse(&r, &states).unwrap();
        assert!(mse <= 1e-20, "mse = {mse}");
    }

    #[test]
    fn single_mode_data_yields_the_dominant_direction() {
        let grid = GridSpec::new(8, 8, 1.0, 1.0, 0.1).unwrap();
        let phi: Vec<f64> = (0..64).map(|k| ((k as f64) * 0.17).sin()).collect();
        let states: Vec<FieldState> = [-1.0_f64, 0.5, 2.0, -0.25]
            .iter()
            .map(|&a| {
                let u: Vec<f64> = phi.iter().map(|p| a * p).collect();
                FieldState::new(grid, vec![("u".into(), u)]).unwrap()
            })
            .collect();
        let r = fit_pod(&[toy_trajectory(states)], 1).unwrap();
        let (basis, _, _) = r.pod_parts().unwrap();
        // The basis row must be ±phi (normalized in the z-scored space); check
        // it is a unit vector proportional to the normalized phi direction.
        let norm: f64 = basis.iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn orthonormality_and_idempotence() {
        let (_, states) = random_states(30, 3);
        let r = fit_pod(&[toy_trajectory(states)], 6).unwrap();
        let (basis, _, _) = r.pod_parts().unwrap();
        let (m, n) = (r.latent_dim(), r.state_dim());
        for a in 0..m {
            for b in 0..m {
                let dot: f64 = (0..n).map(|k| basis[a * n + k] * basis[b * n + k]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() <= 1e-10, "B B^T [{a},{b}] = {dot}");
            }
        }
        // encode(decode(eta)) = eta on the span of the basis.
        let eta = Tensor::vector(vec![0.4, -1.0, 0.25, 0.0, 2.0, -0.7]).unwrap();
        let back = encode(&r, &decode(&r, &eta).unwrap()).unwrap();
        for k in 0..6 {
            assert!((back[k] - eta[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn mean_field_encodes_to_zero() {
        let (_, states) = random_states(20, 5);
        let r = fit_pod(&[toy_trajectory(states)], 4).unwrap();
        let mean_state = decode(&r, &Tensor::zeros(vec![4])).unwrap();
        let eta = encode(&r, &mean_state).unwrap();
        for k in 0..4 {
            assert!(eta[k].abs() <= 1e-10, "eta[{k}] = {}", eta[k]);
        }
    }

    #[test]
    fn reconstruction_mse_matches_brute_force_and_closed_form() {
        let (_, states) = random_states(10, 7);
        let r = fit_pod(&[toy_trajectory(states.clone())], 3).unwrap();
        let mse = reconstruction_mse(&r, &states).unwrap();
        // Brute-force recomputation with explicit loops.
        let mut total = 0.0;
        for s in &states {
            let recon = decode(&r, &encode(&r, s).unwrap()).unwrap();
            let a = recon.flatten();
            let b = s.flatten();
            let mut acc = 0.0;
            for k in 0..a.len() {
                let d = a[k] - b[k];
                acc += d * d;
            }
            total += acc;
        }
        let brute = total / states.len() as f64;
        assert!((mse - brute).abs() <= 1e-12 * brute.max(1.0));
    }

    #[test]
    fn mse_equals_tail_singular_energy() {
        // Single channel; the identity needs every element on one z-score
        // scale, and the physical-space error then carries scale².
        let (_, states) = random_states(50, 11);
        let m = 10;
        let r = fit_pod(&[toy_trajectory(states.clone())], m).unwrap();
        let mse = reconstruction_mse(&r, &states).unwrap();

        // Independent full-SVD oracle, rebuilt from raw data.
        let t_len = states.len();
        let n = 64;
        let all: Vec<f64> = states.iter().flat_map(|s| s.flatten()).collect();
        let mean_all = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean_all).powi(2)).sum::<f64>() / all.len() as f64;
        let scale = var.sqrt();
        let cols: Vec<Vec<f64>> = states
            .iter()
            .map(|s| s.flatten().iter().map(|v| (v - mean_all) / scale).collect())
            .collect();
        let mut mu = vec![0.0; n];
        for c in &cols {
            for (a, b) in mu.iter_mut().zip(c) {
                *a += b / t_len as f64;
            }
        }
        let x = DMatrix::from_fn(n, t_len, |r_, c| cols[c][r_] - mu[r_]);
        let svd = x.svd(false, false);
        let mut svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
        svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let tail: f64 = svals.iter().skip(m).map(|s| s * s).sum();
        let expect = scale * scale * tail / t_len as f64;
        assert!(
            (mse - expect).abs() <= 1e-10 * expect.max(1.0),
            "mse {mse} vs tail energy {expect}"
        );
    }

    #[test]
    fn mse_non_increasing_in_m() {
        let (_, states) = random_states(25, 13);
        let traj = toy_trajectory(states.clone());
        let mut prev = f64::INFINITY;
        for m in [1, 2, 4, 8, 16] {
            let r = fit_pod(&[traj.clone()], m).unwrap();
            let mse = reconstruction_mse(&r, &states).unwrap();
            assert!(mse <= prev + 1e-12, "mse rose from {prev} to {mse} at m={m}");
            prev = mse;
        }
    }

    #[test]
    fn rank_error_when_m_exceeds_snapshots() {
        let (_, states) = random_states(5, 17);
        match fit_pod(&[toy_trajectory(states)], 6) {
            Err(CoreError::Rank(_)) => {}
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn identity_ae_reconstructs_immediately() {
        let (_, states) = random_states(10, 19);
        // Small learning rate: Adam's normalized steps orbit an exact optimum
        // at radius ~lr, so the attainable floor scales with lr².
        let (r, history) = fit_dense_ae_with(
            &[toy_trajectory(states.clone())],
            DenseAeSpec {
                m: 64,
                epochs: 200,
                learning_rate: 1e-6,
                seed: 1,
                hidden_activation: Activation::Identity,
                identity_init: true,
            },
        )
        .unwrap();
        assert!(history.last().unwrap() <= &1e-6, "final loss {}", history.last().unwrap());
        let mse = reconstruction_mse(&r, &states).unwrap();
        assert!(mse <= 1e-6);
    }

    #[test]
    fn zero_dataset_keeps_zero_loss_from_start() {
        let grid = GridSpec::new(8, 8, 1.0, 1.0, 0.1).unwrap();
        let states: Vec<FieldState> = (0..4).map(|_| FieldState::zeros(grid, &["u"])).collect();
        let (_, history) =
            fit_dense_ae(&[toy_trajectory(states)], 4, 3, 1e-3, 5).unwrap();
        assert_eq!(history[0], 0.0);
    }

    #[test]
    fn dense_ae_is_deterministic_in_seed() {
        let (_, states) = random_states(8, 23);
        let traj = toy_trajectory(states);
        let (a, _) = fit_dense_ae(&[traj.clone()], 6, 5, 1e-3, 77).unwrap();
        let (b, _) = fit_dense_ae(&[traj], 6, 5, 1e-3, 77).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}
