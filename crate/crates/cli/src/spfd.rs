//! SPFD binary container: magic "SPFD", format version, a payload-kind tag,
//! JSON metadata, a dimension header, a little-endian f64 payload and a
//! trailing CRC-32 over everything before it. All artifacts (trajectories,
//! latent series, reducers, models, eval tables) round-trip bit-exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::io_err;
use crate::{CliError, Result};
use spf_core::physics::{FieldState, GridSpec, Trajectory, TrajectoryMeta};
use spf_core::reduction::{ChannelNorm, LatentSeries, Reducer};
use spf_core::surrogate::{OneStepMlp, Seq2SeqLstm, SurrogateModel};
use spf_core::Tensor;

pub const MAGIC: [u8; 4] = *b"SPFD";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Trajectory = 0,
    Latent = 1,
    Reducer = 2,
    Model = 3,
    Eval = 4,
}

impl PayloadKind {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(PayloadKind::Trajectory),
            1 => Ok(PayloadKind::Latent),
            2 => Ok(PayloadKind::Reducer),
            3 => Ok(PayloadKind::Model),
            4 => Ok(PayloadKind::Eval),
            other => Err(CliError::UnknownKind(other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpfdPayload {
    pub kind: PayloadKind,
    pub meta: serde_json::Value,
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

/// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFF_u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

pub fn encode(payload: &SpfdPayload) -> Result<Vec<u8>> {
    let expected: u64 = payload.dims.iter().product();
    if expected != payload.data.len() as u64 {
        return Err(CliError::LengthMismatch(format!(
            "dims {:?} expect {} values, payload holds {}",
            payload.dims,
            expected,
            payload.data.len()
        )));
    }
    let meta_bytes = serde_json::to_vec(&payload.meta).map_err(|e| CliError::Meta(e.to_string()))?;
    let mut out = Vec::with_capacity(19 + meta_bytes.len() + payload.data.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(payload.kind as u8);
    out.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&(payload.dims.len() as u32).to_le_bytes());
    for d in &payload.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in &payload.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<SpfdPayload> {
    let need = |n: usize, what: &str| -> Result<()> {
        if bytes.len() < n {
            Err(CliError::Truncated(what.to_string()))
        } else {
            Ok(())
        }
    };
    need(11, "header")?;
    if bytes[0..4] != MAGIC {
        return Err(CliError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(CliError::Version(version));
    }
    let kind = PayloadKind::from_u8(bytes[6])?;
    let meta_len = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let mut off = 11;
    need(off + meta_len + 4, "metadata")?;
    let meta: serde_json::Value = serde_json::from_slice(&bytes[off..off + meta_len])
        .map_err(|e| CliError::Meta(e.to_string()))?;
    off += meta_len;
    let ndims = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    off += 4;
    need(off + ndims * 8, "dimension header")?;
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        off += 8;
    }
    let count: u64 = dims.iter().product();
    let payload_bytes = (count as usize).checked_mul(8).ok_or_else(|| {
        CliError::LengthMismatch("dimension product overflow".into())
    })?;
    need(off + payload_bytes + 4, "payload")?;
    let trailer = off + payload_bytes;
    if bytes.len() != trailer + 4 {
        return Err(CliError::LengthMismatch(format!(
            "container holds {} bytes, header implies {}",
            bytes.len(),
            trailer + 4
        )));
    }
    let stored = u32::from_le_bytes(bytes[trailer..trailer + 4].try_into().unwrap());
    let computed = crc32(&bytes[..trailer]);
    if stored != computed {
        return Err(CliError::Crc { stored, computed });
    }
    let mut data = Vec::with_capacity(count as usize);
    for k in 0..count as usize {
        let p = off + k * 8;
        data.push(f64::from_le_bytes(bytes[p..p + 8].try_into().unwrap()));
    }
    Ok(SpfdPayload { kind, meta, dims, data })
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_container(path: &Path, payload: &SpfdPayload) -> Result<()> {
    let bytes = encode(payload)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = path.with_extension("spfd.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<SpfdPayload> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode(&bytes)
}

// ---- typed wrappers -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GridMeta {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    dt: f64,
}

impl GridMeta {
    fn from(g: &GridSpec) -> Self {
        Self { nx: g.nx, ny: g.ny, dx: g.dx, dy: g.dy, dt: g.dt }
    }
    fn to_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.nx, self.ny, self.dx, self.dy, self.dt).map_err(CliError::from)
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryHeader {
    grid: GridMeta,
    channels: Vec<String>,
    system: String,
    seed: u64,
    ic_params: Vec<(String, f64)>,
    solver_steps: usize,
    save_stride: usize,
    warmup_steps: usize,
}

pub fn trajectory_to_payload(traj: &Trajectory) -> Result<SpfdPayload> {
    let first = traj.states.first().ok_or_else(|| CliError::Config("empty trajectory".into()))?;
    let grid = first.grid();
    let header = TrajectoryHeader {
        grid: GridMeta::from(grid),
        channels: first.channel_names().to_vec(),
        system: traj.meta.system.clone(),
        seed: traj.meta.seed,
        ic_params: traj.meta.ic_params.clone(),
        solver_steps: traj.meta.solver_steps,
        save_stride: traj.meta.save_stride,
        warmup_steps: traj.meta.warmup_steps,
    };
    let mut data = Vec::with_capacity(traj.len() * first.flat_len());
    for s in &traj.states {
        data.extend(s.flatten());
    }
    Ok(SpfdPayload {
        kind: PayloadKind::Trajectory,
        meta: serde_json::to_value(&header).map_err(|e| CliError::Meta(e.to_string()))?,
        dims: vec![
            traj.len() as u64,
            first.channel_count() as u64,
            grid.nx as u64,
            grid.ny as u64,
        ],
        data,
    })
}

pub fn trajectory_from_payload(payload: &SpfdPayload) -> Result<Trajectory> {
    if payload.kind != PayloadKind::Trajectory {
        return Err(CliError::Meta("payload is not a trajectory".into()));
    }
    let header: TrajectoryHeader = serde_json::from_value(payload.meta.clone())
        .map_err(|e| CliError::Meta(e.to_string()))?;
    let grid = header.grid.to_grid()?;
    let per_state = header.channels.len() * grid.cell_count();
    if payload.data.len() % per_state != 0 {
        return Err(CliError::LengthMismatch("trajectory payload misaligned".into()));
    }
    let states = payload
        .data
        .chunks(per_state)
        .map(|chunk| FieldState::from_flat(grid, &header.channels, chunk).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        states,
        meta: TrajectoryMeta {
            system: header.system,
            seed: header.seed,
            ic_params: header.ic_params,
            solver_steps: header.solver_steps,
            save_stride: header.save_stride,
            warmup_steps: header.warmup_steps,
        },
    })
}

#[derive(Serialize, Deserialize)]
struct LatentHeader {
    t_len: usize,
    dim: usize,
    source: String,
    reducer_fingerprint: u64,
}

pub fn latent_to_payload(series: &LatentSeries) -> Result<SpfdPayload> {
    let mut data = Vec::with_capacity(series.t_len() * series.dim());
    for t in 0..series.t_len() {
        data.extend_from_slice(series.at(t).values());
    }
    let header = LatentHeader {
        t_len: series.t_len(),
        dim: series.dim(),
        source: series.source.clone(),
        reducer_fingerprint: series.reducer_fingerprint,
    };
    Ok(SpfdPayload {
        kind: PayloadKind::Latent,
        meta: serde_json::to_value(&header).map_err(|e| CliError::Meta(e.to_string()))?,
        dims: vec![series.t_len() as u64, series.dim() as u64],
        data,
    })
}

pub fn latent_from_payload(payload: &SpfdPayload) -> Result<LatentSeries> {
    if payload.kind != PayloadKind::Latent {
        return Err(CliError::Meta("payload is not a latent series".into()));
    }
    let header: LatentHeader =
        serde_json::from_value(payload.meta.clone()).map_err(|e| CliError::Meta(e.to_string()))?;
    let vectors = payload
        .data
        .chunks(header.dim)
        .map(|c| Tensor::new(vec![header.dim], c.to_vec()).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    LatentSeries::new(vectors, header.source, header.reducer_fingerprint).map_err(CliError::from)
}

#[derive(Serialize, Deserialize)]
struct ReducerHeader {
    kind: String,
    m: usize,
    n: usize,
    grid: GridMeta,
    channels: Vec<String>,
    /// Dense-AE only: (out, in, activation) per layer, encoder then decoder.
    #[serde(default)]
    enc_layers: Vec<(usize, usize, String)>,
    #[serde(default)]
    dec_layers: Vec<(usize, usize, String)>,
}

/// POD reducers persist as [basis | singular values | mean | norms]; dense-AE
/// reducers as [layer params... | norms].
pub fn reducer_to_payload(reducer: &Reducer) -> Result<SpfdPayload> {
    let m = reducer.latent_dim();
    let n = reducer.state_dim();
    let mut header = ReducerHeader {
        kind: String::new(),
        m,
        n,
        grid: GridMeta::from(reducer.grid()),
        channels: reducer.channel_names().to_vec(),
        enc_layers: Vec::new(),
        dec_layers: Vec::new(),
    };
    let mut data = Vec::new();
    if let Some((basis, svals, mean)) = reducer.pod_parts() {
        header.kind = "pod".into();
        data.extend_from_slice(basis);
        data.extend_from_slice(svals);
        data.extend_from_slice(mean);
    } else if let Some((encoder, decoder)) = reducer.ae_parts() {
        header.kind = "dense_ae".into();
        let describe = |l: &spf_core::nn::DenseLayer| {
            (l.output_size(), l.input_size(), l.activation.name().to_string())
        };
        header.enc_layers = encoder.iter().map(describe).collect();
        header.dec_layers = decoder.iter().map(describe).collect();
        for layer in encoder.iter().chain(decoder.iter()) {
            data.extend_from_slice(layer.weight.values());
            data.extend_from_slice(layer.bias.values());
        }
    }
    for c in reducer.norms() {
        data.push(c.mean);
    }
    for c in reducer.norms() {
        data.push(c.scale);
    }
    Ok(SpfdPayload {
        kind: PayloadKind::Reducer,
        meta: serde_json::to_value(&header).map_err(|e| CliError::Meta(e.to_string()))?,
        dims: vec![data.len() as u64],
        data,
    })
}

pub fn reducer_from_payload(payload: &SpfdPayload) -> Result<Reducer> {
    if payload.kind != PayloadKind::Reducer {
        return Err(CliError::Meta("payload is not a reducer".into()));
    }
    let header: ReducerHeader =
        serde_json::from_value(payload.meta.clone()).map_err(|e| CliError::Meta(e.to_string()))?;
    let (m, n, n_ch) = (header.m, header.n, header.channels.len());
    let norms_at = |off: usize| -> Result<Vec<ChannelNorm>> {
        if payload.data.len() != off + 2 * n_ch {
            return Err(CliError::LengthMismatch(format!(
                "reducer payload holds {} values, header implies {}",
                payload.data.len(),
                off + 2 * n_ch
            )));
        }
        Ok(payload.data[off..off + n_ch]
            .iter()
            .zip(payload.data[off + n_ch..].iter())
            .map(|(&mean, &scale)| ChannelNorm { mean, scale })
            .collect())
    };
    match header.kind.as_str() {
        "pod" => {
            let mut off = 0;
            let basis = payload.data[off..off + m * n].to_vec();
            off += m * n;
            let svals = payload.data[off..off + m].to_vec();
            off += m;
            let mean = payload.data[off..off + n].to_vec();
            off += n;
            let norms = norms_at(off)?;
            Reducer::pod_from_parts(header.grid.to_grid()?, header.channels, norms, basis, svals, mean)
                .map_err(CliError::from)
        }
        "dense_ae" => {
            use spf_core::nn::{Activation, DenseLayer};
            let mut off = 0;
            let mut build = |shapes: &[(usize, usize, String)]| -> Result<Vec<DenseLayer>> {
                shapes
                    .iter()
                    .map(|(out, inp, act)| {
                        let w_len = out * inp;
                        if payload.data.len() < off + w_len + out {
                            return Err(CliError::LengthMismatch("AE payload too short".into()));
                        }
                        let w = Tensor::new(vec![*out, *inp], payload.data[off..off + w_len].to_vec())
                            .map_err(CliError::from)?;
                        off += w_len;
                        let b = Tensor::new(vec![*out], payload.data[off..off + out].to_vec())
                            .map_err(CliError::from)?;
                        off += out;
                        DenseLayer::new(w, b, Activation::parse(act).map_err(CliError::from)?)
                            .map_err(CliError::from)
                    })
                    .collect()
            };
            let encoder = build(&header.enc_layers)?;
            let decoder = build(&header.dec_layers)?;
            let norms = norms_at(off)?;
            Reducer::dense_ae_from_parts(header.grid.to_grid()?, header.channels, norms, encoder, decoder)
                .map_err(CliError::from)
        }
        other => Err(CliError::Meta(format!("unsupported reducer kind `{other}`"))),
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    kind: String,
    latent_dim: usize,
    hidden: usize,
    layers: usize,
    k_in: usize,
    k_out: usize,
    mlp_hidden: Vec<usize>,
    /// Trainable parameter count; the payload appends the latent scaler's
    /// mean and scale after the parameters.
    #[serde(default)]
    param_count: usize,
}

pub fn model_to_payload(model: &SurrogateModel) -> Result<SpfdPayload> {
    let mut header = match model {
        SurrogateModel::Seq2SeqLstm(m) => ModelHeader {
            kind: "seq2seq_lstm".into(),
            latent_dim: model.latent_dim(),
            hidden: m.hidden_size(),
            layers: m.cells.len(),
            k_in: m.k_in,
            k_out: m.k_out,
            mlp_hidden: Vec::new(),
            param_count: 0,
        },
        SurrogateModel::OneStepMlp(m) => ModelHeader {
            kind: "one_step_mlp".into(),
            latent_dim: model.latent_dim(),
            hidden: 0,
            layers: m.layers.len(),
            k_in: 1,
            k_out: 1,
            mlp_hidden: m.layers[..m.layers.len() - 1]
                .iter()
                .map(|l| l.output_size())
                .collect(),
            param_count: 0,
        },
    };
    let mut data = Vec::new();
    model.collect_params(&mut data);
    header.param_count = data.len();
    let scaler = model.scaler();
    data.extend_from_slice(&scaler.mean);
    data.extend_from_slice(&scaler.scale);
    Ok(SpfdPayload {
        kind: PayloadKind::Model,
        meta: serde_json::to_value(&header).map_err(|e| CliError::Meta(e.to_string()))?,
        dims: vec![data.len() as u64],
        data,
    })
}

pub fn model_from_payload(payload: &SpfdPayload) -> Result<SurrogateModel> {
    if payload.kind != PayloadKind::Model {
        return Err(CliError::Meta("payload is not a model".into()));
    }
    let header: ModelHeader =
        serde_json::from_value(payload.meta.clone()).map_err(|e| CliError::Meta(e.to_string()))?;
    let mut rng = spf_core::seed::rng_from(0, 0, 0);
    let mut model = match header.kind.as_str() {
        "seq2seq_lstm" => SurrogateModel::Seq2SeqLstm(
            Seq2SeqLstm::init(
                header.latent_dim,
                header.hidden,
                header.layers,
                header.k_in,
                header.k_out,
                &mut rng,
            )
            .map_err(CliError::from)?,
        ),
        "one_step_mlp" => SurrogateModel::OneStepMlp(OneStepMlp::init(
            header.latent_dim,
            &header.mlp_hidden,
            &mut rng,
        )),
        other => return Err(CliError::Meta(format!("unknown model kind `{other}`"))),
    };
    let n_params = if header.param_count > 0 { header.param_count } else { payload.data.len() };
    if n_params != model.param_count() {
        return Err(CliError::LengthMismatch(format!(
            "model payload holds {n_params} parameters, architecture needs {}",
            model.param_count()
        )));
    }
    model.assign_params(&payload.data[..n_params]).map_err(CliError::from)?;
    let rest = &payload.data[n_params..];
    if !rest.is_empty() {
        let m = header.latent_dim;
        if rest.len() != 2 * m {
            return Err(CliError::LengthMismatch("scaler block has the wrong size".into()));
        }
        let scaler =
            spf_core::surrogate::LatentScaler::new(rest[..m].to_vec(), rest[m..].to_vec())
                .map_err(CliError::from)?;
        model.set_scaler(scaler).map_err(CliError::from)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_payload() -> SpfdPayload {
        SpfdPayload {
            kind: PayloadKind::Eval,
            meta: serde_json::json!({"columns": ["a", "b"]}),
            dims: vec![3, 2],
            data: vec![1.0, -2.5, 3.25e-17, f64::MIN_POSITIVE, 1e300, 0.1],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample_payload();
        let bytes = encode(&p).unwrap();
        let q = decode(&bytes).unwrap();
        assert_eq!(p.kind, q.kind);
        assert_eq!(p.dims, q.dims);
        assert_eq!(p.meta, q.meta);
        for (a, b) in p.data.iter().zip(q.data.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn single_byte_corruption_fails_crc() {
        let p = sample_payload();
        let mut bytes = encode(&p).unwrap();
        let payload_start = bytes.len() - 4 - 8;
        bytes[payload_start] ^= 0x01;
        match decode(&bytes) {
            Err(CliError::Crc { .. }) => {}
            other => panic!("expected CRC error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_is_a_version_error() {
        let p = sample_payload();
        let mut bytes = encode(&p).unwrap();
        bytes[4] = 9;
        bytes[5] = 0;
        // Re-seal the CRC so only the version differs.
        let n = bytes.len();
        let crc = crc32(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        match decode(&bytes) {
            Err(CliError::Version(9)) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_truncation_are_distinct_errors() {
        let p = sample_payload();
        let bytes = encode(&p).unwrap();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(decode(&wrong), Err(CliError::BadMagic)));
        assert!(matches!(decode(&bytes[..10]), Err(CliError::Truncated(_))));
        assert!(matches!(decode(&bytes[..bytes.len() - 6]), Err(CliError::Truncated(_))));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode(&long), Err(CliError::LengthMismatch(_))));
    }

    #[test]
    fn crc_reference_value() {
        // Classic check vector for CRC-32/IEEE.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }
}
