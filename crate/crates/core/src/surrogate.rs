//! Latent dynamics model f: a one-step MLP and a seq2seq LSTM, with iterative
//! rollout and δ-fold composition f^δ. Both kinds share a window interface:
//! the model maps `window_in()` consecutive latents to `window_out()`
//! predicted latents, so composition and rollout code is written once
//! (window length 1 for the MLP).

use rand_chacha::ChaCha8Rng;

use crate::nn::{
    dense_backward, dense_forward, lstm_backward, lstm_step, Activation, DenseCache, DenseGrads,
    DenseLayer, LstmCache, LstmCell, LstmGrads,
};
use crate::{CoreError, Result, Tensor};

#[derive(Debug, Clone)]
pub enum SurrogateModel {
    OneStepMlp(OneStepMlp),
    Seq2SeqLstm(Seq2SeqLstm),
}

/// Fixed per-coordinate affine whitening applied at the model boundary: the
/// network sees (η − μ)/s and its outputs map back through μ + s·y. POD
/// coefficients span orders of magnitude, and feeding them raw saturates the
/// LSTM gates. The scaler is part of the architecture, not a trainable
/// parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    identity: bool,
}

impl LatentScaler {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], scale: vec![1.0; dim], identity: true }
    }

    pub fn new(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(CoreError::Dimension("scaler mean/scale lengths differ".into()));
        }
        if scale.iter().any(|&s| !(s > 0.0)) {
            return Err(CoreError::Config("scaler entries must be positive".into()));
        }
        let identity = mean.iter().all(|&m| m == 0.0) && scale.iter().all(|&s| s == 1.0);
        Ok(Self { mean, scale, identity })
    }

    /// Per-coordinate z-score over every vector of every series; constant
    /// coordinates get scale 1.
    pub fn fit(series: &[crate::reduction::LatentSeries]) -> Result<Self> {
        let dim = series
            .first()
            .map(|s| s.dim())
            .ok_or_else(|| CoreError::Config("no series to fit a scaler on".into()))?;
        let mut mean = vec![0.0; dim];
        let mut count = 0.0;
        for s in series {
            for t in 0..s.t_len() {
                for (k, v) in s.at(t).iter().enumerate() {
                    mean[k] += v;
                }
                count += 1.0;
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = vec![0.0; dim];
        for s in series {
            for t in 0..s.t_len() {
                for (k, v) in s.at(t).iter().enumerate() {
                    var[k] += (v - mean[k]) * (v - mean[k]);
                }
            }
        }
        let scale: Vec<f64> =
            var.iter().map(|v| if *v > 0.0 { (v / count).sqrt() } else { 1.0 }).collect();
        Self::new(mean, scale)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    fn to_internal(&self, x: &Tensor) -> Tensor {
        if self.identity {
            return x.clone();
        }
        let v: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, val)| (val - self.mean[k]) / self.scale[k])
            .collect();
        Tensor::from_parts_unchecked(vec![v.len()], v)
    }

    fn from_internal(&self, y: &Tensor) -> Tensor {
        if self.identity {
            return y.clone();
        }
        let v: Vec<f64> =
            y.iter().enumerate().map(|(k, val)| self.mean[k] + self.scale[k] * val).collect();
        Tensor::from_parts_unchecked(vec![v.len()], v)
    }

    /// Cotangent of a raw output mapped to the internal representation.
    fn cotangent_in(&self, dy_raw: &Tensor) -> Tensor {
        if self.identity {
            return dy_raw.clone();
        }
        let v: Vec<f64> =
            dy_raw.iter().enumerate().map(|(k, val)| val * self.scale[k]).collect();
        Tensor::from_parts_unchecked(vec![v.len()], v)
    }

    /// Cotangent of an internal input mapped back to raw coordinates.
    fn cotangent_out(&self, dx_int: &Tensor) -> Tensor {
        if self.identity {
            return dx_int.clone();
        }
        let v: Vec<f64> =
            dx_int.iter().enumerate().map(|(k, val)| val / self.scale[k]).collect();
        Tensor::from_parts_unchecked(vec![v.len()], v)
    }
}

#[derive(Debug, Clone)]
pub struct OneStepMlp {
    pub layers: Vec<DenseLayer>,
    latent_dim: usize,
    scaler: LatentScaler,
}

#[derive(Debug, Clone)]
pub struct Seq2SeqLstm {
    pub cells: Vec<LstmCell>,
    /// Linear projection from the top hidden state to a latent vector.
    pub proj: DenseLayer,
    pub k_in: usize,
    pub k_out: usize,
    latent_dim: usize,
    hidden: usize,
    scaler: LatentScaler,
}

impl OneStepMlp {
    /// Hidden layers use tanh, the output layer is linear.
    pub fn init(latent_dim: usize, hidden_sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![latent_dim];
        sizes.extend_from_slice(hidden_sizes);
        sizes.push(latent_dim);
        let layers = (0..sizes.len() - 1)
            .map(|k| {
                let act =
                    if k + 2 == sizes.len() { Activation::Identity } else { Activation::Tanh };
                DenseLayer::init(sizes[k + 1], sizes[k], act, rng)
            })
            .collect();
        Self { layers, latent_dim, scaler: LatentScaler::identity(latent_dim) }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::Config("MLP needs at least one layer".into()));
        }
        let latent_dim = layers[0].input_size();
        if layers.last().unwrap().output_size() != latent_dim {
            return Err(CoreError::Dimension("MLP must map latent dim to itself".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(CoreError::Dimension("MLP layer sizes do not chain".into()));
            }
        }
        Ok(Self { layers, latent_dim, scaler: LatentScaler::identity(latent_dim) })
    }

    /// Identity dynamics: single linear layer with W = I.
    pub fn identity(latent_dim: usize) -> Self {
        Self {
            layers: vec![DenseLayer::identity(latent_dim, Activation::Identity)],
            latent_dim,
            scaler: LatentScaler::identity(latent_dim),
        }
    }
}

impl Seq2SeqLstm {
    pub fn init(
        latent_dim: usize,
        hidden: usize,
        n_layers: usize,
        k_in: usize,
        k_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if k_in < 1 || k_out < 1 || n_layers < 1 {
            return Err(CoreError::Config("k_in, k_out, n_layers must be at least 1".into()));
        }
        let cells = (0..n_layers)
            .map(|l| {
                let input = if l == 0 { latent_dim } else { hidden };
                LstmCell::init(input, hidden, rng)
            })
            .collect();
        let proj = DenseLayer::init(latent_dim, hidden, Activation::Identity, rng);
        Ok(Self {
            cells,
            proj,
            k_in,
            k_out,
            latent_dim,
            hidden,
            scaler: LatentScaler::identity(latent_dim),
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }
}

impl SurrogateModel {
    pub fn latent_dim(&self) -> usize {
        match self {
            SurrogateModel::OneStepMlp(m) => m.latent_dim,
            SurrogateModel::Seq2SeqLstm(m) => m.latent_dim,
        }
    }

    /// Ground-truth latents consumed per application.
    pub fn window_in(&self) -> usize {
        match self {
            SurrogateModel::OneStepMlp(_) => 1,
            SurrogateModel::Seq2SeqLstm(m) => m.k_in,
        }
    }

    /// Latents produced per application.
    pub fn window_out(&self) -> usize {
        match self {
            SurrogateModel::OneStepMlp(_) => 1,
            SurrogateModel::Seq2SeqLstm(m) => m.k_out,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            SurrogateModel::OneStepMlp(m) => m.layers.iter().map(DenseLayer::param_count).sum(),
            SurrogateModel::Seq2SeqLstm(m) => {
                m.cells.iter().map(LstmCell::param_count).sum::<usize>() + m.proj.param_count()
            }
        }
    }

    pub fn scaler(&self) -> &LatentScaler {
        match self {
            SurrogateModel::OneStepMlp(m) => &m.scaler,
            SurrogateModel::Seq2SeqLstm(m) => &m.scaler,
        }
    }

    /// Install the whitening the network runs in. Not a trainable parameter;
    /// fitted once from the training latents before training starts.
    pub fn set_scaler(&mut self, scaler: LatentScaler) -> Result<()> {
        if scaler.mean.len() != self.latent_dim() {
            return Err(CoreError::Dimension(format!(
                "scaler dimension {} != latent dim {}",
                scaler.mean.len(),
                self.latent_dim()
            )));
        }
        match self {
            SurrogateModel::OneStepMlp(m) => m.scaler = scaler,
            SurrogateModel::Seq2SeqLstm(m) => m.scaler = scaler,
        }
        Ok(())
    }

    /// Flatten all parameters in a fixed order (layers in sequence, weight
    /// before bias; LSTM gate order input, forget, output, candidate).
    pub fn collect_params(&self, out: &mut Vec<f64>) {
        out.clear();
        match self {
            SurrogateModel::OneStepMlp(m) => {
                for layer in &m.layers {
                    out.extend_from_slice(layer.weight.values());
                    out.extend_from_slice(layer.bias.values());
                }
            }
            SurrogateModel::Seq2SeqLstm(m) => {
                for cell in &m.cells {
                    out.extend_from_slice(cell.w_input.values());
                    out.extend_from_slice(cell.b_input.values());
                    out.extend_from_slice(cell.w_forget.values());
                    out.extend_from_slice(cell.b_forget.values());
                    out.extend_from_slice(cell.w_output.values());
                    out.extend_from_slice(cell.b_output.values());
                    out.extend_from_slice(cell.w_candidate.values());
                    out.extend_from_slice(cell.b_candidate.values());
                }
                out.extend_from_slice(m.proj.weight.values());
                out.extend_from_slice(m.proj.bias.values());
            }
        }
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(CoreError::Dimension(format!(
                "parameter vector length {} != model size {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        let mut take = |t: &mut Tensor| {
            let len = t.len();
            t.values_mut().copy_from_slice(&flat[off..off + len]);
            off += len;
        };
        match self {
            SurrogateModel::OneStepMlp(m) => {
                for layer in &mut m.layers {
                    take(&mut layer.weight);
                    take(&mut layer.bias);
                }
            }
            SurrogateModel::Seq2SeqLstm(m) => {
                for cell in &mut m.cells {
                    take(&mut cell.w_input);
                    take(&mut cell.b_input);
                    take(&mut cell.w_forget);
                    take(&mut cell.b_forget);
                    take(&mut cell.w_output);
                    take(&mut cell.b_output);
                    take(&mut cell.w_candidate);
                    take(&mut cell.b_candidate);
                }
                take(&mut m.proj.weight);
                take(&mut m.proj.bias);
            }
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> ModelGrads {
        match self {
            SurrogateModel::OneStepMlp(m) => {
                ModelGrads::Mlp(m.layers.iter().map(DenseLayer::zero_grads).collect())
            }
            SurrogateModel::Seq2SeqLstm(m) => ModelGrads::Seq2Seq {
                cells: m.cells.iter().map(LstmCell::zero_grads).collect(),
                proj: m.proj.zero_grads(),
            },
        }
    }

    /// Inference without retaining anything for backward.
    pub fn forward(&self, window: &[Tensor]) -> Result<Vec<Tensor>> {
        Ok(self.forward_traced(window)?.0)
    }

    /// Forward pass that keeps the caches a backward pass will read.
    pub fn forward_traced(&self, window: &[Tensor]) -> Result<(Vec<Tensor>, Trace)> {
        if window.len() != self.window_in() {
            return Err(CoreError::Dimension(format!(
                "window length {} != expected {}",
                window.len(),
                self.window_in()
            )));
        }
        match self {
            SurrogateModel::OneStepMlp(m) => {
                let mut x = m.scaler.to_internal(&window[0]);
                let mut caches = Vec::with_capacity(m.layers.len());
                for layer in &m.layers {
                    let (y, cache) = dense_forward(layer, &x)?;
                    caches.push(cache);
                    x = y;
                }
                Ok((vec![m.scaler.from_internal(&x)], Trace::Mlp(caches)))
            }
            SurrogateModel::Seq2SeqLstm(m) => {
                let n_layers = m.cells.len();
                let mut h: Vec<Tensor> = vec![Tensor::zeros(vec![m.hidden]); n_layers];
                let mut c: Vec<Tensor> = vec![Tensor::zeros(vec![m.hidden]); n_layers];
                let mut steps: Vec<Vec<LstmCache>> = Vec::with_capacity(m.k_in + m.k_out);
                let mut proj_caches: Vec<DenseCache> = Vec::with_capacity(m.k_out);
                let mut outputs: Vec<Tensor> = Vec::with_capacity(m.k_out);

                let advance = |x: &Tensor, h: &mut Vec<Tensor>, c: &mut Vec<Tensor>| -> Result<Vec<LstmCache>> {
                    let mut layer_caches = Vec::with_capacity(n_layers);
                    let mut input = x.clone();
                    for (l, cell) in m.cells.iter().enumerate() {
                        let (h_new, c_new, cache) = lstm_step(cell, &input, &h[l], &c[l])?;
                        layer_caches.push(cache);
                        input = h_new.clone();
                        h[l] = h_new;
                        c[l] = c_new;
                    }
                    Ok(layer_caches)
                };

                // The network runs in the scaler's internal coordinates; the
                // decoder feeds its own (internal) outputs back directly.
                let mut dec_in = m.scaler.to_internal(&window[m.k_in - 1]);
                for x in window {
                    steps.push(advance(&m.scaler.to_internal(x), &mut h, &mut c)?);
                }
                for _ in 0..m.k_out {
                    steps.push(advance(&dec_in, &mut h, &mut c)?);
                    let (y, cache) = dense_forward(&m.proj, &h[n_layers - 1])?;
                    proj_caches.push(cache);
                    outputs.push(m.scaler.from_internal(&y));
                    dec_in = y;
                }
                Ok((outputs, Trace::Seq2Seq { steps, proj_caches }))
            }
        }
    }

    /// Backward through one traced application. `d_outputs` are cotangents of
    /// the predicted latents; parameter gradients accumulate into `grads` and
    /// the returned vector holds cotangents of the input window.
    pub fn backward(
        &self,
        trace: &Trace,
        d_outputs: &[Tensor],
        grads: &mut ModelGrads,
    ) -> Result<Vec<Tensor>> {
        match (self, trace, grads) {
            (SurrogateModel::OneStepMlp(m), Trace::Mlp(caches), ModelGrads::Mlp(layer_grads)) => {
                if d_outputs.len() != 1 {
                    return Err(CoreError::Dimension("MLP expects one output cotangent".into()));
                }
                let mut d = m.scaler.cotangent_in(&d_outputs[0]);
                for ((layer, cache), g) in
                    m.layers.iter().zip(caches.iter()).zip(layer_grads.iter_mut()).rev()
                {
                    d = dense_backward(layer, cache, &d, g)?;
                }
                Ok(vec![m.scaler.cotangent_out(&d)])
            }
            (
                SurrogateModel::Seq2SeqLstm(m),
                Trace::Seq2Seq { steps, proj_caches },
                ModelGrads::Seq2Seq { cells: cell_grads, proj: proj_grads },
            ) => {
                if d_outputs.len() != m.k_out {
                    return Err(CoreError::Dimension(format!(
                        "expected {} output cotangents, got {}",
                        m.k_out,
                        d_outputs.len()
                    )));
                }
                let n_layers = m.cells.len();
                let mut dh: Vec<Tensor> = vec![Tensor::zeros(vec![m.hidden]); n_layers];
                let mut dc: Vec<Tensor> = vec![Tensor::zeros(vec![m.hidden]); n_layers];
                let mut d_window = vec![Tensor::zeros(vec![m.latent_dim]); m.k_in];
                // Gradient flowing into the autoregressive input of the *next*
                // decode step, accumulated onto that step's projection output.
                let mut d_feedback = Tensor::zeros(vec![m.latent_dim]);

                let step_backward = |step_caches: &Vec<LstmCache>,
                                         dh: &mut Vec<Tensor>,
                                         dc: &mut Vec<Tensor>,
                                         cell_grads: &mut Vec<LstmGrads>|
                 -> Result<Tensor> {
                    let mut d_input_above: Option<Tensor> = None;
                    for l in (0..n_layers).rev() {
                        let mut dh_l = dh[l].clone();
                        if let Some(extra) = d_input_above.take() {
                            for k in 0..m.hidden {
                                dh_l[k] += extra[k];
                            }
                        }
                        let (dx, dh_prev, dc_prev) = lstm_backward(
                            &m.cells[l],
                            &step_caches[l],
                            &dh_l,
                            &dc[l],
                            &mut cell_grads[l],
                        )?;
                        dh[l] = dh_prev;
                        dc[l] = dc_prev;
                        d_input_above = Some(dx);
                    }
                    Ok(d_input_above.unwrap())
                };

                // Decode steps in reverse. Cotangents of the raw outputs are
                // first pulled into the internal coordinates; the feedback
                // path already lives there.
                for j in (0..m.k_out).rev() {
                    let mut dy = m.scaler.cotangent_in(&d_outputs[j]);
                    for k in 0..m.latent_dim {
                        dy[k] += d_feedback[k];
                    }
                    d_feedback = Tensor::zeros(vec![m.latent_dim]);
                    let d_h_top = dense_backward(&m.proj, &proj_caches[j], &dy, proj_grads)?;
                    for k in 0..m.hidden {
                        dh[n_layers - 1][k] += d_h_top[k];
                    }
                    let dx = step_backward(&steps[m.k_in + j], &mut dh, &mut dc, cell_grads)?;
                    if j == 0 {
                        // First decode input is the last window latent.
                        for k in 0..m.latent_dim {
                            d_window[m.k_in - 1][k] += dx[k];
                        }
                    } else {
                        d_feedback = dx;
                    }
                }
                // Encoder steps in reverse.
                for t in (0..m.k_in).rev() {
                    let dx = step_backward(&steps[t], &mut dh, &mut dc, cell_grads)?;
                    for k in 0..m.latent_dim {
                        d_window[t][k] += dx[k];
                    }
                }
                let d_window =
                    d_window.iter().map(|d| m.scaler.cotangent_out(d)).collect::<Vec<_>>();
                Ok(d_window)
            }
            _ => Err(CoreError::Dimension("trace/grads do not match model kind".into())),
        }
    }
}

/// Forward caches retained for one application of the model.
#[derive(Debug, Clone)]
pub enum Trace {
    Mlp(Vec<DenseCache>),
    Seq2Seq { steps: Vec<Vec<LstmCache>>, proj_caches: Vec<DenseCache> },
}

impl Trace {
    pub fn retained_bytes(&self) -> u64 {
        match self {
            Trace::Mlp(caches) => caches.iter().map(DenseCache::retained_bytes).sum(),
            Trace::Seq2Seq { steps, proj_caches } => {
                steps.iter().flatten().map(LstmCache::retained_bytes).sum::<u64>()
                    + proj_caches.iter().map(DenseCache::retained_bytes).sum::<u64>()
            }
        }
    }
}

/// Parameter gradients mirroring the model structure; flattened in the same
/// order as `collect_params`.
#[derive(Debug, Clone)]
pub enum ModelGrads {
    Mlp(Vec<DenseGrads>),
    Seq2Seq { cells: Vec<LstmGrads>, proj: DenseGrads },
}

impl ModelGrads {
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.clear();
        match self {
            ModelGrads::Mlp(layers) => {
                for g in layers {
                    out.extend_from_slice(g.d_weight.values());
                    out.extend_from_slice(g.d_bias.values());
                }
            }
            ModelGrads::Seq2Seq { cells, proj } => {
                for g in cells {
                    out.extend_from_slice(g.d_w_input.values());
                    out.extend_from_slice(g.d_b_input.values());
                    out.extend_from_slice(g.d_w_forget.values());
                    out.extend_from_slice(g.d_b_forget.values());
                    out.extend_from_slice(g.d_w_output.values());
                    out.extend_from_slice(g.d_b_output.values());
                    out.extend_from_slice(g.d_w_candidate.values());
                    out.extend_from_slice(g.d_b_candidate.values());
                }
                out.extend_from_slice(proj.d_weight.values());
                out.extend_from_slice(proj.d_bias.values());
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        let apply = |t: &mut Tensor| t.values_mut().iter_mut().for_each(|v| *v *= factor);
        match self {
            ModelGrads::Mlp(layers) => {
                for g in layers {
                    apply(&mut g.d_weight);
                    apply(&mut g.d_bias);
                }
            }
            ModelGrads::Seq2Seq { cells, proj } => {
                for g in cells {
                    apply(&mut g.d_w_input);
                    apply(&mut g.d_b_input);
                    apply(&mut g.d_w_forget);
                    apply(&mut g.d_b_forget);
                    apply(&mut g.d_w_output);
                    apply(&mut g.d_b_output);
                    apply(&mut g.d_w_candidate);
                    apply(&mut g.d_b_candidate);
                }
                apply(&mut proj.d_weight);
                apply(&mut proj.d_bias);
            }
        }
    }
}

/// η̃_{t+1} = f(η_t) for the one-step model.
pub fn predict_one(model: &SurrogateModel, eta: &Tensor) -> Result<Tensor> {
    match model {
        SurrogateModel::OneStepMlp(_) => {
            Ok(model.forward(std::slice::from_ref(eta))?.pop().unwrap())
        }
        SurrogateModel::Seq2SeqLstm(_) => {
            Err(CoreError::Config("predict_one requires a one-step model".into()))
        }
    }
}

/// Seq2seq prediction: k_in consecutive latents in, k_out predicted out.
pub fn predict_seq(model: &SurrogateModel, window: &[Tensor]) -> Result<Vec<Tensor>> {
    match model {
        SurrogateModel::Seq2SeqLstm(_) => model.forward(window),
        SurrogateModel::OneStepMlp(_) => {
            Err(CoreError::Config("predict_seq requires a seq2seq model".into()))
        }
    }
}

/// f^δ: window substitution, advancing δ·window_out latent steps. δ = 0 is
/// the identity.
pub fn compose_delta(model: &SurrogateModel, window: &[Tensor], delta: usize) -> Result<Vec<Tensor>> {
    if delta == 0 {
        return Ok(window.to_vec());
    }
    let mut w = window.to_vec();
    for _ in 0..delta {
        let out = model.forward(&w)?;
        w = next_window(&w, out, model.window_in());
    }
    Ok(w)
}

/// Slide the window over freshly predicted latents: keep the last k_in of
/// (window ++ outputs). For k_out = k_in this is plain substitution.
pub fn next_window(window: &[Tensor], outputs: Vec<Tensor>, k_in: usize) -> Vec<Tensor> {
    if outputs.len() >= k_in {
        let skip = outputs.len() - k_in;
        outputs.into_iter().skip(skip).collect()
    } else {
        let mut w: Vec<Tensor> = window[outputs.len()..].to_vec();
        w.extend(outputs);
        w
    }
}

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    /// Latent steps to predict.
    pub horizon: usize,
    /// Ground-truth window seeding the rollout (length = window_in()).
    pub teacher_window: Vec<Tensor>,
}

/// Iterative prediction: the first application consumes ground truth, every
/// later one feeds on the model's own outputs. Returns exactly `horizon`
/// predicted latents.
pub fn rollout(model: &SurrogateModel, cfg: &RolloutConfig) -> Result<Vec<Tensor>> {
    if cfg.horizon < 1 {
        return Err(CoreError::Config("rollout horizon must be at least 1".into()));
    }
    if cfg.teacher_window.len() != model.window_in() {
        return Err(CoreError::Dimension(format!(
            "teacher window length {} != model window {}",
            cfg.teacher_window.len(),
            model.window_in()
        )));
    }
    let mut predictions = Vec::with_capacity(cfg.horizon);
    let mut window = cfg.teacher_window.clone();
    while predictions.len() < cfg.horizon {
        let out = model.forward(&window)?;
        window = next_window(&window, out.clone(), model.window_in());
        for y in out {
            if predictions.len() < cfg.horizon {
                predictions.push(y);
            }
        }
    }
    Ok(predictions)
}
