//! Single LSTM cell with hand-written backward pass. The four gate blocks
//! each act on the concatenation [x; h], so weight shapes are
//! [hidden × (input + hidden)].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::activation::sigmoid;
use super::{matvec, matvec_transpose_add, outer_add};
use crate::{CoreError, Result, Tensor};

#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_input: Tensor,
    pub w_forget: Tensor,
    pub w_output: Tensor,
    pub w_candidate: Tensor,
    pub b_input: Tensor,
    pub b_forget: Tensor,
    pub b_output: Tensor,
    pub b_candidate: Tensor,
    input_size: usize,
    hidden_size: usize,
}

impl LstmCell {
    pub fn new(input_size: usize, hidden_size: usize) -> Self {
        let z = input_size + hidden_size;
        Self {
            w_input: Tensor::zeros(vec![hidden_size, z]),
            w_forget: Tensor::zeros(vec![hidden_size, z]),
            w_output: Tensor::zeros(vec![hidden_size, z]),
            w_candidate: Tensor::zeros(vec![hidden_size, z]),
            b_input: Tensor::zeros(vec![hidden_size]),
            b_forget: Tensor::zeros(vec![hidden_size]),
            b_output: Tensor::zeros(vec![hidden_size]),
            b_candidate: Tensor::zeros(vec![hidden_size]),
            input_size,
            hidden_size,
        }
    }

    pub fn init(input_size: usize, hidden_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let z = input_size + hidden_size;
        let bound = 1.0 / (z as f64).sqrt();
        let mut mat = || {
            let values: Vec<f64> = (0..hidden_size * z).map(|_| rng.gen_range(-bound..=bound)).collect();
            Tensor::from_parts_unchecked(vec![hidden_size, z], values)
        };
        let w_input = mat();
        let w_forget = mat();
        let w_output = mat();
        let w_candidate = mat();
        Self {
            w_input,
            w_forget,
            w_output,
            w_candidate,
            b_input: Tensor::zeros(vec![hidden_size]),
            b_forget: Tensor::zeros(vec![hidden_size]),
            b_output: Tensor::zeros(vec![hidden_size]),
            b_candidate: Tensor::zeros(vec![hidden_size]),
            input_size,
            hidden_size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn param_count(&self) -> usize {
        4 * self.hidden_size * (self.input_size + self.hidden_size) + 4 * self.hidden_size
    }

    pub fn zero_grads(&self) -> LstmGrads {
        let z = self.input_size + self.hidden_size;
        LstmGrads {
            d_w_input: Tensor::zeros(vec![self.hidden_size, z]),
            d_w_forget: Tensor::zeros(vec![self.hidden_size, z]),
            d_w_output: Tensor::zeros(vec![self.hidden_size, z]),
            d_w_candidate: Tensor::zeros(vec![self.hidden_size, z]),
            d_b_input: Tensor::zeros(vec![self.hidden_size]),
            d_b_forget: Tensor::zeros(vec![self.hidden_size]),
            d_b_output: Tensor::zeros(vec![self.hidden_size]),
            d_b_candidate: Tensor::zeros(vec![self.hidden_size]),
        }
    }
}

/// Everything the backward pass reads: the concatenated input, previous cell
/// state, the four gate activations and the new cell state.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub concat: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gate_input: Vec<f64>,
    pub gate_forget: Vec<f64>,
    pub gate_output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c_new: Vec<f64>,
    pub tanh_c_new: Vec<f64>,
}

impl LstmCache {
    pub fn retained_bytes(&self) -> u64 {
        let floats = self.concat.len()
            + self.c_prev.len()
            + self.gate_input.len()
            + self.gate_forget.len()
            + self.gate_output.len()
            + self.candidate.len()
            + self.c_new.len()
            + self.tanh_c_new.len();
        (floats * std::mem::size_of::<f64>()) as u64
    }
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub d_w_input: Tensor,
    pub d_w_forget: Tensor,
    pub d_w_output: Tensor,
    pub d_w_candidate: Tensor,
    pub d_b_input: Tensor,
    pub d_b_forget: Tensor,
    pub d_b_output: Tensor,
    pub d_b_candidate: Tensor,
}

/// Standard gate equations:
/// i = σ(W_i·[x;h] + b_i), f = σ(W_f·[x;h] + b_f), o = σ(W_o·[x;h] + b_o),
/// g = tanh(W_g·[x;h] + b_g), c' = f∘c + i∘g, h' = o∘tanh(c').
pub fn lstm_step(
    cell: &LstmCell,
    x: &Tensor,
    h: &Tensor,
    c: &Tensor,
) -> Result<(Tensor, Tensor, LstmCache)> {
    let (n_in, n_h) = (cell.input_size, cell.hidden_size);
    if x.len() != n_in || h.len() != n_h || c.len() != n_h {
        return Err(CoreError::Dimension(format!(
            "lstm_step sizes (x={}, h={}, c={}) do not match cell ({}, {})",
            x.len(),
            h.len(),
            c.len(),
            n_in,
            n_h
        )));
    }
    let z_len = n_in + n_h;
    let mut concat = Vec::with_capacity(z_len);
    concat.extend_from_slice(x.values());
    concat.extend_from_slice(h.values());

    let mut pre = vec![0.0; n_h];
    let mut gate = |w: &Tensor, b: &Tensor, act: fn(f64) -> f64| -> Vec<f64> {
        matvec(w.values(), n_h, z_len, &concat, &mut pre);
        (0..n_h).map(|r| act(pre[r] + b[r])).collect()
    };
    let gate_input = gate(&cell.w_input, &cell.b_input, sigmoid);
    let gate_forget = gate(&cell.w_forget, &cell.b_forget, sigmoid);
    let gate_output = gate(&cell.w_output, &cell.b_output, sigmoid);
    let candidate = gate(&cell.w_candidate, &cell.b_candidate, f64::tanh);

    let mut c_new = vec![0.0; n_h];
    let mut tanh_c_new = vec![0.0; n_h];
    let mut h_new = vec![0.0; n_h];
    for r in 0..n_h {
        c_new[r] = gate_forget[r] * c[r] + gate_input[r] * candidate[r];
        tanh_c_new[r] = c_new[r].tanh();
        h_new[r] = gate_output[r] * tanh_c_new[r];
    }

    let cache = LstmCache {
        concat,
        c_prev: c.values().to_vec(),
        gate_input,
        gate_forget,
        gate_output,
        candidate,
        c_new: c_new.clone(),
        tanh_c_new: tanh_c_new.clone(),
    };
    Ok((
        Tensor::from_parts_unchecked(vec![n_h], h_new),
        Tensor::from_parts_unchecked(vec![n_h], c_new),
        cache,
    ))
}

/// Backward through one step. `dh` and `dc` are the cotangents arriving at
/// (h', c'); returns (dx, dh_prev, dc_prev) and accumulates parameter grads.
pub fn lstm_backward(
    cell: &LstmCell,
    cache: &LstmCache,
    dh: &Tensor,
    dc: &Tensor,
    grads: &mut LstmGrads,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (n_in, n_h) = (cell.input_size, cell.hidden_size);
    if dh.len() != n_h || dc.len() != n_h {
        return Err(CoreError::Dimension("lstm_backward cotangent size mismatch".into()));
    }
    let z_len = n_in + n_h;

    let mut dc_total = vec![0.0; n_h];
    let mut d_out_pre = vec![0.0; n_h];
    let mut d_forget_pre = vec![0.0; n_h];
    let mut d_input_pre = vec![0.0; n_h];
    let mut d_cand_pre = vec![0.0; n_h];
    let mut dc_prev = vec![0.0; n_h];
    for r in 0..n_h {
        let o = cache.gate_output[r];
        let tc = cache.tanh_c_new[r];
        dc_total[r] = dc[r] + dh[r] * o * (1.0 - tc * tc);
        d_out_pre[r] = dh[r] * tc * o * (1.0 - o);
        let f = cache.gate_forget[r];
        d_forget_pre[r] = dc_total[r] * cache.c_prev[r] * f * (1.0 - f);
        let i = cache.gate_input[r];
        d_input_pre[r] = dc_total[r] * cache.candidate[r] * i * (1.0 - i);
        let g = cache.candidate[r];
        d_cand_pre[r] = dc_total[r] * i * (1.0 - g * g);
        dc_prev[r] = dc_total[r] * f;
    }

    let mut dz = vec![0.0; z_len];
    matvec_transpose_add(cell.w_input.values(), n_h, z_len, &d_input_pre, &mut dz);
    matvec_transpose_add(cell.w_forget.values(), n_h, z_len, &d_forget_pre, &mut dz);
    matvec_transpose_add(cell.w_output.values(), n_h, z_len, &d_out_pre, &mut dz);
    matvec_transpose_add(cell.w_candidate.values(), n_h, z_len, &d_cand_pre, &mut dz);

    outer_add(grads.d_w_input.values_mut(), &d_input_pre, &cache.concat);
    outer_add(grads.d_w_forget.values_mut(), &d_forget_pre, &cache.concat);
    outer_add(grads.d_w_output.values_mut(), &d_out_pre, &cache.concat);
    outer_add(grads.d_w_candidate.values_mut(), &d_cand_pre, &cache.concat);
    for r in 0..n_h {
        grads.d_b_input[r] += d_input_pre[r];
        grads.d_b_forget[r] += d_forget_pre[r];
        grads.d_b_output[r] += d_out_pre[r];
        grads.d_b_candidate[r] += d_cand_pre[r];
    }

    let dx = Tensor::from_parts_unchecked(vec![n_in], dz[..n_in].to_vec());
    let dh_prev = Tensor::from_parts_unchecked(vec![n_h], dz[n_in..].to_vec());
    Ok((dx, dh_prev, Tensor::from_parts_unchecked(vec![n_h], dc_prev)))
}
