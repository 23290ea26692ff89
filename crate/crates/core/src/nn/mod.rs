//! Minimal dense-tensor neural-network kernels: dense layers, an LSTM cell,
//! the Adam optimizer and a finite-difference gradient checker. Forward
//! passes are pure functions of (parameters, inputs); training code owns all
//! mutation.

mod activation;
mod adam;
mod dense;
mod grad_check;
mod lstm;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseLayer};
pub use grad_check::{grad_check, GradCheckReport};
pub use lstm::{lstm_backward, lstm_step, LstmCache, LstmCell, LstmGrads};

/// Dot product kept in one place so every matvec sums in the same order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// y = W x for row-major W of shape [rows, cols].
#[inline]
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for r in 0..rows {
        y[r] = dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// y += W^T d for row-major W of shape [rows, cols].
#[inline]
pub(crate) fn matvec_transpose_add(w: &[f64], rows: usize, cols: usize, d: &[f64], y: &mut [f64]) {
    debug_assert_eq!(d.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for r in 0..rows {
        let dr = d[r];
        let row = &w[r * cols..(r + 1) * cols];
        for c in 0..cols {
            y[c] += row[c] * dr;
        }
    }
}

/// W += d ⊗ x (outer product accumulation).
#[inline]
pub(crate) fn outer_add(w: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), d.len() * cols);
    for r in 0..d.len() {
        let dr = d[r];
        let row = &mut w[r * cols..(r + 1) * cols];
        for c in 0..cols {
            row[c] += dr * x[c];
        }
    }
}
