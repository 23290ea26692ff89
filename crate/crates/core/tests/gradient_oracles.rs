//! Analytic gradients against central finite differences (h = 1e-6) for
//! every differentiable path: dense layers, the LSTM cell, the seq2seq
//! model, the unrolled ATF loss and the pushforward loss.

use spf_core::nn::{
    dense_backward, dense_forward, grad_check, Activation, DenseLayer, LstmCell,
};
use spf_core::seed::rng_from;
use spf_core::surrogate::{compose_delta, OneStepMlp, Seq2SeqLstm, SurrogateModel};
use spf_core::trainers::{atf_loss, pf_loss};
use spf_core::Tensor;

const FD_STEP: f64 = 1e-6;

fn random_vec(rng: &mut rand_chacha::ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    use rand::Rng;
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// ‖f(x) − target‖² through an arbitrary surrogate, as a function of the flat
/// parameter vector.
fn surrogate_loss(
    template: &SurrogateModel,
    flat: &[f64],
    input: &[Tensor],
    target: &[Tensor],
) -> f64 {
    let mut model = template.clone();
    model.assign_params(flat).unwrap();
    let out = model.forward(input).unwrap();
    out.iter()
        .zip(target.iter())
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum()
}

#[test]
fn dense_layer_gradients_match_finite_differences_on_20_instances() {
    for instance in 0..20 {
        let mut rng = rng_from(100 + instance, 0, 0);
        let act = match instance % 3 {
            0 => Activation::Tanh,
            1 => Activation::Sigmoid,
            _ => Activation::Identity,
        };
        let layer = DenseLayer::init(3, 4, act, &mut rng);
        let x = Tensor::vector(random_vec(&mut rng, 4, 1.0)).unwrap();
        let target = random_vec(&mut rng, 3, 1.0);

        let (_, cache) = dense_forward(&layer, &x).unwrap();
        let mut grads = layer.zero_grads();
        let y = cache.output.clone();
        let dy = Tensor::vector(
            (0..3).map(|k| 2.0 * (y[k] - target[k])).collect(),
        )
        .unwrap();
        dense_backward(&layer, &cache, &dy, &mut grads).unwrap();

        let mut params = layer.weight.values().to_vec();
        params.extend_from_slice(layer.bias.values());
        let mut analytic = grads.d_weight.values().to_vec();
        analytic.extend_from_slice(grads.d_bias.values());

        let loss = |p: &[f64]| -> f64 {
            let w = Tensor::new(vec![3, 4], p[..12].to_vec()).unwrap();
            let b = Tensor::new(vec![3], p[12..].to_vec()).unwrap();
            let l = DenseLayer::new(w, b, act).unwrap();
            let (out, _) = dense_forward(&l, &x).unwrap();
            (0..3).map(|k| (out[k] - target[k]) * (out[k] - target[k])).sum()
        };
        let report = grad_check(&params, loss, &analytic, FD_STEP).unwrap();
        assert!(
            report.max_rel_error <= 1e-5,
            "instance {instance}: rel error {}",
            report.max_rel_error
        );
    }
}

#[test]
fn linear_model_quadratic_loss_is_exact_to_roundoff() {
    let mut rng = rng_from(7, 0, 0);
    let layer = DenseLayer::init(2, 2, Activation::Identity, &mut rng);
    let x = Tensor::vector(vec![0.3, -0.8]).unwrap();
    let target = [0.5, 0.1];

    let (_, cache) = dense_forward(&layer, &x).unwrap();
    let mut grads = layer.zero_grads();
    let dy = Tensor::vector(
        (0..2).map(|k| 2.0 * (cache.output[k] - target[k])).collect(),
    )
    .unwrap();
    dense_backward(&layer, &cache, &dy, &mut grads).unwrap();

    let mut params = layer.weight.values().to_vec();
    params.extend_from_slice(layer.bias.values());
    let mut analytic = grads.d_weight.values().to_vec();
    analytic.extend_from_slice(grads.d_bias.values());
    let loss = |p: &[f64]| -> f64 {
        let w = Tensor::new(vec![2, 2], p[..4].to_vec()).unwrap();
        let b = Tensor::new(vec![2], p[4..].to_vec()).unwrap();
        let l = DenseLayer::new(w, b, Activation::Identity).unwrap();
        let (out, _) = dense_forward(&l, &x).unwrap();
        (0..2).map(|k| (out[k] - target[k]) * (out[k] - target[k])).sum()
    };
    let report = grad_check(&params, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-7, "rel error {}", report.max_rel_error);
}

#[test]
fn two_layer_tanh_net_gradients_within_1e5() {
    let mut rng = rng_from(8, 0, 0);
    let template = SurrogateModel::OneStepMlp(OneStepMlp::init(3, &[5], &mut rng));
    let input = vec![Tensor::vector(random_vec(&mut rng, 3, 1.0)).unwrap()];
    let target = vec![Tensor::vector(random_vec(&mut rng, 3, 1.0)).unwrap()];

    let mut flat = Vec::new();
    template.collect_params(&mut flat);
    let mut grads = template.zero_grads();
    let (out, trace) = template.forward_traced(&input).unwrap();
    let dy: Vec<Tensor> = out
        .iter()
        .zip(target.iter())
        .map(|(a, b)| {
            Tensor::vector((0..a.len()).map(|k| 2.0 * (a[k] - b[k])).collect()).unwrap()
        })
        .collect();
    template.backward(&trace, &dy, &mut grads).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);

    let loss = |p: &[f64]| surrogate_loss(&template, p, &input, &target);
    let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-5, "rel error {}", report.max_rel_error);
}

#[test]
fn lstm_cell_gradients_match_finite_differences_on_20_instances() {
    for instance in 0..20 {
        let mut rng = rng_from(300 + instance, 0, 0);
        let template = SurrogateModel::Seq2SeqLstm(
            Seq2SeqLstm::init(2, 3, 1, 1, 1, &mut rng).unwrap(),
        );
        let input = vec![Tensor::vector(random_vec(&mut rng, 2, 1.0)).unwrap()];
        let target = vec![Tensor::vector(random_vec(&mut rng, 2, 1.0)).unwrap()];

        let mut flat = Vec::new();
        template.collect_params(&mut flat);
        let mut grads = template.zero_grads();
        let (out, trace) = template.forward_traced(&input).unwrap();
        let dy: Vec<Tensor> = out
            .iter()
            .zip(target.iter())
            .map(|(a, b)| {
                Tensor::vector((0..a.len()).map(|k| 2.0 * (a[k] - b[k])).collect()).unwrap()
            })
            .collect();
        template.backward(&trace, &dy, &mut grads).unwrap();
        let mut analytic = Vec::new();
        grads.flatten_into(&mut analytic);

        let loss = |p: &[f64]| surrogate_loss(&template, p, &input, &target);
        let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
        assert!(
            report.max_rel_error <= 1e-5,
            "instance {instance}: rel error {}",
            report.max_rel_error
        );
    }
}

#[test]
fn seq2seq_sum_of_outputs_gradient_within_1e4() {
    // k_in = k_out = 2, gradients of the plain sum of all outputs.
    let mut rng = rng_from(9, 0, 0);
    let template =
        SurrogateModel::Seq2SeqLstm(Seq2SeqLstm::init(2, 4, 1, 2, 2, &mut rng).unwrap());
    let input = vec![
        Tensor::vector(random_vec(&mut rng, 2, 1.0)).unwrap(),
        Tensor::vector(random_vec(&mut rng, 2, 1.0)).unwrap(),
    ];

    let mut flat = Vec::new();
    template.collect_params(&mut flat);
    let mut grads = template.zero_grads();
    let (out, trace) = template.forward_traced(&input).unwrap();
    let dy: Vec<Tensor> = out
        .iter()
        .map(|a| Tensor::vector(vec![1.0; a.len()]).unwrap())
        .collect();
    template.backward(&trace, &dy, &mut grads).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);

    let loss = |p: &[f64]| -> f64 {
        let mut model = template.clone();
        model.assign_params(p).unwrap();
        model.forward(&input).unwrap().iter().map(|t| t.iter().sum::<f64>()).sum()
    };
    let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-4, "rel error {}", report.max_rel_error);
}

#[test]
fn atf_loss_gradients_match_finite_differences() {
    let mut rng = rng_from(10, 0, 0);
    let template = SurrogateModel::OneStepMlp(OneStepMlp::init(2, &[3], &mut rng));
    let input = vec![Tensor::vector(random_vec(&mut rng, 2, 0.8)).unwrap()];
    let targets: Vec<Vec<Tensor>> = (0..3)
        .map(|_| vec![Tensor::vector(random_vec(&mut rng, 2, 0.8)).unwrap()])
        .collect();
    let target_refs: Vec<&[Tensor]> = targets.iter().map(|t| t.as_slice()).collect();
    let lambda = [0.7, 0.4];

    let mut flat = Vec::new();
    template.collect_params(&mut flat);
    let mut grads = template.zero_grads();
    atf_loss(&template, &input, &target_refs, &lambda, &mut grads).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);

    let loss = |p: &[f64]| -> f64 {
        let mut model = template.clone();
        model.assign_params(p).unwrap();
        let mut total = 0.0;
        for (k, target) in targets.iter().enumerate() {
            let pred = compose_delta(&model, &input, k + 1).unwrap();
            let sq: f64 = pred[0]
                .iter()
                .zip(target[0].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let lam = if k == 0 { 1.0 } else { lambda[k - 1] };
            total += lam * sq;
        }
        total
    };
    let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-4, "rel error {}", report.max_rel_error);
}

#[test]
fn atf_loss_gradients_match_for_seq2seq_windows() {
    let mut rng = rng_from(11, 0, 0);
    let template =
        SurrogateModel::Seq2SeqLstm(Seq2SeqLstm::init(2, 3, 1, 2, 2, &mut rng).unwrap());
    let input: Vec<Tensor> =
        (0..2).map(|_| Tensor::vector(random_vec(&mut rng, 2, 0.6)).unwrap()).collect();
    let targets: Vec<Vec<Tensor>> = (0..2)
        .map(|_| (0..2).map(|_| Tensor::vector(random_vec(&mut rng, 2, 0.6)).unwrap()).collect())
        .collect();
    let target_refs: Vec<&[Tensor]> = targets.iter().map(|t| t.as_slice()).collect();

    let mut flat = Vec::new();
    template.collect_params(&mut flat);
    let mut grads = template.zero_grads();
    atf_loss(&template, &input, &target_refs, &[], &mut grads).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);

    let loss = |p: &[f64]| -> f64 {
        let mut model = template.clone();
        model.assign_params(p).unwrap();
        let mut total = 0.0;
        for (k, target) in targets.iter().enumerate() {
            let pred = compose_delta(&model, &input, k + 1).unwrap();
            for (a, b) in pred.iter().zip(target.iter()) {
                total += a
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>();
            }
        }
        total
    };
    let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-4, "rel error {}", report.max_rel_error);
}

#[test]
fn pf_loss_gradients_match_finite_differences_at_the_frozen_prefix() {
    // PF's gradient is defined with the prefix held frozen, so the oracle
    // differentiates θ ↦ ‖f_θ(z) − y‖² at the prefix z computed once.
    let mut rng = rng_from(12, 0, 0);
    let template = SurrogateModel::OneStepMlp(OneStepMlp::init(2, &[3], &mut rng));
    let input = vec![Tensor::vector(random_vec(&mut rng, 2, 0.8)).unwrap()];
    let target = vec![Tensor::vector(random_vec(&mut rng, 2, 0.8)).unwrap()];
    let delta = 3;

    let mut flat = Vec::new();
    template.collect_params(&mut flat);
    let mut grads = template.zero_grads();
    pf_loss(&template, &template, &input, &target, delta, &mut grads).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);

    let prefix = compose_delta(&template, &input, delta - 1).unwrap();
    let loss = |p: &[f64]| surrogate_loss(&template, p, &prefix, &target);
    let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-4, "rel error {}", report.max_rel_error);
}

#[test]
fn scaled_seq2seq_gradients_match_finite_differences() {
    // A non-identity latent scaler participates in both the output and the
    // input-window chain rules.
    use spf_core::surrogate::LatentScaler;
    let mut rng = rng_from(14, 0, 0);
    let mut template =
        SurrogateModel::Seq2SeqLstm(Seq2SeqLstm::init(2, 3, 1, 2, 2, &mut rng).unwrap());
    template
        .set_scaler(LatentScaler::new(vec![1.5, -0.5], vec![2.0, 0.25]).unwrap())
        .unwrap();
    let input: Vec<Tensor> =
        (0..2).map(|_| Tensor::vector(random_vec(&mut rng, 2, 2.0)).unwrap()).collect();
    let target: Vec<Tensor> =
        (0..2).map(|_| Tensor::vector(random_vec(&mut rng, 2, 2.0)).unwrap()).collect();

    let mut flat = Vec::new();
    template.collect_params(&mut flat);
    let mut grads = template.zero_grads();
    let (out, trace) = template.forward_traced(&input).unwrap();
    let dy: Vec<Tensor> = out
        .iter()
        .zip(target.iter())
        .map(|(a, b)| {
            Tensor::vector((0..a.len()).map(|k| 2.0 * (a[k] - b[k])).collect()).unwrap()
        })
        .collect();
    let d_window = template.backward(&trace, &dy, &mut grads).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);

    let loss = |p: &[f64]| surrogate_loss(&template, p, &input, &target);
    let report = grad_check(&flat, loss, &analytic, FD_STEP).unwrap();
    assert!(report.max_rel_error <= 1e-4, "param rel error {}", report.max_rel_error);

    // Input-window gradients against finite differences too.
    for (t, d) in d_window.iter().enumerate() {
        for k in 0..2 {
            let mut plus = input.clone();
            plus[t].values_mut()[k] += FD_STEP;
            let mut minus = input.clone();
            minus[t].values_mut()[k] -= FD_STEP;
            let f = |w: &Vec<Tensor>| -> f64 {
                template
                    .forward(w)
                    .unwrap()
                    .iter()
                    .zip(target.iter())
                    .map(|(a, b)| {
                        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
                    })
                    .sum()
            };
            let numeric = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
            let rel = (d[k] - numeric).abs() / d[k].abs().max(numeric.abs()).max(1e-6);
            assert!(rel <= 1e-4, "window grad [{t}][{k}]: {} vs {numeric}", d[k]);
        }
    }
}

#[test]
fn lstm_gate_parameters_all_reached_by_gradients() {
    // Sanity: a full seq2seq backward touches every parameter block.
    let mut rng = rng_from(13, 0, 0);
    let template =
        SurrogateModel::Seq2SeqLstm(Seq2SeqLstm::init(2, 3, 2, 2, 2, &mut rng).unwrap());
    let input: Vec<Tensor> =
        (0..2).map(|_| Tensor::vector(random_vec(&mut rng, 2, 1.0)).unwrap()).collect();
    let (out, trace) = template.forward_traced(&input).unwrap();
    let dy: Vec<Tensor> =
        out.iter().map(|a| Tensor::vector(vec![1.0; a.len()]).unwrap()).collect();
    let mut grads = template.zero_grads();
    template.backward(&trace, &dy, &mut grads).unwrap();
    let mut flat = Vec::new();
    grads.flatten_into(&mut flat);
    let nonzero = flat.iter().filter(|g| g.abs() > 0.0).count();
    assert!(
        nonzero > flat.len() / 2,
        "only {nonzero} of {} gradient entries nonzero",
        flat.len()
    );
    let cell = LstmCell::new(2, 3);
    assert!(cell.param_count() > 0);
}
