//! temporary tuning harness
use spf_cli::commands::{evaluate_model, EvalOptions};
use spf_cli::ExperimentConfig;
use spf_core::reduction::{encode_trajectory, fit_pod, LatentSeries};
use spf_core::surrogate::{LatentScaler, Seq2SeqLstm, SurrogateModel};
use spf_core::seed::rng_from;
use spf_core::trainers::{train_atf, train_spf, Framework, TrainerConfig};
use spf_core::physics::generate_dataset;

#[test]
#[ignore]
fn tune_spf() {
    let cfg = ExperimentConfig::resolve(None, &["hidden_size=64".into(), "batch_size=8".into()], Some(42), None).unwrap();
    let base = cfg.dataset_spec(0).unwrap();
    let test_spec = cfg.dataset_spec(cfg.extra_test_steps).unwrap();
    let train = generate_dataset(&base, cfg.n_train, spf_cli::commands::split_seed(cfg.seed, 0)).unwrap();
    let test = generate_dataset(&test_spec, cfg.n_test, spf_cli::commands::split_seed(cfg.seed, 2)).unwrap();
    let reducer = fit_pod(&train, cfg.latent_dim).unwrap();
    let latents: Vec<LatentSeries> = train.iter().enumerate()
        .map(|(k, t)| encode_trajectory(&reducer, t, &format!("t{k}")).unwrap()).collect();
    let scaler = LatentScaler::fit(&latents).unwrap();
    let fresh = || {
        let mut rng = rng_from(42, spf_cli::commands::split_tags::MODEL, 0);
        let mut m = SurrogateModel::Seq2SeqLstm(Seq2SeqLstm::init(64, 64, 1, 3, 3, &mut rng).unwrap());
        m.set_scaler(scaler.clone()).unwrap();
        m
    };
    let eval = |model: &SurrogateModel| -> (f64, f64, f64) {
        let opts = EvalOptions { input_start: 50, horizon: 60, noise_amplitude: 0.0, noise_length: 4.0, recon_reference: false };
        let agg = evaluate_model(&cfg, model, &reducer, &test, &opts).unwrap();
        let n = agg.summaries.len() as f64;
        (
            agg.summaries.iter().map(|s| s.acc_final).sum::<f64>() / n,
            agg.summaries.iter().map(|s| s.steps_above_08 as f64).sum::<f64>() / n,
            agg.summaries.iter().map(|s| s.mse_step1).sum::<f64>() / n,
        )
    };

    use rayon::prelude::*;
    let variants: Vec<(&str, f64, f64, usize)> = vec![
        ("spf3 a0.5 ui5", 0.5, 0.5, 5),
        ("spf3 a0.5 ui3", 0.5, 0.5, 3),
        ("spf3 a0.25 ui5", 0.5, 0.25, 5),
        ("spf3 p0.25 a0.5 ui5", 0.25, 0.5, 5),
    ];
    let mut jobs: Vec<Box<dyn Fn() -> (String, f64, f64, f64) + Sync + Send>> = Vec::new();
    jobs.push(Box::new(|| {
        let mut m = fresh();
        let mut t = TrainerConfig::new(Framework::Atf, 42);
        t.delta = 3; t.n_epoch = 60; t.batch_size = 8; t.optimizer = cfg.adam();
        train_atf(&mut m, &latents, &t).unwrap();
        let (a, c, s1) = eval(&m);
        ("atf3".to_string(), a, c, s1)
    }));
    for (name, p, alpha, nui) in variants {
        let (cfg, latents, fresh2, eval2) = (&cfg, &latents, &fresh, &eval);
        jobs.push(Box::new(move || {
            let mut m = fresh2();
            let mut t = TrainerConfig::new(Framework::Spf, 42);
            t.delta = 3; t.n_init = 15; t.n_epoch = 45; t.n_ui = nui;
            t.p = p; t.alpha = alpha; t.batch_size = 8; t.optimizer = cfg.adam();
            train_spf(&mut m, latents, &t, None).unwrap();
            let (a, c, s1) = eval2(&m);
            (name.to_string(), a, c, s1)
        }));
    }
    let results: Vec<(String, f64, f64, f64)> = jobs.par_iter().map(|j| j()).collect();
    for (name, acc, cnt, mse1) in &results {
        println!("{name}: acc@60 {acc:.1}, ssim>0.8 {cnt:.1}, 1-step mse {mse1:.3}");
    }
}
