//! Cross-framework equalities: with a shared seed discipline, ATF(δ=1),
//! PF(δ_max=1) and SPF(p=1) must reproduce the one-step trainer's loss
//! history bitwise, supplementary rebuilds must match explicit δ-fold
//! composition, and the retained-memory orderings must hold on one fixed
//! model and dataset.

use spf_core::nn::AdamConfig;
use spf_core::reduction::LatentSeries;
use spf_core::seed::rng_from;
use spf_core::surrogate::{compose_delta, Seq2SeqLstm, SurrogateModel};
use spf_core::trainers::{
    retained_memory_report, train_atf, train_one_step, train_pf, train_spf, Framework, MeterRow,
    TrainerConfig,
};
use spf_core::Tensor;

fn synthetic_series(t_len: usize, dim: usize, seed: u64) -> LatentSeries {
    use rand::Rng;
    let mut rng = rng_from(seed, 0xDA7A, 0);
    let mut state: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut vectors = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let drift: Vec<f64> = state
            .iter()
            .enumerate()
            .map(|(k, &v)| 0.95 * v + 0.05 * ((t as f64 * 0.13 + k as f64).sin()))
            .collect();
        state = drift.clone();
        vectors.push(Tensor::vector(drift).unwrap());
    }
    LatentSeries::new(vectors, "synthetic".into(), 0).unwrap()
}

fn fresh_model(seed: u64, dim: usize) -> SurrogateModel {
    let mut rng = rng_from(seed, 0x4d4f_4449, 0);
    SurrogateModel::Seq2SeqLstm(Seq2SeqLstm::init(dim, 8, 1, 3, 3, &mut rng).unwrap())
}

#[test]
fn atf_delta1_pf_deltamax1_spf_p1_match_the_baseline_bitwise() {
    let data = vec![synthetic_series(200, 4, 11)];
    let opt = AdamConfig::default();
    let epochs = 4;

    let mut baseline = fresh_model(1, 4);
    let base = train_one_step(&mut baseline, &data, epochs, &opt, 1).unwrap();

    let mut atf_model = fresh_model(1, 4);
    let mut atf_cfg = TrainerConfig::new(Framework::Atf, 99);
    atf_cfg.delta = 1;
    atf_cfg.n_epoch = epochs;
    let atf = train_atf(&mut atf_model, &data, &atf_cfg).unwrap();
    assert_eq!(base.loss_history, atf.loss_history, "ATF(δ=1) history differs");

    let mut pf_model = fresh_model(1, 4);
    let mut pf_cfg = TrainerConfig::new(Framework::Pf, 99);
    pf_cfg.delta_max = 1;
    pf_cfg.n_epoch = epochs;
    let pf = train_pf(&mut pf_model, &data, &pf_cfg).unwrap();
    assert_eq!(base.loss_history, pf.loss_history, "PF(δ_max=1) history differs");

    let mut spf_model = fresh_model(1, 4);
    let mut spf_cfg = TrainerConfig::new(Framework::Spf, 99);
    spf_cfg.delta = 2;
    spf_cfg.p = 1.0;
    spf_cfg.n_init = 2;
    spf_cfg.n_epoch = epochs - 2;
    spf_cfg.n_ui = 1;
    let spf = train_spf(&mut spf_model, &data, &spf_cfg, None).unwrap();
    let spf_full: Vec<f64> =
        spf.init_history.iter().chain(spf.main_history.iter()).cloned().collect();
    assert_eq!(base.loss_history, spf_full, "SPF(p=1) history differs");

    // The trained parameters agree as well for the pure reductions.
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    baseline.collect_params(&mut pa);
    atf_model.collect_params(&mut pb);
    assert_eq!(pa, pb);
    spf_model.collect_params(&mut pb);
    assert_eq!(pa, pb);
}

#[test]
fn supplementary_rebuilds_match_delta_fold_composition_bitwise() {
    let data = vec![synthetic_series(40, 3, 5)];
    let mut model = fresh_model(3, 3);
    let mut cfg = TrainerConfig::new(Framework::Spf, 17);
    cfg.delta = 2;
    cfg.p = 0.5;
    cfg.n_init = 1;
    cfg.n_epoch = 6;
    cfg.n_ui = 2;
    cfg.record_rebuilds = true;
    let out = train_spf(&mut model, &data, &cfg, None).unwrap();

    assert_eq!(out.updates.iter().map(|u| u.epoch).collect::<Vec<_>>(), vec![2, 4, 6]);
    assert!(!out.rebuild_snapshots.is_empty());
    for snap in &out.rebuild_snapshots {
        // Rebuild the dataset with the recorded parameters and compare.
        let mut frozen = fresh_model(3, 3);
        frozen.assign_params(&snap.params).unwrap();
        let k_in = frozen.window_in();
        let shift = snap.supplementary.delta * snap.supplementary.shift_per_step;
        for (s_idx, series) in data.iter().enumerate() {
            for (start, window) in snap.supplementary.windows[s_idx].iter().enumerate() {
                let expect = if start < shift {
                    series.window(start, k_in).to_vec()
                } else {
                    compose_delta(&frozen, series.window(start - shift, k_in), snap.supplementary.delta)
                        .unwrap()
                };
                assert_eq!(window, &expect, "rebuild at epoch {} start {start}", snap.epoch);
            }
        }
    }
    // Targets always come from the original data.
    assert_eq!(out.samples_served, out.targets_from_original);
}

#[test]
fn retained_memory_orderings_hold_on_a_fixed_model_and_dataset() {
    let data = vec![synthetic_series(30, 3, 7)];
    let opt = AdamConfig::default();
    let mut rows = Vec::new();

    let mut m = fresh_model(5, 3);
    let params = m.param_count();
    let base = train_one_step(&mut m, &data, 1, &opt, 1).unwrap();
    rows.push(MeterRow {
        framework: "one_step".into(),
        delta: 1,
        peak_bytes: base.meter.peak_bytes(),
        model_params: params,
    });

    for delta in [2usize, 3] {
        let mut m = fresh_model(5, 3);
        let mut cfg = TrainerConfig::new(Framework::Atf, 1);
        cfg.delta = delta;
        cfg.n_epoch = 1;
        let out = train_atf(&mut m, &data, &cfg).unwrap();
        rows.push(MeterRow {
            framework: "atf".into(),
            delta,
            peak_bytes: out.meter.peak_bytes(),
            model_params: params,
        });

        let mut m = fresh_model(5, 3);
        let mut cfg = TrainerConfig::new(Framework::Pf, 1);
        cfg.delta_max = delta;
        cfg.n_epoch = 1;
        let out = train_pf(&mut m, &data, &cfg).unwrap();
        rows.push(MeterRow {
            framework: "pf".into(),
            delta,
            peak_bytes: out.meter.peak_bytes(),
            model_params: params,
        });

        let mut m = fresh_model(5, 3);
        let mut cfg = TrainerConfig::new(Framework::Spf, 1);
        cfg.delta = delta;
        cfg.n_init = 1;
        cfg.n_epoch = 1;
        let out = train_spf(&mut m, &data, &cfg, None).unwrap();
        rows.push(MeterRow {
            framework: "spf".into(),
            delta,
            peak_bytes: out.meter.peak_bytes(),
            model_params: params,
        });
    }

    let report = retained_memory_report(&rows).unwrap();
    assert!(report.one_step_smallest, "{:#?}", report.rows);
    assert!(report.spf_constant_in_delta, "{:#?}", report.rows);
    assert!(report.atf_increasing_in_delta, "{:#?}", report.rows);
    assert!(report.pf_below_atf, "{:#?}", report.rows);
    assert!(report.spf_at_most_pf, "{:#?}", report.rows);
}

#[test]
fn pf_retained_bytes_do_not_depend_on_the_drawn_delta() {
    let data = vec![synthetic_series(40, 3, 9)];
    let mut m = fresh_model(6, 3);
    let mut cfg = TrainerConfig::new(Framework::Pf, 123);
    cfg.delta_max = 3;
    cfg.n_epoch = 2;
    let out = train_pf(&mut m, &data, &cfg).unwrap();
    // Every epoch saw draws of different δ; the per-epoch peak must still be
    // one step's activations plus the rolling window, a constant.
    let peaks = out.meter.epoch_peaks();
    assert!(peaks.windows(2).all(|w| w[0] == w[1]), "peaks {peaks:?}");
}

#[test]
fn progressive_depth_schedule_rebuilds_with_each_stage() {
    let data = vec![synthetic_series(60, 3, 13)];
    let mut model = fresh_model(15, 3);
    let mut cfg = TrainerConfig::new(Framework::Spf, 29);
    cfg.progressive_delta = vec![1, 2, 3];
    cfg.n_init = 1;
    cfg.n_epoch = 6;
    cfg.n_ui = 2;
    cfg.record_rebuilds = true;
    let out = train_spf(&mut model, &data, &cfg, None).unwrap();
    // Stage boundaries fall at epochs 3 and 5 (two epochs per stage); the
    // depth of the active supplementary dataset follows the schedule.
    let depths: Vec<(usize, usize)> =
        out.rebuild_snapshots.iter().map(|s| (s.epoch, s.supplementary.delta)).collect();
    assert_eq!(depths.first().unwrap(), &(0, 1));
    assert!(depths.iter().any(|&(_, d)| d == 2));
    assert!(depths.iter().any(|&(_, d)| d == 3));
}
