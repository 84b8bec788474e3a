use std::collections::BTreeSet;

use adaptive_restore::classify::*;
use adaptive_restore::features::FeatureVector;
use adaptive_restore::synth::{DegradationKind, K};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(rng: &mut ChaCha8Rng) -> [f64; INPUTS] {
    std::array::from_fn(|_| rng.random_range(0.0..1.0))
}

fn random_target(rng: &mut ChaCha8Rng) -> [f64; K] {
    std::array::from_fn(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 })
}

// ||a - n|| / (||a|| + ||n||) over the full parameter vector
fn gradient_check(mode: OutputMode, draws: u64) {
    let eps = 1e-5;
    for draw in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let mut model = ResidualHead::init(8, draw);
        // nonzero biases so every path is exercised
        for p in model.params_mut().iter_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let xs: Vec<_> = (0..3).map(|_| random_input(&mut rng)).collect();
        let ys: Vec<_> = (0..3).map(|_| random_target(&mut rng)).collect();
        let batch: Vec<_> = xs.iter().zip(&ys).collect();
        let mut analytic = vec![0.0; model.params().len()];
        model.loss_and_grad(&batch, mode, &mut analytic);

        let mut diff = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        for i in 0..analytic.len() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + eps;
            let up = model.loss(&batch, mode);
            model.params_mut()[i] = orig - eps;
            let down = model.loss(&batch, mode);
            model.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            diff += (analytic[i] - numeric).powi(2);
            norm_a += analytic[i].powi(2);
            norm_n += numeric.powi(2);
        }
        let rel = diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt());
        assert!(rel < 1e-4, "draw {draw}: relative error {rel}");
    }
}

#[test]
fn backprop_matches_finite_differences_sigmoid() {
    gradient_check(OutputMode::Sigmoid, 100);
}

#[test]
fn backprop_matches_finite_differences_softmax() {
    gradient_check(OutputMode::Softmax, 100);
}

#[test]
fn zero_residual_equals_two_layer_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = ResidualHead::init(12, 4);
    model.zero_residual();
    let h = model.hidden();
    for _ in 0..50 {
        let x = random_input(&mut rng);
        let hidden: Vec<f64> = (0..h)
            .map(|j| model.b_in()[j] + (0..INPUTS).map(|i| model.w_in()[j * INPUTS + i] * x[i]).sum::<f64>())
            .collect();
        let z = model.logits(&x);
        for k in 0..K {
            let expect = model.b_out()[k] + (0..h).map(|j| model.w_out()[k * h + j] * hidden[j]).sum::<f64>();
            assert!((z.0[k] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn all_zero_weights_give_half_probabilities() {
    let model = ResidualHead::zeros(5);
    let (z, p) = model.forward(&FeatureVector([0.3; INPUTS]), OutputMode::Sigmoid);
    assert_eq!(z.0, [0.0; K]);
    assert!(p.values().iter().all(|&v| v == 0.5));
}

fn toy_examples() -> Vec<Example> {
    // two well-separated clusters on slot 0
    (0..40)
        .map(|i| {
            let (kind, base) = if i % 2 == 0 { (DegradationKind::Denoising, 0.1) } else { (DegradationKind::Deraining, 0.9) };
            let mut f = [0.5; INPUTS];
            f[0] = base + 0.002 * i as f64;
            Example { features: f, labels: BTreeSet::from([kind]) }
        })
        .collect()
}

fn toy_hyper() -> Hyperparams {
    Hyperparams { learning_rate: 0.01, seed: 5, ..Default::default() }
}

#[test]
fn separable_toy_reaches_full_validation_accuracy() {
    let (_, hist) = train_on_examples(&toy_examples(), &toy_hyper(), OutputMode::Sigmoid).unwrap();
    assert_eq!(hist.epochs.len(), 35);
    assert_eq!(hist.last().unwrap().val_accuracy, 1.0);
}

#[test]
fn training_loss_is_non_increasing_after_epoch_three() {
    let (_, hist) = train_on_examples(&toy_examples(), &toy_hyper(), OutputMode::Sigmoid).unwrap();
    for pair in hist.epochs[2..].windows(2) {
        assert!(pair[1].train_loss <= pair[0].train_loss, "{pair:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let bits = |m: &ResidualHead| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    for kind in [OptimizerKind::Adam, OptimizerKind::SgdMomentum] {
        let h = Hyperparams { optimizer: kind, ..toy_hyper() };
        let (a, ha) = train_on_examples(&toy_examples(), &h, OutputMode::Softmax).unwrap();
        let (b, hb) = train_on_examples(&toy_examples(), &h, OutputMode::Softmax).unwrap();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(ha, hb);
    }
}

#[test]
fn empty_training_set_is_rejected() {
    assert!(matches!(
        train_on_examples(&[], &Hyperparams::default(), OutputMode::Sigmoid),
        Err(ClassifyError::EmptyCorpus)
    ));
}

#[test]
fn history_csv_has_fixed_header() {
    let (_, hist) = train_on_examples(&toy_examples(), &Hyperparams { epochs: 2, ..toy_hyper() }, OutputMode::Sigmoid).unwrap();
    let csv = hist.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_loss,val_accuracy"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn lr_sweep_reports_every_rate() {
    let h = Hyperparams { epochs: 3, ..toy_hyper() };
    let report = lr_sweep(&toy_examples(), &SWEEP_LEARNING_RATES, &h, OutputMode::Sigmoid).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(SWEEP_LEARNING_RATES.contains(&report.best));
}

#[test]
fn lr_sweep_single_rate_and_tie_break() {
    let h = toy_hyper();
    let single = lr_sweep(&toy_examples(), &[0.005], &h, OutputMode::Sigmoid).unwrap();
    assert_eq!(single.best, 0.005);
    // both rates separate the toy set perfectly
    let tie = lr_sweep(&toy_examples(), &[0.02, 0.01], &h, OutputMode::Sigmoid).unwrap();
    assert!(tie.rows.iter().all(|r| r.val_accuracy == 1.0));
    assert_eq!(tie.best, 0.01);
}

#[test]
fn empty_rate_set_is_rejected() {
    assert!(matches!(
        lr_sweep(&toy_examples(), &[], &toy_hyper(), OutputMode::Sigmoid),
        Err(ClassifyError::EmptyRateSet)
    ));
}

#[test]
fn momentum_sweep_uses_sgd() {
    let h = Hyperparams { epochs: 2, ..toy_hyper() };
    let report = momentum_sweep(&toy_examples(), &SWEEP_MOMENTA, &h, OutputMode::Sigmoid).unwrap();
    assert_eq!(report.parameter, "momentum");
    assert_eq!(report.rows.len(), 3);
}

#[test]
fn model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.adrm");
    let model = ResidualHead::init(32, 77);
    save_model(&model, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), model);
    assert!(matches!(load_model(dir.path().join("absent")), Err(ClassifyError::Io(..))));
}

proptest! {
    #[test]
    fn softmax_preserves_argmax(z in prop::array::uniform7(-50.0f64..50.0)) {
        let p = softmax(&z);
        let arg = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        prop_assert_eq!(arg(&p), arg(&z));
    }

    #[test]
    fn softmax_is_shift_invariant(z in prop::array::uniform7(-30.0f64..30.0), c in -100.0f64..100.0) {
        let a = softmax(&z);
        let b = softmax(&z.map(|v| v + c));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_stays_open_interval(z in -500.0f64..=500.0) {
        let s = sigmoid(z);
        prop_assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn softmax_forward_is_normalized(x in prop::array::uniform16(0.0f64..1.0), seed in 0u64..1000) {
        let model = ResidualHead::init(16, seed);
        let (_, p) = model.forward(&FeatureVector(x), OutputMode::Softmax);
        prop_assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
