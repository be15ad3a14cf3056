mod common;

use common::rng;
use nie_core::model::{load_model, save_model, train, ModelMeta, TrainConfig};
use nie_core::Error;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn meta() -> ModelMeta {
    ModelMeta {
        h_radius: 2,
        graph_fingerprint: "test".into(),
    }
}

fn random_inputs(count: usize, seed: u64) -> Vec<[f64; 7]> {
    let mut r = rng(seed);
    (0..count).map(|_| std::array::from_fn(|_| r.random_range(0.0..1.0))).collect()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        hidden: vec![32, 32],
        batch_size: 64,
        ..TrainConfig::default()
    }
}

#[test]
fn constant_labels_are_learned() {
    let x = random_inputs(500, 1);
    let y = vec![3.5; 500];
    let (model, _) = train(&x, &y, &small_config(), meta(), 1).unwrap();
    for row in random_inputs(50, 2) {
        assert!((model.predict(&row) - 3.5).abs() < 1e-3);
    }
}

#[test]
fn linear_teacher_generalizes() {
    let x = random_inputs(2500, 3);
    let mut noise = rng(4);
    let normal = Normal::new(0.0, 0.01).unwrap();
    let y: Vec<f64> = x.iter().map(|r| 2.0 * r[6] + normal.sample(&mut noise)).collect();
    let (model, report) = train(&x[..2000], &y[..2000], &TrainConfig::default(), meta(), 5).unwrap();
    let held_out = model.mse(&x[2000..], &y[2000..]);
    assert!(held_out < 0.01, "held-out mse {held_out}, report {report:?}");
}

#[test]
fn training_is_reproducible_to_the_byte() {
    let x = random_inputs(400, 6);
    let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[3]).collect();
    let cfg = TrainConfig {
        max_epochs: 5,
        ..small_config()
    };
    let bytes = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let (model, _) = pool.install(|| train(&x, &y, &cfg, meta(), 9).unwrap());
        let mut out = Vec::new();
        save_model(&model, &mut out).unwrap();
        out
    };
    let a = bytes(1);
    assert_eq!(a, bytes(1));
    assert_eq!(a, bytes(4));
    let model = load_model(a.as_slice()).unwrap();
    let mut again = Vec::new();
    save_model(&model, &mut again).unwrap();
    assert_eq!(a, again);
}

#[test]
fn full_batch_descent_with_small_steps_never_increases_loss() {
    let x = random_inputs(200, 7);
    let y: Vec<f64> = x.iter().map(|r| r[2] - r[4]).collect();
    let cfg = TrainConfig {
        batch_size: 1000,
        learning_rate: 1e-3,
        max_epochs: 30,
        patience: 100,
        hidden: vec![16, 16],
        ..TrainConfig::default()
    };
    let (_, report) = train(&x, &y, &cfg, meta(), 2).unwrap();
    assert_eq!(report.epochs_run, 30);
    assert!(report.train_mse.windows(2).all(|w| w[1] <= w[0]), "{:?}", report.train_mse);
}

#[test]
fn early_stopping_respects_patience() {
    // pure-noise labels: validation error stops improving quickly
    let x = random_inputs(300, 8);
    let mut r = rng(9);
    let y: Vec<f64> = (0..300).map(|_| r.random_range(0.0..1.0)).collect();
    let cfg = TrainConfig {
        patience: 3,
        max_epochs: 200,
        ..small_config()
    };
    let (model, report) = train(&x, &y, &cfg, meta(), 4).unwrap();
    assert!(report.stopped_early);
    assert_eq!(report.epochs_run, report.best_epoch + cfg.patience);
    let best = report.validation_mse[report.best_epoch - 1];
    assert!(report.validation_mse.iter().all(|&v| v >= best));
    assert!(model.validate().is_ok());
}

#[test]
fn rejects_degenerate_inputs() {
    let x = random_inputs(10, 1);
    let y = vec![1.0; 9];
    assert!(matches!(train(&x, &y, &small_config(), meta(), 0), Err(Error::InvalidInput(_))));
    let y = vec![f64::NAN; 10];
    assert!(matches!(train(&x, &y, &small_config(), meta(), 0), Err(Error::InvalidInput(_))));
}

#[test]
fn rescaling_a_column_and_its_std_leaves_output_unchanged() {
    let x = random_inputs(300, 10);
    let y: Vec<f64> = x.iter().map(|r| r.iter().sum()).collect();
    let cfg = TrainConfig {
        max_epochs: 3,
        ..small_config()
    };
    let (model, _) = train(&x, &y, &cfg, meta(), 1).unwrap();
    let factor = 8.0;
    for j in 0..7 {
        let mut scaled = model.clone();
        scaled.feature_means[j] *= factor;
        scaled.feature_stds[j] *= factor;
        for row in &x[..20] {
            let mut r = *row;
            r[j] *= factor;
            assert!((scaled.predict(&r) - model.predict(row)).abs() < 1e-12);
        }
    }
}
