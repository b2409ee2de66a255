use asd_core::density::{render_density, DensityMap, KernelSpec};
use asd_core::harness::{synth_dataset, Regime, SynthConfig};
use asd_core::model::{AsdConfig, AsdModel};
use asd_core::tensor::Tensor;
use asd_core::train::{count_metrics, evaluate, train, Sample, TrainConfig};
use asd_core::AsdError;
use proptest::prelude::*;

fn minimal() -> AsdConfig {
    AsdConfig {
        backbone_channels: vec![4],
        backbone_pools: 0,
        dense_layers: 1,
        sparse_layers: 1,
        pathway_channels: 4,
        adaption_hidden: 4,
        ..AsdConfig::default()
    }
}

fn single_image(seed: u64, size: usize) -> Vec<Sample> {
    let cfg = SynthConfig {
        num_images: 1,
        width: size,
        height: size,
        seed,
        regimes: vec![Regime {
            count_range: (3, 8),
            blob_sigma: 1.5,
            fraction: 1.0,
        }],
        ..SynthConfig::default()
    };
    let item = synth_dataset(&cfg).unwrap().remove(0);
    vec![Sample {
        image: item.image,
        target: render_density(&item.annotations, &KernelSpec::default()).unwrap(),
    }]
}

#[test]
fn vanishing_learning_rate_is_a_no_op() {
    let data = single_image(1, 16);
    let mut model = AsdModel::build(minimal(), 1).unwrap();
    let before = model.params().to_vec();
    let cfg = TrainConfig {
        lr: 1e-30,
        epochs: 3,
        ..TrainConfig::default()
    };
    train(&mut model, &data, &cfg).unwrap();
    for (a, b) in model.params().iter().zip(&before) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

#[test]
fn single_image_overfits() {
    // lr 0.05 diverges here: the loss sums over pixels, so its curvature grows
    // with image area
    let data = single_image(42, 16);
    let mut model = AsdModel::build(minimal(), 42).unwrap();
    let cfg = TrainConfig {
        lr: 0.01,
        momentum: 0.9,
        epochs: 500,
        seed: 42,
        ..TrainConfig::default()
    };
    let log = train(&mut model, &data, &cfg).unwrap();
    let first = log.epochs[0].loss;
    let last = log.last().unwrap().loss;
    assert_eq!(log.epochs.len(), 500);
    assert!(last < 0.01 * first, "{last} vs {first}");
}

#[test]
fn same_seed_same_log() {
    let data = single_image(3, 16);
    let run = || {
        let mut model = AsdModel::build(minimal(), 3).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            seed: 3,
            ..TrainConfig::default()
        };
        (
            train(&mut model, &data, &cfg).unwrap(),
            model.params().to_vec(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn loss_is_monotone_on_one_image() {
    // the continuous gate avoids the jumps a bin change causes
    let cfg = AsdConfig {
        variant: "continuous".into(),
        ..minimal()
    };
    let mut monotone = 0;
    for seed in 0..20 {
        let data = single_image(42 + seed, 16);
        let mut model = AsdModel::build(cfg.clone(), 42 + seed).unwrap();
        let tc = TrainConfig {
            lr: 3e-4,
            momentum: 0.0,
            epochs: 100,
            seed,
            ..TrainConfig::default()
        };
        let log = train(&mut model, &data, &tc).unwrap();
        let losses: Vec<f64> = log.epochs.iter().map(|e| e.loss).collect();
        if losses[5..].windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 19, "{monotone}/20 runs monotone");
}

#[test]
fn shape_mismatch_fails_before_any_update() {
    let mut data = single_image(4, 16);
    data.push(Sample {
        image: data[0].image.clone(),
        target: DensityMap::zeros(8, 8).unwrap(),
    });
    let mut model = AsdModel::build(minimal(), 4).unwrap();
    let before = model.params().to_vec();
    let err = train(&mut model, &data, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, AsdError::Dimension(_)));
    assert_eq!(model.params(), before.as_slice());
}

#[test]
fn divergence_is_reported() {
    let data = single_image(5, 16);
    let mut model = AsdModel::build(minimal(), 5).unwrap();
    let cfg = TrainConfig {
        lr: 10.0,
        epochs: 50,
        ..TrainConfig::default()
    };
    assert!(matches!(
        train(&mut model, &data, &cfg),
        Err(AsdError::Numerical(_))
    ));
}

#[test]
fn invalid_configs() {
    let data = single_image(6, 16);
    let mut model = AsdModel::build(minimal(), 6).unwrap();
    for cfg in [
        TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            variant: Some("median".into()),
            ..TrainConfig::default()
        },
    ] {
        assert!(matches!(
            train(&mut model, &data, &cfg),
            Err(AsdError::Config(_))
        ));
    }
    assert!(matches!(
        train(&mut model, &[], &TrainConfig::default()),
        Err(AsdError::Argument(_))
    ));
}

#[test]
fn log_exports() {
    let data = single_image(7, 16);
    let mut model = AsdModel::build(minimal(), 7).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let log = train(&mut model, &data, &cfg).unwrap();
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("epoch,loss,mae,mse\n1,"));
    assert_eq!(text.lines().count(), 3);
    let json: serde_json::Value = serde_json::from_str(&log.to_json().unwrap()).unwrap();
    assert_eq!(json["epochs"].as_array().unwrap().len(), 2);
    assert_eq!(json["epochs"][0]["bins"].as_array().unwrap().len(), 1);
}

#[test]
fn metric_hand_example() {
    let m = count_metrics(&[10.0, 20.0], &[12.0, 16.0]).unwrap();
    assert_eq!(m.mae, 3.0);
    assert!((m.mse - 10f64.sqrt()).abs() < 1e-12);
}

#[test]
fn evaluate_is_order_invariant() {
    let mut data = single_image(8, 16);
    data.extend(single_image(9, 16));
    data.extend(single_image(10, 16));
    let model = AsdModel::build(minimal(), 8).unwrap();
    let a = evaluate(&model, &data).unwrap();
    data.reverse();
    let b = evaluate(&model, &data).unwrap();
    assert!((a.mae - b.mae).abs() < 1e-12 && (a.mse - b.mse).abs() < 1e-12);
    assert!(a.mse >= a.mae);
}

#[test]
fn perfect_prediction_scores_zero() {
    let mut model = AsdModel::build(minimal(), 9).unwrap();
    for (name, value) in [
        ("dense.head.weight", 0.0),
        ("sparse.head.weight", 0.0),
        ("dense.head.bias", 0.1),
        ("sparse.head.bias", 0.1),
    ] {
        model
            .param_by_name_mut(name)
            .unwrap()
            .data_mut()
            .fill(value);
    }
    let image = Tensor::full(vec![1, 8, 8], 0.2).unwrap();
    let target = DensityMap::new(8, 8, model.predict(&image).unwrap().fused.into_data()).unwrap();
    let m = evaluate(&model, &[Sample { image, target }]).unwrap();
    assert_eq!((m.mae, m.mse), (0.0, 0.0));
}

proptest! {
    #[test]
    fn rmse_dominates_mae(pairs in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 1..30)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = count_metrics(&p, &t).unwrap();
        prop_assert!(m.mse >= m.mae - 1e-12);
    }
}
