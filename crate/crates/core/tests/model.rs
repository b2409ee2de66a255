use asd_core::density::DensityMap;
use asd_core::harness::scenario_report;
use asd_core::model::{
    discretize, load_checkpoint, normalize_response, read_checkpoint, save_checkpoint, AsdConfig,
    AsdModel, FusionRegistry,
};
use asd_core::tensor::Tensor;
use asd_core::train::Sample;
use asd_core::AsdError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> AsdConfig {
    AsdConfig {
        backbone_channels: vec![4, 6],
        pathway_channels: 4,
        adaption_hidden: 4,
        ..AsdConfig::default()
    }
}

fn image(seed: u64, h: usize, w: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        vec![1, h, w],
        (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap()
}

fn set(model: &mut AsdModel, name: &str, value: f64) {
    let t = model.param_by_name_mut(name).unwrap();
    t.data_mut().iter_mut().for_each(|v| *v = value);
}

#[test]
fn minimal_parameter_count_by_enumeration() {
    let cfg = AsdConfig {
        backbone_channels: vec![4],
        backbone_pools: 0,
        dense_layers: 1,
        sparse_layers: 1,
        pathway_channels: 4,
        adaption_hidden: 4,
        ..AsdConfig::default()
    };
    let m = AsdModel::build(cfg, 0).unwrap();
    // (weight extents, bias extent) per layer
    let layers: [(&[usize], usize); 8] = [
        (&[4, 1, 3, 3], 4),
        (&[4, 4, 2, 2], 4),
        (&[4, 4, 5, 5], 4),
        (&[1, 4, 1, 1], 1),
        (&[4, 4, 3, 3], 4),
        (&[1, 4, 1, 1], 1),
        (&[4, 4], 4),
        (&[1, 4], 1),
    ];
    let hand: usize = layers
        .iter()
        .map(|(w, b)| w.iter().product::<usize>() + b)
        .sum();
    assert_eq!(m.num_parameters(), hand);
    let twice = AsdModel::build(m.config().clone(), 99).unwrap();
    assert_eq!(twice.num_parameters(), hand);
}

#[test]
fn equal_pathways_make_every_variant_agree() {
    let mut model = AsdModel::build(small(), 4).unwrap();
    set(&mut model, "dense.head.weight", 0.0);
    set(&mut model, "sparse.head.weight", 0.0);
    set(&mut model, "dense.head.bias", 0.125);
    set(&mut model, "sparse.head.bias", 0.125);
    let img = image(1, 16, 16);
    for &variant in FusionRegistry::builtin().names() {
        let mut m = model.clone();
        m.set_fusion(variant, 10).unwrap();
        let p = m.predict(&img).unwrap();
        assert_eq!(p.dense_map, p.sparse_map);
        for v in p.fused.data() {
            assert!((v - 0.125).abs() < 1e-15, "{variant}: {v}");
        }
    }
}

#[test]
fn discretized_fusion_is_an_exact_convex_combination() {
    let model = AsdModel::build(small(), 5).unwrap();
    let img = image(2, 16, 24);
    let p = model.predict(&img).unwrap();
    assert_eq!(p.w_disc, discretize(p.w_star, 10).unwrap().w_disc);
    for ((f, d), s) in p
        .fused
        .data()
        .iter()
        .zip(p.dense_map.data())
        .zip(p.sparse_map.data())
    {
        assert_eq!(*f, p.w_disc * d + (1.0 - p.w_disc) * s);
    }
    let lin = p.w_disc * p.dense_map.sum() + (1.0 - p.w_disc) * p.sparse_map.sum();
    assert!((p.count() - lin).abs() <= 1e-6 * lin.abs().max(1e-12));
}

#[test]
fn continuous_and_fixed_half_fusions() {
    let img = image(3, 8, 8);
    let mut m = AsdModel::build(small(), 6).unwrap();
    m.set_fusion("continuous", 10).unwrap();
    let p = m.predict(&img).unwrap();
    for ((f, d), s) in p
        .fused
        .data()
        .iter()
        .zip(p.dense_map.data())
        .zip(p.sparse_map.data())
    {
        assert!((f - (p.w_star * d + (1.0 - p.w_star) * s)).abs() < 1e-15);
    }
    m.set_fusion("fixed_half", 10).unwrap();
    let p = m.predict(&img).unwrap();
    for ((f, d), s) in p
        .fused
        .data()
        .iter()
        .zip(p.dense_map.data())
        .zip(p.sparse_map.data())
    {
        assert!((f - 0.5 * (d + s)).abs() < 1e-15);
    }
}

#[test]
fn fixed_half_ignores_which_pathway_is_gated() {
    let img = image(4, 8, 8);
    let a = AsdModel::build(
        AsdConfig {
            variant: "fixed_half".into(),
            ..small()
        },
        7,
    )
    .unwrap();
    let b = AsdModel::build(
        AsdConfig {
            variant: "fixed_half".into(),
            dense_first: false,
            ..small()
        },
        7,
    )
    .unwrap();
    assert_eq!(
        a.predict(&img).unwrap().fused,
        b.predict(&img).unwrap().fused
    );
}

#[test]
fn two_bins_act_as_a_hard_switch() {
    let mut m = AsdModel::build(small(), 8).unwrap();
    m.set_fusion("discretized", 2).unwrap();
    for seed in 0..6 {
        let p = m.predict(&image(seed, 8, 8)).unwrap();
        assert!(p.bin_index < 2);
        assert_eq!(p.w_disc, [0.25, 0.75][p.bin_index]);
    }
}

#[test]
fn scenario_of_is_deterministic_and_bounded() {
    let m = AsdModel::build(small(), 9).unwrap();
    let img = image(5, 8, 8);
    assert_eq!(
        m.scenario_of(&img).unwrap(),
        m.scenario_of(&img.clone()).unwrap()
    );
    for bins in [1, 2, 10, 100, 1000] {
        let mut m = m.clone();
        m.set_fusion("discretized", bins).unwrap();
        assert!(m.scenario_of(&img).unwrap() < bins);
    }
}

#[test]
fn constant_gate_fills_one_bin() {
    let mut m = AsdModel::build(small(), 10).unwrap();
    set(&mut m, "adaption.fc2.weight", 0.0);
    set(&mut m, "adaption.fc2.bias", 0.4);
    let samples: Vec<Sample> = (0..5)
        .map(|s| Sample {
            image: image(s, 8, 8),
            target: DensityMap::zeros(4, 4).unwrap(),
        })
        .collect();
    let ids: Vec<String> = (0..5).map(|i| format!("i{i}")).collect();
    for bins in [10, 100] {
        let r = scenario_report(&m, &ids, &samples, bins).unwrap();
        let expected = (normalize_response(0.4) * bins as f64).floor() as usize;
        assert_eq!(r.occupied_bin_count, 1);
        assert!(r.images.iter().all(|e| e.bin_index == expected));
    }
}

#[test]
fn occupied_bins_respect_both_bounds() {
    let m = AsdModel::build(small(), 11).unwrap();
    let samples: Vec<Sample> = (0..12)
        .map(|s| Sample {
            image: image(100 + s, 8, 8),
            target: DensityMap::zeros(4, 4).unwrap(),
        })
        .collect();
    let ids: Vec<String> = (0..12).map(|i| format!("i{i}")).collect();
    for bins in [1, 2, 3, 10, 1000] {
        let r = scenario_report(&m, &ids, &samples, bins).unwrap();
        assert!(r.occupied_bin_count <= bins.min(12));
        assert!(r.occupied_bin_count <= bins.div_ceil(2));
        let listed: usize = r.members.values().map(Vec::len).sum();
        assert_eq!(listed, 12);
    }
}

#[test]
fn indivisible_image_is_a_dimension_error() {
    let m = AsdModel::build(small(), 0).unwrap();
    assert!(matches!(
        m.predict(&image(0, 9, 8)),
        Err(AsdError::Dimension(_))
    ));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.asdm");
    let m = AsdModel::build(small(), 12).unwrap();
    save_checkpoint(&path, &m).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"ASDM");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config(), m.config());
    assert_eq!(back.param_names(), m.param_names());
    for (a, b) in back.params().iter().zip(m.params()) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        read_checkpoint(&mut bad.as_slice()),
        Err(AsdError::Format(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shape_law(h in 1usize..5, w in 1usize..5, pools in 0usize..3, seed in 0u64..100) {
        let cfg = AsdConfig { backbone_channels: vec![3, 3], backbone_pools: pools, pathway_channels: 3, ..AsdConfig::default() };
        let s = 1 << pools;
        let m = AsdModel::build(cfg, seed).unwrap();
        let p = m.predict(&image(seed, h * s * 2, w * s)).unwrap();
        prop_assert_eq!(p.dense_map.shape(), p.sparse_map.shape());
        prop_assert_eq!(p.fused.shape(), &[1, h * 2, w][..]);
        prop_assert!(p.w_star > 0.0 && p.w_star < 0.5);
    }
}
