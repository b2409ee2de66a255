use asd_core::density::{
    knn_mean_distance, read_annotations, read_dmap, render_density, write_dmap, AnnotationSet,
    DensityMap, KernelSpec, Point, SigmaRegistry,
};
use asd_core::AsdError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All-pairs distances, sorted, mean of the first `k` (or of all when fewer).
fn knn_oracle(points: &[Point], k: usize) -> Vec<f64> {
    (0..points.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| {
                    ((points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2))
                        .sqrt()
                })
                .collect();
            d.sort_by(f64::total_cmp);
            let m = k.min(d.len());
            d[..m].iter().sum::<f64>() / m as f64
        })
        .collect()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, w: f64, h: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point(rng.gen_range(0.0..w), rng.gen_range(0.0..h)))
        .collect()
}

#[test]
fn knn_three_collinear_points() {
    let pts = [Point(0.0, 0.0), Point(10.0, 0.0), Point(20.0, 0.0)];
    assert_eq!(knn_mean_distance(&pts, 2).unwrap(), vec![15.0, 10.0, 15.0]);
}

#[test]
fn knn_matches_all_pairs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let n = rng.gen_range(2..=120);
        let k = rng.gen_range(1..=6);
        let pts = random_points(&mut rng, n, 100.0, 80.0);
        let got = knn_mean_distance(&pts, k).unwrap();
        for (a, b) in got.iter().zip(knn_oracle(&pts, k)) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
        }
    }
}

#[test]
fn knn_needs_two_points() {
    assert!(matches!(
        knn_mean_distance(&[Point(1.0, 1.0)], 3),
        Err(AsdError::Degenerate(_))
    ));
    assert!(matches!(
        knn_mean_distance(&[], 1),
        Err(AsdError::Degenerate(_))
    ));
}

#[test]
fn sigma_rules() {
    let reg = SigmaRegistry::builtin();
    let pts = [Point(0.0, 0.0), Point(10.0, 0.0), Point(20.0, 0.0)];
    let spec = KernelSpec::adaptive(0.3, 2);
    let s = reg
        .get("geometry_adaptive")
        .unwrap()
        .sigmas(&pts, &spec)
        .unwrap();
    for (a, b) in s.iter().zip([4.5, 3.0, 4.5]) {
        assert!((a - b).abs() < 1e-12);
    }
    let pair = [Point(5.0, 5.0), Point(5.0, 5.0)];
    let s = reg
        .get("geometry_adaptive")
        .unwrap()
        .sigmas(&pair, &KernelSpec::adaptive(0.3, 1))
        .unwrap();
    assert_eq!(s, vec![1.0, 1.0]);
    let s = reg
        .get("fixed")
        .unwrap()
        .sigmas(&pts, &KernelSpec::fixed(15.0))
        .unwrap();
    assert_eq!(s, vec![15.0; 3]);
}

#[test]
fn single_point_has_unit_mass() {
    let ann = AnnotationSet::new(64, 64, vec![Point(32.0, 32.0)]).unwrap();
    let map = render_density(&ann, &KernelSpec::fixed(3.0)).unwrap();
    assert!((map.count() - 1.0).abs() < 1e-6);
    let corner = AnnotationSet::new(64, 64, vec![Point(0.0, 0.0)]).unwrap();
    let map = render_density(&corner, &KernelSpec::fixed(15.0)).unwrap();
    assert!((map.count() - 1.0).abs() < 1e-6);
}

#[test]
fn unnormalized_corner_kernel_loses_mass() {
    let corner = AnnotationSet::new(64, 64, vec![Point(0.0, 0.0)]).unwrap();
    let spec = KernelSpec {
        normalize_mass: false,
        ..KernelSpec::fixed(15.0)
    };
    let c = render_density(&corner, &spec).unwrap().count();
    assert!(c < 0.3, "{c}");
}

#[test]
fn fifty_interior_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pts: Vec<Point> = (0..50)
        .map(|_| Point(rng.gen_range(20.0..108.0), rng.gen_range(20.0..108.0)))
        .collect();
    let ann = AnnotationSet::new(128, 128, pts).unwrap();
    let map = render_density(&ann, &KernelSpec::default()).unwrap();
    assert!((map.count() - 50.0).abs() <= 5e-5);
    assert!(map.values().iter().all(|&v| v >= 0.0));
}

#[test]
fn empty_annotation_gives_zero_map() {
    let ann = AnnotationSet::new(5, 7, vec![]).unwrap();
    let map = render_density(&ann, &KernelSpec::default()).unwrap();
    assert_eq!((map.height(), map.width()), (7, 5));
    assert_eq!(map.count(), 0.0);
}

#[test]
fn integer_shift_shifts_the_map() {
    let pts = vec![Point(20.3, 22.7), Point(25.1, 20.2), Point(23.9, 26.4)];
    let shifted: Vec<Point> = pts.iter().map(|p| Point(p.0 + 7.0, p.1 + 4.0)).collect();
    let spec = KernelSpec::default();
    let a = render_density(&AnnotationSet::new(64, 64, pts).unwrap(), &spec).unwrap();
    let b = render_density(&AnnotationSet::new(64, 64, shifted).unwrap(), &spec).unwrap();
    for y in 0..60 {
        for x in 0..57 {
            assert!((a.get(y, x) - b.get(y + 4, x + 7)).abs() < 1e-6);
        }
    }
}

#[test]
fn resample_hand_cases() {
    let ones = DensityMap::new(4, 4, vec![1.0; 16]).unwrap();
    let r = ones.sum_pool_resample(2).unwrap();
    assert_eq!((r.height(), r.width()), (2, 2));
    assert_eq!(r.values(), &[4.0; 4]);
    assert_eq!(ones.sum_pool_resample(1).unwrap(), ones);
    assert!(matches!(
        ones.sum_pool_resample(3),
        Err(AsdError::Dimension(_))
    ));
}

#[test]
fn dmap_layout() {
    let map = DensityMap::new(2, 3, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5]).unwrap();
    let mut bytes = Vec::new();
    write_dmap(&mut bytes, &map).unwrap();
    assert_eq!(&bytes[..4], b"DMAP");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 16 + 6 * 4);
    assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 0.5);
    assert_eq!(read_dmap(&mut bytes.as_slice()).unwrap(), map);
}

#[test]
fn annotation_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    std::fs::write(
        &path,
        r#"{"width": 10, "height": 8, "points": [[1.5, 2.0], [9.9, 7.9]]}"#,
    )
    .unwrap();
    let ann = read_annotations(&path).unwrap();
    assert_eq!(ann.points, vec![Point(1.5, 2.0), Point(9.9, 7.9)]);
    std::fs::write(
        &path,
        r#"{"width": 10, "height": 8, "points": [[10.0, 2.0]]}"#,
    )
    .unwrap();
    assert!(matches!(
        read_annotations(&path),
        Err(AsdError::Dimension(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn render_conserves_count(seed in 0u64..10_000, n in 0usize..40, fixed in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, 48.0, 40.0);
        let ann = AnnotationSet::new(48, 40, pts).unwrap();
        let spec = if fixed { KernelSpec::fixed(4.0) } else { KernelSpec::default() };
        let map = render_density(&ann, &spec).unwrap();
        prop_assert!((map.count() - n as f64).abs() <= (n as f64) * 1e-6 + 1e-12);
        prop_assert!(map.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn resample_conserves_count(values in prop::collection::vec(0.0f64..10.0, 36), factor in prop::sample::select(vec![1usize, 2, 3, 6])) {
        let map = DensityMap::new(6, 6, values).unwrap();
        let before = map.count();
        let after = map.sum_pool_resample(factor).unwrap().count();
        prop_assert!((before - after).abs() <= 1e-9 * before.max(1e-300));
    }

    #[test]
    fn knn_scales_linearly(seed in 0u64..10_000, scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, 12, 50.0, 50.0);
        let scaled: Vec<Point> = pts.iter().map(|p| Point(p.0 * scale, p.1 * scale)).collect();
        for (a, b) in knn_mean_distance(&pts, 3).unwrap().iter().zip(knn_mean_distance(&scaled, 3).unwrap()) {
            prop_assert!((a * scale - b).abs() <= 1e-9 * b.abs().max(1e-12));
        }
    }
}
