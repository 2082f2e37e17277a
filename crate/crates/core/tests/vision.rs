use fusionloc::map::ReferencePoint;
use fusionloc::vision::{
    distance_ratio, distance_ratio_of_pairs, extract_keypoints, image_similarity, match_keypoints, rank_images,
    ExtractorConfig, GrayImage, Keypoint, KeypointSet, MatchConfig, MatchPair,
};
use fusionloc::{Error, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Descriptors drawn on the unit sphere; in 16 dimensions they sit about
/// sqrt(2) apart, far outside the ratio test's ambiguity zone.
fn random_set(rng: &mut ChaCha8Rng, n: usize) -> KeypointSet {
    KeypointSet::new(
        (0..n)
            .map(|_| Keypoint {
                px: rng.gen_range(0.0..800.0),
                py: rng.gen_range(0.0..600.0),
                sigma: 2.0,
                descriptor: unit((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            })
            .collect(),
    )
}

fn transformed(set: &KeypointSet, f: impl Fn(f64, f64) -> (f64, f64)) -> KeypointSet {
    KeypointSet::new(
        set.keypoints
            .iter()
            .map(|k| {
                let (px, py) = f(k.px, k.py);
                Keypoint { px, py, ..k.clone() }
            })
            .collect(),
    )
}

fn naive_dr(pairs: &[MatchPair], n: usize, eps: f64) -> Option<f64> {
    let used = &pairs[..pairs.len().min(n)];
    let mut terms = Vec::new();
    for a in 0..used.len() {
        for b in 0..used.len() {
            if a == b {
                continue;
            }
            let (qa, qb) = (&used[a].query_point, &used[b].query_point);
            let (ca, cb) = (&used[a].candidate_point, &used[b].candidate_point);
            let den = ((qa.px - qb.px).powi(2) + (qa.py - qb.py).powi(2)).sqrt();
            if den < eps {
                continue;
            }
            terms.push(((ca.px - cb.px).powi(2) + (ca.py - cb.py).powi(2)).sqrt() / den);
        }
    }
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / terms.len() as f64)
}

fn random_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<MatchPair> {
    let mut dists: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    dists.sort_by(f64::total_cmp);
    dists
        .into_iter()
        .map(|d| {
            let k = |rng: &mut ChaCha8Rng| Keypoint {
                px: rng.gen_range(0.0..800.0),
                py: rng.gen_range(0.0..600.0),
                sigma: 1.0,
                descriptor: vec![0.0; 16],
            };
            MatchPair { query_point: k(rng), candidate_point: k(rng), descriptor_distance: d }
        })
        .collect()
}

#[test]
fn distance_ratio_matches_naive_double_loop() {
    let cfg = MatchConfig { min_matches: 2, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let n = rng.gen_range(2..=10);
        let pairs = random_pairs(&mut rng, n);
        let got = distance_ratio_of_pairs(&pairs, &cfg).unwrap();
        let want = naive_dr(&pairs, cfg.n_pairs, cfg.epsilon).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn identity_and_uniform_scaling() {
    let cfg = MatchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.gen_range(4..40);
        let a = random_set(&mut rng, n);
        assert!((distance_ratio(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-9);
        for c in [0.25, 0.5, 2.0, 4.0] {
            let (ox, oy) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let b = transformed(&a, |x, y| (ox + c * (x - ox), oy + c * (y - oy)));
            let dr = distance_ratio(&a, &b, &cfg).unwrap();
            assert!((dr - c).abs() < 1e-9, "c={c} dr={dr}");
        }
    }
}

proptest! {
    #[test]
    fn rigid_motion_leaves_dr_unchanged(
        seed in any::<u64>(),
        angle in 0.0f64..std::f64::consts::TAU,
        tx in -500.0f64..500.0,
        ty in -500.0f64..500.0,
        c in 0.2f64..5.0,
    ) {
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_set(&mut rng, 12);
        let b = transformed(&a, |x, y| (c * x, c * y));
        let (s, co) = angle.sin_cos();
        let moved = transformed(&b, |x, y| (co * x - s * y + tx, s * x + co * y + ty));
        let d0 = distance_ratio(&a, &b, &cfg).unwrap();
        let d1 = distance_ratio(&a, &moved, &cfg).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-9 * d0.max(1.0));
    }

    #[test]
    fn matches_are_one_to_one_and_sorted(seed in any::<u64>(), n in 1usize..30, m in 1usize..30) {
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_set(&mut rng, n);
        let b = random_set(&mut rng, m);
        let pairs = match_keypoints(&a, &b, &cfg).unwrap();
        prop_assert!(pairs.windows(2).all(|w| w[0].descriptor_distance <= w[1].descriptor_distance));
        let mut used: Vec<(u64, u64)> = pairs.iter().map(|p| (p.candidate_point.px.to_bits(), p.candidate_point.py.to_bits())).collect();
        used.sort();
        used.dedup();
        prop_assert_eq!(used.len(), pairs.len());
        prop_assert_eq!(image_similarity(&a, &a, &cfg), n);
    }
}

#[test]
fn planted_correspondences_among_distractors() {
    let cfg = MatchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let planted = random_set(&mut rng, 20);
    let query_distractors = random_set(&mut rng, 10);
    let candidate_distractors = random_set(&mut rng, 10);
    let noisy = |k: &Keypoint, rng: &mut ChaCha8Rng| Keypoint {
        px: k.px + 3.0,
        py: k.py - 2.0,
        sigma: k.sigma,
        descriptor: k.descriptor.iter().map(|v| v + rng.gen_range(-0.01..0.01)).collect(),
    };
    let mut query = planted.keypoints.clone();
    query.extend(query_distractors.keypoints.iter().cloned());
    let mut candidate: Vec<Keypoint> = planted.keypoints.iter().map(|k| noisy(k, &mut rng)).collect();
    candidate.extend(candidate_distractors.keypoints.iter().cloned());
    let query = KeypointSet::new(query);
    let candidate = KeypointSet::new(candidate);

    let pairs = match_keypoints(&query, &candidate, &cfg).unwrap();
    assert_eq!(pairs.len(), 20);
    // brute force: every accepted pair is a planted one
    for p in &pairs {
        let i = planted.keypoints.iter().position(|k| k.px == p.query_point.px).expect("query side is planted");
        assert!((p.candidate_point.px - (planted.keypoints[i].px + 3.0)).abs() < 1e-9);
    }
}

#[test]
fn half_overlapping_sets_share_the_overlap() {
    let cfg = MatchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shared = random_set(&mut rng, 15);
    let only_a = random_set(&mut rng, 15);
    let only_b = random_set(&mut rng, 15);
    let a = KeypointSet::new(shared.keypoints.iter().chain(&only_a.keypoints).cloned().collect());
    let b = KeypointSet::new(only_b.keypoints.iter().chain(&shared.keypoints).cloned().collect());
    assert_eq!(image_similarity(&a, &b, &cfg), 15);
}

#[test]
fn disjoint_supports_and_orthogonal_descriptors_do_not_match() {
    let cfg = MatchConfig::default();
    let basis = |i: usize| {
        let mut d = vec![0.0; 16];
        d[i] = 1.0;
        Keypoint { px: i as f64 * 10.0, py: 0.0, sigma: 1.0, descriptor: d }
    };
    let a = KeypointSet::new((0..8).map(basis).collect());
    let b = KeypointSet::new((8..16).map(basis).collect());
    assert_eq!(image_similarity(&a, &b, &cfg), 0);
    assert!(match_keypoints(&a, &b, &cfg).unwrap().is_empty());
}

#[test]
fn descriptor_length_mismatch_is_rejected() {
    let cfg = MatchConfig::default();
    let a = KeypointSet::new(vec![Keypoint { px: 0.0, py: 0.0, sigma: 1.0, descriptor: vec![1.0; 16] }]);
    let b = KeypointSet::new(vec![Keypoint { px: 0.0, py: 0.0, sigma: 1.0, descriptor: vec![1.0; 8] }]);
    assert!(matches!(match_keypoints(&a, &b, &cfg), Err(Error::InvalidArgument(_))));
    assert_eq!(image_similarity(&a, &b, &cfg), 0);
}

#[test]
fn rank_images_puts_identical_image_first() {
    let cfg = MatchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rps: Vec<ReferencePoint> = (0..4).map(|i| ReferencePoint::new(i, Vec3::new(i as f64, 0.0, 0.0))).collect();
    for rp in &mut rps {
        for _ in 0..3 {
            rp.images.push(random_set(&mut rng, 25));
            rp.viewpoint_headings.push(0.0);
        }
    }
    let query = rps[2].images[1].clone();
    let ranked = rank_images(&query, &rps, &cfg);
    assert_eq!((ranked[0].rp_id, ranked[0].image_index, ranked[0].similarity), (2, 1, 25));
    assert!((ranked[0].dr.unwrap() - 1.0).abs() < 1e-12);

    // descriptors confined to disjoint coordinate blocks are all equidistant
    let block = |offset: usize| {
        KeypointSet::new(
            (0..8)
                .map(|i| {
                    let mut d = vec![0.0; 16];
                    d[offset + i] = 1.0;
                    Keypoint { px: i as f64 * 7.0, py: 3.0, sigma: 1.0, descriptor: d }
                })
                .collect(),
        )
    };
    let mut stored = ReferencePoint::new(9, Vec3::ZERO);
    stored.images.push(block(0));
    stored.viewpoint_headings.push(0.0);
    assert!(rank_images(&block(8), [&stored], &cfg).iter().all(|r| r.similarity == 0));
}

fn blob_image() -> GrayImage {
    GrayImage::from_fn(32, 32, |x, y| {
        let (dx, dy) = (x as f64 - 16.0, y as f64 - 16.0);
        (-(dx * dx + dy * dy) / (2.0 * 2.0 * 2.0)).exp()
    })
}

#[test]
fn planted_blob_is_localized_for_every_order() {
    let cfg = ExtractorConfig::default();
    let img = blob_image();
    for order in 1..=4 {
        let set = extract_keypoints(&img, order, &cfg).unwrap();
        let best = set
            .keypoints
            .iter()
            .map(|k| (k.px - 16.0).hypot(k.py - 16.0))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1.0, "order {order}: nearest keypoint {best} px away");
    }
}

#[test]
fn blob_peak_agrees_with_dense_scan() {
    use fusionloc::vision::{scale_space, sigma_difference};
    let cfg = ExtractorConfig::default();
    let img = blob_image();
    let diff = sigma_difference(&scale_space(&img, &cfg), 1);
    // strongest interior response anywhere in the volume
    let mut peak = (0.0f64, 0usize, 0usize);
    for slice in &diff {
        for y in 1..31 {
            for x in 1..31 {
                let v = slice[y * 32 + x].abs();
                if v > peak.0 {
                    peak = (v, x, y);
                }
            }
        }
    }
    assert!((peak.1 as f64 - 16.0).abs() <= 1.0 && (peak.2 as f64 - 16.0).abs() <= 1.0);
    let set = extract_keypoints(&img, 1, &cfg).unwrap();
    assert!(set.keypoints.iter().any(|k| k.px == peak.1 as f64 && k.py == peak.2 as f64));
}

#[test]
fn constant_image_has_no_keypoints() {
    let img = GrayImage::from_fn(40, 30, |_, _| 0.5);
    for order in 1..=4 {
        assert!(extract_keypoints(&img, order, &ExtractorConfig::default()).unwrap().is_empty());
    }
}

#[test]
fn keypoints_grow_monotonically_with_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| (rng.gen_range(6.0..42.0), rng.gen_range(6.0..42.0), rng.gen_range(1.0..3.5), rng.gen_range(0.3..1.0)))
        .collect();
    let img = GrayImage::from_fn(48, 48, |x, y| {
        let v: f64 = blobs
            .iter()
            .map(|(bx, by, s, a)| a * (-((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)) / (2.0 * s * s)).exp())
            .sum();
        v.min(1.0)
    });
    let cfg = ExtractorConfig::default();
    let sets: Vec<KeypointSet> = (1..=4).map(|o| extract_keypoints(&img, o, &cfg).unwrap()).collect();
    for w in sets.windows(2) {
        assert!(w[1].len() >= w[0].len());
        assert_eq!(&w[1].keypoints[..w[0].len()], &w[0].keypoints[..]);
    }
}
