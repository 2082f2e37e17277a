use fusionloc::pose::{build_frustum, eye_pose, from_local, to_local, visible_objects};
use fusionloc::{make_grid_map, Error, EyePose, PoseConfig, ReferencePoint, Vec3, VirtualObject};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
}

/// Visibility written directly from the heading: half-space tests against
/// the four side planes of the pyramid plus the range sphere.
fn in_pyramid(rp: Vec3, heading: f64, cfg: &PoseConfig, p: Vec3) -> bool {
    let t = heading.to_radians();
    let eye = Vec3::new(rp.x, rp.y + cfg.body_height, rp.z);
    let d = p - eye;
    let forward = d.x * t.sin() + d.z * t.cos();
    let right = d.x * t.cos() - d.z * t.sin();
    let tan_h = (cfg.horizontal_fov.to_radians() / 2.0).tan();
    let tan_v = tan_h / cfg.aspect_ratio;
    forward > 0.0
        && right.abs() <= forward * tan_h
        && d.y.abs() <= forward * tan_v
        && (d.x * d.x + d.y * d.y + d.z * d.z).sqrt() <= cfg.max_observe_distance
}

fn objects(rng: &mut ChaCha8Rng, n: usize) -> Vec<VirtualObject> {
    (0..n)
        .map(|i| VirtualObject { id: i as u32, label: format!("obj-{i}"), position: point(rng, 12.0) })
        .collect()
}

#[test]
fn local_frame_round_trip() {
    let cfg = PoseConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let rp = ReferencePoint::new(0, point(&mut rng, 5.0));
        let pose = eye_pose(&rp, rng.gen_range(0.0..360.0), &cfg);
        let p = point(&mut rng, 20.0);
        let back = from_local(&pose, &to_local(&pose, p));
        assert!((back - p).norm() <= 1e-9);
    }
}

#[test]
fn local_frame_is_an_isometry() {
    let cfg = PoseConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let rp = ReferencePoint::new(0, point(&mut rng, 5.0));
        let pose = eye_pose(&rp, rng.gen_range(0.0..360.0), &cfg);
        let (a, b) = (point(&mut rng, 20.0), point(&mut rng, 20.0));
        let (la, lb) = (to_local(&pose, a), to_local(&pose, b));
        let local = ((la.forward - lb.forward).powi(2) + (la.right - lb.right).powi(2) + (la.up - lb.up).powi(2)).sqrt();
        assert!((local - a.distance(b)).abs() <= 1e-9);
        assert!((la.distance - a.distance(pose.eye)).abs() <= 1e-9);
    }
}

#[test]
fn visibility_matches_brute_force_pyramid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let cfg = PoseConfig {
            horizontal_fov: rng.gen_range(20.0..120.0),
            aspect_ratio: rng.gen_range(0.5..2.5),
            max_observe_distance: rng.gen_range(2.0..15.0),
            ..PoseConfig::default()
        };
        let rp = ReferencePoint::new(0, point(&mut rng, 3.0));
        let heading = rng.gen_range(0.0..360.0);
        let pose = eye_pose(&rp, heading, &cfg);
        let objs = objects(&mut rng, 10);
        let got: Vec<u32> = {
            let mut ids: Vec<u32> = visible_objects(&pose, &build_frustum(&pose, &cfg), &objs).iter().map(|(o, _)| o.id).collect();
            ids.sort();
            ids
        };
        let want: Vec<u32> = objs.iter().filter(|o| in_pyramid(rp.position, heading, &cfg, o.position)).map(|o| o.id).collect();
        assert_eq!(got, want);
    }
}

proptest! {
    #[test]
    fn visibility_is_rotation_invariant(seed in any::<u64>(), heading in 0.0f64..360.0, turn in 0.0f64..360.0) {
        let cfg = PoseConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rp = ReferencePoint::new(0, Vec3::new(rng.gen_range(-2.0..2.0), 0.0, rng.gen_range(-2.0..2.0)));
        let objs = objects(&mut rng, 12);
        let pose = eye_pose(&rp, heading, &cfg);
        let before = visible_objects(&pose, &build_frustum(&pose, &cfg), &objs);

        // turn the user and the scene together about the vertical axis through the RP
        let spin = |p: Vec3| rp.position + (p - rp.position).rotate_y(turn.to_radians());
        let turned: Vec<VirtualObject> = objs.iter().map(|o| VirtualObject { position: spin(o.position), ..o.clone() }).collect();
        let pose2 = eye_pose(&rp, heading + turn, &cfg);
        let after = visible_objects(&pose2, &build_frustum(&pose2, &cfg), &turned);

        let ids = |v: &[(VirtualObject, fusionloc::LocalPose)]| {
            let mut ids: Vec<u32> = v.iter().map(|(o, _)| o.id).collect();
            ids.sort();
            ids
        };
        // objects right on a frustum face may flip by rounding; require agreement away from faces
        let margin = |l: &fusionloc::LocalPose| {
            let f = build_frustum(&pose, &cfg);
            let h = (l.right.atan2(l.forward).abs() - f.half_angle_h).abs();
            let v = (l.up.atan2(l.forward).abs() - f.half_angle_v).abs();
            h.min(v).min((l.distance - f.max_distance).abs()) > 1e-9
        };
        let clear = objs.iter().all(|o| margin(&to_local(&pose, o.position)));
        if clear {
            prop_assert_eq!(ids(&before), ids(&after));
        }
        for ((_, a), (_, b)) in before.iter().zip(after.iter()) {
            prop_assert!((a.distance - b.distance).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_rp_matches_brute_force(x in -3.0f64..3.0, z in -2.0f64..2.0) {
        let map = make_grid_map(4.0, 2.0, 0.5).unwrap();
        let p = Vec3::new(x, 0.0, z);
        let got = map.nearest_rp(p).unwrap();
        let best = map.rps.iter().map(|rp| rp.position.planar_distance(p)).fold(f64::INFINITY, f64::min);
        prop_assert!((got.position.planar_distance(p) - best).abs() < 1e-12);
        let first_best = map.rps.iter().find(|rp| (rp.position.planar_distance(p) - best).abs() < 1e-12).unwrap();
        prop_assert_eq!(got.id, first_best.id);
    }

    #[test]
    fn grid_counts_follow_extent_and_interval(w in 0.5f64..8.0, d in 0.5f64..8.0, interval in 0.25f64..2.0) {
        match make_grid_map(w, d, interval) {
            Ok(map) => {
                let nx = (w / interval + 1e-9).floor() as usize + 1;
                let nz = (d / interval + 1e-9).floor() as usize + 1;
                prop_assert_eq!(map.rps.len(), nx * nz);
                prop_assert!(map.rps.iter().all(|rp| map.contains(rp.position)));
                prop_assert!(map.validate().is_ok());
            }
            Err(e) => prop_assert!(matches!(e, Error::InvalidArgument(_))),
        }
    }
}

#[test]
fn default_grid_has_45_rps_centered_on_origin() {
    let map = make_grid_map(4.0, 2.0, 0.5).unwrap();
    assert_eq!(map.rps.len(), 45);
    let sum = map.rps.iter().fold(Vec3::ZERO, |acc, rp| acc + rp.position);
    assert!(sum.norm() < 1e-9);
    assert!(make_grid_map(4.0, 2.0, 0.0).is_err());
    assert!(make_grid_map(-1.0, 2.0, 0.5).is_err());
}

#[test]
fn facing_axes_follow_compass_convention() {
    let cfg = PoseConfig::default();
    let pose = EyePose::at(Vec3::ZERO, 90.0, &cfg);
    assert!((pose.facing - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    assert!((pose.right_axis() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    assert!((pose.heading() - 90.0).abs() < 1e-9);
}
