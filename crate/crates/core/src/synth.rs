//! Deterministic synthetic environment standing in for physical data
//! collection.
//!
//! The world is a rectangular room around the walkable RP grid. Access
//! points hang from the ceiling inside the walkable area and follow a
//! log-distance path-loss model with Gaussian shadowing. Landmarks sit on the
//! walls and around virtual objects; a pinhole camera projects them into
//! keypoints whose descriptors are noisy copies of per-landmark signatures.
//!
//! Every random draw comes from a ChaCha stream derived from
//! `(seed, domain, index)`, so any RP, image or trial can be regenerated on
//! its own and parallel generation stays reproducible.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::fingerprint::Fingerprint;
use crate::geometry::Vec3;
use crate::map::{make_grid_map, IndoorMap, VirtualObject};
use crate::pipeline::{Query, Trial};
use crate::pose::{to_local, EyePose, PoseConfig};
use crate::vision::{Keypoint, KeypointSet, DESCRIPTOR_LEN};

const DOMAIN_WORLD: u64 = 1;
const DOMAIN_FINGERPRINT: u64 = 2;
const DOMAIN_IMAGE: u64 = 3;
const DOMAIN_TRIAL: u64 = 4;
const DOMAIN_OBSERVATION: u64 = 5;

/// Reference distance of the path-loss model and its lower clamp, meters.
const MIN_PATH_DISTANCE: f64 = 0.1;
const AP_HEIGHT: f64 = 2.6;
const DEVICE_HEIGHT: f64 = 1.2;
const MIN_SIGNATURE_SEPARATION: f64 = 0.8;
const NEAR_PLANE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_aps: usize,
    /// RSS at 1 m, dBm.
    pub tx_power_p0: f64,
    pub path_loss_gamma: f64,
    pub rss_noise_sigma: f64,
    pub landmarks_per_object: usize,
    pub keypoint_jitter_px: f64,
    pub descriptor_noise: f64,
    pub headings_per_rp: usize,
    pub fingerprints_per_rp: usize,
    pub images_per_rp: usize,
    pub device_rss_offsets: BTreeMap<String, f64>,
    pub num_objects: usize,
    pub wall_landmarks: usize,
    /// Distance from the walkable area to the room walls, meters.
    pub room_margin: f64,
    /// Captures sharing a nominal heading are spread evenly over a sector
    /// of this width, degrees.
    pub capture_heading_spread: f64,
    /// Per-image heading perturbation of stored captures, degrees.
    pub capture_heading_jitter: f64,
    /// Per-image position perturbation of stored captures, meters.
    pub capture_position_jitter: f64,
    pub frame_width: f64,
    pub frame_height: f64,
    /// Camera horizontal field of view, degrees.
    pub camera_fov: f64,
    /// Landmark radii are drawn log-uniformly from this range, meters.
    pub landmark_size_min: f64,
    pub landmark_size_max: f64,
    /// A landmark is detected only while its projected scale (pixels) lies in
    /// this band, the range covered by the extractor's scale ladder.
    pub detect_sigma_min: f64,
    pub detect_sigma_max: f64,
    /// How strongly a descriptor drifts with the viewing direction: the
    /// descriptor moves by about this much per radian of viewpoint change.
    pub view_sensitivity: f64,
    /// Mounting height of the access points, meters.
    pub ap_height: f64,
    /// Trial positions are offset from their RP by up to this fraction of the
    /// grid interval along each axis.
    pub trial_offset_fraction: f64,
    /// Walls are tiled with panels of this width, meters.
    pub wall_panel_width: f64,
    /// The walkable area is split along x into this many booths separated
    /// by light partitions. Partitions attenuate Wi-Fi but hide nothing.
    pub booths: usize,
    /// Wi-Fi attenuation per partition between an AP and the device, dB.
    pub partition_loss_db: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let device_rss_offsets =
            [("device-0", 0.0), ("device-1", -3.0), ("device-2", 2.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        Self {
            seed: 42,
            num_aps: 8,
            tx_power_p0: -40.0,
            path_loss_gamma: 2.5,
            rss_noise_sigma: 3.0,
            landmarks_per_object: 12,
            keypoint_jitter_px: 1.0,
            descriptor_noise: 0.05,
            headings_per_rp: 8,
            fingerprints_per_rp: 50,
            images_per_rp: 50,
            device_rss_offsets,
            num_objects: 6,
            wall_landmarks: 320,
            room_margin: 1.5,
            capture_heading_spread: 6.0,
            capture_heading_jitter: 3.0,
            capture_position_jitter: 0.03,
            frame_width: 800.0,
            frame_height: 600.0,
            camera_fov: 60.0,
            landmark_size_min: 0.005,
            landmark_size_max: 0.05,
            detect_sigma_min: 1.6,
            detect_sigma_max: 1.6 * 2f64.powf(7.0 / 3.0),
            view_sensitivity: 2.0,
            ap_height: 2.6,
            trial_offset_fraction: 0.25,
            wall_panel_width: 1.0,
            booths: 3,
            partition_loss_db: 8.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.num_aps, self.headings_per_rp, self.fingerprints_per_rp, self.images_per_rp];
        if counts.contains(&0) {
            return Err(invalid_arg("synthetic counts must be positive"));
        }
        let non_negative = [
            self.rss_noise_sigma,
            self.keypoint_jitter_px,
            self.descriptor_noise,
            self.capture_heading_spread,
            self.capture_heading_jitter,
            self.capture_position_jitter,
            self.room_margin,
            self.trial_offset_fraction,
            self.partition_loss_db,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid_arg("noise levels must be finite and non-negative"));
        }
        if !(self.camera_fov > 0.0 && self.camera_fov < 180.0) {
            return Err(invalid_arg("camera_fov must lie in (0, 180)"));
        }
        if !(self.frame_width > 0.0 && self.frame_height > 0.0) {
            return Err(invalid_arg("frame size must be positive"));
        }
        if !(self.landmark_size_min > 0.0 && self.landmark_size_min <= self.landmark_size_max) {
            return Err(invalid_arg("landmark size range must be positive and ordered"));
        }
        if !(self.wall_panel_width > 0.0 && self.wall_panel_width.is_finite()) {
            return Err(invalid_arg("wall_panel_width must be positive"));
        }
        if !(self.detect_sigma_min > 0.0 && self.detect_sigma_min < self.detect_sigma_max) {
            return Err(invalid_arg("detection scale band must be positive and ordered"));
        }
        Ok(())
    }

    /// Stored capture headings: evenly spaced, starting at 0.
    pub fn headings(&self) -> Vec<f64> {
        (0..self.headings_per_rp).map(|k| k as f64 * 360.0 / self.headings_per_rp as f64).collect()
    }

    pub fn focal_px(&self) -> f64 {
        (self.frame_width / 2.0) / (self.camera_fov / 2.0).to_radians().tan()
    }

    pub fn device_offset(&self, device_id: &str) -> f64 {
        self.device_rss_offsets.get(device_id).copied().unwrap_or(0.0)
    }
}

/// Deterministic RNG for one `(seed, domain, index)` stream.
pub fn sub_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

/// Noise-free log-distance path loss: `p0 - 10 * gamma * log10(max(d, 0.1))`.
pub fn path_loss_rss(distance: f64, p0: f64, gamma: f64) -> f64 {
    p0 - 10.0 * gamma * distance.max(MIN_PATH_DISTANCE).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: String,
    pub position: Vec3,
}

/// A world feature that projects to a keypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u32,
    pub world_position: Vec3,
    /// Physical radius in meters; sets the keypoint scale at a given depth.
    pub size: f64,
    pub signature: Vec<f64>,
    /// Descriptor response to the viewing direction: three columns of
    /// descriptor length, one per world axis.
    pub view_response: [Vec<f64>; 3],
}

impl Landmark {
    /// Noise-free descriptor seen from `eye`.
    pub fn descriptor_from(&self, eye: Vec3, sensitivity: f64) -> Vec<f64> {
        let d = eye - self.world_position;
        let n = d.norm();
        let u = if n > 0.0 { d * (1.0 / n) } else { Vec3::ZERO };
        let [rx, ry, rz] = &self.view_response;
        (0..self.signature.len())
            .map(|i| self.signature[i] + sensitivity * (u.x * rx[i] + u.y * ry[i] + u.z * rz[i]))
            .collect()
    }
}

/// Everything the generator places in the room, independent of RP data.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub aps: Vec<AccessPoint>,
    pub landmarks: Vec<Landmark>,
    pub objects: Vec<VirtualObject>,
    /// x coordinates of the booth partitions.
    pub partitions: Vec<f64>,
    pub half_width: f64,
    pub half_depth: f64,
}

/// Size, signature and view response of one landmark design.
type Feature = (f64, Vec<f64>, [Vec<f64>; 3]);

fn random_signature(rng: &mut ChaCha8Rng, existing: &[Vec<f64>]) -> Vec<f64> {
    let unit = normal(1.0);
    let mut best = Vec::new();
    let mut best_sep = -1.0;
    for _ in 0..1000 {
        let mut v: Vec<f64> = (0..DESCRIPTOR_LEN).map(|_| unit.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        let sep = existing
            .iter()
            .map(|l| l.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        if sep >= MIN_SIGNATURE_SEPARATION {
            return v;
        }
        if sep > best_sep {
            best_sep = sep;
            best = v;
        }
    }
    best
}

fn random_response(rng: &mut ChaCha8Rng) -> [Vec<f64>; 3] {
    let unit = normal(1.0 / (DESCRIPTOR_LEN as f64).sqrt());
    std::array::from_fn(|_| (0..DESCRIPTOR_LEN).map(|_| unit.sample(rng)).collect())
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

const OBJECT_LABELS: [&str; 8] =
    ["poster", "exhibit", "info-desk", "sculpture", "display-case", "map-board", "painting", "kiosk"];

impl World {
    pub fn generate(width: f64, depth: f64, cfg: &SynthConfig) -> Result<World> {
        cfg.validate()?;
        if !(width > 0.0 && depth > 0.0) {
            return Err(invalid_arg("map dimensions must be positive"));
        }
        let mut rng = sub_rng(cfg.seed, DOMAIN_WORLD, 0);
        let (hw, hd) = (width / 2.0, depth / 2.0);
        let aps = (0..cfg.num_aps)
            .map(|i| AccessPoint {
                id: format!("ap-{i:02}"),
                position: Vec3::new(rng.gen_range(-hw..=hw), cfg.ap_height, rng.gen_range(-hd..=hd)),
            })
            .collect();

        let (rw, rd) = (hw + cfg.room_margin, hd + cfg.room_margin);
        let perimeter = 4.0 * (rw + rd);
        let (north, east, south) = (2.0 * rw, 2.0 * (rw + rd), 4.0 * rw + 2.0 * rd);
        // a point along the perimeter, walls visited clockwise from +z
        let wall_point = |s: f64| {
            if s < north {
                (-rw + s, rd)
            } else if s < east {
                (rw, rd - (s - north))
            } else if s < south {
                (rw - (s - east), -rd)
            } else {
                (-rw, -rd + (s - south))
            }
        };

        let mut signatures: Vec<Vec<f64>> = Vec::new();
        let mut feature = |rng: &mut ChaCha8Rng| {
            let size = log_uniform(rng, cfg.landmark_size_min, cfg.landmark_size_max);
            let signature = random_signature(rng, &signatures);
            signatures.push(signature.clone());
            (size, signature, random_response(rng))
        };

        let panels = (perimeter / cfg.wall_panel_width).ceil().max(1.0) as usize;
        let per_panel = (cfg.wall_landmarks as f64 / panels as f64).round() as usize;
        let panel_layouts: Vec<Vec<(f64, f64, Feature)>> = (0..panels)
            .map(|_| {
                (0..per_panel)
                    .map(|_| {
                        let along = rng.gen_range(0.0..cfg.wall_panel_width);
                        let height = rng.gen_range(0.5..2.7);
                        (along, height, feature(&mut rng))
                    })
                    .collect()
            })
            .collect();
        let mut landmarks: Vec<Landmark> = Vec::new();
        for (p, layout) in panel_layouts.iter().enumerate() {
            for (along, height, (size, signature, view_response)) in layout {
                let s = p as f64 * cfg.wall_panel_width + along;
                if s >= perimeter {
                    continue;
                }
                let (x, z) = wall_point(s);
                landmarks.push(Landmark {
                    id: landmarks.len() as u32,
                    world_position: Vec3::new(x, *height, z),
                    size: *size,
                    signature: signature.clone(),
                    view_response: view_response.clone(),
                });
            }
        }

        let partitions = (1..cfg.booths).map(|k| -hw + k as f64 * width / cfg.booths as f64).collect();

        let object_layouts: Vec<Vec<(Vec3, Feature)>> = (0..cfg.num_objects)
            .map(|_| {
                (0..cfg.landmarks_per_object)
                    .map(|_| {
                        let offset =
                            Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3));
                        (offset, feature(&mut rng))
                    })
                    .collect()
            })
            .collect();
        let mut objects = Vec::with_capacity(cfg.num_objects);
        let inset = (cfg.room_margin * 0.5).min(0.5);
        for i in 0..cfg.num_objects {
            let t = rng.gen_range(-0.8..0.8);
            let pos = match i % 4 {
                0 => Vec3::new(t * rw, 1.5, rd - inset),
                1 => Vec3::new(rw - inset, 1.5, t * rd),
                2 => Vec3::new(t * rw, 1.5, -rd + inset),
                _ => Vec3::new(-rw + inset, 1.5, t * rd),
            };
            objects.push(VirtualObject {
                id: i as u32,
                label: format!("{}-{i}", OBJECT_LABELS[i % OBJECT_LABELS.len()]),
                position: pos,
            });
            for (offset, (size, signature, view_response)) in &object_layouts[i] {
                landmarks.push(Landmark {
                    id: landmarks.len() as u32,
                    world_position: pos + *offset,
                    size: *size,
                    signature: signature.clone(),
                    view_response: view_response.clone(),
                });
            }
        }
        Ok(World { aps, landmarks, objects, partitions, half_width: hw, half_depth: hd })
    }

    /// Noise-free RSS of every AP at a floor position.
    pub fn mean_rss(&self, floor_position: Vec3, cfg: &SynthConfig) -> Vec<f64> {
        let device = floor_position + Vec3::UP * DEVICE_HEIGHT;
        self.aps
            .iter()
            .map(|ap| {
                let (lo, hi) = if ap.position.x < device.x { (ap.position.x, device.x) } else { (device.x, ap.position.x) };
                let crossed = self.partitions.iter().filter(|&&x| lo < x && x < hi).count();
                path_loss_rss(ap.position.distance(device), cfg.tx_power_p0, cfg.path_loss_gamma)
                    - crossed as f64 * cfg.partition_loss_db
            })
            .collect()
    }

    /// One noisy fingerprint at a floor position for a device with the given
    /// RSS bias.
    pub fn observe_fingerprint(&self, floor_position: Vec3, bias: f64, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Fingerprint {
        let noise = normal(cfg.rss_noise_sigma);
        let readings = self
            .aps
            .iter()
            .zip(self.mean_rss(floor_position, cfg))
            .map(|(ap, mean)| (ap.id.clone(), (mean + bias + noise.sample(rng)).min(0.0)))
            .collect();
        Fingerprint::new(readings).expect("at least one AP and finite readings")
    }
}

/// Projects the landmarks visible from `eye` through the synthetic pinhole
/// camera.
///
/// Landmarks behind the eye, outside the frame, beyond `max_distance` or
/// whose projected scale falls outside the detection band are omitted. Pixel jitter and descriptor noise are drawn from `rng`.
pub fn project_view(eye: &EyePose, landmarks: &[Landmark], max_distance: f64, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> KeypointSet {
    let focal = cfg.focal_px();
    let (cx, cy) = (cfg.frame_width / 2.0, cfg.frame_height / 2.0);
    let jitter = normal(cfg.keypoint_jitter_px);
    let desc_noise = normal(cfg.descriptor_noise);
    let mut keypoints = Vec::new();
    for lm in landmarks {
        let l = to_local(eye, lm.world_position);
        if l.forward <= NEAR_PLANE || l.distance > max_distance {
            continue;
        }
        let px = cx + focal * l.right / l.forward;
        let py = cy - focal * l.up / l.forward;
        let sigma = focal * lm.size / l.forward;
        if !(0.0..cfg.frame_width).contains(&px)
            || !(0.0..cfg.frame_height).contains(&py)
            || !(cfg.detect_sigma_min..=cfg.detect_sigma_max).contains(&sigma)
        {
            continue;
        }
        keypoints.push(Keypoint {
            px: px + jitter.sample(rng),
            py: py + jitter.sample(rng),
            sigma,
            descriptor: lm
                .descriptor_from(eye.eye, cfg.view_sensitivity)
                .into_iter()
                .map(|v| v + desc_noise.sample(rng))
                .collect(),
        });
    }
    KeypointSet::new(keypoints)
}

/// Grid map plus the world it was generated in.
#[derive(Debug, Clone)]
pub struct Environment {
    pub map: IndoorMap,
    pub world: World,
    pub config: SynthConfig,
}

/// Builds a fully populated map: per RP, `fingerprints_per_rp` fingerprints
/// and `images_per_rp` images spread round-robin over the stored headings.
pub fn gen_environment(width: f64, depth: f64, interval: f64, cfg: &SynthConfig, pose: &PoseConfig) -> Result<Environment> {
    pose.validate()?;
    let mut map = make_grid_map(width, depth, interval)?;
    let world = World::generate(width, depth, cfg)?;
    map.objects = world.objects.clone();
    let headings = cfg.headings();
    let offset = cfg.device_offset("device-0");
    map.rps.par_iter_mut().enumerate().for_each(|(i, rp)| {
        let mut rng = sub_rng(cfg.seed, DOMAIN_FINGERPRINT, i as u64);
        rp.fingerprints =
            (0..cfg.fingerprints_per_rp).map(|_| world.observe_fingerprint(rp.position, offset, cfg, &mut rng)).collect();
        let mut rng = sub_rng(cfg.seed, DOMAIN_IMAGE, i as u64);
        let pos_jit = cfg.capture_position_jitter;
        let h = headings.len();
        for j in 0..cfg.images_per_rp {
            let heading = headings[j % h];
            let in_sector = (cfg.images_per_rp - j % h).div_ceil(h);
            let slot = (j / h) as f64 + 0.5;
            let spread = cfg.capture_heading_spread * (slot / in_sector as f64 - 0.5);
            let dh = spread + rng.gen_range(-1.0..=1.0) * cfg.capture_heading_jitter;
            let dp = Vec3::new(rng.gen_range(-1.0..=1.0) * pos_jit, 0.0, rng.gen_range(-1.0..=1.0) * pos_jit);
            let eye = EyePose::at(rp.position + dp, (heading + dh).rem_euclid(360.0), pose);
            let mut image = project_view(&eye, &world.landmarks, pose.max_observe_distance, cfg, &mut rng);
            image.source_rp_id = Some(rp.id);
            image.source_heading = Some(heading);
            rp.images.push(image);
            rp.viewpoint_headings.push(heading);
        }
    });
    Ok(Environment { map, world, config: cfg.clone() })
}

/// A fresh observation (fingerprint + photo) at an arbitrary floor position.
pub fn observe(
    world: &World,
    floor_position: Vec3,
    heading: f64,
    device_id: &str,
    cfg: &SynthConfig,
    pose: &PoseConfig,
    rng: &mut ChaCha8Rng,
) -> Query {
    let fingerprint = world.observe_fingerprint(floor_position, cfg.device_offset(device_id), cfg, rng);
    let eye = EyePose::at(floor_position, heading, pose);
    let keypoints = project_view(&eye, &world.landmarks, pose.max_observe_distance, cfg, rng);
    Query { fingerprint, keypoints, heading: heading.rem_euclid(360.0), device_id: device_id.to_string() }
}

/// Seeded trial set: each trial picks an RP and a stored heading uniformly,
/// moves uniformly within a square half a grid cell wide centered on the RP
/// (clamped to the map) and observes from there. Devices are assigned round-robin.
pub fn gen_trials(
    env: &Environment,
    pose: &PoseConfig,
    num_trials: usize,
    devices: &[String],
    seed: u64,
) -> Result<Vec<Trial>> {
    if devices.is_empty() {
        return Err(invalid_arg("at least one device is required"));
    }
    if env.map.rps.is_empty() {
        return Err(invalid_arg("map has no reference points"));
    }
    let headings = env.config.headings();
    let half = env.map.interval * env.config.trial_offset_fraction;
    Ok((0..num_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = sub_rng(seed, DOMAIN_TRIAL, i as u64);
            let rp = &env.map.rps[rng.gen_range(0..env.map.rps.len())];
            let heading = headings[rng.gen_range(0..headings.len())];
            let offset = Vec3::new(rng.gen_range(-half..=half), 0.0, rng.gen_range(-half..=half));
            let position = env.map.clamp(rp.position + offset);
            let mut obs_rng = sub_rng(seed, DOMAIN_OBSERVATION, i as u64);
            let query = observe(&env.world, position, heading, &devices[i % devices.len()], &env.config, pose, &mut obs_rng);
            Trial { query, true_rp_id: rp.id }
        })
        .collect())
}

/// Default device identifiers `device-0 .. device-{n-1}`.
pub fn device_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("device-{i}")).collect()
}

/// Three rooms side by side, each with its own access points, separated by
/// walls that attenuate foreign APs heavily. Used to check that clustering
/// recovers planted regions.
#[derive(Debug, Clone)]
pub struct PlantedRegimes {
    pub map: IndoorMap,
    /// Planted member RP ids per regime, ascending.
    pub regions: Vec<Vec<u32>>,
    aps: Vec<(String, Vec3, usize)>,
    region_of_rp: Vec<usize>,
    p0: f64,
    gamma: f64,
    wall_loss: f64,
}

impl PlantedRegimes {
    /// 4 m x 2 m map at 0.5 m spacing (45 RPs), split into three column bands
    /// of 15 RPs each, `fingerprints_per_rp` samples at `sigma` dB noise.
    pub fn generate(seed: u64, fingerprints_per_rp: usize, sigma: f64) -> Result<PlantedRegimes> {
        let mut map = make_grid_map(4.0, 2.0, 0.5)?;
        let mut rng = sub_rng(seed, DOMAIN_WORLD, 77);
        let band_of = |x: f64| ((x + 2.0) / 4.0 * 3.0).floor().clamp(0.0, 2.0) as usize;
        let mut aps = Vec::new();
        for region in 0..3 {
            let x_lo = -2.0 + region as f64 * 4.0 / 3.0;
            for k in 0..3 {
                let pos = Vec3::new(rng.gen_range(x_lo..x_lo + 4.0 / 3.0), AP_HEIGHT, rng.gen_range(-1.0..1.0));
                aps.push((format!("ap-r{region}-{k}"), pos, region));
            }
        }
        let region_of_rp: Vec<usize> = map.rps.iter().map(|rp| band_of(rp.position.x)).collect();
        let mut regions = vec![Vec::new(); 3];
        for (rp, &r) in map.rps.iter().zip(&region_of_rp) {
            regions[r].push(rp.id);
        }
        let mut env = PlantedRegimes { map: map.clone(), regions, aps, region_of_rp, p0: -40.0, gamma: 2.5, wall_loss: 35.0 };
        for (i, rp) in map.rps.iter_mut().enumerate() {
            let mut rng = sub_rng(seed, DOMAIN_FINGERPRINT, i as u64);
            rp.fingerprints = (0..fingerprints_per_rp).map(|_| env.observe(i, sigma, &mut rng)).collect();
        }
        env.map = map;
        Ok(env)
    }

    /// Noisy fingerprint at RP `index` (map order).
    pub fn observe(&self, index: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Fingerprint {
        let noise = normal(sigma);
        let device = self.map.rps[index].position + Vec3::UP * DEVICE_HEIGHT;
        let region = self.region_of_rp[index];
        let readings = self
            .aps
            .iter()
            .map(|(id, pos, r)| {
                let wall = if *r == region { 0.0 } else { self.wall_loss };
                let rss = path_loss_rss(pos.distance(device), self.p0, self.gamma) - wall + noise.sample(rng);
                (id.clone(), rss.min(0.0))
            })
            .collect();
        Fingerprint::new(readings).expect("nine APs with finite readings")
    }

    pub fn region_of(&self, index: usize) -> usize {
        self.region_of_rp[index]
    }
}
