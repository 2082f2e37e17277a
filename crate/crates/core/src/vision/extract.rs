//! Higher-order scale-space keypoint extractor.
//!
//! A single-octave Gaussian scale space `L(x, y, sigma)` is built over a
//! geometric ladder of blur levels. For derivative order `n` the `n`th finite
//! difference of `L` along the sigma axis is formed, and every sample that is
//! a strict extremum of its 3x3x3 neighborhood with magnitude above the
//! contrast threshold becomes a keypoint. Order 1 is the classic
//! difference-of-Gaussians detector.

use serde::{Deserialize, Serialize};

use super::keypoint::{Keypoint, KeypointSet, DESCRIPTOR_LEN};
use crate::error::{invalid_arg, Result};

pub const MIN_IMAGE_SIDE: usize = 16;
pub const MAX_ORDER: usize = 4;

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(invalid_arg(format!("{} pixels for a {width}x{height} image", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub levels: usize,
    pub sigma0: f64,
    pub step: f64,
    pub contrast_threshold: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self { levels: 8, sigma0: 1.6, step: 2f64.powf(1.0 / 3.0), contrast_threshold: 1e-3 }
    }
}

impl ExtractorConfig {
    pub fn sigma(&self, level: f64) -> f64 {
        self.sigma0 * self.step.powf(level)
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

fn blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width as isize, img.height as isize);
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = (x + i as isize - r).clamp(0, w - 1);
                acc += kv * img.data[(y * w + xx) as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = (y + i as isize - r).clamp(0, h - 1);
                acc += kv * tmp[(yy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

/// Blurred copies of `img`, one per level, each flattened row-major.
pub fn scale_space(img: &GrayImage, cfg: &ExtractorConfig) -> Vec<Vec<f64>> {
    (0..cfg.levels).map(|l| blur(img, cfg.sigma(l as f64))).collect()
}

/// `order`-th finite difference of a stack along its first axis.
pub fn sigma_difference(stack: &[Vec<f64>], order: usize) -> Vec<Vec<f64>> {
    let mut cur = stack.to_vec();
    for _ in 0..order {
        cur = cur.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
    }
    cur
}

/// Strict extremum test over the 3x3x3 neighborhood. At the first and last
/// slice the neighborhood is truncated along the sigma axis.
fn is_strict_extremum(vol: &[Vec<f64>], w: usize, s: usize, x: usize, y: usize) -> bool {
    let v = vol[s][y * w + x];
    let (mut is_max, mut is_min) = (true, true);
    let lo = s.saturating_sub(1);
    for (ds, slice) in vol.iter().enumerate().take(s + 2).skip(lo) {
        for yy in [y - 1, y, y + 1] {
            for xx in [x - 1, x, x + 1] {
                if ds == s && yy == y && xx == x {
                    continue;
                }
                let n = slice[yy * w + xx];
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    true
}

fn descriptor(level: &[f64], w: usize, h: usize, cx: usize, cy: usize, sigma: f64) -> Vec<f64> {
    let radius = (2.0 * sigma).round().max(2.0) as isize;
    let mut hist = vec![0.0; DESCRIPTOR_LEN];
    let at = |x: isize, y: isize| level[(y.clamp(0, h as isize - 1) as usize) * w + x.clamp(0, w as isize - 1) as usize];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (x, y) = (cx as isize + dx, cy as isize + dy);
            if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                continue;
            }
            let gx = at(x + 1, y) - at(x - 1, y);
            let gy = at(x, y + 1) - at(x, y - 1);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
            let bin = ((angle / std::f64::consts::FRAC_PI_2) as usize).min(3);
            let cell = usize::from(dy >= 0) * 2 + usize::from(dx >= 0);
            hist[cell * 4 + bin] += mag;
        }
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        hist.iter_mut().for_each(|v| *v /= norm);
    }
    hist
}

/// Detects keypoints from the sigma-axis differences of orders
/// `1..=max_order`. The result is the concatenation of the per-order sets in
/// ascending order, so raising `max_order` only ever adds keypoints.
pub fn extract_keypoints(img: &GrayImage, max_order: usize, cfg: &ExtractorConfig) -> Result<KeypointSet> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(invalid_arg(format!("max_order {max_order} must be in 1..={MAX_ORDER}")));
    }
    if img.width < MIN_IMAGE_SIDE || img.height < MIN_IMAGE_SIDE {
        return Err(invalid_arg(format!(
            "image is {}x{}, at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE} required",
            img.width, img.height
        )));
    }
    if img.data.len() != img.width * img.height {
        return Err(invalid_arg("pixel buffer does not match image dimensions"));
    }
    if img.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid_arg("pixel values must lie in [0, 1]"));
    }
    if cfg.levels < max_order + 2 {
        return Err(invalid_arg(format!("{} levels are too few for order {max_order}", cfg.levels)));
    }
    let (w, h) = (img.width, img.height);
    let space = scale_space(img, cfg);
    let mut keypoints = Vec::new();
    for order in 1..=max_order {
        let vol = sigma_difference(&space, order);
        for s in 0..vol.len() {
            let level = s as f64 + order as f64 / 2.0;
            let sigma = cfg.sigma(level);
            let source = &space[(level.round() as usize).min(cfg.levels - 1)];
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if vol[s][y * w + x].abs() <= cfg.contrast_threshold || !is_strict_extremum(&vol, w, s, x, y) {
                        continue;
                    }
                    keypoints.push(Keypoint {
                        px: x as f64,
                        py: y as f64,
                        sigma,
                        descriptor: descriptor(source, w, h, x, y, sigma),
                    });
                }
            }
        }
    }
    Ok(KeypointSet::new(keypoints))
}
