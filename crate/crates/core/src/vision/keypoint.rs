use serde::{Deserialize, Serialize};

/// Default descriptor length.
pub const DESCRIPTOR_LEN: usize = 16;

/// A detected or synthesized image feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub px: f64,
    pub py: f64,
    pub sigma: f64,
    pub descriptor: Vec<f64>,
}

impl Keypoint {
    pub fn pixel_distance(&self, other: &Keypoint) -> f64 {
        (self.px - other.px).hypot(self.py - other.py)
    }
}

/// Keypoints of one image. May be empty.
///
/// Serializes as a bare keypoint array; the source annotations come from the
/// surrounding record (the owning RP and the image heading).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Keypoint>", into = "Vec<Keypoint>")]
pub struct KeypointSet {
    pub keypoints: Vec<Keypoint>,
    pub source_rp_id: Option<u32>,
    pub source_heading: Option<f64>,
}

impl From<Vec<Keypoint>> for KeypointSet {
    fn from(keypoints: Vec<Keypoint>) -> Self {
        KeypointSet::new(keypoints)
    }
}

impl From<KeypointSet> for Vec<Keypoint> {
    fn from(set: KeypointSet) -> Self {
        set.keypoints
    }
}

impl KeypointSet {
    pub fn new(keypoints: Vec<Keypoint>) -> Self {
        Self { keypoints, source_rp_id: None, source_heading: None }
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// Common descriptor length, `None` for an empty set or mixed lengths.
    pub fn descriptor_len(&self) -> Option<usize> {
        let first = self.keypoints.first()?.descriptor.len();
        self.keypoints.iter().all(|k| k.descriptor.len() == first).then_some(first)
    }

    /// Checks the per-set invariants: uniform descriptor length, positive
    /// finite scale, finite coordinates.
    pub fn validate(&self) -> Result<(), String> {
        if !self.is_empty() && self.descriptor_len().is_none() {
            return Err("descriptor lengths differ within one keypoint set".into());
        }
        for (i, k) in self.keypoints.iter().enumerate() {
            if !(k.sigma > 0.0 && k.sigma.is_finite()) {
                return Err(format!("keypoint {i}: sigma must be positive"));
            }
            if !k.px.is_finite() || !k.py.is_finite() || k.descriptor.iter().any(|v| !v.is_finite()) {
                return Err(format!("keypoint {i}: non-finite value"));
            }
        }
        Ok(())
    }
}
