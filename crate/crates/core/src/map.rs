//! Indoor map: the reference-point grid, subareas and virtual objects.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::fingerprint::Fingerprint;
use crate::geometry::Vec3;
use crate::vision::KeypointSet;

/// Default grid spacing in meters.
pub const DEFAULT_INTERVAL: f64 = 0.5;

const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub id: u32,
    pub position: Vec3,
    pub fingerprints: Vec<Fingerprint>,
    pub images: Vec<KeypointSet>,
    pub viewpoint_headings: Vec<f64>,
}

impl ReferencePoint {
    pub fn new(id: u32, position: Vec3) -> Self {
        Self { id, position, fingerprints: Vec::new(), images: Vec::new(), viewpoint_headings: Vec::new() }
    }
}

/// A cluster of RPs represented by one central fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subarea {
    pub id: u32,
    pub centroid: Fingerprint,
    pub member_rp_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualObject {
    pub id: u32,
    pub label: String,
    pub position: Vec3,
}

/// The planar RP grid plus everything placed in the virtual space.
///
/// The virtual-space origin is the map center and the virtual space has the
/// same scale as the physical one.
#[derive(Debug, Clone, PartialEq)]
pub struct IndoorMap {
    pub width: f64,
    pub depth: f64,
    pub interval: f64,
    pub origin: Vec3,
    pub rps: Vec<ReferencePoint>,
    pub subareas: Vec<Subarea>,
    pub objects: Vec<VirtualObject>,
    pub scale_ratio: f64,
}

fn axis_count(extent: f64, interval: f64) -> usize {
    (extent / interval + GRID_EPS).floor() as usize + 1
}

/// Lays RPs on a regular grid centered on the origin.
///
/// RP ids run row-major: `id = row * columns + column`, with columns along
/// `x` and rows along `z`, both increasing.
pub fn make_grid_map(width: f64, depth: f64, interval: f64) -> Result<IndoorMap> {
    if !(width > 0.0 && depth > 0.0 && width.is_finite() && depth.is_finite()) {
        return Err(invalid_arg(format!("map dimensions must be positive, got {width} x {depth}")));
    }
    if !(interval > 0.0 && interval <= width.min(depth) + GRID_EPS) {
        return Err(invalid_arg(format!("grid interval {interval} must be in (0, {}]", width.min(depth))));
    }
    let nx = axis_count(width, interval);
    let nz = axis_count(depth, interval);
    let x0 = -((nx - 1) as f64) * interval / 2.0;
    let z0 = -((nz - 1) as f64) * interval / 2.0;
    let mut rps = Vec::with_capacity(nx * nz);
    for row in 0..nz {
        for col in 0..nx {
            let id = (row * nx + col) as u32;
            let pos = Vec3::new(x0 + col as f64 * interval, 0.0, z0 + row as f64 * interval);
            rps.push(ReferencePoint::new(id, pos));
        }
    }
    Ok(IndoorMap {
        width,
        depth,
        interval,
        origin: Vec3::ZERO,
        rps,
        subareas: Vec::new(),
        objects: Vec::new(),
        scale_ratio: 1.0,
    })
}

impl IndoorMap {
    pub fn rp(&self, id: u32) -> Option<&ReferencePoint> {
        self.rps.binary_search_by_key(&id, |r| r.id).ok().map(|i| &self.rps[i])
    }

    pub fn subarea(&self, id: u32) -> Option<&Subarea> {
        self.subareas.iter().find(|s| s.id == id)
    }

    /// RP closest to `p` on the x/z plane, lowest id on ties.
    pub fn nearest_rp(&self, p: Vec3) -> Result<&ReferencePoint> {
        let mut best: Option<(&ReferencePoint, f64)> = None;
        for rp in &self.rps {
            let d = rp.position.planar_distance(p);
            // rps are sorted by id, so strict comparison keeps the lowest id
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((rp, d));
            }
        }
        best.map(|(rp, _)| rp).ok_or_else(|| Error::InvalidState("map has no reference points".into()))
    }

    /// Whether `p` lies inside the walkable rectangle (x/z plane).
    pub fn contains(&self, p: Vec3) -> bool {
        let (hx, hz) = (self.width / 2.0 + GRID_EPS, self.depth / 2.0 + GRID_EPS);
        (p.x - self.origin.x).abs() <= hx && (p.z - self.origin.z).abs() <= hz
    }

    /// Clamps `p` into the walkable rectangle.
    pub fn clamp(&self, p: Vec3) -> Vec3 {
        let (hx, hz) = (self.width / 2.0, self.depth / 2.0);
        Vec3::new(
            p.x.clamp(self.origin.x - hx, self.origin.x + hx),
            p.y,
            p.z.clamp(self.origin.z - hz, self.origin.z + hz),
        )
    }

    /// Subarea containing RP `rp_id`.
    pub fn subarea_of(&self, rp_id: u32) -> Option<&Subarea> {
        self.subareas.iter().find(|s| s.member_rp_ids.contains(&rp_id))
    }

    /// Checks every structural invariant of the map.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(m));
        if !(self.width > 0.0 && self.depth > 0.0 && self.interval > 0.0) {
            return bad("map dimensions and interval must be positive".into());
        }
        if self.scale_ratio != 1.0 {
            return bad(format!("scale ratio must be 1.0, got {}", self.scale_ratio));
        }
        for w in self.rps.windows(2) {
            if w[0].id >= w[1].id {
                return bad(format!("RP ids must be unique and ascending (saw {} then {})", w[0].id, w[1].id));
            }
        }
        for rp in &self.rps {
            if !rp.position.is_finite() || !self.contains(rp.position) {
                return bad(format!("RP {} lies outside the map", rp.id));
            }
            if rp.position.y != 0.0 {
                return bad(format!("RP {} is not at floor level", rp.id));
            }
            if rp.images.len() != rp.viewpoint_headings.len() {
                return bad(format!("RP {}: images and headings differ in length", rp.id));
            }
            for (i, img) in rp.images.iter().enumerate() {
                img.validate().map_err(|e| Error::Schema(format!("RP {} image {i}: {e}", rp.id)))?;
            }
        }
        if !self.subareas.is_empty() {
            let mut seen = std::collections::BTreeSet::new();
            for s in &self.subareas {
                if s.member_rp_ids.is_empty() {
                    return bad(format!("subarea {} has no members", s.id));
                }
                for &m in &s.member_rp_ids {
                    if self.rp(m).is_none() {
                        return bad(format!("subarea {} references missing RP {m}", s.id));
                    }
                    if !seen.insert(m) {
                        return bad(format!("RP {m} belongs to more than one subarea"));
                    }
                }
            }
            if seen.len() != self.rps.len() {
                return bad("subareas do not cover every RP".into());
            }
            let mut ids: Vec<u32> = self.subareas.iter().map(|s| s.id).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != self.subareas.len() {
                return bad("duplicate subarea id".into());
            }
        }
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.objects.len() {
            return bad("duplicate virtual object id".into());
        }
        Ok(())
    }
}
