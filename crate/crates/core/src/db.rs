//! On-disk formats: the RP database, trial sets and single queries.
//!
//! All files are JSON. Loading validates every invariant before returning,
//! so a caller never observes a partially valid database.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterConfig;
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::geometry::Vec3;
use crate::map::{IndoorMap, ReferencePoint, Subarea, VirtualObject};
use crate::pipeline::{Query, Trial};
use crate::pose::PoseConfig;
use crate::synth::SynthConfig;
use crate::vision::{KeypointSet, MatchConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Every parameter the database was built with.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub cluster: ClusterConfig,
    pub matching: MatchConfig,
    pub pose: PoseConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpDatabase {
    pub map: IndoorMap,
    pub build_config: BuildConfig,
    pub format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct ImageRecord {
    heading: f64,
    keypoints: KeypointSet,
}

#[derive(Serialize, Deserialize)]
struct RpRecord {
    id: u32,
    position: Vec3,
    fingerprints: Vec<Fingerprint>,
    images: Vec<ImageRecord>,
}

#[derive(Serialize, Deserialize)]
struct MapRecord {
    width: f64,
    depth: f64,
    interval: f64,
    rps: Vec<RpRecord>,
    subareas: Vec<Subarea>,
    objects: Vec<VirtualObject>,
}

#[derive(Serialize, Deserialize)]
struct DbRecord {
    format_version: u32,
    map: MapRecord,
    build_config: BuildConfig,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn schema(e: impl std::fmt::Display) -> Error {
    Error::Schema(e.to_string())
}

impl From<&RpDatabase> for DbRecord {
    fn from(db: &RpDatabase) -> Self {
        let m = &db.map;
        let rps = m
            .rps
            .iter()
            .map(|rp| RpRecord {
                id: rp.id,
                position: rp.position,
                fingerprints: rp.fingerprints.clone(),
                images: rp
                    .images
                    .iter()
                    .zip(&rp.viewpoint_headings)
                    .map(|(k, &heading)| ImageRecord { heading, keypoints: k.clone() })
                    .collect(),
            })
            .collect();
        DbRecord {
            format_version: db.format_version,
            map: MapRecord {
                width: m.width,
                depth: m.depth,
                interval: m.interval,
                rps,
                subareas: m.subareas.clone(),
                objects: m.objects.clone(),
            },
            build_config: db.build_config.clone(),
        }
    }
}

impl From<DbRecord> for RpDatabase {
    fn from(rec: DbRecord) -> Self {
        let rps = rec
            .map
            .rps
            .into_iter()
            .map(|r| {
                let (images, viewpoint_headings) = r
                    .images
                    .into_iter()
                    .map(|img| {
                        let mut k = img.keypoints;
                        k.source_rp_id = Some(r.id);
                        k.source_heading = Some(img.heading);
                        (k, img.heading)
                    })
                    .unzip();
                ReferencePoint { id: r.id, position: r.position, fingerprints: r.fingerprints, images, viewpoint_headings }
            })
            .collect();
        RpDatabase {
            map: IndoorMap {
                width: rec.map.width,
                depth: rec.map.depth,
                interval: rec.map.interval,
                origin: Vec3::ZERO,
                rps,
                subareas: rec.map.subareas,
                objects: rec.map.objects,
                scale_ratio: 1.0,
            },
            build_config: rec.build_config,
            format_version: rec.format_version,
        }
    }
}

impl RpDatabase {
    pub fn new(map: IndoorMap, build_config: BuildConfig) -> Self {
        Self { map, build_config, format_version: FORMAT_VERSION }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: self.format_version, supported: FORMAT_VERSION });
        }
        self.map.validate()
    }

    /// Fails unless the database carries subareas.
    pub fn require_subareas(&self) -> Result<()> {
        if self.map.subareas.is_empty() {
            return Err(Error::InvalidState("database has no subareas; run build-db first".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&DbRecord::from(self)).map_err(schema)
    }

    /// Parses and validates a database from raw bytes.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<RpDatabase> {
        let probe: VersionProbe = serde_json::from_slice(bytes).map_err(schema)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: probe.format_version, supported: FORMAT_VERSION });
        }
        let rec: DbRecord = serde_json::from_slice(bytes).map_err(schema)?;
        let db = RpDatabase::from(rec);
        db.validate()?;
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RpDatabase> {
        Self::from_json_bytes(&fs::read(path)?)
    }
}

/// A replayable set of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub seed: u64,
    pub trials: Vec<Trial>,
}

impl TrialSet {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<TrialSet> {
        let set: TrialSet = serde_json::from_slice(bytes).map_err(schema)?;
        for (i, t) in set.trials.iter().enumerate() {
            t.query.validate().map_err(|e| Error::Schema(format!("trial {i}: {e}")))?;
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self).map_err(schema)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrialSet> {
        Self::from_json_bytes(&fs::read(path)?)
    }
}

/// Parses and validates a single query document.
pub fn parse_query(bytes: &[u8]) -> Result<Query> {
    let q: Query = serde_json::from_slice(bytes).map_err(schema)?;
    q.validate().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(q)
}
