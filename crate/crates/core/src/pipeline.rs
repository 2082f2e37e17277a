//! Two-stage positioning and the evaluation harness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{self, locate_subarea, ClusterConfig};
use crate::error::{invalid_arg, Error, Result};
use crate::fingerprint::{cosine_similarity, Fingerprint};
use crate::geometry::Vec3;
use crate::map::{IndoorMap, ReferencePoint};
use crate::vision::{rank_images, select_rp, KeypointSet, MatchConfig, RankedImage};

/// One online observation sent by a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub fingerprint: Fingerprint,
    pub keypoints: KeypointSet,
    /// Degrees clockwise from `+z`, in `[0, 360)`.
    pub heading: f64,
    pub device_id: String,
}

impl Query {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.heading) {
            return Err(invalid_arg(format!("heading {} outside [0, 360)", self.heading)));
        }
        self.keypoints.validate().map_err(Error::InvalidArgument)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    WifiOnly,
    ImageOnly,
    Combined,
    CombinedDr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::WifiOnly, Method::ImageOnly, Method::Combined, Method::CombinedDr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::WifiOnly => "wifi_only",
            Method::ImageOnly => "image_only",
            Method::Combined => "combined",
            Method::CombinedDr => "combined_dr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid_arg(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ranked: Vec<RankedImage>,
    /// Set when the image stage produced no candidate and the Wi-Fi answer
    /// was returned instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub rp_id: u32,
    pub subarea_id: Option<u32>,
    pub position: Vec3,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// A map prepared for online queries: per-RP medoid fingerprints are
/// computed once.
#[derive(Debug, Clone)]
pub struct Locator<'a> {
    map: &'a IndoorMap,
    cluster: ClusterConfig,
    matching: MatchConfig,
    rp_medoids: Vec<usize>,
}

impl<'a> Locator<'a> {
    pub fn new(map: &'a IndoorMap, cluster: ClusterConfig, matching: MatchConfig) -> Result<Self> {
        cluster.validate()?;
        matching.validate()?;
        if map.rps.is_empty() {
            return Err(Error::InvalidState("map has no reference points".into()));
        }
        let rp_medoids = cluster::rp_medoids(map, cluster.rss_floor)?;
        Ok(Self { map, cluster, matching, rp_medoids })
    }

    /// Rebuilds a locator from medoid indices computed earlier by
    /// [`Locator::rp_medoids`], skipping the medoid search.
    pub fn with_medoids(map: &'a IndoorMap, cluster: ClusterConfig, matching: MatchConfig, rp_medoids: Vec<usize>) -> Result<Self> {
        let fits = rp_medoids.len() == map.rps.len()
            && map.rps.iter().zip(&rp_medoids).all(|(rp, &m)| m < rp.fingerprints.len());
        if !fits {
            return Err(Error::InvalidState("medoid indices do not fit the map".into()));
        }
        Ok(Self { map, cluster, matching, rp_medoids })
    }

    pub fn rp_medoids(&self) -> &[usize] {
        &self.rp_medoids
    }

    pub fn map(&self) -> &'a IndoorMap {
        self.map
    }

    pub fn match_config(&self) -> &MatchConfig {
        &self.matching
    }

    pub fn cluster_config(&self) -> &ClusterConfig {
        &self.cluster
    }

    /// The medoid fingerprint representing RP `index` (map order).
    pub fn rp_fingerprint(&self, index: usize) -> &'a Fingerprint {
        &self.map.rps[index].fingerprints[self.rp_medoids[index]]
    }

    fn wifi_rp(&self, fp: &Fingerprint) -> Result<&'a ReferencePoint> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.map.rps.len() {
            let sim = cosine_similarity(fp, self.rp_fingerprint(i), self.cluster.rss_floor)?;
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
        Ok(&self.map.rps[best.expect("map is non-empty").0])
    }

    fn result(&self, rp: &ReferencePoint, subarea_id: Option<u32>, method: Method, diagnostics: Diagnostics) -> LocalizationResult {
        LocalizationResult { rp_id: rp.id, subarea_id, position: rp.position, method, diagnostics }
    }

    pub fn localize(&self, query: &Query, method: Method) -> Result<LocalizationResult> {
        Ok(self.localize_each(query, &[method])?.pop().expect("one method in, one result out"))
    }

    /// Localizes one query under several methods. The subarea ranking is
    /// computed once and shared by `combined` and `combined_dr`.
    pub fn localize_each(&self, query: &Query, methods: &[Method]) -> Result<Vec<LocalizationResult>> {
        query.validate()?;
        let mut subarea_ranking: Option<(u32, Vec<RankedImage>)> = None;
        let mut out = Vec::with_capacity(methods.len());
        for &method in methods {
            let result = match method {
                Method::WifiOnly => {
                    let rp = self.wifi_rp(&query.fingerprint)?;
                    let subarea = self.map.subarea_of(rp.id).map(|s| s.id);
                    self.result(rp, subarea, method, Diagnostics::default())
                }
                Method::ImageOnly => {
                    let ranked = rank_images(&query.keypoints, &self.map.rps, &self.matching);
                    self.pick(query, method, None, ranked)?
                }
                Method::Combined | Method::CombinedDr => {
                    let (id, ranked) = match &subarea_ranking {
                        Some(cached) => cached.clone(),
                        None => subarea_ranking.insert(self.rank_in_subarea(query)?).clone(),
                    };
                    self.pick(query, method, Some(id), ranked)?
                }
            };
            out.push(result);
        }
        Ok(out)
    }

    fn rank_in_subarea(&self, query: &Query) -> Result<(u32, Vec<RankedImage>)> {
        if self.map.subareas.is_empty() {
            return Err(Error::InvalidState("map has no subareas; build the database first".into()));
        }
        let sub = locate_subarea(&query.fingerprint, &self.map.subareas, self.cluster.rss_floor)?;
        let members = sub.member_rp_ids.iter().filter_map(|&id| self.map.rp(id));
        Ok((sub.id, rank_images(&query.keypoints, members, &self.matching)))
    }

    /// Final RP choice from a ranking, falling back to Wi-Fi when it is empty.
    fn pick(&self, query: &Query, method: Method, subarea_id: Option<u32>, ranked: Vec<RankedImage>) -> Result<LocalizationResult> {
        if ranked.is_empty() {
            let rp = self.wifi_rp(&query.fingerprint)?;
            let diagnostics = Diagnostics { ranked, fallback: true };
            return Ok(self.result(rp, subarea_id, method, diagnostics));
        }
        let rp_id = match method {
            Method::CombinedDr => select_rp(&ranked, &self.matching)?,
            _ => ranked[0].rp_id,
        };
        let rp = self.map.rp(rp_id).expect("ranked RPs come from the map");
        Ok(self.result(rp, subarea_id, method, Diagnostics { ranked, fallback: false }))
    }
}

/// A query with its ground-truth RP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub query: Query,
    pub true_rp_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub matching_rate: f64,
    pub avg_error_m: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub matching_rate: f64,
    pub avg_error_m: f64,
    pub per_device: BTreeMap<String, DeviceMetrics>,
    pub n_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub methods: Vec<MethodMetrics>,
}

impl MetricsReport {
    pub fn method(&self, m: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Fixed-width text table, one row per method.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12} {:>8} {:>10} {:>8}\n", "method", "rate", "error_m", "trials");
        for m in &self.methods {
            out.push_str(&format!(
                "{:<12} {:>8.4} {:>10.4} {:>8}\n",
                m.method.as_str(),
                m.matching_rate,
                m.avg_error_m,
                m.n_trials
            ));
        }
        out
    }
}

#[derive(Default)]
struct Tally {
    hits: usize,
    error_sum: f64,
    n: usize,
}

impl Tally {
    fn add(&mut self, hit: bool, err: f64) {
        self.hits += usize::from(hit);
        self.error_sum += err;
        self.n += 1;
    }

    fn rates(&self) -> (f64, f64) {
        (self.hits as f64 / self.n as f64, self.error_sum / self.n as f64)
    }
}

/// RP matching rate and average distance error of each method.
///
/// `seed` is only recorded in the report.
pub fn evaluate(trials: &[Trial], locator: &Locator<'_>, methods: &[Method], seed: u64) -> Result<MetricsReport> {
    if trials.is_empty() {
        return Err(invalid_arg("no trials to evaluate"));
    }
    let map = locator.map();
    for t in trials {
        if map.rp(t.true_rp_id).is_none() {
            return Err(invalid_arg(format!("trial references unknown RP {}", t.true_rp_id)));
        }
    }
    let outcomes: Vec<Vec<(bool, f64)>> = trials
        .par_iter()
        .map(|t| {
            let truth = map.rp(t.true_rp_id).expect("checked above").position;
            let results = locator.localize_each(&t.query, methods)?;
            Ok(results.iter().map(|r| (r.rp_id == t.true_rp_id, r.position.distance(truth))).collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(methods.len());
    for (k, &method) in methods.iter().enumerate() {
        let mut total = Tally::default();
        let mut devices: BTreeMap<&str, Tally> = BTreeMap::new();
        for (t, per_method) in trials.iter().zip(&outcomes) {
            let (hit, err) = per_method[k];
            total.add(hit, err);
            devices.entry(&t.query.device_id).or_default().add(hit, err);
        }
        let (matching_rate, avg_error_m) = total.rates();
        let per_device = devices
            .into_iter()
            .map(|(d, tally)| {
                let (matching_rate, avg_error_m) = tally.rates();
                (d.to_string(), DeviceMetrics { matching_rate, avg_error_m, n_trials: tally.n })
            })
            .collect();
        rows.push(MethodMetrics { method, matching_rate, avg_error_m, per_device, n_trials: trials.len(), seed });
    }
    Ok(MetricsReport { methods: rows })
}
