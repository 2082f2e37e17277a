//! Two-step fingerprint clustering.
//!
//! Step one reduces every RP's fingerprint collection to its medoid. Step two
//! groups those per-RP medoids into `k` subareas with a PAM-style k-medoids
//! under cosine distance. Subarea centroids are the cluster medoids, so every
//! central fingerprint is a real observation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::fingerprint::{self, cosine_similarity, Fingerprint, DEFAULT_RSS_FLOOR};
use crate::map::{IndoorMap, Subarea};

/// Minimum objective decrease for a swap to count as an improvement.
const SWAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub rss_floor: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k: 3, rss_floor: DEFAULT_RSS_FLOOR, max_iterations: 50, seed: 42 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid_arg("k must be at least 1"));
        }
        if self.rss_floor.is_nan() || self.rss_floor >= 0.0 {
            return Err(invalid_arg("rss_floor must be negative"));
        }
        Ok(())
    }
}

/// Output of [`kmedoids`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMedoids {
    /// Point indices of the medoids, ascending.
    pub medoids: Vec<usize>,
    /// For every point, the position in `medoids` of its cluster.
    pub assignment: Vec<usize>,
    /// Objective after initialization, then after every accepted swap.
    pub objective_history: Vec<f64>,
    /// Number of swap iterations performed.
    pub iterations: usize,
}

impl KMedoids {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("history holds the initial objective")
    }
}

fn assign(dist: &[Vec<f64>], medoids: &[usize]) -> Vec<usize> {
    (0..dist.len())
        .map(|i| {
            if let Some(pos) = medoids.iter().position(|&m| m == i) {
                return pos;
            }
            let mut best = 0;
            for (pos, &m) in medoids.iter().enumerate().skip(1) {
                if dist[i][m] < dist[i][medoids[best]] {
                    best = pos;
                }
            }
            best
        })
        .collect()
}

fn cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..dist.len())
        .map(|i| medoids.iter().map(|&m| dist[i][m]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// PAM k-medoids over a symmetric dissimilarity matrix.
///
/// The first medoid is drawn from `seed`; the remaining ones are added
/// greedily, each time taking the point that lowers the objective most. The
/// swap phase then applies the best improving (medoid, non-medoid) exchange
/// until none exists or `max_iterations` is reached. Ties resolve to the
/// lowest point index.
pub fn kmedoids(dist: &[Vec<f64>], k: usize, max_iterations: usize, seed: u64) -> Result<KMedoids> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(invalid_arg(format!("k = {k} must be in 1..={n}")));
    }
    if dist.iter().any(|row| row.len() != n) {
        return Err(invalid_arg("distance matrix is not square"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = vec![rng.gen_range(0..n)];
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        let candidates: Vec<usize> = (0..n).filter(|c| !medoids.contains(c)).collect();
        for c in candidates {
            medoids.push(c);
            let v = cost(dist, &medoids);
            medoids.pop();
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((c, v));
            }
        }
        medoids.push(best.expect("k <= n leaves a candidate").0);
    }

    let mut history = vec![cost(dist, &medoids)];
    let mut iterations = 0;
    while iterations < max_iterations {
        let current = *history.last().unwrap();
        let mut best: Option<(usize, usize, f64)> = None;
        let candidates: Vec<usize> = (0..n).filter(|c| !medoids.contains(c)).collect();
        for slot in 0..k {
            for &c in &candidates {
                let old = medoids[slot];
                medoids[slot] = c;
                let v = cost(dist, &medoids);
                medoids[slot] = old;
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((slot, c, v));
                }
            }
        }
        iterations += 1;
        match best {
            Some((slot, c, v)) if v < current - SWAP_TOLERANCE => {
                medoids[slot] = c;
                history.push(v);
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let assignment = assign(dist, &medoids);
    Ok(KMedoids { medoids, assignment, objective_history: history, iterations })
}

/// Everything [`build_subareas`] computes, for inspection.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub subareas: Vec<Subarea>,
    /// Per RP (in map order), the index of its medoid fingerprint.
    pub rp_medoids: Vec<usize>,
    pub kmedoids: KMedoids,
}

/// Per-RP medoid fingerprint indices, in map order.
pub fn rp_medoids(map: &IndoorMap, floor: f64) -> Result<Vec<usize>> {
    map.rps
        .par_iter()
        .map(|rp| {
            if rp.fingerprints.is_empty() {
                return Err(invalid_arg(format!("RP {} has no fingerprints", rp.id)));
            }
            fingerprint::medoid(&rp.fingerprints, floor)
        })
        .collect()
}

/// Builds `cfg.k` subareas from the map's fingerprints.
pub fn build_subareas(map: &IndoorMap, cfg: &ClusterConfig) -> Result<Vec<Subarea>> {
    cluster_map(map, cfg).map(|o| o.subareas)
}

/// [`build_subareas`] returning the intermediate results as well.
pub fn cluster_map(map: &IndoorMap, cfg: &ClusterConfig) -> Result<ClusterOutcome> {
    cfg.validate()?;
    if cfg.k > map.rps.len() {
        return Err(invalid_arg(format!("k = {} exceeds the {} RPs of the map", cfg.k, map.rps.len())));
    }
    let rp_medoids = rp_medoids(map, cfg.rss_floor)?;
    let centers: Vec<Fingerprint> =
        map.rps.iter().zip(&rp_medoids).map(|(rp, &m)| rp.fingerprints[m].clone()).collect();
    let dist = fingerprint::distance_matrix(&centers, cfg.rss_floor)?;
    let km = kmedoids(&dist, cfg.k, cfg.max_iterations, cfg.seed)?;

    let mut groups: Vec<(Vec<u32>, usize)> = km
        .medoids
        .iter()
        .enumerate()
        .map(|(pos, &m)| {
            let members = km
                .assignment
                .iter()
                .enumerate()
                .filter(|&(_, &a)| a == pos)
                .map(|(i, _)| map.rps[i].id)
                .collect();
            (members, m)
        })
        .collect();
    groups.sort_by_key(|(members, _)| members[0]);
    let subareas = groups
        .into_iter()
        .enumerate()
        .map(|(id, (member_rp_ids, m))| Subarea {
            id: id as u32,
            centroid: centers[m].clone(),
            member_rp_ids,
        })
        .collect();
    Ok(ClusterOutcome { subareas, rp_medoids, kmedoids: km })
}

/// Subarea whose centroid is most similar to `fp`; ties go to the lowest id.
pub fn locate_subarea<'a>(fp: &Fingerprint, subareas: &'a [Subarea], floor: f64) -> Result<&'a Subarea> {
    let mut best: Option<(&Subarea, f64)> = None;
    for s in subareas {
        let sim = cosine_similarity(fp, &s.centroid, floor)?;
        let better = match best {
            None => true,
            Some((b, bs)) => sim > bs || (sim == bs && s.id < b.id),
        };
        if better {
            best = Some((s, sim));
        }
    }
    best.map(|(s, _)| s).ok_or_else(|| Error::InvalidState("no subareas to search".into()))
}
