use serde::{Deserialize, Serialize};

use super::keypoint::{Keypoint, KeypointSet, DESCRIPTOR_LEN};
use crate::error::{invalid_arg, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Number of best matches used by the distance ratio.
    pub n_pairs: usize,
    /// Number of top-similarity images kept for DR selection.
    pub top_m: usize,
    /// Lowe ratio test threshold (nearest / second nearest).
    pub ratio_threshold: f64,
    /// Fewest accepted matches for which a DR is computed.
    pub min_matches: usize,
    /// Query keypoint pairs closer than this (pixels) are skipped in the DR.
    pub epsilon: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { n_pairs: 10, top_m: 5, ratio_threshold: 0.75, min_matches: 4, epsilon: 1e-9 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 2 {
            return Err(invalid_arg("n_pairs must be greater than 1"));
        }
        if self.top_m == 0 {
            return Err(invalid_arg("top_m must be at least 1"));
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0) {
            return Err(invalid_arg("ratio_threshold must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(invalid_arg("epsilon must be non-negative"));
        }
        Ok(())
    }
}

/// One accepted correspondence between a query and a candidate keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchPair {
    pub query_point: Keypoint,
    pub candidate_point: Keypoint,
    pub descriptor_distance: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    // fixed-length path for the usual descriptor size, which vectorizes
    if let (Ok(a), Ok(b)) = (<&[f64; DESCRIPTOR_LEN]>::try_from(a), <&[f64; DESCRIPTOR_LEN]>::try_from(b)) {
        let mut acc = [0.0; 4];
        for i in 0..DESCRIPTOR_LEN {
            let d = a[i] - b[i];
            acc[i % 4] += d * d;
        }
        return (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_lengths(query: &KeypointSet, candidate: &KeypointSet) -> Result<()> {
    if query.is_empty() || candidate.is_empty() {
        return Ok(());
    }
    match (query.descriptor_len(), candidate.descriptor_len()) {
        (Some(a), Some(b)) if a == b => Ok(()),
        (a, b) => Err(invalid_arg(format!("descriptor lengths disagree ({a:?} vs {b:?})"))),
    }
}

/// Index pairs `(query, candidate, distance)` of accepted matches, sorted
/// ascending by distance.
fn match_indices(query: &KeypointSet, candidate: &KeypointSet, cfg: &MatchConfig) -> Result<Vec<(usize, usize, f64)>> {
    check_lengths(query, candidate)?;
    if candidate.is_empty() {
        return Ok(Vec::new());
    }
    let ratio_sq = cfg.ratio_threshold * cfg.ratio_threshold;
    let single = candidate.len() == 1;
    let mut tentative = Vec::with_capacity(query.len());
    for (qi, q) in query.keypoints.iter().enumerate() {
        let (mut best, mut best_d, mut second_d) = (0, f64::INFINITY, f64::INFINITY);
        for (ci, c) in candidate.keypoints.iter().enumerate() {
            let d = squared_distance(&q.descriptor, &c.descriptor);
            if d < best_d {
                second_d = best_d;
                best_d = d;
                best = ci;
            } else if d < second_d {
                second_d = d;
            }
        }
        // squared distances: d1 / d2 < r  <=>  d1^2 < r^2 * d2^2
        if single || best_d < ratio_sq * second_d {
            tentative.push((qi, best, best_d.sqrt()));
        }
    }
    tentative.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used = vec![false; candidate.len()];
    tentative.retain(|&(_, ci, _)| !std::mem::replace(&mut used[ci], true));
    Ok(tentative)
}

/// Ratio-tested, one-to-one nearest-descriptor matching.
///
/// Every query keypoint proposes its nearest candidate keypoint; the proposal
/// survives when the nearest/second-nearest distance ratio is below
/// `cfg.ratio_threshold` (always, when the candidate has a single keypoint).
/// Surviving proposals are then taken greedily by ascending distance, each
/// candidate keypoint at most once.
pub fn match_keypoints(query: &KeypointSet, candidate: &KeypointSet, cfg: &MatchConfig) -> Result<Vec<MatchPair>> {
    Ok(match_indices(query, candidate, cfg)?
        .into_iter()
        .map(|(qi, ci, d)| MatchPair {
            query_point: query.keypoints[qi].clone(),
            candidate_point: candidate.keypoints[ci].clone(),
            descriptor_distance: d,
        })
        .collect())
}

/// Number of accepted matches. Descriptor-length mismatches count as zero.
pub fn image_similarity(query: &KeypointSet, candidate: &KeypointSet, cfg: &MatchConfig) -> usize {
    match_indices(query, candidate, cfg).map_or(0, |m| m.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(px: f64, py: f64, d: Vec<f64>) -> Keypoint {
        Keypoint { px, py, sigma: 1.0, descriptor: d }
    }

    fn basis(i: usize, n: usize) -> Vec<f64> {
        (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn self_match_is_identity() {
        let set = KeypointSet::new((0..6).map(|i| kp(i as f64, 0.0, basis(i, 8))).collect());
        let m = match_keypoints(&set, &set, &MatchConfig::default()).unwrap();
        assert_eq!(m.len(), 6);
        for p in &m {
            assert_eq!(p.query_point, p.candidate_point);
            assert_eq!(p.descriptor_distance, 0.0);
        }
        assert_eq!(image_similarity(&set, &set, &MatchConfig::default()), 6);
    }

    #[test]
    fn ambiguous_matches_are_rejected() {
        let cand = KeypointSet::new((0..4).map(|i| kp(0.0, 0.0, basis(i, 8))).collect());
        let query = KeypointSet::new((4..8).map(|i| kp(0.0, 0.0, basis(i, 8))).collect());
        assert!(match_keypoints(&query, &cand, &MatchConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_candidate_is_accepted_and_used_once() {
        let cand = KeypointSet::new(vec![kp(0.0, 0.0, vec![1.0, 0.0])]);
        let query = KeypointSet::new(vec![kp(0.0, 0.0, vec![0.9, 0.0]), kp(1.0, 0.0, vec![0.5, 0.0])]);
        let m = match_keypoints(&query, &cand, &MatchConfig::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].descriptor_distance - 0.1).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = KeypointSet::new(vec![kp(0.0, 0.0, vec![1.0, 0.0])]);
        let b = KeypointSet::new(vec![kp(0.0, 0.0, vec![1.0, 0.0, 0.0])]);
        assert!(match_keypoints(&a, &b, &MatchConfig::default()).is_err());
        assert_eq!(image_similarity(&a, &b, &MatchConfig::default()), 0);
        assert!(match_keypoints(&a, &KeypointSet::default(), &MatchConfig::default()).unwrap().is_empty());
    }
}
