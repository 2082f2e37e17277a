//! Distance ratio between a query photo and a stored image of the same scene.
//!
//! For the `N'` best matches `(A_n, B_n)` (query keypoint, candidate keypoint)
//! the ratio is the mean over ordered pairs `n != j` of
//! `|B_n B_j| / |A_n A_j|`. A value above one means the candidate was shot
//! closer to the scene than the query.

use super::keypoint::KeypointSet;
use super::matching::{match_keypoints, MatchConfig, MatchPair};
use crate::error::{Error, Result};

/// Distance ratio of `candidate` relative to `query`.
pub fn distance_ratio(query: &KeypointSet, candidate: &KeypointSet, cfg: &MatchConfig) -> Result<f64> {
    let pairs = match_keypoints(query, candidate, cfg)?;
    distance_ratio_of_pairs(&pairs, cfg)
}

/// Distance ratio over an already matched list sorted by descriptor distance.
///
/// Uses the first `cfg.n_pairs` pairs. Ordered pairs whose query-side pixel
/// distance is below `cfg.epsilon` are skipped and the mean taken over the
/// rest.
pub fn distance_ratio_of_pairs(pairs: &[MatchPair], cfg: &MatchConfig) -> Result<f64> {
    let required = cfg.min_matches.max(2);
    if pairs.len() < required {
        return Err(Error::InsufficientMatches { found: pairs.len(), required });
    }
    let used = &pairs[..pairs.len().min(cfg.n_pairs)];
    let mut sum = 0.0;
    let mut count = 0usize;
    for (n, pn) in used.iter().enumerate() {
        for (j, pj) in used.iter().enumerate() {
            if n == j {
                continue;
            }
            let denom = pn.query_point.pixel_distance(&pj.query_point);
            if denom < cfg.epsilon || denom == 0.0 {
                continue;
            }
            sum += pn.candidate_point.pixel_distance(&pj.candidate_point) / denom;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::Keypoint;

    fn pair(a: (f64, f64), b: (f64, f64), d: f64) -> MatchPair {
        let k = |(px, py): (f64, f64)| Keypoint { px, py, sigma: 1.0, descriptor: vec![0.0] };
        MatchPair { query_point: k(a), candidate_point: k(b), descriptor_distance: d }
    }

    fn cfg() -> MatchConfig {
        MatchConfig { min_matches: 2, ..Default::default() }
    }

    #[test]
    fn hand_computed_triangle() {
        let pairs = [
            pair((0.0, 0.0), (0.0, 0.0), 0.1),
            pair((4.0, 0.0), (8.0, 0.0), 0.2),
            pair((0.0, 3.0), (0.0, 3.0), 0.3),
        ];
        let expected = 2.0 * (8.0 / 4.0 + 3.0 / 3.0 + 73f64.sqrt() / 5.0) / 6.0;
        let got = distance_ratio_of_pairs(&pairs, &cfg()).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.5696).abs() < 1e-4);
    }

    #[test]
    fn identity_and_scaling() {
        let pts = [(1.0, 2.0), (5.0, -1.0), (3.0, 7.0), (-2.0, 0.5)];
        let same: Vec<_> = pts.iter().map(|&p| pair(p, p, 0.0)).collect();
        assert!((distance_ratio_of_pairs(&same, &cfg()).unwrap() - 1.0).abs() < 1e-12);
        let doubled: Vec<_> = pts.iter().map(|&(x, y)| pair((x, y), (2.0 * x + 7.0, 2.0 * y - 3.0), 0.0)).collect();
        assert!((distance_ratio_of_pairs(&doubled, &cfg()).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn only_best_n_pairs_count() {
        let mut pairs: Vec<_> = (0..10).map(|i| pair((i as f64, 0.0), (i as f64, 0.0), i as f64)).collect();
        // an outlier beyond n_pairs must not change the ratio
        pairs.push(pair((100.0, 0.0), (5000.0, 0.0), 99.0));
        assert!((distance_ratio_of_pairs(&pairs, &cfg()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_query_points_are_skipped() {
        let pairs = [pair((0.0, 0.0), (0.0, 0.0), 0.0), pair((0.0, 0.0), (1.0, 0.0), 0.0), pair((2.0, 0.0), (4.0, 0.0), 0.0)];
        // usable ordered pairs: (0,2),(2,0): 4/2; (1,2),(2,1): 3/2
        let got = distance_ratio_of_pairs(&pairs, &cfg()).unwrap();
        assert!((got - 1.75).abs() < 1e-12);
        let all_same = [pair((1.0, 1.0), (0.0, 0.0), 0.0), pair((1.0, 1.0), (3.0, 0.0), 0.0)];
        assert!(matches!(distance_ratio_of_pairs(&all_same, &cfg()), Err(Error::DegenerateGeometry)));
    }

    #[test]
    fn too_few_matches() {
        let pairs = [pair((0.0, 0.0), (0.0, 0.0), 0.0), pair((1.0, 0.0), (1.0, 0.0), 0.0)];
        let err = distance_ratio_of_pairs(&pairs, &MatchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientMatches { found: 2, required: 4 }));
    }
}
