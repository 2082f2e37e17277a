use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::keypoint::KeypointSet;
use super::matching::{image_similarity, MatchConfig};
use super::ratio::distance_ratio;
use crate::error::{Error, Result};
use crate::map::ReferencePoint;

/// One retrieved stored image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedImage {
    pub rp_id: u32,
    pub image_index: usize,
    pub similarity: usize,
    /// `None` when too few matches (or only coincident ones) exist.
    pub dr: Option<f64>,
}

/// Ranks every stored image of `rps` by similarity to `query` and keeps the
/// `cfg.top_m` best, each annotated with its distance ratio.
///
/// Equal similarities are ordered by RP id, then image index. Images with
/// zero accepted matches are never returned, so a query that matches nothing
/// yields an empty ranking.
pub fn rank_images<'a, I>(query: &KeypointSet, rps: I, cfg: &MatchConfig) -> Vec<RankedImage>
where
    I: IntoIterator<Item = &'a ReferencePoint>,
{
    let images: Vec<(&ReferencePoint, usize)> =
        rps.into_iter().flat_map(|rp| (0..rp.images.len()).map(move |i| (rp, i))).collect();
    let mut scored: Vec<(u32, usize, usize)> = images
        .par_iter()
        .map(|&(rp, i)| (rp.id, i, image_similarity(query, &rp.images[i], cfg)))
        .filter(|&(_, _, s)| s > 0)
        .collect();
    scored.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    scored.truncate(cfg.top_m);
    let lookup = |rp_id: u32, i: usize| {
        images.iter().find(|(rp, j)| rp.id == rp_id && *j == i).map(|(rp, _)| &rp.images[i])
    };
    scored
        .into_par_iter()
        .map(|(rp_id, image_index, similarity)| {
            let image = lookup(rp_id, image_index).expect("scored image comes from the input");
            RankedImage { rp_id, image_index, similarity, dr: distance_ratio(query, image, cfg).ok() }
        })
        .collect()
}

/// Picks the RP whose image has the distance ratio closest to one, measured
/// as `|ln DR|` so that half and double shooting distance weigh the same.
///
/// Falls back to the first (highest-similarity) entry when no entry carries a
/// ratio. Ties go to the lower RP id.
pub fn select_rp(ranked: &[RankedImage], _cfg: &MatchConfig) -> Result<u32> {
    let first = ranked.first().ok_or(Error::NoCandidate)?;
    let best = ranked
        .iter()
        .filter_map(|r| r.dr.filter(|d| *d > 0.0 && d.is_finite()).map(|d| (r, d.ln().abs())))
        .min_by(|(a, da), (b, db)| da.total_cmp(db).then(a.rp_id.cmp(&b.rp_id)).then(a.image_index.cmp(&b.image_index)));
    Ok(best.map_or(first.rp_id, |(r, _)| r.rp_id))
}
