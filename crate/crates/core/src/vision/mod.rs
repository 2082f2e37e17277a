//! Keypoints, descriptor matching, distance-ratio compensation and a small
//! scale-space keypoint extractor.

mod extract;
mod keypoint;
mod matching;
mod ratio;
mod retrieval;

pub use extract::{extract_keypoints, scale_space, sigma_difference, ExtractorConfig, GrayImage};
pub use keypoint::{Keypoint, KeypointSet, DESCRIPTOR_LEN};
pub use matching::{image_similarity, match_keypoints, MatchConfig, MatchPair};
pub use ratio::{distance_ratio, distance_ratio_of_pairs};
pub use retrieval::{rank_images, select_rp, RankedImage};
