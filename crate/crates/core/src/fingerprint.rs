//! Wi-Fi fingerprints and the similarity measure used to compare them.
//!
//! Raw RSS values are negative dBm, which makes a plain cosine meaningless.
//! Every comparison first aligns both fingerprints over the union of their
//! access points, fills unheard APs with the RSS floor, and shifts each entry
//! by `-floor` so the vectors are non-negative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Default RSS floor in dBm.
pub const DEFAULT_RSS_FLOOR: f64 = -100.0;

/// RSS readings keyed by access-point identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct Fingerprint {
    readings: BTreeMap<String, f64>,
}

impl Fingerprint {
    pub fn new(readings: BTreeMap<String, f64>) -> Result<Self> {
        if readings.is_empty() {
            return Err(invalid_arg("fingerprint has no readings"));
        }
        for (ap, &rss) in &readings {
            if !rss.is_finite() || rss > 0.0 {
                return Err(invalid_arg(format!("AP {ap}: RSS {rss} is not a finite value <= 0")));
            }
        }
        Ok(Self { readings })
    }

    pub fn from_pairs<I, K>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<String>,
    {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn readings(&self) -> &BTreeMap<String, f64> {
        &self.readings
    }

    pub fn get(&self, ap: &str) -> Option<f64> {
        self.readings.get(ap).copied()
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

impl TryFrom<BTreeMap<String, f64>> for Fingerprint {
    type Error = Error;
    fn try_from(readings: BTreeMap<String, f64>) -> Result<Self> {
        Fingerprint::new(readings)
    }
}

impl From<Fingerprint> for BTreeMap<String, f64> {
    fn from(fp: Fingerprint) -> Self {
        fp.readings
    }
}

fn shifted(rss: Option<f64>, floor: f64) -> f64 {
    (rss.unwrap_or(floor) - floor).max(0.0)
}

/// Aligns two fingerprints over the sorted union of their APs.
///
/// Missing APs are filled with `floor`; every entry is then shifted to
/// `rss - floor` and clamped at zero.
pub fn align(a: &Fingerprint, b: &Fingerprint, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let mut va = Vec::with_capacity(a.len().max(b.len()));
    let mut vb = Vec::with_capacity(va.capacity());
    let mut ia = a.readings.iter().peekable();
    let mut ib = b.readings.iter().peekable();
    // merge walk over two sorted key sequences
    loop {
        let (ra, rb) = match (ia.peek(), ib.peek()) {
            (None, None) => break,
            (Some(_), None) => (ia.next().map(|e| *e.1), None),
            (None, Some(_)) => (None, ib.next().map(|e| *e.1)),
            (Some((ka, _)), Some((kb, _))) => match ka.cmp(kb) {
                std::cmp::Ordering::Less => (ia.next().map(|e| *e.1), None),
                std::cmp::Ordering::Greater => (None, ib.next().map(|e| *e.1)),
                std::cmp::Ordering::Equal => (ia.next().map(|e| *e.1), ib.next().map(|e| *e.1)),
            },
        };
        va.push(shifted(ra, floor));
        vb.push(shifted(rb, floor));
    }
    (va, vb)
}

fn cosine_of(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

/// Cosine similarity of the aligned, floor-shifted vectors, in `[0, 1]`.
///
/// Fails with [`Error::DegenerateInput`] when either fingerprint is entirely
/// at or below the floor.
pub fn cosine_similarity(a: &Fingerprint, b: &Fingerprint, floor: f64) -> Result<f64> {
    let (va, vb) = align(a, b, floor);
    cosine_of(&va, &vb).ok_or_else(|| {
        Error::DegenerateInput("fingerprint is entirely at or below the RSS floor".into())
    })
}

/// Cosine distance `1 - similarity`.
pub fn cosine_distance(a: &Fingerprint, b: &Fingerprint, floor: f64) -> Result<f64> {
    cosine_similarity(a, b, floor).map(|s| 1.0 - s)
}

/// Index of the fingerprint minimizing the summed cosine distance to all
/// others. Ties go to the lowest index.
pub fn medoid(fps: &[Fingerprint], floor: f64) -> Result<usize> {
    if fps.is_empty() {
        return Err(invalid_arg("medoid of an empty fingerprint list"));
    }
    let dist = distance_matrix(fps, floor)?;
    Ok(medoid_of_matrix(&dist, &(0..fps.len()).collect::<Vec<_>>()))
}

/// Symmetric pairwise cosine-distance matrix.
pub fn distance_matrix(fps: &[Fingerprint], floor: f64) -> Result<Vec<Vec<f64>>> {
    let n = fps.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = cosine_distance(&fps[i], &fps[j], floor)?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// Position within `members` of the member minimizing summed distance to
/// the rest of `members`.
pub(crate) fn medoid_of_matrix(dist: &[Vec<f64>], members: &[usize]) -> usize {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (pos, &i) in members.iter().enumerate() {
        let cost: f64 = members.iter().map(|&j| dist[i][j]).sum();
        if cost < best_cost {
            best_cost = cost;
            best = pos;
        }
    }
    best
}
