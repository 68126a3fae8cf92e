use serde::{Deserialize, Serialize};

use super::features::{hamming_rot, known_detector, FeatureSet, RotDescriptor};
use crate::geometry::Transform2;

/// Pairwise matched feature coordinates, metric, `(p, q)` with `p` from the
/// first set and `q` from the second.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<((f64, f64), (f64, f64))>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Tuning knobs for feature matching and the robust transform estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    /// Outlier-removal iterations.
    pub max_iter: usize,
    /// Alignment residual threshold, meters.
    pub delta: f64,
    /// Minimal surviving matches before giving up.
    pub min_matches: usize,
    /// Nearest/second-nearest distance ratio bound.
    pub ratio_test: f64,
    /// With an initial guess, pairs farther than this from their predicted
    /// position are discarded, meters.
    pub guess_gate_radius: f64,
    /// Minimum occupied-cell IoU after alignment for an accepted match.
    pub accept_score: f64,
    /// Corner detector tag.
    pub detector: String,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            max_iter: 10,
            delta: 0.5,
            min_matches: 8,
            ratio_test: 0.8,
            guess_gate_radius: 2.0,
            accept_score: 0.3,
            detector: "harris".to_string(),
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iter < 1 {
            return Err("max_iter must be at least 1".into());
        }
        if !(self.delta > 0.0) {
            return Err("delta must be positive".into());
        }
        if self.min_matches < 3 {
            return Err("min_matches must be at least 3".into());
        }
        if !(self.ratio_test > 0.0 && self.ratio_test <= 1.0) {
            return Err("ratio_test must lie in (0, 1]".into());
        }
        if !(self.guess_gate_radius > 0.0) {
            return Err("guess_gate_radius must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.accept_score) {
            return Err("accept_score must lie in [0, 1]".into());
        }
        if !known_detector(&self.detector) {
            return Err(format!("unknown detector tag '{}'", self.detector));
        }
        Ok(())
    }
}

/// Result of matching two scans.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    /// Estimated rigid transform (first-scan frame from second-scan frame).
    pub transform: Transform2,
    /// Pairs surviving the outlier-removal loop.
    pub inliers: usize,
    /// Occupied-cell IoU after alignment, in [0, 1].
    pub score: f64,
    pub accepted: bool,
}

impl MatchResult {
    pub fn rejected() -> Self {
        Self {
            transform: Transform2::identity(),
            inliers: 0,
            score: 0.0,
            accepted: false,
        }
    }
}

/// Mutual-nearest-neighbor descriptor matching with a ratio test.
///
/// With a `guess` (mapping first-set coordinates onto second-set
/// coordinates), pairs whose predicted position misses the observed one by
/// more than `guess_gate_radius` are discarded. Ties on equal descriptor
/// distance go to the lower keypoint index.
pub fn match_features(
    a: &FeatureSet,
    b: &FeatureSet,
    guess: Option<&Transform2>,
    cfg: &MatcherConfig,
) -> MatchSet {
    if a.is_empty() || b.is_empty() {
        return MatchSet::default();
    }

    let forward: Vec<Option<(usize, u32, u32)>> = a
        .descriptors
        .iter()
        .map(|d| nearest_two(d, &b.descriptors))
        .collect();
    let backward: Vec<Option<(usize, u32, u32)>> = b
        .descriptors
        .iter()
        .map(|d| nearest_two(d, &a.descriptors))
        .collect();

    let mut pairs = Vec::new();
    for (i, fwd) in forward.iter().enumerate() {
        let Some((j, d1, d2)) = *fwd else { continue };
        if f64::from(d1) > cfg.ratio_test * f64::from(d2) {
            continue;
        }
        match backward[j] {
            Some((back_i, _, _)) if back_i == i => {}
            _ => continue,
        }
        let p = a.keypoints[i].metric;
        let q = b.keypoints[j].metric;
        if let Some(t) = guess {
            let predicted = t.apply(p);
            let err = (predicted.0 - q.0).hypot(predicted.1 - q.1);
            if err > cfg.guess_gate_radius {
                continue;
            }
        }
        pairs.push((p, q));
    }
    MatchSet { pairs }
}

/// Keeps matches whose pairwise point distances are preserved between the
/// two sets. A rigid transform preserves all pairwise distances, so each
/// match votes for every other match it is consistent with; matches with
/// fewer than half the top vote (or fewer than 3) are dropped.
///
/// This cheap O(n^2) vote strips gross mismatches before the least-squares
/// loop, whose fixed residual threshold cannot survive a fit dragged meters
/// away by a couple of far-off correspondences.
pub fn filter_consistent_pairs(m: &MatchSet, tol: f64) -> MatchSet {
    let n = m.pairs.len();
    if n <= 2 {
        return m.clone();
    }
    let mut votes = vec![0usize; n];
    for i in 0..n {
        let (pi, qi) = m.pairs[i];
        for j in i + 1..n {
            let (pj, qj) = m.pairs[j];
            let dp = (pi.0 - pj.0).hypot(pi.1 - pj.1);
            let dq = (qi.0 - qj.0).hypot(qi.1 - qj.1);
            if (dp - dq).abs() <= tol {
                votes[i] += 1;
                votes[j] += 1;
            }
        }
    }
    let top = votes.iter().copied().max().unwrap_or(0);
    let need = (top / 2).max(3);
    let pairs = m
        .pairs
        .iter()
        .zip(&votes)
        .filter(|(_, &v)| v >= need)
        .map(|(p, _)| *p)
        .collect();
    MatchSet { pairs }
}

/// Best and second-best Hamming neighbors (rotation-searched). The second
/// distance is `u32::MAX` when only one candidate exists, which always
/// passes the ratio test.
fn nearest_two(query: &RotDescriptor, candidates: &[RotDescriptor]) -> Option<(usize, u32, u32)> {
    let mut best: Option<(usize, u32)> = None;
    let mut second = u32::MAX;
    for (j, c) in candidates.iter().enumerate() {
        let d = hamming_rot(query, c);
        match best {
            None => best = Some((j, d)),
            Some((_, bd)) if d < bd => {
                second = bd;
                best = Some((j, d));
            }
            Some(_) if d < second => second = d,
            _ => {}
        }
    }
    best.map(|(j, d)| (j, d, second))
}
