//! 2D scan matching: cloud projection, corner features, descriptor
//! matching, and robust rigid alignment with iterative outlier removal.
//!
//! All operations here are pure functions of their inputs; callers may match
//! different candidate pairs in parallel with no shared state.

mod estimate;
mod features;
mod matching;
mod project;

pub use estimate::{estimate_transform, estimate_transform_report, fit_rigid, EstimateReport};
pub use features::{
    detect_features, hamming, hamming_rot, known_detector, BinaryDescriptor, FeatureSet, Keypoint,
    RotDescriptor, DESCRIPTOR_BITS, DESCRIPTOR_ROTATIONS,
};
pub use matching::{filter_consistent_pairs, match_features, MatchResult, MatchSet, MatcherConfig};
pub use project::{project_cloud, ProjectionConfig};

use crate::geometry::{Scan2D, Transform2};

/// Matches two scans end to end: detect corners on both, match descriptors
/// (optionally gated by `guess`, oriented `a`-frame from `b`-frame), estimate
/// the aligning transform, and score it by occupied-cell IoU.
///
/// The result transform maps `b`'s sensor frame into `a`'s. A result is
/// accepted when a transform was found, its surviving matches reach
/// `min_matches`, and the IoU score reaches `accept_score`; otherwise the
/// result carries `accepted = false` (this function never fails).
pub fn match_scans(
    a: &Scan2D,
    b: &Scan2D,
    guess: Option<&Transform2>,
    cfg: &MatcherConfig,
) -> MatchResult {
    let fa = detect_features(a, &cfg.detector);
    let fb = detect_features(b, &cfg.detector);
    match_scans_with_features(a, &fa, b, &fb, guess, cfg)
}

/// As [`match_scans`], with feature sets supplied by the caller so repeated
/// matches against the same stored scan can reuse its detection.
pub fn match_scans_with_features(
    a: &Scan2D,
    fa: &FeatureSet,
    b: &Scan2D,
    fb: &FeatureSet,
    guess: Option<&Transform2>,
    cfg: &MatcherConfig,
) -> MatchResult {
    // Pairs run (p in b, q in a), so the fitted transform maps b onto a,
    // matching the guess orientation.
    let m = match_features(fb, fa, guess, cfg);
    let m = filter_consistent_pairs(&m, (cfg.delta * 0.5).max(0.25));
    let report = estimate_transform_report(&m, guess, cfg);
    let Some(transform) = report.transform else {
        return MatchResult::rejected();
    };
    if !transform.is_finite() {
        return MatchResult::rejected();
    }
    let score = scan_overlap(a, b, &transform);
    let inliers = report.survivors.len();
    MatchResult {
        transform,
        inliers,
        score,
        accepted: inliers >= cfg.min_matches && score >= cfg.accept_score,
    }
}

/// Intersection-over-union of occupied cells after mapping `b`'s occupied
/// cells through `t` into `a`'s grid. Returns 0 when both scans are empty.
pub fn scan_overlap(a: &Scan2D, b: &Scan2D, t: &Transform2) -> f64 {
    let a_count = a.occupied_count();
    if a_count == 0 && b.occupied_count() == 0 {
        return 0.0;
    }
    let inv_origin = a.origin().invert();
    let res = f64::from(a.resolution());

    let mut mapped: Vec<(i64, i64)> = b
        .occupied_cells()
        .map(|(ix, iy)| {
            let p = t.apply(b.cell_to_metric(ix, iy));
            let local = inv_origin.apply(p);
            (
                (local.0 / res).floor() as i64,
                (local.1 / res).floor() as i64,
            )
        })
        .collect();
    mapped.sort_unstable();
    mapped.dedup();

    let mut intersection = 0usize;
    for &(ix, iy) in &mapped {
        if ix >= 0 && iy >= 0 && ix < i64::from(a.width()) && iy < i64::from(a.height()) {
            if a.get(ix as u16, iy as u16) {
                intersection += 1;
            }
        }
    }
    let union = a_count + mapped.len() - intersection;
    if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    }
}
