//! Localization in the graph: place retrieval filtered by scan matching.
//!
//! Retrieval proposes candidate nodes by descriptor distance; each candidate
//! is then scan-matched against the query with no initial guess (the
//! relative pose at a loop closure is unknown), and only accepted matches
//! survive. An empty result list is the normal "not localized" signal.
//!
//! Pure given snapshot inputs; safe to run on a worker thread alongside the
//! maintainer as long as results are consumed with at most one frame of
//! staleness.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::{Scan2D, Transform2};
use crate::placerec::{Descriptor, PlaceIndex};
use crate::scanmatch::{detect_features, match_scans_with_features, FeatureSet, MatcherConfig};
use crate::topograph::{LocationNode, NodeId, TopoGraph};

/// An accepted localization hypothesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizedNode {
    pub node_id: NodeId,
    /// Node observation frame from robot frame.
    pub t_loc: Transform2,
    /// Scan-match IoU score.
    pub score: f64,
}

/// Localization results tagged with the frame they were computed from, so a
/// consumer can drop stale results.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalizationResult {
    pub frame_id: u64,
    pub nodes: Vec<LocalizedNode>,
}

/// Per-candidate audit record for the debug dump.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateDebug {
    pub node_id: u32,
    pub descriptor_distance: f64,
    pub score: f64,
    pub inliers: usize,
    pub verdict: String,
}

/// Lazily built per-node feature cache; detection is deterministic, so a
/// node's stored-scan features are computed once per map lifetime and shared
/// by the localizer and the maintainer.
#[derive(Default)]
pub struct FeatureCache {
    features: BTreeMap<NodeId, FeatureSet>,
}

impl FeatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, node: &LocationNode, detector: &str) -> &FeatureSet {
        self.features
            .entry(node.id)
            .or_insert_with(|| detect_features(&node.scan, detector))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizerConfig {
    /// Retrieval depth.
    pub top_k: usize,
    /// Run localization every `stride` frames.
    pub stride: u64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            stride: 1,
        }
    }
}

impl LocalizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.top_k == 0 {
            return Err("top_k must be positive".into());
        }
        if self.stride == 0 {
            return Err("stride must be positive".into());
        }
        Ok(())
    }
}

/// Retrieves the top-k most similar nodes (minus `exclude`), scan-matches
/// each against the query, and returns accepted hypotheses sorted by
/// descending score (ties toward the lower node id).
pub fn localize(
    scan: &Scan2D,
    descriptor: &Descriptor,
    g: &TopoGraph,
    index: &PlaceIndex,
    exclude: &BTreeSet<NodeId>,
    cache: &mut FeatureCache,
    loc_cfg: &LocalizerConfig,
    matcher: &MatcherConfig,
) -> Vec<LocalizedNode> {
    localize_with_debug(scan, descriptor, g, index, exclude, cache, loc_cfg, matcher).0
}

/// As [`localize`], also returning the per-candidate audit trail.
#[allow(clippy::too_many_arguments)]
pub fn localize_with_debug(
    scan: &Scan2D,
    descriptor: &Descriptor,
    g: &TopoGraph,
    index: &PlaceIndex,
    exclude: &BTreeSet<NodeId>,
    cache: &mut FeatureCache,
    loc_cfg: &LocalizerConfig,
    matcher: &MatcherConfig,
) -> (Vec<LocalizedNode>, Vec<CandidateDebug>) {
    let mut debug = Vec::new();
    // Over-fetch so exclusions do not eat into the candidate budget.
    let candidates = index.query_top_k(descriptor, loc_cfg.top_k + exclude.len());
    let query_features = detect_features(scan, &matcher.detector);

    let mut out = Vec::new();
    let mut considered = 0;
    for cand in candidates {
        if exclude.contains(&cand.node_id) {
            continue;
        }
        if considered >= loc_cfg.top_k {
            break;
        }
        considered += 1;
        let Some(node) = g.node(cand.node_id) else {
            continue;
        };
        // Matching node scan against query: the transform maps the robot
        // frame into the node's observation frame.
        let node_features = cache.get(node, &matcher.detector);
        let result = match_scans_with_features(
            &node.scan,
            node_features,
            scan,
            &query_features,
            None,
            matcher,
        );
        debug.push(CandidateDebug {
            node_id: cand.node_id.0,
            descriptor_distance: cand.distance,
            score: result.score,
            inliers: result.inliers,
            verdict: if result.accepted {
                "accepted".to_string()
            } else {
                "rejected".to_string()
            },
        });
        if result.accepted {
            out.push(LocalizedNode {
                node_id: cand.node_id,
                t_loc: result.transform,
                score: result.score,
            });
        }
    }
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.node_id.cmp(&b.node_id))
    });
    (out, debug)
}
