//! The per-step graph maintaining state machine.
//!
//! Each step evaluates four cases strictly in order: stay inside the current
//! location, move along an existing edge, switch to a localized node (loop
//! closure), or add a new location. Every case that adds a node also links
//! it to the previous location, so the graph stays connected by
//! construction. Strictly single-threaded per map instance.

use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, Scan2D, Transform2};
use crate::localizer::{FeatureCache, LocalizedNode};
use crate::placerec::Descriptor;
use crate::scanmatch::{match_scans_with_features, scan_overlap, FeatureSet, MatcherConfig};
use crate::topograph::{LocationNode, NodeId, TopoEdge, TopoGraph};

/// The robot's state in the graph: current location and the transform from
/// that location's observation point to the robot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub v_cur: NodeId,
    /// Current-location frame from robot frame.
    pub t_cur: Transform2,
}

/// Inputs of one maintainer step.
#[derive(Clone, Debug)]
pub struct StepInput {
    /// Odometry increment, previous robot frame from current robot frame.
    pub odom: Transform2,
    /// Point cloud captured this frame (kept for audit; the projected scan
    /// travels alongside).
    pub cloud: PointCloud,
    /// Accepted localization hypotheses, best score first.
    pub loc_results: Vec<LocalizedNode>,
    pub frame_id: u64,
    pub timestamp: f64,
}

/// Which case fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCase {
    Stay,
    EdgeTransition,
    LoopClosure,
    NewNode,
}

impl std::fmt::Display for StepCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StepCase::Stay => "stay",
            StepCase::EdgeTransition => "edge_transition",
            StepCase::LoopClosure => "loop_closure",
            StepCase::NewNode => "new_node",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub case: StepCase,
    pub state: RobotState,
    pub edges_added: Vec<TopoEdge>,
    pub node_added: Option<NodeId>,
}

#[derive(Debug)]
pub enum MaintainerError {
    InconsistentState(NodeId),
    OdomStepTooLarge { norm: f64, max: f64 },
    NonFiniteInput,
}

impl std::fmt::Display for MaintainerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaintainerError::InconsistentState(id) => {
                write!(f, "current location {id} missing from graph")
            }
            MaintainerError::OdomStepTooLarge { norm, max } => {
                write!(
                    f,
                    "odometry step {norm:.3} m exceeds configured max {max:.3} m"
                )
            }
            MaintainerError::NonFiniteInput => write!(f, "non-finite step input"),
        }
    }
}

impl std::error::Error for MaintainerError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaintainerConfig {
    /// Translation bound of "inside the current location", meters.
    pub location_radius: f64,
    /// Minimum scan IoU to stay in the current location.
    pub stay_threshold: f64,
    /// Minimum scan IoU for a localized node to take over (loop closure).
    pub loop_threshold: f64,
    /// Upper bound on a single odometry increment, meters.
    pub max_odom_step: f64,
}

impl Default for MaintainerConfig {
    fn default() -> Self {
        Self {
            location_radius: 6.0,
            stay_threshold: 0.2,
            loop_threshold: 0.2,
            max_odom_step: 1.0,
        }
    }
}

impl MaintainerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.location_radius > 0.0) {
            return Err("location_radius must be positive".into());
        }
        for (name, v) in [
            ("stay_threshold", self.stay_threshold),
            ("loop_threshold", self.loop_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.max_odom_step > 0.0) {
            return Err("max_odom_step must be positive".into());
        }
        Ok(())
    }
}

/// Whether the robot is still inside a location: translation within the
/// location radius and sufficient scan overlap at the current transform.
pub fn inside_check(
    s: &RobotState,
    scan: &Scan2D,
    node: &LocationNode,
    cfg: &MaintainerConfig,
) -> bool {
    if s.t_cur.translation_norm() > cfg.location_radius {
        return false;
    }
    scan_overlap(scan, &node.scan, &s.t_cur.invert()) >= cfg.stay_threshold
}

/// Executes one maintainer step, mutating the graph and returning the new
/// state. `scan` is the projection of `input.cloud`, `frame_features` its
/// corner features, and `descriptor` its place descriptor, all computed
/// upstream once per frame (the localizer consumes the same trio).
#[allow(clippy::too_many_arguments)]
pub fn step(
    g: &mut TopoGraph,
    s: &RobotState,
    input: &StepInput,
    scan: &Scan2D,
    frame_features: &FeatureSet,
    descriptor: &Descriptor,
    cache: &mut FeatureCache,
    cfg: &MaintainerConfig,
    matcher: &MatcherConfig,
) -> Result<StepOutcome, MaintainerError> {
    if !g.contains(s.v_cur) {
        return Err(MaintainerError::InconsistentState(s.v_cur));
    }
    if !input.odom.is_finite() || !s.t_cur.is_finite() {
        return Err(MaintainerError::NonFiniteInput);
    }
    let odom_norm = input.odom.translation_norm();
    if odom_norm > cfg.max_odom_step {
        return Err(MaintainerError::OdomStepTooLarge {
            norm: odom_norm,
            max: cfg.max_odom_step,
        });
    }

    // Odometry-predicted transform: current-location frame from robot.
    let predicted = s.t_cur.compose(&input.odom);
    let predicted_state = RobotState {
        v_cur: s.v_cur,
        t_cur: predicted,
    };

    // Case 1: still inside the current location.
    {
        let node = g.node(s.v_cur).expect("checked above");
        if inside_check(&predicted_state, scan, node, cfg) {
            return Ok(StepOutcome {
                case: StepCase::Stay,
                state: predicted_state,
                edges_added: Vec::new(),
                node_added: None,
            });
        }
    }

    // Case 2: move along an edge. Each neighbor scan is matched with the
    // edge-derived transform as the initial guess; the nearest accepted
    // neighbor (smallest robot-to-observation-point distance) wins.
    {
        let mut best: Option<(NodeId, Transform2, f64)> = None;
        let neighbors = g.neighbors(s.v_cur).expect("checked above");
        for (n_id, edge_t) in neighbors {
            let node = g.node(n_id).expect("edge endpoints exist");
            // neighbor frame from robot = inv(cur_from_neighbor) * cur_from_robot
            let guess = edge_t.invert().compose(&predicted);
            let node_features = cache.get(node, &matcher.detector);
            let result = match_scans_with_features(
                &node.scan,
                node_features,
                scan,
                frame_features,
                Some(&guess),
                matcher,
            );
            if !result.accepted {
                continue;
            }
            let dist = result.transform.translation_norm();
            let better = match &best {
                None => true,
                Some((bid, _, bdist)) => {
                    dist < *bdist - 1e-12 || ((dist - *bdist).abs() <= 1e-12 && n_id < *bid)
                }
            };
            if better {
                best = Some((n_id, result.transform, dist));
            }
        }
        if let Some((next_id, t, _)) = best {
            return Ok(StepOutcome {
                case: StepCase::EdgeTransition,
                state: RobotState {
                    v_cur: next_id,
                    t_cur: t,
                },
                edges_added: Vec::new(),
                node_added: None,
            });
        }
    }

    // Case 3: switch to a localized node, closing a loop. Results arrive
    // best score first; the first one passing the overlap check wins.
    for loc in &input.loc_results {
        if loc.node_id == s.v_cur || !g.contains(loc.node_id) {
            continue;
        }
        let node = g.node(loc.node_id).expect("checked");
        let overlap = scan_overlap(scan, &node.scan, &loc.t_loc.invert());
        if overlap < cfg.loop_threshold {
            continue;
        }
        // Relative transform previous-location from localized-location,
        // chained through the shared robot frame of this very step.
        let rel = predicted.compose(&loc.t_loc.invert());
        g.add_edge(s.v_cur, loc.node_id, rel)
            .expect("endpoints verified");
        let edge = TopoEdge {
            from: s.v_cur,
            to: loc.node_id,
            rel_transform: rel,
        };
        return Ok(StepOutcome {
            case: StepCase::LoopClosure,
            state: RobotState {
                v_cur: loc.node_id,
                t_cur: loc.t_loc,
            },
            edges_added: vec![edge],
            node_added: None,
        });
    }

    // Case 4: add a new location observed from the robot's position. The
    // robot frame becomes the new observation frame, so the edge to the
    // previous location carries the odometry-predicted transform, and every
    // localized node links in through its scan-matched transform.
    let new_id = g.add_node(scan.clone(), descriptor.clone(), input.timestamp);
    let mut edges_added = Vec::new();
    g.add_edge(s.v_cur, new_id, predicted)
        .expect("endpoints exist");
    edges_added.push(TopoEdge {
        from: s.v_cur,
        to: new_id,
        rel_transform: predicted,
    });
    for loc in &input.loc_results {
        if loc.node_id == new_id || loc.node_id == s.v_cur || !g.contains(loc.node_id) {
            continue;
        }
        let rel = loc.t_loc.invert();
        g.add_edge(new_id, loc.node_id, rel)
            .expect("endpoints exist");
        edges_added.push(TopoEdge {
            from: new_id,
            to: loc.node_id,
            rel_transform: rel,
        });
    }
    Ok(StepOutcome {
        case: StepCase::NewNode,
        state: RobotState {
            v_cur: new_id,
            t_cur: Transform2::identity(),
        },
        edges_added,
        node_added: Some(new_id),
    })
}
