use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::Transform2;
use crate::localizer::{localize_with_debug, CandidateDebug, FeatureCache, LocalizedNode};
use crate::maintainer::{step, RobotState, StepCase, StepInput};
use crate::placerec::{describe, Descriptor, PlaceIndex};
use crate::scanmatch::{detect_features, project_cloud};
use crate::topograph::TopoGraph;

use super::config::RunConfig;
use super::sensors::SequenceFrame;

/// One line of the replayable step log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub frame_id: u64,
    pub case: StepCase,
    pub v_cur: u32,
    pub t_cur: Transform2,
    pub edges_added: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: u32,
    pub to: u32,
    pub rel: Transform2,
}

/// Per-frame localization audit, one JSONL row per localized frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalizeRecord {
    pub frame_id: u64,
    pub candidates: Vec<CandidateDebug>,
}

/// Wall-clock and footprint measurements of a run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PerfStats {
    pub frames: usize,
    pub map_update_ms_mean: f64,
    pub map_update_ms_max: f64,
    pub localize_ms_mean: f64,
    pub loop_closure_ms_mean: f64,
    pub loop_closures: usize,
    pub peak_rss_kb: Option<u64>,
    pub map_bytes: usize,
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Frame { frame: u64, message: String },
    Maintainer(crate::maintainer::MaintainerError),
    MissingExternalDescriptor(u64),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "run config: {m}"),
            RunError::Frame { frame, message } => write!(f, "frame {frame}: {message}"),
            RunError::Maintainer(e) => write!(f, "maintainer: {e}"),
            RunError::MissingExternalDescriptor(id) => {
                write!(f, "no external descriptor for frame {id}")
            }
        }
    }
}

impl std::error::Error for RunError {}

/// Everything a finished mapping run produces.
pub struct RunOutput {
    pub graph: TopoGraph,
    pub steps: Vec<StepRecord>,
    pub localize_log: Vec<LocalizeRecord>,
    pub perf: PerfStats,
}

/// Replays a frame sequence through the localizer and maintainer. The first
/// frame bootstraps the graph with its root location; every further frame
/// runs place retrieval (on the configured stride), scan-match filtering,
/// and one maintainer step. Debug poses land in the graph's evaluation
/// sidecar, never in the mapping state.
pub fn run_mapping(
    frames: &[SequenceFrame],
    cfg: &RunConfig,
    external: Option<&BTreeMap<u64, Descriptor>>,
) -> Result<RunOutput, RunError> {
    cfg.validate()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let encoder = cfg.encoder_tag();
    if encoder == "external" && external.is_none() {
        return Err(RunError::Config(
            "encoder 'external' needs a descriptor table".into(),
        ));
    }

    let mut graph = TopoGraph::new();
    let mut index = PlaceIndex::new(encoder);
    let mut cache = FeatureCache::new();
    let mut state: Option<RobotState> = None;
    let mut steps = Vec::with_capacity(frames.len());
    let mut localize_log = Vec::new();

    let mut update_ms = Vec::with_capacity(frames.len());
    let mut localize_ms = Vec::new();
    let mut closure_ms = Vec::new();

    for frame in frames {
        let t_frame = Instant::now();
        let scan = project_cloud(&frame.cloud, &cfg.projection);
        let frame_features = detect_features(&scan, &cfg.matcher.detector);
        let descriptor = match (encoder, external) {
            ("external", Some(table)) => table
                .get(&frame.frame_id)
                .cloned()
                .or_else(|| frame.external_descriptor.clone())
                .ok_or(RunError::MissingExternalDescriptor(frame.frame_id))?,
            _ => describe(&scan, None, encoder).map_err(|e| RunError::Frame {
                frame: frame.frame_id,
                message: e.to_string(),
            })?,
        };

        let Some(current) = state else {
            // Bootstrap: the first observation becomes the root location.
            let id = graph.add_node(scan, descriptor.clone(), frame.timestamp);
            graph.set_debug_pose(id, frame.debug_pose);
            index.insert(id, descriptor).expect("fresh index");
            state = Some(RobotState {
                v_cur: id,
                t_cur: Transform2::identity(),
            });
            steps.push(StepRecord {
                frame_id: frame.frame_id,
                case: StepCase::NewNode,
                v_cur: id.0,
                t_cur: Transform2::identity(),
                edges_added: Vec::new(),
            });
            update_ms.push(t_frame.elapsed().as_secs_f64() * 1e3);
            continue;
        };

        // Localization, on its stride, excluding the current location and
        // its graph neighbors. Synchronous replay keeps results fresh; a
        // concurrent deployment would drop results older than one frame.
        let mut loc_results: Vec<LocalizedNode> = Vec::new();
        if frame.frame_id % cfg.localizer.stride == 0 {
            let t_loc = Instant::now();
            let mut exclude: BTreeSet<_> = [current.v_cur].into();
            for (n, _) in graph.neighbors(current.v_cur).expect("state validated") {
                exclude.insert(n);
            }
            let (results, debug) = localize_with_debug(
                &scan,
                &descriptor,
                &graph,
                &index,
                &exclude,
                &mut cache,
                &cfg.localizer,
                &cfg.matcher,
            );
            loc_results = results;
            localize_ms.push(t_loc.elapsed().as_secs_f64() * 1e3);
            localize_log.push(LocalizeRecord {
                frame_id: frame.frame_id,
                candidates: debug,
            });
        }

        let input = StepInput {
            odom: frame.odom,
            cloud: frame.cloud.clone(),
            loc_results,
            frame_id: frame.frame_id,
            timestamp: frame.timestamp,
        };
        let outcome = step(
            &mut graph,
            &current,
            &input,
            &scan,
            &frame_features,
            &descriptor,
            &mut cache,
            &cfg.maintainer,
            &cfg.matcher,
        )
        .map_err(RunError::Maintainer)?;

        if let Some(new_id) = outcome.node_added {
            graph.set_debug_pose(new_id, frame.debug_pose);
            index
                .insert(new_id, descriptor)
                .expect("fresh node id is never indexed");
        }
        let elapsed_ms = t_frame.elapsed().as_secs_f64() * 1e3;
        update_ms.push(elapsed_ms);
        if outcome.case == StepCase::LoopClosure {
            closure_ms.push(elapsed_ms);
        }
        steps.push(StepRecord {
            frame_id: frame.frame_id,
            case: outcome.case,
            v_cur: outcome.state.v_cur.0,
            t_cur: outcome.state.t_cur,
            edges_added: outcome
                .edges_added
                .iter()
                .map(|e| EdgeRecord {
                    from: e.from.0,
                    to: e.to.0,
                    rel: e.rel_transform,
                })
                .collect(),
        });
        state = Some(outcome.state);
    }

    let mean = |v: &[f64]| -> f64 {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let map_bytes = crate::topograph::graph_to_bytes(&graph).len();
    let perf = PerfStats {
        frames: frames.len(),
        map_update_ms_mean: mean(&update_ms),
        map_update_ms_max: update_ms.iter().cloned().fold(0.0, f64::max),
        localize_ms_mean: mean(&localize_ms),
        loop_closure_ms_mean: mean(&closure_ms),
        loop_closures: closure_ms.len(),
        peak_rss_kb: peak_rss_kb(),
        map_bytes,
    };
    Ok(RunOutput {
        graph,
        steps,
        localize_log,
        perf,
    })
}

/// Peak resident set size of this process, when the platform exposes it.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return rest.trim().trim_end_matches(" kB").trim().parse().ok();
        }
    }
    None
}

/// Serializes step records as JSONL.
pub fn steps_to_jsonl(steps: &[StepRecord]) -> String {
    let mut out = String::new();
    for s in steps {
        out.push_str(&serde_json::to_string(s).expect("step serializes"));
        out.push('\n');
    }
    out
}

/// Parses a JSONL step log.
pub fn steps_from_jsonl(text: &str) -> Result<Vec<StepRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
