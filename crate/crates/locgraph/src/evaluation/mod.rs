//! Ground-truth map-quality metrics: connected components, coverage of the
//! main component, SPL with graph-path stitching, and edge-consistency
//! checks. Everything here is offline batch computation over the debug
//! sidecar; the mapper itself never touches ground truth.

mod footprint;
mod metrics;
mod pathing;
mod world;

pub use footprint::{footprint, CellSet, FootprintError, LocationFootprint};
pub use metrics::{
    connected_components, coverage, edge_consistent, evaluate, node_footprints, spl, EvalConfig,
    EvalError, MetricsReport, PairReason, PairRecord, SplContext,
};
pub use pathing::{distance_field, grid_shortest_path, PathError};
pub use world::{pose_in_free_space, CellState, WorldIoError, WorldModel};
