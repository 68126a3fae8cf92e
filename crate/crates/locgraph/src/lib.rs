//! Online topological mapping as a graph of locally aligned locations.
//!
//! The engine consumes point-cloud + odometry streams and maintains a graph
//! whose nodes are locations (each storing a 2D scan and a place descriptor)
//! and whose edges carry relative SE(2) transforms between observation
//! points. No global metric coordinates are kept anywhere in the map; loop
//! closures reset local drift instead of triggering global optimization.
//!
//! Module map:
//! - [`geometry`]: SE(2) transforms, point clouds, packed scan grids.
//! - [`scanmatch`]: projection, corner features, robust rigid alignment.
//! - [`placerec`]: place descriptors and top-k retrieval.
//! - [`topograph`]: the graph of locations and its persistence.
//! - [`localizer`]: retrieval + scan-match filtering into localization
//!   hypotheses.
//! - [`maintainer`]: the per-step graph update state machine.
//! - [`evaluation`]: ground-truth map quality metrics (components, coverage,
//!   SPL, edge consistency).
//! - [`harness`]: synthetic worlds, sensor simulation, replay, benchmarks,
//!   and rendering.

pub mod evaluation;
pub mod geometry;
pub mod harness;
pub mod localizer;
pub mod maintainer;
pub mod placerec;
pub mod scanmatch;
pub mod topograph;
