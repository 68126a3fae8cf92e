//! The replay and synthesis harness: synthetic worlds and trajectories,
//! sensor simulation with odometry noise, sequence storage, end-to-end
//! mapping runs with performance accounting, the scan-matching benchmark,
//! and SVG rendering. This is what the CLI drives.

mod bench;
mod config;
mod engine;
mod render;
mod sensors;
mod sequence;
mod worldgen;

pub use bench::{
    benchmark_matching, generate_pair_suite, load_pair_suite, write_pair_suite, BenchIoError,
    BenchReport, MatchPair, CORRECT_THRESHOLD_M,
};
pub use config::{ConfigError, RunConfig};
pub use engine::{
    peak_rss_kb, run_mapping, steps_from_jsonl, steps_to_jsonl, EdgeRecord, LocalizeRecord,
    PerfStats, RunError, RunOutput, StepRecord,
};
pub use render::render_svg;
pub use sensors::{scan_cloud, simulate_sensors, NoiseModel, SensorConfig, SequenceFrame};
pub use sequence::{
    descriptors_path, load_external_descriptors, load_frames, load_trajectory, load_world,
    write_external_descriptors, write_sequence, SequenceError,
};
pub use worldgen::{
    synth_aliased_world, synth_ring_world, synth_world, WorldGenError, WorldParams,
};
