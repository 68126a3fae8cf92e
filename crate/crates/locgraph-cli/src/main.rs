use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use locgraph::evaluation::{evaluate, EvalConfig};
use locgraph::harness::{
    benchmark_matching, generate_pair_suite, load_external_descriptors, load_frames,
    load_pair_suite, load_trajectory, load_world, render_svg, run_mapping, simulate_sensors,
    steps_from_jsonl, steps_to_jsonl, synth_aliased_world, synth_world, write_pair_suite,
    write_sequence, RunConfig,
};
use locgraph::topograph::{deserialize_graph, serialize_graph, to_dot, to_graphml};

/// Exit code for configuration errors (bad flags, bad config file).
const EXIT_CONFIG: u8 = 2;
/// Exit code for data errors (unreadable or corrupt inputs).
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "locgraph",
    about = "Topological mapping harness: synthesize, replay, evaluate, benchmark, render"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Layered JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, AppError> {
        match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| AppError::config(e.to_string())),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world, trajectory, and sensor sequence.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output sequence directory.
        #[arg(long)]
        out: PathBuf,
        /// Build the descriptor-aliased two-room world instead of the
        /// configured room grid.
        #[arg(long, default_value_t = false)]
        aliased: bool,
        /// Override the configured odometry noise stds.
        #[arg(long)]
        linear_std: Option<f64>,
        #[arg(long)]
        angular_std: Option<f64>,
    },
    /// Replay a sequence into a topological map.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Sequence directory produced by `synth` (or compatible).
        #[arg(long)]
        seq: PathBuf,
        /// Output directory for map, logs, and perf stats.
        #[arg(long)]
        out: PathBuf,
        /// Descriptor encoder tag override.
        #[arg(long)]
        encoder: Option<String>,
        /// Localization stride override.
        #[arg(long)]
        stride: Option<u64>,
        /// External descriptor table (defaults to descriptors.csv in the
        /// sequence directory when the encoder is `external`).
        #[arg(long)]
        descriptors: Option<PathBuf>,
    },
    /// Evaluate a map against its sequence's ground truth.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        /// Endpoint pairs to sample.
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark scan matching over a pair suite.
    BenchMatch {
        #[command(flatten)]
        config: ConfigArgs,
        /// Existing pairs CSV (scan_a,scan_b,dx,dy,dtheta,iou).
        #[arg(long, conflicts_with = "synth")]
        pairs: Option<PathBuf>,
        /// Generate a synthetic suite of this many pairs first.
        #[arg(long)]
        synth: Option<usize>,
        /// Directory for a generated suite.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a map (and optional world / step log) as SVG.
    Render {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seq: Option<PathBuf>,
        #[arg(long)]
        steps: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a map to an interchange format.
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_parser = ["graphml", "dot"])]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

struct AppError {
    message: String,
    exit: u8,
}

impl AppError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            exit: EXIT_CONFIG,
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            exit: EXIT_DATA,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit)
        }
    }
}

fn dispatch(command: Command) -> Result<(), AppError> {
    match command {
        Command::Synth {
            config,
            seed,
            out,
            aliased,
            linear_std,
            angular_std,
        } => {
            let mut cfg = config.load()?;
            if let Some(v) = linear_std {
                cfg.noise.linear_std = v;
            }
            if let Some(v) = angular_std {
                cfg.noise.angular_std = v;
            }
            cfg.noise.seed = seed;
            cfg.validate()
                .map_err(|e| AppError::config(e.to_string()))?;
            let (world, trajectory) = if aliased {
                synth_aliased_world(seed)
            } else {
                synth_world(seed, &cfg.world).map_err(|e| AppError::config(e.to_string()))?
            };
            let frames = simulate_sensors(&world, &trajectory, &cfg.noise, &cfg.sensor);
            write_sequence(&out, &world, &trajectory, &frames)
                .map_err(|e| AppError::data(e.to_string()))?;
            println!(
                "wrote {} frames over {} free cells to {}",
                frames.len(),
                world.free_count(),
                out.display()
            );
            Ok(())
        }
        Command::Run {
            config,
            seq,
            out,
            encoder,
            stride,
            descriptors,
        } => {
            let mut cfg = config.load()?;
            if let Some(tag) = encoder {
                cfg.encoder = tag;
            }
            if let Some(s) = stride {
                cfg.localizer.stride = s;
            }
            cfg.validate()
                .map_err(|e| AppError::config(e.to_string()))?;

            let frames = load_frames(&seq).map_err(|e| AppError::data(e.to_string()))?;
            let external = if cfg.encoder_tag() == "external" {
                let path = descriptors.unwrap_or_else(|| locgraph::harness::descriptors_path(&seq));
                Some(load_external_descriptors(&path).map_err(|e| AppError::data(e.to_string()))?)
            } else {
                None
            };
            let output = run_mapping(&frames, &cfg, external.as_ref())
                .map_err(|e| AppError::data(e.to_string()))?;

            std::fs::create_dir_all(&out).map_err(|e| AppError::data(e.to_string()))?;
            serialize_graph(&output.graph, &out.join("map.topograph"))
                .map_err(|e| AppError::data(e.to_string()))?;
            write_text(&out.join("steps.jsonl"), &steps_to_jsonl(&output.steps))?;
            let loc_log: String = output
                .localize_log
                .iter()
                .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
                .collect();
            write_text(&out.join("localize.jsonl"), &loc_log)?;
            let mut perf = output.perf.clone();
            perf.map_bytes = std::fs::metadata(out.join("map.topograph"))
                .map(|m| m.len() as usize)
                .unwrap_or(perf.map_bytes);
            write_text(
                &out.join("perf.json"),
                &serde_json::to_string_pretty(&perf).expect("perf serializes"),
            )?;
            println!(
                "mapped {} frames into {} nodes / {} edges ({} loop closures)",
                output.perf.frames,
                output.graph.node_count(),
                output.graph.edge_count(),
                output.perf.loop_closures
            );
            Ok(())
        }
        Command::Eval {
            config,
            graph,
            seq,
            pairs,
            seed,
            out,
        } => {
            let cfg = config.load()?;
            let mut eval_cfg: EvalConfig = cfg.eval.clone();
            if let Some(n) = pairs {
                eval_cfg.n_pairs = n;
            }
            if let Some(s) = seed {
                eval_cfg.seed = s;
            }
            let g = deserialize_graph(&graph).map_err(|e| AppError::data(e.to_string()))?;
            let world = load_world(&seq).map_err(|e| AppError::data(e.to_string()))?;
            let trajectory = load_trajectory(&seq).map_err(|e| AppError::data(e.to_string()))?;
            let report = evaluate(&g, &world, &trajectory, &eval_cfg)
                .map_err(|e| AppError::data(e.to_string()))?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            match out {
                Some(path) => write_text(&path, &json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::BenchMatch {
            config,
            pairs,
            synth,
            dir,
            seed,
            out,
        } => {
            let cfg = config.load()?;
            let (suite, skipped) = match (pairs, synth) {
                (Some(csv), None) => {
                    load_pair_suite(&csv).map_err(|e| AppError::data(e.to_string()))?
                }
                (None, Some(n)) => {
                    let suite = generate_pair_suite(seed, n, 0.2);
                    if let Some(dir) = dir {
                        write_pair_suite(&dir, &suite)
                            .map_err(|e| AppError::data(e.to_string()))?;
                    }
                    (suite, 0)
                }
                _ => {
                    return Err(AppError::config(
                        "bench-match needs exactly one of --pairs or --synth",
                    ))
                }
            };
            let mut report = benchmark_matching(&suite, &cfg.matcher);
            report.skipped_rows = skipped;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            match out {
                Some(path) => write_text(&path, &json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Render {
            graph,
            seq,
            steps,
            out,
        } => {
            let g = deserialize_graph(&graph).map_err(|e| AppError::data(e.to_string()))?;
            let world = match seq {
                Some(seq) => Some(load_world(&seq).map_err(|e| AppError::data(e.to_string()))?),
                None => None,
            };
            let step_records = match steps {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| AppError::data(e.to_string()))?;
                    steps_from_jsonl(&text).map_err(|e| AppError::data(e.to_string()))?
                }
                None => Vec::new(),
            };
            write_text(&out, &render_svg(&g, world.as_ref(), &step_records))?;
            Ok(())
        }
        Command::Export { graph, format, out } => {
            let g = deserialize_graph(&graph).map_err(|e| AppError::data(e.to_string()))?;
            let text = match format.as_str() {
                "graphml" => to_graphml(&g),
                "dot" => to_dot(&g),
                other => return Err(AppError::config(format!("unknown format {other}"))),
            };
            write_text(&out, &text)?;
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AppError::data(e.to_string()))?;
        }
    }
    std::fs::write(path, text).map_err(|e| AppError::data(e.to_string()))
}
