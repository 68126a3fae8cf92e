use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::WorldModel;
use crate::geometry::{Pose2, Scan2D, Transform2};
use crate::scanmatch::{match_scans, project_cloud, scan_overlap, MatcherConfig};

use super::sensors::{scan_cloud, SensorConfig};
use super::worldgen::{synth_world, WorldParams};

/// One benchmark pair: two scans, the ground-truth transform aligning the
/// second onto the first, and their true IoU at that transform.
#[derive(Clone, Debug)]
pub struct MatchPair {
    pub scan_a: Scan2D,
    pub scan_b: Scan2D,
    pub truth: Transform2,
    pub iou: f64,
}

/// The matching benchmark report: precision over all accepted pairs,
/// recall at the two IoU buckets, and mean per-pair runtime.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub pairs: usize,
    pub accepted: usize,
    pub correct: usize,
    pub precision: f64,
    pub recall_at_50: f64,
    pub recall_at_25: f64,
    pub mean_runtime_ms: f64,
    /// Accepted matches on pairs with zero true overlap.
    pub false_accepts_disjoint: usize,
    pub skipped_rows: usize,
}

/// Correctness threshold on the translation error, meters.
pub const CORRECT_THRESHOLD_M: f64 = 0.5;

/// Runs the matcher over every pair and scores the standard columns. A pair
/// counts as correct when it is accepted and the estimated translation errs
/// from ground truth by less than 0.5 m.
pub fn benchmark_matching(pairs: &[MatchPair], cfg: &MatcherConfig) -> BenchReport {
    let mut accepted = 0;
    let mut correct = 0;
    let mut correct_50 = 0;
    let mut correct_25 = 0;
    let mut total_50 = 0;
    let mut total_25 = 0;
    let mut false_accepts_disjoint = 0;
    let started = Instant::now();
    for pair in pairs {
        let result = match_scans(&pair.scan_a, &pair.scan_b, None, cfg);
        let is_correct = result.accepted && {
            let err =
                (result.transform.dx - pair.truth.dx).hypot(result.transform.dy - pair.truth.dy);
            err < CORRECT_THRESHOLD_M
        };
        if result.accepted {
            accepted += 1;
            if pair.iou == 0.0 {
                false_accepts_disjoint += 1;
            }
        }
        if is_correct {
            correct += 1;
        }
        if pair.iou >= 0.5 {
            total_50 += 1;
            if is_correct {
                correct_50 += 1;
            }
        }
        if pair.iou >= 0.25 {
            total_25 += 1;
            if is_correct {
                correct_25 += 1;
            }
        }
    }
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    BenchReport {
        pairs: pairs.len(),
        accepted,
        correct,
        precision: if accepted == 0 {
            1.0
        } else {
            correct as f64 / accepted as f64
        },
        recall_at_50: if total_50 == 0 {
            0.0
        } else {
            correct_50 as f64 / total_50 as f64
        },
        recall_at_25: if total_25 == 0 {
            0.0
        } else {
            correct_25 as f64 / total_25 as f64
        },
        mean_runtime_ms: if pairs.is_empty() {
            0.0
        } else {
            elapsed_ms / pairs.len() as f64
        },
        false_accepts_disjoint,
        skipped_rows: 0,
    }
}

/// Synthesizes a benchmark suite by transform-perturbation of ray-cast
/// scans: same-place pairs at graded offsets (the recall population) and
/// disjoint pairs from unrelated worlds (the precision population).
pub fn generate_pair_suite(seed: u64, n_pairs: usize, disjoint_fraction: f64) -> Vec<MatchPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensor = SensorConfig::default();
    let projection = crate::scanmatch::ProjectionConfig::default();

    let params = WorldParams {
        clutter_min: 4,
        clutter_max: 6,
        ..WorldParams::default()
    };
    let worlds: Vec<(WorldModel, Vec<Pose2>)> = (0..4)
        .map(|k| synth_world(seed.wrapping_add(1000 + k), &params).unwrap())
        .collect();

    let observe = |world: &WorldModel, pose: &Pose2| -> Scan2D {
        project_cloud(&scan_cloud(world, pose, &sensor), &projection)
    };
    let sample_pose = |rng: &mut ChaCha8Rng, world: &WorldModel, traj: &[Pose2]| -> Pose2 {
        // Jitter around trajectory points keeps poses in open space.
        loop {
            let base = traj[rng.random_range(0..traj.len())];
            let p = Pose2::new(
                base.dx + rng.random_range(-0.3..0.3),
                base.dy + rng.random_range(-0.3..0.3),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            if world.is_free((p.dx, p.dy)) {
                return p;
            }
        }
    };

    let n_disjoint = (n_pairs as f64 * disjoint_fraction).round() as usize;
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let remaining = n_pairs - pairs.len();
        if remaining
            <= n_disjoint.saturating_sub(pairs.iter().filter(|p: &&MatchPair| p.iou == 0.0).count())
        {
            // Disjoint pair: two unrelated worlds.
            let (wa, ta) = &worlds[rng.random_range(0..worlds.len())];
            let (wb, tb) = loop {
                let k = rng.random_range(0..worlds.len());
                if !std::ptr::eq(&worlds[k].0, wa) {
                    break (&worlds[k].0, &worlds[k].1);
                }
            };
            let pa = sample_pose(&mut rng, wa, ta);
            let pb = sample_pose(&mut rng, wb, tb);
            let scan_a = observe(wa, &pa);
            let scan_b = observe(wb, &pb);
            pairs.push(MatchPair {
                scan_a,
                scan_b,
                truth: Transform2::identity(),
                iou: 0.0,
            });
            continue;
        }
        // Same-place pair: half the population at close offsets (the
        // high-IoU recall bucket), half at medium offsets.
        let (world, traj) = &worlds[rng.random_range(0..worlds.len())];
        let pa = sample_pose(&mut rng, world, traj);
        let radius = if rng.random_range(0..2u8) == 0 {
            0.35
        } else {
            1.6
        };
        let delta = Transform2::new(
            rng.random_range(-radius..radius),
            rng.random_range(-radius..radius),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let pb = pa.compose(&delta);
        if !world.is_free((pb.dx, pb.dy)) {
            continue;
        }
        let scan_a = observe(world, &pa);
        let scan_b = observe(world, &pb);
        let truth = pa.relative_to(&pb);
        let iou = scan_overlap(&scan_a, &scan_b, &truth);
        pairs.push(MatchPair {
            scan_a,
            scan_b,
            truth,
            iou,
        });
    }
    pairs
}

#[derive(Debug)]
pub enum BenchIoError {
    Io(std::io::Error),
    Scan(String),
}

impl std::fmt::Display for BenchIoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchIoError::Io(e) => write!(f, "benchmark i/o: {e}"),
            BenchIoError::Scan(m) => write!(f, "benchmark scan: {m}"),
        }
    }
}

impl std::error::Error for BenchIoError {}

impl From<std::io::Error> for BenchIoError {
    fn from(e: std::io::Error) -> Self {
        BenchIoError::Io(e)
    }
}

/// Writes a suite as scan blocks plus the pairs CSV
/// (`scan_a,scan_b,dx,dy,dtheta,iou`, paths relative to the CSV).
pub fn write_pair_suite(dir: &Path, pairs: &[MatchPair]) -> Result<(), BenchIoError> {
    std::fs::create_dir_all(dir.join("scans"))?;
    let mut csv = String::from("scan_a,scan_b,dx,dy,dtheta,iou\n");
    for (i, p) in pairs.iter().enumerate() {
        let a_rel = format!("scans/{i:05}_a.scan");
        let b_rel = format!("scans/{i:05}_b.scan");
        std::fs::write(dir.join(&a_rel), p.scan_a.to_bytes())?;
        std::fs::write(dir.join(&b_rel), p.scan_b.to_bytes())?;
        csv.push_str(&format!(
            "{a_rel},{b_rel},{},{},{},{}\n",
            p.truth.dx, p.truth.dy, p.truth.dtheta, p.iou
        ));
    }
    std::fs::write(dir.join("pairs.csv"), csv)?;
    Ok(())
}

/// Loads a pairs CSV; malformed rows are skipped and counted.
pub fn load_pair_suite(csv_path: &Path) -> Result<(Vec<MatchPair>, usize), BenchIoError> {
    let base = csv_path.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(csv_path)?;
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("scan_a") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            skipped += 1;
            continue;
        }
        let parse = |s: &str| s.trim().parse::<f64>();
        let (Ok(dx), Ok(dy), Ok(dtheta), Ok(iou)) = (
            parse(fields[2]),
            parse(fields[3]),
            parse(fields[4]),
            parse(fields[5]),
        ) else {
            skipped += 1;
            continue;
        };
        let read_scan = |rel: &str| -> Result<Scan2D, BenchIoError> {
            let bytes = std::fs::read(base.join(rel.trim()))?;
            Scan2D::from_bytes(&bytes).map_err(|e| BenchIoError::Scan(e.to_string()))
        };
        let scan_a = match read_scan(fields[0]) {
            Ok(s) => s,
            Err(BenchIoError::Io(e)) => return Err(BenchIoError::Io(e)),
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let scan_b = match read_scan(fields[1]) {
            Ok(s) => s,
            Err(BenchIoError::Io(e)) => return Err(BenchIoError::Io(e)),
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        pairs.push(MatchPair {
            scan_a,
            scan_b,
            truth: Transform2::new(dx, dy, dtheta),
            iou,
        });
    }
    Ok((pairs, skipped))
}
