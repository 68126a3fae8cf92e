use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::{WorldIoError, WorldModel};
use crate::geometry::{PointCloud, Pose2, Transform2};
use crate::placerec::Descriptor;

use super::sensors::SequenceFrame;

// On-disk layout of one sequence directory:
//   frames.jsonl      per-frame metadata and odometry
//   clouds/NNNNN.bin  f32 little-endian (x, y, z) triples
//   world.pgm/.yaml   ground-truth grid (evaluation only)
//   trajectory.csv    ground-truth poses, `x,y,theta`
//   descriptors.csv   optional external descriptors, `frame_id,v0,...`

#[derive(Debug)]
pub enum SequenceError {
    Io(std::io::Error),
    World(WorldIoError),
    Frame { frame: u64, message: String },
    Format(String),
}

impl std::fmt::Display for SequenceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SequenceError::Io(e) => write!(f, "sequence i/o: {e}"),
            SequenceError::World(e) => write!(f, "sequence world: {e}"),
            SequenceError::Frame { frame, message } => {
                write!(f, "frame {frame}: {message}")
            }
            SequenceError::Format(m) => write!(f, "sequence format: {m}"),
        }
    }
}

impl std::error::Error for SequenceError {}

impl From<std::io::Error> for SequenceError {
    fn from(e: std::io::Error) -> Self {
        SequenceError::Io(e)
    }
}

impl From<WorldIoError> for SequenceError {
    fn from(e: WorldIoError) -> Self {
        SequenceError::World(e)
    }
}

#[derive(Serialize, Deserialize)]
struct FrameMeta {
    frame_id: u64,
    timestamp: f64,
    cloud: String,
    odom: Transform2,
    debug_pose: Transform2,
}

/// Writes a full sequence directory.
pub fn write_sequence(
    dir: &Path,
    world: &WorldModel,
    trajectory: &[Pose2],
    frames: &[SequenceFrame],
) -> Result<(), SequenceError> {
    std::fs::create_dir_all(dir.join("clouds"))?;
    world.save(&dir.join("world.pgm"), &dir.join("world.yaml"))?;

    let mut traj = BufWriter::new(std::fs::File::create(dir.join("trajectory.csv"))?);
    writeln!(traj, "x,y,theta")?;
    for p in trajectory {
        writeln!(traj, "{},{},{}", p.dx, p.dy, p.dtheta)?;
    }
    traj.flush()?;

    let mut meta = BufWriter::new(std::fs::File::create(dir.join("frames.jsonl"))?);
    for f in frames {
        let cloud_rel = format!("clouds/{:05}.bin", f.frame_id);
        std::fs::write(dir.join(&cloud_rel), f.cloud.to_f32_bytes())?;
        let line = serde_json::to_string(&FrameMeta {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
            cloud: cloud_rel,
            odom: f.odom,
            debug_pose: f.debug_pose,
        })
        .expect("frame meta serializes");
        writeln!(meta, "{line}")?;
    }
    meta.flush()?;
    Ok(())
}

/// Loads the frames of a sequence directory. A decode failure aborts with
/// the offending frame id.
pub fn load_frames(dir: &Path) -> Result<Vec<SequenceFrame>, SequenceError> {
    let file = std::fs::File::open(dir.join("frames.jsonl"))?;
    let mut frames = Vec::new();
    let mut last_id: Option<u64> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: FrameMeta = serde_json::from_str(&line).map_err(|e| SequenceError::Frame {
            frame: lineno as u64,
            message: format!("metadata: {e}"),
        })?;
        if let Some(prev) = last_id {
            if meta.frame_id <= prev {
                return Err(SequenceError::Frame {
                    frame: meta.frame_id,
                    message: "frame ids must be strictly increasing".into(),
                });
            }
        }
        if !meta.odom.is_finite() {
            return Err(SequenceError::Frame {
                frame: meta.frame_id,
                message: "non-finite odometry".into(),
            });
        }
        last_id = Some(meta.frame_id);
        let bytes = std::fs::read(dir.join(&meta.cloud)).map_err(|e| SequenceError::Frame {
            frame: meta.frame_id,
            message: format!("cloud {}: {e}", meta.cloud),
        })?;
        let cloud =
            PointCloud::from_f32_bytes(&bytes, "lidar").map_err(|m| SequenceError::Frame {
                frame: meta.frame_id,
                message: m,
            })?;
        frames.push(SequenceFrame {
            frame_id: meta.frame_id,
            timestamp: meta.timestamp,
            cloud,
            odom: meta.odom,
            debug_pose: meta.debug_pose,
            external_descriptor: None,
        });
    }
    Ok(frames)
}

pub fn load_world(dir: &Path) -> Result<WorldModel, SequenceError> {
    Ok(WorldModel::load(
        &dir.join("world.pgm"),
        &dir.join("world.yaml"),
    )?)
}

pub fn load_trajectory(dir: &Path) -> Result<Vec<Pose2>, SequenceError> {
    let text = std::fs::read_to_string(dir.join("trajectory.csv"))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with('x') {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(SequenceError::Format(format!(
                "trajectory line {i}: expected 3 fields"
            )));
        }
        let parse = |s: &str| -> Result<f64, SequenceError> {
            s.trim()
                .parse()
                .map_err(|e| SequenceError::Format(format!("trajectory line {i}: {e}")))
        };
        out.push(Pose2::new(
            parse(fields[0])?,
            parse(fields[1])?,
            parse(fields[2])?,
        ));
    }
    Ok(out)
}

/// Loads the external descriptor table `frame_id, v_0 ... v_{L-1}`. A header
/// row starting with `frame_id` is skipped. All rows must share one length.
pub fn load_external_descriptors(path: &Path) -> Result<BTreeMap<u64, Descriptor>, SequenceError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    let mut len: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("frame_id")) {
            continue;
        }
        let mut fields = line.split(',');
        let frame_id: u64 = fields
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| SequenceError::Format(format!("descriptors line {i}: {e}")))?;
        let values: Result<Vec<f64>, _> = fields.map(|f| f.trim().parse::<f64>()).collect();
        let values =
            values.map_err(|e| SequenceError::Format(format!("descriptors line {i}: {e}")))?;
        if values.is_empty() {
            return Err(SequenceError::Format(format!(
                "descriptors line {i}: empty vector"
            )));
        }
        match len {
            None => len = Some(values.len()),
            Some(l) if l != values.len() => {
                return Err(SequenceError::Format(format!(
                    "descriptors line {i}: length {} != {l}",
                    values.len()
                )));
            }
            _ => {}
        }
        out.insert(frame_id, Descriptor::new(values, "external"));
    }
    Ok(out)
}

/// Writes a descriptor table in the same format `load_external_descriptors`
/// reads.
pub fn write_external_descriptors(
    path: &Path,
    rows: &BTreeMap<u64, Descriptor>,
) -> Result<(), SequenceError> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    for (frame_id, d) in rows {
        write!(f, "{frame_id}")?;
        for v in &d.values {
            write!(f, ",{v}")?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

/// Resolves the conventional descriptor file path inside a sequence dir.
pub fn descriptors_path(dir: &Path) -> PathBuf {
    dir.join("descriptors.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CellState;
    use crate::geometry::Point3;

    fn tiny_sequence() -> (WorldModel, Vec<Pose2>, Vec<SequenceFrame>) {
        let mut world = WorldModel::filled(50, 50, 0.1, (0.0, 0.0), CellState::Obstacle);
        world.fill_rect(0.5, 0.5, 4.5, 4.5, CellState::Free);
        let trajectory = vec![Pose2::new(2.0, 2.0, 0.0), Pose2::new(2.2, 2.0, 0.0)];
        let frames = vec![
            SequenceFrame {
                frame_id: 0,
                timestamp: 0.0,
                cloud: PointCloud::new(vec![Point3::new(1.0, 0.0, 1.0)], "lidar"),
                odom: Transform2::identity(),
                debug_pose: trajectory[0],
                external_descriptor: None,
            },
            SequenceFrame {
                frame_id: 1,
                timestamp: 0.2,
                cloud: PointCloud::new(vec![Point3::new(0.75, 0.0, 1.0)], "lidar"),
                odom: Transform2::translation(0.2, 0.0),
                debug_pose: trajectory[1],
                external_descriptor: None,
            },
        ];
        (world, trajectory, frames)
    }

    #[test]
    fn sequence_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (world, trajectory, frames) = tiny_sequence();
        write_sequence(dir.path(), &world, &trajectory, &frames).unwrap();

        let back = load_frames(dir.path()).unwrap();
        assert_eq!(back, frames);
        assert_eq!(load_world(dir.path()).unwrap(), world);
        let traj = load_trajectory(dir.path()).unwrap();
        assert_eq!(traj, trajectory);
    }

    #[test]
    fn corrupt_cloud_aborts_with_frame_id() {
        let dir = tempfile::tempdir().unwrap();
        let (world, trajectory, frames) = tiny_sequence();
        write_sequence(dir.path(), &world, &trajectory, &frames).unwrap();
        std::fs::write(dir.path().join("clouds/00001.bin"), [0u8; 7]).unwrap();
        match load_frames(dir.path()) {
            Err(SequenceError::Frame { frame, .. }) => assert_eq!(frame, 1),
            other => panic!("expected frame error, got {other:?}"),
        }
    }

    #[test]
    fn descriptor_table_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("descriptors.csv");
        let mut rows = BTreeMap::new();
        rows.insert(0, Descriptor::new(vec![0.25, -1.5], "external"));
        rows.insert(3, Descriptor::new(vec![1.0, 2.0], "external"));
        write_external_descriptors(&path, &rows).unwrap();
        let back = load_external_descriptors(&path).unwrap();
        assert_eq!(back, rows);

        std::fs::write(&path, "frame_id,v0\n0,1.0\n1,2.0,3.0\n").unwrap();
        assert!(load_external_descriptors(&path).is_err());
    }
}
