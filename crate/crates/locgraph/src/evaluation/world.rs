use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::geometry::Pose2;

/// One grid cell of the ground-truth workspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellState {
    Free,
    Obstacle,
    Unknown,
}

#[derive(Debug)]
pub enum WorldIoError {
    Io(std::io::Error),
    Format(String),
}

impl std::fmt::Display for WorldIoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorldIoError::Io(e) => write!(f, "world i/o: {e}"),
            WorldIoError::Format(m) => write!(f, "world format: {m}"),
        }
    }
}

impl std::error::Error for WorldIoError {}

impl From<std::io::Error> for WorldIoError {
    fn from(e: std::io::Error) -> Self {
        WorldIoError::Io(e)
    }
}

/// The ground-truth occupancy grid used only by evaluation and synthesis;
/// the mapper never sees it. Axis-aligned: `origin` is the world coordinate
/// of the corner of cell (0, 0).
#[derive(Clone, Debug, PartialEq)]
pub struct WorldModel {
    width: u32,
    height: u32,
    resolution: f64,
    origin: (f64, f64),
    cells: Vec<CellState>,
}

impl WorldModel {
    pub fn filled(
        width: u32,
        height: u32,
        resolution: f64,
        origin: (f64, f64),
        fill: CellState,
    ) -> Self {
        Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![fill; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    #[inline]
    pub fn get(&self, ix: u32, iy: u32) -> CellState {
        self.cells[iy as usize * self.width as usize + ix as usize]
    }

    #[inline]
    pub fn set(&mut self, ix: u32, iy: u32, state: CellState) {
        self.cells[iy as usize * self.width as usize + ix as usize] = state;
    }

    pub fn cell_index(&self, ix: u32, iy: u32) -> usize {
        iy as usize * self.width as usize + ix as usize
    }

    pub fn world_to_cell(&self, p: (f64, f64)) -> Option<(u32, u32)> {
        let gx = ((p.0 - self.origin.0) / self.resolution).floor();
        let gy = ((p.1 - self.origin.1) / self.resolution).floor();
        if gx >= 0.0 && gy >= 0.0 && gx < f64::from(self.width) && gy < f64::from(self.height) {
            Some((gx as u32, gy as u32))
        } else {
            None
        }
    }

    /// World coordinates of the center of a cell.
    pub fn cell_center(&self, ix: u32, iy: u32) -> (f64, f64) {
        (
            self.origin.0 + (f64::from(ix) + 0.5) * self.resolution,
            self.origin.1 + (f64::from(iy) + 0.5) * self.resolution,
        )
    }

    pub fn state_at(&self, p: (f64, f64)) -> CellState {
        self.world_to_cell(p)
            .map_or(CellState::Unknown, |(x, y)| self.get(x, y))
    }

    pub fn is_free(&self, p: (f64, f64)) -> bool {
        self.state_at(p) == CellState::Free
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == CellState::Free).count()
    }

    /// Fills the axis-aligned metric rectangle [x0, x1) x [y0, y1).
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, state: CellState) {
        let cx0 = (((x0 - self.origin.0) / self.resolution).floor().max(0.0)) as u32;
        let cy0 = (((y0 - self.origin.1) / self.resolution).floor().max(0.0)) as u32;
        let cx1 =
            ((((x1 - self.origin.0) / self.resolution).ceil()).max(0.0) as u32).min(self.width);
        let cy1 =
            ((((y1 - self.origin.1) / self.resolution).ceil()).max(0.0) as u32).min(self.height);
        for iy in cy0..cy1 {
            for ix in cx0..cx1 {
                // Cells whose center lies inside the rectangle.
                let (cx, cy) = self.cell_center(ix, iy);
                if cx >= x0 && cx < x1 && cy >= y0 && cy < y1 {
                    self.set(ix, iy, state);
                }
            }
        }
    }

    /// Casts a ray from `from` at `angle`, visiting grid cells exactly
    /// (Amanatides-Woo traversal). Returns the entry distance of the first
    /// obstacle cell, or `None` if the ray leaves the grid or exceeds
    /// `max_range` first.
    pub fn raycast(&self, from: (f64, f64), angle: f64, max_range: f64) -> Option<f64> {
        let (dx, dy) = (angle.cos(), angle.sin());
        let Some((mut ix, mut iy)) = self.world_to_cell(from) else {
            return None;
        };
        // Parametric distance to the next vertical / horizontal grid line.
        let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
        let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
        let next_x_boundary =
            self.origin.0 + (f64::from(ix) + if dx > 0.0 { 1.0 } else { 0.0 }) * self.resolution;
        let next_y_boundary =
            self.origin.1 + (f64::from(iy) + if dy > 0.0 { 1.0 } else { 0.0 }) * self.resolution;
        let mut t_max_x = if dx.abs() < 1e-12 {
            f64::INFINITY
        } else {
            (next_x_boundary - from.0) / dx
        };
        let mut t_max_y = if dy.abs() < 1e-12 {
            f64::INFINITY
        } else {
            (next_y_boundary - from.1) / dy
        };
        let t_delta_x = if dx.abs() < 1e-12 {
            f64::INFINITY
        } else {
            self.resolution / dx.abs()
        };
        let t_delta_y = if dy.abs() < 1e-12 {
            f64::INFINITY
        } else {
            self.resolution / dy.abs()
        };

        loop {
            let t;
            if t_max_x < t_max_y {
                t = t_max_x;
                t_max_x += t_delta_x;
                let next = i64::from(ix) + step_x;
                if next < 0 || next >= i64::from(self.width) {
                    return None;
                }
                ix = next as u32;
            } else {
                t = t_max_y;
                t_max_y += t_delta_y;
                let next = i64::from(iy) + step_y;
                if next < 0 || next >= i64::from(self.height) {
                    return None;
                }
                iy = next as u32;
            }
            if t > max_range {
                return None;
            }
            if self.get(ix, iy) == CellState::Obstacle {
                return Some(t);
            }
        }
    }

    /// Writes the binary PGM image plus its metadata sidecar. Row 0 of the
    /// image is the y = 0 row of the grid; brightness encodes state
    /// (254 free, 0 obstacle, 128 unknown).
    pub fn save(&self, pgm_path: &Path, meta_path: &Path) -> Result<(), WorldIoError> {
        let mut f = std::fs::File::create(pgm_path)?;
        write!(f, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .cells
            .iter()
            .map(|c| match c {
                CellState::Free => 254u8,
                CellState::Obstacle => 0,
                CellState::Unknown => 128,
            })
            .collect();
        f.write_all(&bytes)?;

        let mut m = std::fs::File::create(meta_path)?;
        writeln!(m, "resolution: {}", self.resolution)?;
        writeln!(m, "origin_x: {}", self.origin.0)?;
        writeln!(m, "origin_y: {}", self.origin.1)?;
        writeln!(m, "free_thresh: 0.75")?;
        writeln!(m, "obstacle_thresh: 0.35")?;
        Ok(())
    }

    /// Loads a PGM + sidecar pair written by `save` (or compatible tools).
    /// Brightness at or above `free_thresh` x 255 reads as free, at or below
    /// `obstacle_thresh` x 255 as obstacle, anything between as unknown.
    pub fn load(pgm_path: &Path, meta_path: &Path) -> Result<Self, WorldIoError> {
        let meta = std::fs::read_to_string(meta_path)?;
        let mut resolution = None;
        let mut origin_x = 0.0;
        let mut origin_y = 0.0;
        let mut free_thresh = 0.75;
        let mut obstacle_thresh = 0.35;
        for line in meta.lines() {
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "resolution" => {
                    resolution = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| WorldIoError::Format(format!("resolution: {e}")))?,
                    )
                }
                "origin_x" => {
                    origin_x = value
                        .parse()
                        .map_err(|e| WorldIoError::Format(format!("origin_x: {e}")))?
                }
                "origin_y" => {
                    origin_y = value
                        .parse()
                        .map_err(|e| WorldIoError::Format(format!("origin_y: {e}")))?
                }
                "free_thresh" => {
                    free_thresh = value
                        .parse()
                        .map_err(|e| WorldIoError::Format(format!("free_thresh: {e}")))?
                }
                "obstacle_thresh" => {
                    obstacle_thresh = value
                        .parse()
                        .map_err(|e| WorldIoError::Format(format!("obstacle_thresh: {e}")))?
                }
                _ => {}
            }
        }
        let resolution =
            resolution.ok_or_else(|| WorldIoError::Format("missing resolution".into()))?;

        let mut reader = BufReader::new(std::fs::File::open(pgm_path)?);
        let mut header = String::new();
        let mut fields = Vec::new();
        while fields.len() < 4 {
            header.clear();
            reader.read_line(&mut header)?;
            if header.is_empty() {
                return Err(WorldIoError::Format("pgm header truncated".into()));
            }
            let line = header.split('#').next().unwrap_or("");
            fields.extend(line.split_whitespace().map(str::to_string));
        }
        if fields[0] != "P5" {
            return Err(WorldIoError::Format(format!(
                "expected P5 graymap, got {}",
                fields[0]
            )));
        }
        let width: u32 = fields[1]
            .parse()
            .map_err(|e| WorldIoError::Format(format!("width: {e}")))?;
        let height: u32 = fields[2]
            .parse()
            .map_err(|e| WorldIoError::Format(format!("height: {e}")))?;
        let maxval: f64 = fields[3]
            .parse()
            .map_err(|e| WorldIoError::Format(format!("maxval: {e}")))?;

        let mut bytes = vec![0u8; width as usize * height as usize];
        reader.read_exact(&mut bytes)?;
        let cells = bytes
            .iter()
            .map(|&b| {
                let v = f64::from(b) / maxval;
                if v >= free_thresh {
                    CellState::Free
                } else if v <= obstacle_thresh {
                    CellState::Obstacle
                } else {
                    CellState::Unknown
                }
            })
            .collect();
        Ok(Self {
            width,
            height,
            resolution,
            origin: (origin_x, origin_y),
            cells,
        })
    }
}

/// A pose is valid in the world iff its position is in free space.
pub fn pose_in_free_space(world: &WorldModel, pose: &Pose2) -> bool {
    world.is_free((pose.dx, pose.dy))
}
