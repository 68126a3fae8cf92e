use crate::geometry::Pose2;
use crate::topograph::NodeId;

use super::world::{CellState, WorldModel};

/// A set of world cells, stored as a bitset over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    words: Vec<u64>,
    count: usize,
}

impl CellSet {
    pub fn empty(world: &WorldModel) -> Self {
        let cells = world.width() as usize * world.height() as usize;
        Self {
            words: vec![0u64; cells.div_ceil(64)],
            count: 0,
        }
    }

    #[inline]
    pub fn insert(&mut self, index: usize) {
        let w = &mut self.words[index / 64];
        let bit = 1u64 << (index % 64);
        if *w & bit == 0 {
            *w |= bit;
            self.count += 1;
        }
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.words[index / 64] & (1u64 << (index % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn union_into(&self, acc: &mut Vec<u64>) {
        for (a, w) in acc.iter_mut().zip(&self.words) {
            *a |= w;
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter_map(move |b| {
                if w & (1u64 << b) != 0 {
                    Some(wi * 64 + b)
                } else {
                    None
                }
            })
        })
    }
}

/// The free cells visible from a node's observation pose within a radius.
#[derive(Clone, Debug)]
pub struct LocationFootprint {
    pub node_id: NodeId,
    pub cells: CellSet,
}

#[derive(Debug)]
pub enum FootprintError {
    PoseInObstacle(f64, f64),
}

impl std::fmt::Display for FootprintError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FootprintError::PoseInObstacle(x, y) => {
                write!(f, "observation pose ({x:.2}, {y:.2}) is not in free space")
            }
        }
    }
}

impl std::error::Error for FootprintError {}

/// Computes the visibility footprint: free cells swept by dense rays from
/// the pose out to `radius` or the first obstacle. The pose cell itself is
/// always included.
pub fn footprint(
    world: &WorldModel,
    node_id: NodeId,
    pose: &Pose2,
    radius: f64,
) -> Result<LocationFootprint, FootprintError> {
    let from = (pose.dx, pose.dy);
    let Some(origin_cell) = world.world_to_cell(from) else {
        return Err(FootprintError::PoseInObstacle(pose.dx, pose.dy));
    };
    if world.get(origin_cell.0, origin_cell.1) != CellState::Free {
        return Err(FootprintError::PoseInObstacle(pose.dx, pose.dy));
    }

    let mut cells = CellSet::empty(world);
    cells.insert(world.cell_index(origin_cell.0, origin_cell.1));
    if radius <= 0.0 {
        return Ok(LocationFootprint { node_id, cells });
    }

    // Enough rays that neighboring rays are under half a cell apart at full
    // radius, so no visible cell slips between them.
    let n_rays = ((std::f64::consts::TAU * radius / world.resolution()) * 2.0).ceil() as usize;
    let step = world.resolution() / 2.0;
    for k in 0..n_rays {
        let angle = std::f64::consts::TAU * k as f64 / n_rays as f64;
        let limit = world
            .raycast(from, angle, radius)
            .unwrap_or(radius)
            .min(radius);
        let (cos, sin) = (angle.cos(), angle.sin());
        let mut r = step;
        while r <= limit {
            let p = (from.0 + r * cos, from.1 + r * sin);
            if let Some((ix, iy)) = world.world_to_cell(p) {
                if world.get(ix, iy) == CellState::Free {
                    cells.insert(world.cell_index(ix, iy));
                }
            }
            r += step;
        }
    }
    Ok(LocationFootprint { node_id, cells })
}
