use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::world::{CellState, WorldModel};

#[derive(Debug)]
pub enum PathError {
    EndpointBlocked(f64, f64),
}

impl std::fmt::Display for PathError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathError::EndpointBlocked(x, y) => {
                write!(f, "path endpoint ({x:.2}, {y:.2}) is not in free space")
            }
        }
    }
}

impl std::error::Error for PathError {}

struct HeapEntry {
    cost: f64,
    cell: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.cell == other.cell
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then cell index for determinism.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then(other.cell.cmp(&self.cell))
    }
}

/// Dijkstra over free cells, 8-connected with sqrt(2) diagonal cost (in
/// meters). Diagonal moves are blocked when either adjacent orthogonal cell
/// is not free, so paths cannot cut through wall corners. Returns the full
/// distance field (infinity where unreachable).
pub fn distance_field(world: &WorldModel, source: (u32, u32)) -> Vec<f64> {
    let w = world.width() as usize;
    let h = world.height() as usize;
    let mut dist = vec![f64::INFINITY; w * h];
    let free = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && x < w as i64
            && y < h as i64
            && world.get(x as u32, y as u32) == CellState::Free
    };
    let start = source.1 as usize * w + source.0 as usize;
    if !free(i64::from(source.0), i64::from(source.1)) {
        return dist;
    }
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        cost: 0.0,
        cell: start,
    });
    let res = world.resolution();
    let diag = res * std::f64::consts::SQRT_2;
    while let Some(HeapEntry { cost, cell }) = heap.pop() {
        if cost > dist[cell] {
            continue;
        }
        let x = (cell % w) as i64;
        let y = (cell / w) as i64;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if !free(nx, ny) {
                    continue;
                }
                if dx != 0 && dy != 0 && (!free(x + dx, y) || !free(x, y + dy)) {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { diag } else { res };
                let ncell = ny as usize * w + nx as usize;
                let ncost = cost + step;
                if ncost < dist[ncell] {
                    dist[ncell] = ncost;
                    heap.push(HeapEntry {
                        cost: ncost,
                        cell: ncell,
                    });
                }
            }
        }
    }
    dist
}

/// Shortest-path length between two free points, or `None` when they are
/// disconnected in the grid.
pub fn grid_shortest_path(
    world: &WorldModel,
    s: (f64, f64),
    g: (f64, f64),
) -> Result<Option<f64>, PathError> {
    let s_cell = world
        .world_to_cell(s)
        .filter(|&(x, y)| world.get(x, y) == CellState::Free)
        .ok_or(PathError::EndpointBlocked(s.0, s.1))?;
    let g_cell = world
        .world_to_cell(g)
        .filter(|&(x, y)| world.get(x, y) == CellState::Free)
        .ok_or(PathError::EndpointBlocked(g.0, g.1))?;
    if s_cell == g_cell {
        return Ok(Some(0.0));
    }
    let field = distance_field(world, s_cell);
    let d = field[world.cell_index(g_cell.0, g_cell.1)];
    Ok(if d.is_finite() { Some(d) } else { None })
}
