use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::{CellState, WorldModel};
use crate::geometry::Pose2;

/// Floorplan generator parameters: a grid of rectangular rooms joined by
/// doorways, optionally closed into a ring, with box clutter inside rooms.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub rooms_x: u32,
    pub rooms_y: u32,
    /// Room side bounds, meters.
    pub room_side_min: f64,
    pub room_side_max: f64,
    /// Join the perimeter rooms into a cycle (requires a 2D room grid).
    pub corridor_loop: bool,
    pub clutter_min: u32,
    pub clutter_max: u32,
    pub clutter_side_min: f64,
    pub clutter_side_max: f64,
    pub wall_thickness: f64,
    pub door_width: f64,
    pub resolution: f64,
    /// Trajectory densification step, meters.
    pub step: f64,
    /// Turn-in-place step, radians.
    pub turn_step: f64,
    /// When set, room sides are rescaled so total free area approximates
    /// this many square meters.
    pub target_free_area: Option<f64>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            rooms_x: 2,
            rooms_y: 2,
            room_side_min: 5.0,
            room_side_max: 7.0,
            corridor_loop: true,
            clutter_min: 3,
            clutter_max: 5,
            clutter_side_min: 0.3,
            clutter_side_max: 0.8,
            wall_thickness: 0.2,
            door_width: 1.2,
            resolution: 0.1,
            step: 0.25,
            turn_step: 0.2,
            target_free_area: None,
        }
    }
}

#[derive(Debug)]
pub enum WorldGenError {
    Infeasible(String),
}

impl std::fmt::Display for WorldGenError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorldGenError::Infeasible(m) => write!(f, "infeasible world params: {m}"),
        }
    }
}

impl std::error::Error for WorldGenError {}

impl WorldParams {
    pub fn validate(&self) -> Result<(), WorldGenError> {
        if self.rooms_x == 0 || self.rooms_y == 0 {
            return Err(WorldGenError::Infeasible("need at least one room".into()));
        }
        if self.corridor_loop && (self.rooms_x < 2 || self.rooms_y < 2) {
            return Err(WorldGenError::Infeasible(
                "a loop needs at least a 2x2 room grid".into(),
            ));
        }
        if self.room_side_min < 3.0 || self.room_side_max < self.room_side_min {
            return Err(WorldGenError::Infeasible("bad room side range".into()));
        }
        if self.door_width < 0.8 {
            return Err(WorldGenError::Infeasible(
                "door too narrow to traverse".into(),
            ));
        }
        if !(self.resolution > 0.0) || !(self.step > 0.0) || !(self.turn_step > 0.0) {
            return Err(WorldGenError::Infeasible("non-positive step sizes".into()));
        }
        Ok(())
    }
}

/// Generates a deterministic floorplan and a collision-free exploration
/// trajectory visiting every room (and closing the ring when requested).
pub fn synth_world(
    seed: u64,
    params: &WorldParams,
) -> Result<(WorldModel, Vec<Pose2>), WorldGenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = params.rooms_x as usize;
    let ny = params.rooms_y as usize;

    // Per-column widths and per-row heights keep rooms grid-aligned.
    let mut widths: Vec<f64> = (0..nx)
        .map(|_| rng.random_range(params.room_side_min..=params.room_side_max))
        .collect();
    let mut heights: Vec<f64> = (0..ny)
        .map(|_| rng.random_range(params.room_side_min..=params.room_side_max))
        .collect();
    if let Some(target) = params.target_free_area {
        let current: f64 = widths.iter().sum::<f64>() * heights.iter().sum::<f64>()
            / (nx as f64 * ny as f64)
            * (nx * ny) as f64;
        let scale = (target / current).sqrt().clamp(0.6, 1.6);
        for w in &mut widths {
            *w *= scale;
        }
        for h in &mut heights {
            *h *= scale;
        }
    }

    let wt = params.wall_thickness;
    let xs: Vec<f64> = std::iter::once(wt)
        .chain(widths.iter().scan(wt, |acc, w| {
            *acc += w + wt;
            Some(*acc)
        }))
        .collect();
    let ys: Vec<f64> = std::iter::once(wt)
        .chain(heights.iter().scan(wt, |acc, h| {
            *acc += h + wt;
            Some(*acc)
        }))
        .collect();
    let total_w = xs[nx] + 0.4;
    let total_h = ys[ny] + 0.4;

    let mut world = WorldModel::filled(
        (total_w / params.resolution).ceil() as u32 + 4,
        (total_h / params.resolution).ceil() as u32 + 4,
        params.resolution,
        (-0.4, -0.4),
        CellState::Obstacle,
    );
    let room_rect = |i: usize, j: usize| -> (f64, f64, f64, f64) {
        (xs[i], ys[j], xs[i] + widths[i], ys[j] + heights[j])
    };
    for j in 0..ny {
        for i in 0..nx {
            let (x0, y0, x1, y1) = room_rect(i, j);
            world.fill_rect(x0, y0, x1, y1, CellState::Free);
        }
    }

    // Door placement. Horizontal door between (i,j)-(i+1,j); vertical
    // between (i,j)-(i,j+1). Door centers become trajectory waypoints.
    let mut door_center = std::collections::BTreeMap::new();
    let mut carve_door = |world: &mut WorldModel, a: (usize, usize), b: (usize, usize)| {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let (x0, y0, x1, y1) = room_rect(a.0, a.1);
        let center;
        if b.0 == a.0 + 1 {
            let yc = (y0 + y1) / 2.0;
            world.fill_rect(
                x1 - 0.05,
                yc - params.door_width / 2.0,
                x1 + wt + 0.05,
                yc + params.door_width / 2.0,
                CellState::Free,
            );
            center = (x1 + wt / 2.0, yc);
        } else {
            let xc = (x0 + x1) / 2.0;
            world.fill_rect(
                xc - params.door_width / 2.0,
                y1 - 0.05,
                xc + params.door_width / 2.0,
                y1 + wt + 0.05,
                CellState::Free,
            );
            center = (xc, y1 + wt / 2.0);
        }
        door_center.insert((a, b), center);
    };

    // Visit order: perimeter ring (clockwise), then interior rooms appended
    // via a door to their nearest visited neighbor.
    let ring = perimeter_ring(nx, ny);
    let mut visit = ring.clone();
    for j in 1..ny.saturating_sub(1) {
        for i in 1..nx.saturating_sub(1) {
            visit.push((i, j));
        }
    }
    let mut doors: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for w in visit.windows(2) {
        let (a, b) = (w[0], w[1]);
        if adjacent(a, b) {
            doors.push((a, b));
        } else {
            // Interior room: connect through its left or lower neighbor.
            let n = if b.0 > 0 {
                (b.0 - 1, b.1)
            } else {
                (b.0, b.1 - 1)
            };
            doors.push((n, b));
        }
    }
    if params.corridor_loop && ring.len() > 2 {
        doors.push((*ring.last().unwrap(), ring[0]));
    }
    for (a, b) in &doors {
        carve_door(&mut world, *a, *b);
    }

    // Waypoint chain: room centers joined through door centers.
    let center_of = |r: (usize, usize)| -> (f64, f64) {
        let (x0, y0, x1, y1) = room_rect(r.0, r.1);
        ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    };
    let door_of = |a: (usize, usize), b: (usize, usize)| -> (f64, f64) {
        let key = if a <= b { (a, b) } else { (b, a) };
        door_center[&key]
    };
    let mut waypoints = vec![center_of(visit[0])];
    for w in visit.windows(2) {
        let (a, b) = (w[0], w[1]);
        if adjacent(a, b) {
            waypoints.push(door_of(a, b));
        } else {
            let n = if b.0 > 0 {
                (b.0 - 1, b.1)
            } else {
                (b.0, b.1 - 1)
            };
            waypoints.push(center_of(n));
            waypoints.push(door_of(n, b));
        }
        waypoints.push(center_of(b));
    }
    if params.corridor_loop && ring.len() > 2 {
        waypoints.push(door_of(*ring.last().unwrap(), ring[0]));
        waypoints.push(center_of(ring[0]));
    }

    // Clutter, kept clear of walls, waypoint legs, and other boxes.
    let mut boxes: Vec<(f64, f64, f64, f64)> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (x0, y0, x1, y1) = room_rect(i, j);
            let n = rng.random_range(params.clutter_min..=params.clutter_max);
            let mut placed = 0;
            for _ in 0..40 {
                if placed >= n {
                    break;
                }
                let bw = rng.random_range(params.clutter_side_min..=params.clutter_side_max);
                let bh = rng.random_range(params.clutter_side_min..=params.clutter_side_max);
                let margin = 0.7;
                if x1 - x0 < 2.0 * margin + bw || y1 - y0 < 2.0 * margin + bh {
                    break;
                }
                let bx = rng.random_range(x0 + margin..=x1 - margin - bw);
                let by = rng.random_range(y0 + margin..=y1 - margin - bh);
                let rect = (bx, by, bx + bw, by + bh);
                let clear_of_path = waypoints
                    .windows(2)
                    .all(|seg| segment_rect_clearance(seg[0], seg[1], rect) >= 0.55);
                let clear_of_boxes = boxes.iter().all(|&(ox0, oy0, ox1, oy1)| {
                    rect.2 + 0.3 < ox0
                        || ox1 + 0.3 < rect.0
                        || rect.3 + 0.3 < oy0
                        || oy1 + 0.3 < rect.1
                });
                if clear_of_path && clear_of_boxes {
                    world.fill_rect(rect.0, rect.1, rect.2, rect.3, CellState::Obstacle);
                    boxes.push(rect);
                    placed += 1;
                }
            }
        }
    }

    let trajectory = densify(&waypoints, params.step, params.turn_step);
    for p in &trajectory {
        if !world.is_free((p.dx, p.dy)) {
            return Err(WorldGenError::Infeasible(format!(
                "trajectory point ({:.2}, {:.2}) not in free space",
                p.dx, p.dy
            )));
        }
    }
    Ok((world, trajectory))
}

/// A two-room world joined by a long corridor, where the second room's
/// clutter is the mirror image of the first's. The rotation-invariant
/// descriptor cannot tell the rooms apart, but no rigid transform aligns
/// their scans. The trajectory visits room A, crosses to room B, and
/// returns.
pub fn synth_aliased_world(seed: u64) -> (WorldModel, Vec<Pose2>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = 0.1;
    let mut world = WorldModel::filled(320, 90, res, (-0.4, -0.4), CellState::Obstacle);
    // Room A, corridor, room B.
    world.fill_rect(0.0, 0.0, 8.0, 6.0, CellState::Free);
    world.fill_rect(8.0, 2.2, 22.2, 3.8, CellState::Free);
    world.fill_rect(22.2, 0.0, 30.2, 6.0, CellState::Free);

    // Chiral clutter in A; mirrored copy in B (x flipped within the room).
    let base: Vec<(f64, f64, f64, f64)> = vec![
        (1.1, 0.9, 0.7, 0.5),
        (5.6, 1.2, 0.4, 1.0),
        (2.4, 4.3, 1.1, 0.4),
        (6.3, 4.6, 0.5, 0.5),
        (3.9, 2.0, 0.5, 0.4),
    ];
    for &(bx, by, bw, bh) in &base {
        let jx = rng.random_range(-0.1..0.1);
        let jy = rng.random_range(-0.1..0.1);
        let (bx, by) = (bx + jx, by + jy);
        world.fill_rect(bx, by, bx + bw, by + bh, CellState::Obstacle);
        // Mirror within room B: x -> room_width - x - bw, offset to B.
        let mx = 22.2 + (8.0 - (bx + bw));
        world.fill_rect(mx, by, mx + bw, by + bh, CellState::Obstacle);
    }

    let waypoints = vec![
        (4.0, 4.9),
        (4.0, 3.0),
        (9.0, 3.0),
        (15.0, 3.0),
        (21.0, 3.0),
        (26.2, 3.0),
        (26.2, 4.9),
        (26.2, 3.0),
        (15.0, 3.0),
        (9.0, 3.0),
        (4.0, 3.0),
        (4.0, 4.9),
    ];
    let trajectory = densify(&waypoints, 0.25, 0.2);
    (world, trajectory)
}

/// A two-room ring: the rooms connect through both a top and a bottom
/// corridor, and the trajectory goes out along the top and comes home along
/// the bottom. The return leg is fresh territory, so re-entering the first
/// room exercises localization-driven loop closure rather than an edge
/// transition.
pub fn synth_ring_world(seed: u64) -> (WorldModel, Vec<Pose2>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = 0.1;
    let mut world = WorldModel::filled(274, 98, res, (-0.4, -0.4), CellState::Obstacle);
    // Two rooms of different proportions, far apart.
    world.fill_rect(0.0, 0.0, 7.0, 8.4, CellState::Free);
    world.fill_rect(19.0, 0.0, 25.4, 7.2, CellState::Free);
    // Long joining corridors with distinct widths, plus anti-aliasing
    // alcoves at irregular spots so the two corridors cannot be matched
    // onto each other by any rigid transform.
    world.fill_rect(7.0, 5.4, 19.0, 6.6, CellState::Free);
    world.fill_rect(7.0, 0.4, 19.0, 2.2, CellState::Free);
    world.fill_rect(9.0, 6.6, 9.8, 7.1, CellState::Free);
    world.fill_rect(14.4, 6.6, 15.0, 7.0, CellState::Free);
    world.fill_rect(8.2, -0.1, 8.8, 0.4, CellState::Free);
    world.fill_rect(12.6, -0.1, 13.4, 0.4, CellState::Free);
    world.fill_rect(16.8, 2.2, 17.4, 2.7, CellState::Free);

    let clutter_a: [(f64, f64, f64, f64); 5] = [
        (1.4, 1.6, 0.7, 0.5),
        (4.8, 2.4, 0.5, 1.0),
        (1.2, 5.4, 1.1, 0.4),
        (5.8, 4.6, 0.5, 0.5),
        (1.6, 3.4, 0.5, 0.4),
    ];
    let clutter_b: [(f64, f64, f64, f64); 5] = [
        (20.3, 2.6, 0.6, 0.9),
        (23.9, 2.2, 0.8, 0.4),
        (20.6, 4.6, 0.4, 0.6),
        (23.6, 5.6, 0.9, 0.4),
        (24.4, 3.8, 0.4, 0.5),
    ];
    for &(bx, by, bw, bh) in clutter_a.iter().chain(&clutter_b) {
        let jx = rng.random_range(-0.15..0.15);
        let jy = rng.random_range(-0.15..0.15);
        world.fill_rect(
            bx + jx,
            by + jy,
            bx + jx + bw,
            by + jy + bh,
            CellState::Obstacle,
        );
    }

    let waypoints = vec![
        (3.5, 4.2),
        (3.5, 6.0),
        (6.0, 6.0),
        (10.0, 6.0),
        (14.0, 6.0),
        (18.0, 6.0),
        (22.2, 6.0),
        (22.2, 3.6),
        (22.2, 1.2),
        (18.0, 1.2),
        (14.0, 1.2),
        (10.0, 1.2),
        (6.0, 1.2),
        (3.5, 1.2),
        (3.5, 4.2),
    ];
    let trajectory = densify(&waypoints, 0.25, 0.2);
    (world, trajectory)
}

fn perimeter_ring(nx: usize, ny: usize) -> Vec<(usize, usize)> {
    let mut ring = Vec::new();
    for i in 0..nx {
        ring.push((i, 0));
    }
    for j in 1..ny {
        ring.push((nx - 1, j));
    }
    if ny > 1 {
        for i in (0..nx - 1).rev() {
            ring.push((i, ny - 1));
        }
    }
    if nx > 1 {
        for j in (1..ny - 1).rev() {
            ring.push((0, j));
        }
    }
    ring
}

fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0 == b.0 && a.1.abs_diff(b.1) == 1) || (a.1 == b.1 && a.0.abs_diff(b.0) == 1)
}

/// Minimum distance from segment ab to the rectangle (conservative: uses
/// rectangle corners and edge midpoints).
fn segment_rect_clearance(a: (f64, f64), b: (f64, f64), rect: (f64, f64, f64, f64)) -> f64 {
    let (x0, y0, x1, y1) = rect;
    let probes = [
        (x0, y0),
        (x1, y0),
        (x1, y1),
        (x0, y1),
        ((x0 + x1) / 2.0, y0),
        ((x0 + x1) / 2.0, y1),
        (x0, (y0 + y1) / 2.0),
        (x1, (y0 + y1) / 2.0),
        ((x0 + x1) / 2.0, (y0 + y1) / 2.0),
    ];
    probes
        .iter()
        .map(|&p| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 <= 1e-12 {
        0.0
    } else {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * vx, a.1 + t * vy);
    (p.0 - cx).hypot(p.1 - cy)
}

/// Expands waypoints into poses: turn in place toward each leg, then step
/// along it at fixed spacing, heading along the motion direction.
fn densify(waypoints: &[(f64, f64)], step: f64, turn_step: f64) -> Vec<Pose2> {
    let mut out: Vec<Pose2> = Vec::new();
    let mut heading = 0.0f64;
    for w in waypoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let dist = dx.hypot(dy);
        if dist < 1e-9 {
            continue;
        }
        let target = dy.atan2(dx);
        if out.is_empty() {
            heading = target;
            out.push(Pose2::new(a.0, a.1, heading));
        }
        // Turn in place.
        let mut diff = crate::geometry::normalize_angle(target - heading);
        while diff.abs() > turn_step {
            let inc = turn_step.copysign(diff);
            heading = crate::geometry::normalize_angle(heading + inc);
            out.push(Pose2::new(a.0, a.1, heading));
            diff = crate::geometry::normalize_angle(target - heading);
        }
        if diff.abs() > 1e-9 {
            heading = target;
            out.push(Pose2::new(a.0, a.1, heading));
        }
        // Advance.
        let n = (dist / step).ceil() as usize;
        for k in 1..=n {
            let f = k as f64 / n as f64;
            out.push(Pose2::new(a.0 + f * dx, a.1 + f * dy, heading));
        }
    }
    out
}
