use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;
use crate::topograph::{NodeId, TopoGraph};

use super::footprint::{footprint, LocationFootprint};
use super::pathing::distance_field;
use super::world::WorldModel;

/// Number of connected components over the undirected edges; an empty graph
/// has zero.
pub fn connected_components(g: &TopoGraph) -> usize {
    let ids: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
    let mut seen: BTreeMap<NodeId, bool> = ids.iter().map(|&id| (id, false)).collect();
    let mut components = 0;
    for &start in &ids {
        if seen[&start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen.insert(start, true);
        while let Some(id) = stack.pop() {
            for (n, _) in g.neighbors(id).expect("node exists") {
                if !seen[&n] {
                    seen.insert(n, true);
                    stack.push(n);
                }
            }
        }
    }
    components
}

/// Component membership, as a node -> component-index map (indices follow
/// ascending smallest-node order).
fn component_labels(g: &TopoGraph) -> BTreeMap<NodeId, usize> {
    let mut labels = BTreeMap::new();
    let mut next = 0;
    for node in g.nodes() {
        if labels.contains_key(&node.id) {
            continue;
        }
        let mut stack = vec![node.id];
        labels.insert(node.id, next);
        while let Some(id) = stack.pop() {
            for (n, _) in g.neighbors(id).expect("node exists") {
                if !labels.contains_key(&n) {
                    labels.insert(n, next);
                    stack.push(n);
                }
            }
        }
        next += 1;
    }
    labels
}

/// Coverage of the main connected component: the union of its footprints
/// over the world's free area. The main component is the one with the
/// largest coverage.
pub fn coverage(
    g: &TopoGraph,
    world: &WorldModel,
    footprints: &BTreeMap<NodeId, LocationFootprint>,
) -> f64 {
    let free = world.free_count();
    if free == 0 || g.node_count() == 0 {
        return 0.0;
    }
    let labels = component_labels(g);
    let n_components = labels.values().copied().max().map_or(0, |m| m + 1);
    let words = (world.width() as usize * world.height() as usize).div_ceil(64);
    let mut unions = vec![vec![0u64; words]; n_components];
    for (id, label) in &labels {
        if let Some(fp) = footprints.get(id) {
            fp.cells.union_into(&mut unions[*label]);
        }
    }
    let best = unions
        .iter()
        .map(|u| u.iter().map(|w| w.count_ones() as usize).sum::<usize>())
        .max()
        .unwrap_or(0);
    best as f64 / free as f64
}

/// An edge is consistent iff the footprints of its endpoints share at least
/// one free cell.
pub fn edge_consistent(
    from: NodeId,
    to: NodeId,
    footprints: &BTreeMap<NodeId, LocationFootprint>,
) -> bool {
    match (footprints.get(&from), footprints.get(&to)) {
        (Some(a), Some(b)) => a.cells.intersects(&b.cells),
        _ => false,
    }
}

/// Why a sampled pair scored the way it did.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PairReason {
    SameLocation,
    Stitched,
    EndpointUncovered,
    NoGraphPath,
    InconsistentEdge,
    NoMetricPath,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRecord {
    pub s: (f64, f64),
    pub g: (f64, f64),
    pub path_m: Option<f64>,
    pub path_g: Option<f64>,
    pub term: f64,
    pub reason: PairReason,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_components: usize,
    pub coverage: f64,
    pub spl: f64,
    pub inconsistent_edge_count: usize,
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug)]
pub enum EvalError {
    MissingDebugPose(NodeId),
    Footprint(super::footprint::FootprintError),
    BadPose(NodeId),
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::MissingDebugPose(id) => {
                write!(
                    f,
                    "node {id} has no debug pose; evaluation needs ground truth"
                )
            }
            EvalError::Footprint(e) => write!(f, "footprint: {e}"),
            EvalError::BadPose(id) => write!(f, "node {id} debug pose outside the world"),
        }
    }
}

impl std::error::Error for EvalError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Footprint visibility radius, meters (matches the scan half-window).
    pub footprint_radius: f64,
    /// Minimum separation of sampled pair endpoints, meters.
    pub min_separation: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            footprint_radius: 18.0,
            min_separation: 5.0,
            n_pairs: 100,
            seed: 0,
        }
    }
}

/// Everything the SPL stitching needs, precomputed once per graph: per-node
/// grid distance fields from observation points, graph-leg all-pairs
/// distances (edge weight = ground-truth shortest path between observation
/// points), path reconstruction parents, and per-edge consistency.
pub struct SplContext<'a> {
    world: &'a WorldModel,
    nodes: Vec<NodeId>,
    fields: BTreeMap<NodeId, Vec<f64>>,
    footprints: &'a BTreeMap<NodeId, LocationFootprint>,
    graph_dist: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
    graph_parent: BTreeMap<NodeId, BTreeMap<NodeId, NodeId>>,
    edge_ok: BTreeMap<(NodeId, NodeId), bool>,
}

impl<'a> SplContext<'a> {
    pub fn build(
        g: &TopoGraph,
        world: &'a WorldModel,
        footprints: &'a BTreeMap<NodeId, LocationFootprint>,
    ) -> Result<Self, EvalError> {
        let nodes: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
        let mut obs_cells = BTreeMap::new();
        for &id in &nodes {
            let pose = g.debug_pose(id).ok_or(EvalError::MissingDebugPose(id))?;
            let cell = world
                .world_to_cell((pose.dx, pose.dy))
                .ok_or(EvalError::BadPose(id))?;
            obs_cells.insert(id, cell);
        }
        // Grid distance fields, one per node, in parallel.
        let fields: BTreeMap<NodeId, Vec<f64>> = nodes
            .par_iter()
            .map(|&id| (id, distance_field(world, obs_cells[&id])))
            .collect();

        // Edge weights: ground-truth shortest-path length between the
        // endpoints' observation points.
        let mut edge_weight = BTreeMap::new();
        let mut edge_ok = BTreeMap::new();
        for e in g.edges() {
            let w = fields[&e.from][world.cell_index(obs_cells[&e.to].0, obs_cells[&e.to].1)];
            edge_weight.insert((e.from, e.to), w);
            edge_weight.insert((e.to, e.from), w);
            let ok = edge_consistent(e.from, e.to, footprints);
            edge_ok.insert(ord_pair(e.from, e.to), ok);
        }

        // Graph all-pairs shortest paths with parents (Dijkstra per node).
        let mut graph_dist = BTreeMap::new();
        let mut graph_parent = BTreeMap::new();
        for &src in &nodes {
            let (dist, parent) = graph_dijkstra(g, src, &edge_weight);
            graph_dist.insert(src, dist);
            graph_parent.insert(src, parent);
        }

        Ok(Self {
            world,
            nodes,
            fields,
            footprints,
            graph_dist,
            graph_parent,
            edge_ok,
        })
    }

    /// Locations whose footprint contains the point.
    fn containing(&self, cell_index: usize) -> Vec<NodeId> {
        self.nodes
            .iter()
            .copied()
            .filter(|id| {
                self.footprints
                    .get(id)
                    .is_some_and(|fp| fp.cells.contains(cell_index))
            })
            .collect()
    }

    /// Scores one endpoint pair. `path_m` is the true shortest path length.
    pub fn score_pair(&self, s: (f64, f64), g_pt: (f64, f64)) -> PairRecord {
        let record = |path_m, path_g, term, reason| PairRecord {
            s,
            g: g_pt,
            path_m,
            path_g,
            term,
            reason,
        };
        let (Some(s_cell), Some(g_cell)) =
            (self.world.world_to_cell(s), self.world.world_to_cell(g_pt))
        else {
            return record(None, None, 0.0, PairReason::EndpointUncovered);
        };
        let s_idx = self.world.cell_index(s_cell.0, s_cell.1);
        let g_idx = self.world.cell_index(g_cell.0, g_cell.1);

        let s_locs = self.containing(s_idx);
        let g_locs = self.containing(g_idx);
        if s_locs.is_empty() || g_locs.is_empty() {
            return record(None, None, 0.0, PairReason::EndpointUncovered);
        }

        // True shortest path.
        let path_m = {
            let field = distance_field(self.world, s_cell);
            let d = field[g_idx];
            if d.is_finite() {
                d
            } else {
                return record(None, None, 0.0, PairReason::NoMetricPath);
            }
        };

        // Same-location shortcut: the graph path degenerates to the true
        // shortest path.
        if s_locs.iter().any(|v| g_locs.contains(v)) {
            return record(Some(path_m), Some(path_m), 1.0, PairReason::SameLocation);
        }

        // Stitch: enter the graph at a location containing s, leave at one
        // containing g; legs to observation points measured in the grid.
        let mut best: Option<(f64, NodeId, NodeId)> = None;
        for &v in &s_locs {
            let leg_s = self.fields[&v][s_idx];
            if !leg_s.is_finite() {
                continue;
            }
            for &u in &g_locs {
                let Some(leg_g) = self.fields.get(&u).map(|f| f[g_idx]) else {
                    continue;
                };
                let Some(&mid) = self.graph_dist[&v].get(&u) else {
                    continue;
                };
                let total = leg_s + mid + leg_g;
                if !total.is_finite() {
                    continue;
                }
                let better = best.is_none_or(|(b, bv, bu)| {
                    total < b - 1e-12 || ((total - b).abs() <= 1e-12 && (v, u) < (bv, bu))
                });
                if better {
                    best = Some((total, v, u));
                }
            }
        }
        let Some((path_g, v, u)) = best else {
            return record(Some(path_m), None, 0.0, PairReason::NoGraphPath);
        };

        // Consistency of every edge on the chosen graph leg.
        let mut cur = u;
        while cur != v {
            let prev = self.graph_parent[&v][&cur];
            if !self
                .edge_ok
                .get(&ord_pair(prev, cur))
                .copied()
                .unwrap_or(false)
            {
                return record(
                    Some(path_m),
                    Some(path_g),
                    0.0,
                    PairReason::InconsistentEdge,
                );
            }
            cur = prev;
        }

        let term = path_m / path_g.max(path_m);
        record(Some(path_m), Some(path_g), term, PairReason::Stitched)
    }
}

fn ord_pair(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn graph_dijkstra(
    g: &TopoGraph,
    src: NodeId,
    edge_weight: &BTreeMap<(NodeId, NodeId), f64>,
) -> (BTreeMap<NodeId, f64>, BTreeMap<NodeId, NodeId>) {
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut done: BTreeMap<NodeId, bool> = BTreeMap::new();
    dist.insert(src, 0.0);
    loop {
        let next = dist
            .iter()
            .filter(|(id, _)| !done.get(*id).copied().unwrap_or(false))
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(b.0)))
            .map(|(&id, &d)| (id, d));
        let Some((u, du)) = next else { break };
        done.insert(u, true);
        for (n, _) in g.neighbors(u).expect("node exists") {
            let Some(&w) = edge_weight.get(&(u, n)) else {
                continue;
            };
            if !w.is_finite() {
                continue;
            }
            let alt = du + w;
            if alt < dist.get(&n).copied().unwrap_or(f64::INFINITY) - 1e-15 {
                dist.insert(n, alt);
                parent.insert(n, u);
            }
        }
    }
    (dist, parent)
}

/// Average SPL over the given pairs, plus per-pair records.
pub fn spl(
    g: &TopoGraph,
    world: &WorldModel,
    pairs: &[((f64, f64), (f64, f64))],
    footprints: &BTreeMap<NodeId, LocationFootprint>,
) -> Result<(f64, Vec<PairRecord>), EvalError> {
    let ctx = SplContext::build(g, world, footprints)?;
    let records: Vec<PairRecord> = pairs
        .par_iter()
        .map(|&(s, g_pt)| ctx.score_pair(s, g_pt))
        .collect();
    let mean = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.term).sum::<f64>() / records.len() as f64
    };
    Ok((mean, records))
}

/// Computes footprints for every node of the graph from its debug poses.
pub fn node_footprints(
    g: &TopoGraph,
    world: &WorldModel,
    radius: f64,
) -> Result<BTreeMap<NodeId, LocationFootprint>, EvalError> {
    let nodes: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
    let mut poses = Vec::with_capacity(nodes.len());
    for &id in &nodes {
        let pose = g.debug_pose(id).ok_or(EvalError::MissingDebugPose(id))?;
        poses.push((id, pose));
    }
    poses
        .par_iter()
        .map(|&(id, pose)| {
            footprint(world, id, &pose, radius)
                .map(|fp| (id, fp))
                .map_err(EvalError::Footprint)
        })
        .collect()
}

/// Runs the full metric suite: components, coverage, edge consistency, and
/// SPL over endpoint pairs sampled from the trajectory (uniform, at least
/// `min_separation` apart, seeded).
pub fn evaluate(
    g: &TopoGraph,
    world: &WorldModel,
    trajectory: &[Pose2],
    cfg: &EvalConfig,
) -> Result<MetricsReport, EvalError> {
    let footprints = node_footprints(g, world, cfg.footprint_radius)?;
    let n_components = connected_components(g);
    let cov = coverage(g, world, &footprints);
    let inconsistent_edge_count = g
        .edges()
        .filter(|e| !edge_consistent(e.from, e.to, &footprints))
        .count();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    if trajectory.len() >= 2 {
        let mut attempts = 0;
        while pairs.len() < cfg.n_pairs && attempts < cfg.n_pairs * 200 {
            attempts += 1;
            let a = &trajectory[rng.random_range(0..trajectory.len())];
            let b = &trajectory[rng.random_range(0..trajectory.len())];
            if (a.dx - b.dx).hypot(a.dy - b.dy) < cfg.min_separation {
                continue;
            }
            pairs.push(((a.dx, a.dy), (b.dx, b.dy)));
        }
    }
    let (spl_mean, records) = spl(g, world, &pairs, &footprints)?;
    Ok(MetricsReport {
        n_components,
        coverage: cov,
        spl: spl_mean,
        inconsistent_edge_count,
        pairs: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CellState;
    use crate::geometry::{Scan2D, Transform2};
    use crate::placerec::Descriptor;

    fn node(g: &mut TopoGraph, pose: Pose2) -> NodeId {
        let id = g.add_node(
            Scan2D::centered(48, 0.1),
            Descriptor::new(vec![0.0], "polar-hist"),
            0.0,
        );
        g.set_debug_pose(id, pose);
        id
    }

    fn open_world(w_m: f64, h_m: f64) -> WorldModel {
        let mut w = WorldModel::filled(
            (w_m / 0.1) as u32 + 4,
            (h_m / 0.1) as u32 + 4,
            0.1,
            (-0.2, -0.2),
            CellState::Obstacle,
        );
        w.fill_rect(0.0, 0.0, w_m, h_m, CellState::Free);
        w
    }

    #[test]
    fn component_counting() {
        let mut g = TopoGraph::new();
        assert_eq!(connected_components(&g), 0);
        let a = node(&mut g, Pose2::new(1.0, 1.0, 0.0));
        assert_eq!(connected_components(&g), 1);
        let b = node(&mut g, Pose2::new(2.0, 1.0, 0.0));
        let c = node(&mut g, Pose2::new(3.0, 1.0, 0.0));
        let d = node(&mut g, Pose2::new(4.0, 1.0, 0.0));
        g.add_edge(a, b, Transform2::translation(1.0, 0.0)).unwrap();
        g.add_edge(c, d, Transform2::translation(1.0, 0.0)).unwrap();
        assert_eq!(connected_components(&g), 2);
        g.add_edge(b, c, Transform2::translation(1.0, 0.0)).unwrap();
        assert_eq!(connected_components(&g), 1);
    }

    #[test]
    fn single_node_covers_single_room() {
        let world = open_world(8.0, 8.0);
        let mut g = TopoGraph::new();
        node(&mut g, Pose2::new(4.0, 4.0, 0.0));
        let fps = node_footprints(&g, &world, 18.0).unwrap();
        let cov = coverage(&g, &world, &fps);
        assert!(cov >= 0.99, "coverage {cov}");
    }

    #[test]
    fn coverage_uses_largest_component() {
        // Two disjoint components: one covering more than the other.
        let mut world = open_world(20.0, 8.0);
        // Full divider.
        world.fill_rect(11.8, 0.0, 12.2, 8.0, CellState::Obstacle);
        let mut g = TopoGraph::new();
        // Component 1: two nodes in the large left part.
        let a = node(&mut g, Pose2::new(3.0, 4.0, 0.0));
        let b = node(&mut g, Pose2::new(9.0, 4.0, 0.0));
        g.add_edge(a, b, Transform2::translation(6.0, 0.0)).unwrap();
        // Component 2: one node in the smaller right part.
        node(&mut g, Pose2::new(16.0, 4.0, 0.0));

        let fps = node_footprints(&g, &world, 18.0).unwrap();
        let cov = coverage(&g, &world, &fps);
        let left_area = 11.8 * 8.0;
        let expected = left_area / (left_area + (20.0 - 12.2) * 8.0);
        assert!(
            (cov - expected).abs() < 0.03,
            "coverage {cov}, expected about {expected}"
        );
    }

    #[test]
    fn edge_consistency_by_footprint_intersection() {
        let mut world = open_world(20.0, 8.0);
        world.fill_rect(9.8, 0.0, 10.2, 8.0, CellState::Obstacle);
        let mut g = TopoGraph::new();
        let a = node(&mut g, Pose2::new(3.0, 4.0, 0.0));
        let b = node(&mut g, Pose2::new(5.0, 4.0, 0.0));
        let c = node(&mut g, Pose2::new(16.0, 4.0, 0.0));
        g.add_edge(a, b, Transform2::translation(2.0, 0.0)).unwrap();
        g.add_edge(b, c, Transform2::translation(11.0, 0.0))
            .unwrap();
        let fps = node_footprints(&g, &world, 18.0).unwrap();
        // Same side: consistent. Across the sealed divider: not.
        assert!(edge_consistent(a, b, &fps));
        assert!(!edge_consistent(b, c, &fps));

        // A doorway makes the far rooms adjacent again.
        let mut world2 = world.clone();
        world2.fill_rect(9.7, 3.4, 10.3, 4.6, CellState::Free);
        let fps2 = node_footprints(&g, &world2, 18.0).unwrap();
        assert!(edge_consistent(b, c, &fps2));
    }

    #[test]
    fn spl_same_location_and_inconsistent_shortcut() {
        // Two rooms sealed off from each other, joined only by a U-shaped
        // corridor well outside both footprints.
        let mut world = WorldModel::filled(244, 144, 0.1, (-0.2, -0.2), CellState::Obstacle);
        world.fill_rect(0.0, 0.0, 24.0, 6.0, CellState::Free);
        world.fill_rect(11.8, 0.0, 12.2, 6.0, CellState::Obstacle);
        // Vertical legs and the top band of the U.
        world.fill_rect(1.0, 6.0, 3.0, 12.0, CellState::Free);
        world.fill_rect(21.0, 6.0, 23.0, 12.0, CellState::Free);
        world.fill_rect(1.0, 10.0, 23.0, 12.0, CellState::Free);

        let mut g = TopoGraph::new();
        let a = node(&mut g, Pose2::new(6.0, 3.0, 0.0));
        let b = node(&mut g, Pose2::new(18.0, 3.0, 0.0));
        // The lying shortcut edge right through the divider.
        g.add_edge(a, b, Transform2::translation(12.0, 0.0))
            .unwrap();

        let fps = node_footprints(&g, &world, 10.0).unwrap();

        // Same-location pair: both endpoints inside node a's footprint.
        let (mean, recs) = spl(&g, &world, &[((5.0, 3.0), (7.0, 3.0))], &fps).unwrap();
        assert_eq!(recs[0].reason, PairReason::SameLocation);
        assert!((mean - 1.0).abs() < 1e-12);

        // Cross pair: the only graph path rides the inconsistent edge.
        let (mean, recs) = spl(&g, &world, &[((6.0, 3.0), (18.0, 3.0))], &fps).unwrap();
        assert_eq!(recs[0].reason, PairReason::InconsistentEdge);
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn spl_perfect_corridor_tiling_scores_one() {
        let world = open_world(30.0, 4.0);
        let mut g = TopoGraph::new();
        let mut prev: Option<NodeId> = None;
        for k in 0..6 {
            let id = node(&mut g, Pose2::new(2.5 + 5.0 * k as f64, 2.0, 0.0));
            if let Some(p) = prev {
                g.add_edge(p, id, Transform2::translation(5.0, 0.0))
                    .unwrap();
            }
            prev = Some(id);
        }
        let fps = node_footprints(&g, &world, 18.0).unwrap();
        let pairs: Vec<((f64, f64), (f64, f64))> = (0..20)
            .map(|k| {
                let x0 = 1.0 + 0.9 * k as f64;
                let x1 = 29.0 - 0.7 * k as f64;
                ((x0, 2.0), (x1, 2.0))
            })
            .filter(|(s, g)| (s.0 - g.0).abs() > 5.0)
            .collect();
        let (mean, recs) = spl(&g, &world, &pairs, &fps).unwrap();
        for r in &recs {
            assert!(r.term > 0.0, "record failed: {r:?}");
        }
        assert!(mean >= 0.98, "corridor SPL {mean}");
    }

    /// Exhaustive stitching oracle: for each pair enumerate all (v, u)
    /// location pairs with grid legs computed by a fresh Dijkstra and the
    /// graph leg by Floyd-Warshall, then apply the same consistency zeroing.
    fn spl_bruteforce(
        g: &TopoGraph,
        world: &WorldModel,
        pairs: &[((f64, f64), (f64, f64))],
        footprints: &BTreeMap<NodeId, LocationFootprint>,
    ) -> Vec<f64> {
        let ids: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
        let n = ids.len();
        let idx_of = |id: NodeId| ids.iter().position(|&x| x == id).unwrap();
        let obs: Vec<(u32, u32)> = ids
            .iter()
            .map(|&id| {
                let p = g.debug_pose(id).unwrap();
                world.world_to_cell((p.dx, p.dy)).unwrap()
            })
            .collect();
        let fields: Vec<Vec<f64>> = obs.iter().map(|&c| distance_field(world, c)).collect();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut via: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];
        for i in 0..n {
            dist[i][i] = 0.0;
        }
        for e in g.edges() {
            let (i, j) = (idx_of(e.from), idx_of(e.to));
            let w = fields[i][world.cell_index(obs[j].0, obs[j].1)];
            dist[i][j] = w;
            dist[j][i] = w;
        }
        let direct = dist.clone();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] + dist[k][j] < dist[i][j] - 1e-12 {
                        dist[i][j] = dist[i][k] + dist[k][j];
                        via[i][j] = Some(k);
                    }
                }
            }
        }
        // Edge-consistency along reconstructed paths.
        fn path_edges(
            i: usize,
            j: usize,
            via: &[Vec<Option<usize>>],
            direct: &[Vec<f64>],
            out: &mut Vec<(usize, usize)>,
        ) {
            match via[i][j] {
                None => {
                    if i != j && direct[i][j].is_finite() {
                        out.push((i.min(j), i.max(j)));
                    }
                }
                Some(k) => {
                    path_edges(i, k, via, direct, out);
                    path_edges(k, j, via, direct, out);
                }
            }
        }

        pairs
            .iter()
            .map(|&(s, gp)| {
                let s_idx = world
                    .world_to_cell(s)
                    .map(|(x, y)| world.cell_index(x, y))
                    .unwrap();
                let g_idx = world
                    .world_to_cell(gp)
                    .map(|(x, y)| world.cell_index(x, y))
                    .unwrap();
                let s_locs: Vec<usize> = (0..n)
                    .filter(|&i| footprints[&ids[i]].cells.contains(s_idx))
                    .collect();
                let g_locs: Vec<usize> = (0..n)
                    .filter(|&i| footprints[&ids[i]].cells.contains(g_idx))
                    .collect();
                if s_locs.is_empty() || g_locs.is_empty() {
                    return 0.0;
                }
                let s_cell = world.world_to_cell(s).unwrap();
                let m_field = distance_field(world, s_cell);
                let path_m = m_field[g_idx];
                if !path_m.is_finite() {
                    return 0.0;
                }
                if s_locs.iter().any(|v| g_locs.contains(v)) {
                    return 1.0;
                }
                let mut best: Option<(f64, usize, usize)> = None;
                for &v in &s_locs {
                    for &u in &g_locs {
                        let total = fields[v][s_idx] + dist[v][u] + fields[u][g_idx];
                        if total.is_finite()
                            && best.is_none_or(|(b, bv, bu)| {
                                total < b - 1e-12
                                    || ((total - b).abs() <= 1e-12
                                        && (ids[v], ids[u]) < (ids[bv], ids[bu]))
                            })
                        {
                            best = Some((total, v, u));
                        }
                    }
                }
                let Some((path_g, v, u)) = best else {
                    return 0.0;
                };
                let mut edges = Vec::new();
                path_edges(v, u, &via, &direct, &mut edges);
                let consistent = edges
                    .iter()
                    .all(|&(i, j)| edge_consistent(ids[i], ids[j], footprints));
                if !consistent {
                    return 0.0;
                }
                path_m / path_g.max(path_m)
            })
            .collect()
    }

    #[test]
    fn spl_matches_bruteforce_on_small_graphs() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for round in 0..10 {
            let mut world = open_world(20.0, 12.0);
            for _ in 0..6 {
                let x = rng.random_range(2.0..18.0);
                let y = rng.random_range(2.0..10.0);
                world.fill_rect(x, y, x + 1.0, y + 0.4, CellState::Obstacle);
            }
            let mut g = TopoGraph::new();
            let n = rng.random_range(3..=8);
            let mut ids = Vec::new();
            for _ in 0..n {
                loop {
                    let x = rng.random_range(1.0..19.0);
                    let y = rng.random_range(1.0..11.0);
                    if world.is_free((x, y)) {
                        ids.push(node(&mut g, Pose2::new(x, y, 0.0)));
                        break;
                    }
                }
            }
            for w in ids.windows(2) {
                g.add_edge(w[0], w[1], Transform2::identity()).unwrap();
            }
            // A few random extra edges.
            for _ in 0..2 {
                let a = ids[rng.random_range(0..ids.len())];
                let b = ids[rng.random_range(0..ids.len())];
                if a != b {
                    let _ = g.add_edge(a, b, Transform2::identity());
                }
            }
            let fps = node_footprints(&g, &world, 6.0).unwrap();
            let pairs: Vec<((f64, f64), (f64, f64))> = (0..10)
                .map(|_| {
                    (
                        (rng.random_range(1.0..19.0), rng.random_range(1.0..11.0)),
                        (rng.random_range(1.0..19.0), rng.random_range(1.0..11.0)),
                    )
                })
                .filter(|&(s, gp)| world.is_free(s) && world.is_free(gp))
                .collect();
            let (_, recs) = spl(&g, &world, &pairs, &fps).unwrap();
            let oracle = spl_bruteforce(&g, &world, &pairs, &fps);
            for (r, o) in recs.iter().zip(&oracle) {
                assert!(
                    (r.term - o).abs() < 1e-9,
                    "round {round}: stitched {} vs oracle {o} ({r:?})",
                    r.term
                );
            }
        }
    }

    #[test]
    fn evaluate_is_deterministic() {
        let world = open_world(10.0, 10.0);
        let mut g = TopoGraph::new();
        let a = node(&mut g, Pose2::new(3.0, 5.0, 0.0));
        let b = node(&mut g, Pose2::new(7.0, 5.0, 0.0));
        g.add_edge(a, b, Transform2::translation(4.0, 0.0)).unwrap();
        let trajectory: Vec<Pose2> = (0..40)
            .map(|i| Pose2::new(1.0 + 0.2 * i as f64, 5.0, 0.0))
            .collect();
        let cfg = EvalConfig {
            n_pairs: 10,
            min_separation: 3.0,
            ..EvalConfig::default()
        };
        let r1 = evaluate(&g, &world, &trajectory, &cfg).unwrap();
        let r2 = evaluate(&g, &world, &trajectory, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        assert_eq!(r1.n_components, 1);
        assert!(r1.coverage > 0.9);
        assert!(r1.spl > 0.9, "spl {}", r1.spl);
    }

    #[test]
    fn coverage_monotone_under_node_addition() {
        let world = open_world(16.0, 8.0);
        let mut g = TopoGraph::new();
        let a = node(&mut g, Pose2::new(3.0, 4.0, 0.0));
        let fps = node_footprints(&g, &world, 6.0).unwrap();
        let before = coverage(&g, &world, &fps);
        let b = node(&mut g, Pose2::new(12.0, 4.0, 0.0));
        g.add_edge(a, b, Transform2::translation(9.0, 0.0)).unwrap();
        let fps = node_footprints(&g, &world, 6.0).unwrap();
        let after = coverage(&g, &world, &fps);
        assert!(
            after >= before - 1e-12,
            "coverage dropped: {before} -> {after}"
        );
    }
}
