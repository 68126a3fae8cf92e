//! The graph of locations: nodes hold a stored scan and place descriptor,
//! edges hold relative SE(2) transforms between observation points. No
//! global poses exist anywhere in the map; evaluation-only debug poses live
//! in a sidecar that mapping code never reads.
//!
//! Single writer (the maintainer); clone for concurrent snapshot readers.

mod export;
mod persist;

pub use export::{to_dot, to_graphml};
pub use persist::{
    deserialize_graph, graph_from_bytes, graph_to_bytes, serialize_graph, GraphDecodeError,
    GRAPH_MAGIC,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, Scan2D, Transform2};
use crate::placerec::Descriptor;

/// Identifier of a location node; monotonically increasing, never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One location: the scan and descriptor captured at its observation point.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationNode {
    pub id: NodeId,
    pub scan: Scan2D,
    pub descriptor: Descriptor,
    /// Capture time, seconds of stream time.
    pub created_at: f64,
}

/// An undirected edge; the stored transform is oriented `from`-frame from
/// `to`-frame (it maps points in `to`'s observation frame into `from`'s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopoEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub rel_transform: Transform2,
}

#[derive(Debug)]
pub enum GraphError {
    MissingNode(NodeId),
    SelfLoop(NodeId),
}

impl std::fmt::Display for GraphError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphError::MissingNode(id) => write!(f, "node {id} does not exist"),
            GraphError::SelfLoop(id) => write!(f, "self-loop on node {id} rejected"),
        }
    }
}

impl std::error::Error for GraphError {}

/// The topological map. Edges are stored once per unordered pair, keyed
/// (low, high) with the transform oriented low-frame from high-frame, and
/// traversed both ways via inversion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopoGraph {
    nodes: BTreeMap<NodeId, LocationNode>,
    edges: BTreeMap<(NodeId, NodeId), Transform2>,
    adjacency: BTreeMap<NodeId, Vec<NodeId>>,
    next_id: u32,
    /// Evaluation-only sidecar: ground-truth observation poses. Never read
    /// by mapping operations.
    debug_poses: BTreeMap<NodeId, Pose2>,
}

impl TopoGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&LocationNode> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &LocationNode> {
        self.nodes.values()
    }

    /// Edges in ascending (low, high) key order, oriented low from high.
    pub fn edges(&self) -> impl Iterator<Item = TopoEdge> + '_ {
        self.edges
            .iter()
            .map(|(&(from, to), &rel_transform)| TopoEdge {
                from,
                to,
                rel_transform,
            })
    }

    /// Adds a location with a fresh id.
    pub fn add_node(&mut self, scan: Scan2D, descriptor: Descriptor, created_at: f64) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            LocationNode {
                id,
                scan,
                descriptor,
                created_at,
            },
        );
        self.adjacency.entry(id).or_default();
        id
    }

    /// Adds or replaces the edge between two existing nodes. Re-adding the
    /// same unordered pair updates the stored transform instead of
    /// duplicating the edge.
    pub fn add_edge(
        &mut self,
        from: NodeId,
        to: NodeId,
        rel: Transform2,
    ) -> Result<(), GraphError> {
        if from == to {
            return Err(GraphError::SelfLoop(from));
        }
        if !self.contains(from) {
            return Err(GraphError::MissingNode(from));
        }
        if !self.contains(to) {
            return Err(GraphError::MissingNode(to));
        }
        let (key, stored) = if from < to {
            ((from, to), rel)
        } else {
            ((to, from), rel.invert())
        };
        if self.edges.insert(key, stored).is_none() {
            self.adjacency.get_mut(&from).unwrap().push(to);
            self.adjacency.get_mut(&to).unwrap().push(from);
            self.adjacency.get_mut(&from).unwrap().sort_unstable();
            self.adjacency.get_mut(&to).unwrap().sort_unstable();
        }
        Ok(())
    }

    /// Neighbors of `id` with transforms oriented id-frame from
    /// neighbor-frame, ascending by neighbor id.
    pub fn neighbors(&self, id: NodeId) -> Result<Vec<(NodeId, Transform2)>, GraphError> {
        let adj = self.adjacency.get(&id).ok_or(GraphError::MissingNode(id))?;
        Ok(adj
            .iter()
            .map(|&n| {
                let key = if id < n { (id, n) } else { (n, id) };
                let stored = self.edges[&key];
                let oriented = if id < n { stored } else { stored.invert() };
                (n, oriented)
            })
            .collect())
    }

    /// Whether an edge exists between the unordered pair.
    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.contains_key(&key)
    }

    /// Records the evaluation-only ground-truth pose of a node.
    pub fn set_debug_pose(&mut self, id: NodeId, pose: Pose2) {
        if self.contains(id) {
            self.debug_poses.insert(id, pose);
        }
    }

    pub fn debug_pose(&self, id: NodeId) -> Option<Pose2> {
        self.debug_poses.get(&id).copied()
    }

    pub fn debug_poses(&self) -> &BTreeMap<NodeId, Pose2> {
        &self.debug_poses
    }

    /// Drops the debug sidecar, leaving the pure topological map.
    pub fn strip_debug_poses(&mut self) {
        self.debug_poses.clear();
    }

    pub(crate) fn restore(
        nodes: BTreeMap<NodeId, LocationNode>,
        edges: BTreeMap<(NodeId, NodeId), Transform2>,
        next_id: u32,
        debug_poses: BTreeMap<NodeId, Pose2>,
    ) -> Self {
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for id in nodes.keys() {
            adjacency.entry(*id).or_default();
        }
        for &(a, b) in edges.keys() {
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        for adj in adjacency.values_mut() {
            adj.sort_unstable();
        }
        Self {
            nodes,
            edges,
            adjacency,
            next_id,
            debug_poses,
        }
    }

    pub(crate) fn next_id_value(&self) -> u32 {
        self.next_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_diff;

    pub(crate) fn tiny_scan(seed: u16) -> Scan2D {
        let mut scan = Scan2D::centered(48, 0.1);
        scan.set(seed % 48, (seed * 7 + 3) % 48, true);
        scan.set((seed * 3 + 1) % 48, seed % 48, true);
        scan
    }

    pub(crate) fn tiny_descriptor(seed: u32) -> Descriptor {
        Descriptor::new(
            (0..4).map(|i| f64::from(seed * 10 + i)).collect(),
            "polar-hist",
        )
    }

    #[test]
    fn add_node_assigns_fresh_monotonic_ids() {
        let mut g = TopoGraph::new();
        let a = g.add_node(tiny_scan(1), tiny_descriptor(1), 0.0);
        let b = g.add_node(tiny_scan(2), tiny_descriptor(2), 1.0);
        assert_eq!(a, NodeId(0));
        assert_eq!(b, NodeId(1));
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn add_edge_validates_endpoints() {
        let mut g = TopoGraph::new();
        let a = g.add_node(tiny_scan(1), tiny_descriptor(1), 0.0);
        let b = g.add_node(tiny_scan(2), tiny_descriptor(2), 0.0);
        g.add_edge(a, b, Transform2::translation(1.0, 0.0)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(a).unwrap().len(), 1);
        assert_eq!(g.neighbors(b).unwrap().len(), 1);

        assert!(matches!(
            g.add_edge(a, a, Transform2::identity()),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(matches!(
            g.add_edge(a, NodeId(99), Transform2::identity()),
            Err(GraphError::MissingNode(_))
        ));
    }

    #[test]
    fn duplicate_edge_updates_transform() {
        let mut g = TopoGraph::new();
        let a = g.add_node(tiny_scan(1), tiny_descriptor(1), 0.0);
        let b = g.add_node(tiny_scan(2), tiny_descriptor(2), 0.0);
        g.add_edge(a, b, Transform2::translation(1.0, 0.0)).unwrap();
        g.add_edge(b, a, Transform2::translation(0.0, 2.0)).unwrap();
        assert_eq!(g.edge_count(), 1);
        // Stored under (a, b), re-oriented from the (b, a) insertion.
        let (_, t) = g.neighbors(b).unwrap()[0];
        assert!((t.dx - 0.0).abs() < 1e-9 && (t.dy - 2.0).abs() < 1e-9);
    }

    #[test]
    fn neighbors_orientation_contract() {
        let mut g = TopoGraph::new();
        let a = g.add_node(tiny_scan(1), tiny_descriptor(1), 0.0);
        let b = g.add_node(tiny_scan(2), tiny_descriptor(2), 0.0);
        let t = Transform2::new(1.0, -0.5, 0.4);
        g.add_edge(a, b, t).unwrap();
        let (n, fwd) = g.neighbors(a).unwrap()[0];
        assert_eq!(n, b);
        assert_eq!(fwd, t);
        let (m, rev) = g.neighbors(b).unwrap()[0];
        assert_eq!(m, a);
        let round = fwd.compose(&rev);
        assert!(round.translation_norm() < 1e-9);
        assert!(angle_diff(round.dtheta, 0.0) < 1e-9);
    }

    #[test]
    fn isolated_node_and_star_topology() {
        let mut g = TopoGraph::new();
        let hub = g.add_node(tiny_scan(0), tiny_descriptor(0), 0.0);
        assert!(g.neighbors(hub).unwrap().is_empty());
        for i in 1..=4u16 {
            let n = g.add_node(tiny_scan(i), tiny_descriptor(u32::from(i)), 0.0);
            g.add_edge(hub, n, Transform2::translation(f64::from(i), 0.0))
                .unwrap();
        }
        assert_eq!(g.neighbors(hub).unwrap().len(), 4);
        assert!(g.neighbors(NodeId(77)).is_err());
    }

    #[test]
    fn debug_poses_live_in_sidecar() {
        let mut g = TopoGraph::new();
        let a = g.add_node(tiny_scan(1), tiny_descriptor(1), 0.0);
        g.set_debug_pose(a, Pose2::new(3.0, 4.0, 0.5));
        assert!(g.debug_pose(a).is_some());
        let mut stripped = g.clone();
        stripped.strip_debug_poses();
        assert!(stripped.debug_pose(a).is_none());
        // The topological content is unaffected.
        assert_eq!(stripped.node_count(), g.node_count());
        assert_eq!(stripped.edge_count(), g.edge_count());
    }
}
