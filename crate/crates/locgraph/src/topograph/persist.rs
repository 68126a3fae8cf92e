use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LocationNode, NodeId, TopoGraph};
use crate::geometry::{Scan2D, ScanDecodeError, Transform2};
use crate::placerec::Descriptor;

/// Container magic: a JSON header describing nodes, edges, transforms and
/// descriptors, followed by the packed binary scan blocks in node order.
pub const GRAPH_MAGIC: [u8; 8] = *b"LOCGRPH1";

#[derive(Serialize, Deserialize)]
struct Header {
    next_id: u32,
    nodes: Vec<NodeHeader>,
    edges: Vec<EdgeHeader>,
    debug_poses: Vec<DebugPoseEntry>,
}

#[derive(Serialize, Deserialize)]
struct NodeHeader {
    id: u32,
    created_at: f64,
    descriptor: Descriptor,
    scan_len: u32,
}

#[derive(Serialize, Deserialize)]
struct EdgeHeader {
    from: u32,
    to: u32,
    rel: Transform2,
}

#[derive(Serialize, Deserialize)]
struct DebugPoseEntry {
    id: u32,
    pose: Transform2,
}

#[derive(Debug)]
pub enum GraphDecodeError {
    Io(std::io::Error),
    BadMagic,
    Truncated,
    Header(serde_json::Error),
    Scan(ScanDecodeError),
    DanglingEdge(NodeId),
}

impl std::fmt::Display for GraphDecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphDecodeError::Io(e) => write!(f, "graph file i/o: {e}"),
            GraphDecodeError::BadMagic => write!(f, "not a graph container (bad magic)"),
            GraphDecodeError::Truncated => write!(f, "graph container truncated"),
            GraphDecodeError::Header(e) => write!(f, "graph header: {e}"),
            GraphDecodeError::Scan(e) => write!(f, "scan block: {e}"),
            GraphDecodeError::DanglingEdge(id) => {
                write!(f, "edge references missing node {id}")
            }
        }
    }
}

impl std::error::Error for GraphDecodeError {}

impl From<std::io::Error> for GraphDecodeError {
    fn from(e: std::io::Error) -> Self {
        GraphDecodeError::Io(e)
    }
}

/// Deterministic byte encoding of the whole graph, debug sidecar included.
pub fn graph_to_bytes(g: &TopoGraph) -> Vec<u8> {
    let nodes: Vec<NodeHeader> = g
        .nodes()
        .map(|n| NodeHeader {
            id: n.id.0,
            created_at: n.created_at,
            descriptor: n.descriptor.clone(),
            scan_len: n.scan.serialized_len() as u32,
        })
        .collect();
    let edges: Vec<EdgeHeader> = g
        .edges()
        .map(|e| EdgeHeader {
            from: e.from.0,
            to: e.to.0,
            rel: e.rel_transform,
        })
        .collect();
    let debug_poses: Vec<DebugPoseEntry> = g
        .debug_poses()
        .iter()
        .map(|(&id, &pose)| DebugPoseEntry { id: id.0, pose })
        .collect();
    let header = Header {
        next_id: g.next_id_value(),
        nodes,
        edges,
        debug_poses,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::new();
    out.extend_from_slice(&GRAPH_MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for n in g.nodes() {
        out.extend_from_slice(&n.scan.to_bytes());
    }
    out
}

pub fn graph_from_bytes(bytes: &[u8]) -> Result<TopoGraph, GraphDecodeError> {
    if bytes.len() < GRAPH_MAGIC.len() + 4 {
        return Err(GraphDecodeError::Truncated);
    }
    if bytes[..8] != GRAPH_MAGIC {
        return Err(GraphDecodeError::BadMagic);
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end {
        return Err(GraphDecodeError::Truncated);
    }
    let header: Header =
        serde_json::from_slice(&bytes[12..header_end]).map_err(GraphDecodeError::Header)?;

    let mut nodes = BTreeMap::new();
    let mut offset = header_end;
    for nh in header.nodes {
        let end = offset + nh.scan_len as usize;
        if bytes.len() < end {
            return Err(GraphDecodeError::Truncated);
        }
        let scan = Scan2D::from_bytes(&bytes[offset..end]).map_err(GraphDecodeError::Scan)?;
        offset = end;
        let id = NodeId(nh.id);
        nodes.insert(
            id,
            LocationNode {
                id,
                scan,
                descriptor: nh.descriptor,
                created_at: nh.created_at,
            },
        );
    }
    if offset != bytes.len() {
        return Err(GraphDecodeError::Truncated);
    }

    let mut edges = BTreeMap::new();
    for eh in header.edges {
        let (from, to) = (NodeId(eh.from), NodeId(eh.to));
        for id in [from, to] {
            if !nodes.contains_key(&id) {
                return Err(GraphDecodeError::DanglingEdge(id));
            }
        }
        let (key, stored) = if from < to {
            ((from, to), eh.rel)
        } else {
            ((to, from), eh.rel.invert())
        };
        edges.insert(key, stored);
    }

    let mut debug_poses = BTreeMap::new();
    for entry in header.debug_poses {
        debug_poses.insert(NodeId(entry.id), entry.pose);
    }

    Ok(TopoGraph::restore(
        nodes,
        edges,
        header.next_id,
        debug_poses,
    ))
}

/// Writes the container to disk.
pub fn serialize_graph(g: &TopoGraph, path: &Path) -> Result<(), GraphDecodeError> {
    let bytes = graph_to_bytes(g);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads a container back.
pub fn deserialize_graph(path: &Path) -> Result<TopoGraph, GraphDecodeError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    graph_from_bytes(&bytes)
}
