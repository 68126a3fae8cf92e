//! Place descriptors and retrieval.
//!
//! A place descriptor is a fixed-length real vector computed from a
//! location's observation. Retrieval is an exact top-k search by Euclidean
//! distance over the graph's nodes; graphs stay small enough (hundreds of
//! nodes) that a linear scan beats any index structure.
//!
//! The built-in `polar-hist` encoder is a geometric baseline; learned
//! encoders plug in through per-frame external descriptor files carrying
//! whatever length they produce.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Scan2D;
use crate::topograph::NodeId;

/// Radial rings of the polar histogram baseline.
const POLAR_RINGS: usize = 16;
/// Angular sectors of the polar histogram baseline.
const POLAR_SECTORS: usize = 32;
/// Baseline descriptor length: one magnitude spectrum per ring.
pub const POLAR_HIST_LEN: usize = POLAR_RINGS * (POLAR_SECTORS / 2 + 1);

/// A fixed-length place descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub encoder: String,
}

impl Descriptor {
    pub fn new(values: Vec<f64>, encoder: impl Into<String>) -> Self {
        Self {
            values,
            encoder: encoder.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Joins an image-branch descriptor and a cloud-branch descriptor into the
/// unified place descriptor. Either side may be empty (no cameras, or no
/// cloud encoder) and drops out of the concatenation.
pub fn concat_descriptors(d_img: &Descriptor, d_cloud: &Descriptor) -> Descriptor {
    let mut values = Vec::with_capacity(d_img.len() + d_cloud.len());
    values.extend_from_slice(&d_img.values);
    values.extend_from_slice(&d_cloud.values);
    let encoder = if d_img.is_empty() {
        d_cloud.encoder.clone()
    } else if d_cloud.is_empty() {
        d_img.encoder.clone()
    } else {
        format!("{}+{}", d_img.encoder, d_cloud.encoder)
    };
    Descriptor { values, encoder }
}

#[derive(Debug)]
pub enum PlaceRecError {
    UnknownEncoder(String),
    DuplicateNode(NodeId),
    LengthMismatch { expected: usize, actual: usize },
}

impl std::fmt::Display for PlaceRecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlaceRecError::UnknownEncoder(tag) => write!(f, "unknown encoder tag '{tag}'"),
            PlaceRecError::DuplicateNode(id) => write!(f, "node {id} already indexed"),
            PlaceRecError::LengthMismatch { expected, actual } => {
                write!(f, "descriptor length {actual}, index expects {expected}")
            }
        }
    }
}

impl std::error::Error for PlaceRecError {}

/// Available descriptor encoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoder {
    /// Rotation-robust polar occupancy spectrum computed from the scan.
    PolarHist,
    /// Descriptors are injected per frame from an external file.
    External,
}

impl Encoder {
    pub fn from_tag(tag: &str) -> Result<Self, PlaceRecError> {
        match tag {
            "polar-hist" => Ok(Encoder::PolarHist),
            "external" => Ok(Encoder::External),
            other => Err(PlaceRecError::UnknownEncoder(other.to_string())),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Encoder::PolarHist => "polar-hist",
            Encoder::External => "external",
        }
    }
}

/// Computes a place descriptor for a scan with the named encoder.
///
/// The `polar-hist` baseline bins occupied cells into radial rings and
/// angular sectors around the sensor, normalizes each ring, and keeps the
/// magnitude spectrum across the angular axis, which is invariant to
/// rotations of the scan about the sensor. The image set is reserved for
/// encoders with a camera branch; the baseline ignores it.
pub fn describe(
    scan: &Scan2D,
    _images: Option<&[Vec<u8>]>,
    encoder: &str,
) -> Result<Descriptor, PlaceRecError> {
    match Encoder::from_tag(encoder)? {
        Encoder::PolarHist => Ok(polar_hist(scan)),
        Encoder::External => Err(PlaceRecError::UnknownEncoder(
            "external descriptors are file-injected, not computed".to_string(),
        )),
    }
}

fn polar_hist(scan: &Scan2D) -> Descriptor {
    let max_radius =
        f64::from(scan.width().min(scan.height())) * f64::from(scan.resolution()) / 2.0;
    let mut hist = [[0.0f64; POLAR_SECTORS]; POLAR_RINGS];
    // Bilinear splat across the two nearest rings and sectors; hard binning
    // would make the spectrum hop when rasterization nudges a cell across a
    // bin boundary.
    for (ix, iy) in scan.occupied_cells() {
        let (x, y) = scan.cell_to_metric(ix, iy);
        let r = x.hypot(y);
        if r >= max_radius {
            continue;
        }
        let rf = (r / max_radius) * POLAR_RINGS as f64 - 0.5;
        let ring0 = rf.floor();
        let ring_frac = rf - ring0;
        let angle = y.atan2(x).rem_euclid(std::f64::consts::TAU);
        let af = (angle / std::f64::consts::TAU) * POLAR_SECTORS as f64 - 0.5;
        let sector0 = af.floor();
        let sector_frac = af - sector0;
        for (dr, wr) in [(0i64, 1.0 - ring_frac), (1, ring_frac)] {
            let ring = ring0 as i64 + dr;
            if ring < 0 || ring >= POLAR_RINGS as i64 {
                continue;
            }
            for (ds, ws) in [(0i64, 1.0 - sector_frac), (1, sector_frac)] {
                let sector = (sector0 as i64 + ds).rem_euclid(POLAR_SECTORS as i64) as usize;
                hist[ring as usize][sector] += wr * ws;
            }
        }
    }

    let mut values = Vec::with_capacity(POLAR_HIST_LEN);
    for ring in &mut hist {
        let total: f64 = ring.iter().sum();
        if total > 0.0 {
            for v in ring.iter_mut() {
                *v /= total;
            }
        }
        // Magnitude spectrum over the angular axis: a rotation of the scan
        // circularly shifts the ring, leaving magnitudes unchanged.
        for k in 0..=POLAR_SECTORS / 2 {
            let mut re = 0.0f64;
            let mut im = 0.0f64;
            for (s, &v) in ring.iter().enumerate() {
                let phase = -std::f64::consts::TAU * (k * s) as f64 / POLAR_SECTORS as f64;
                re += v * phase.cos();
                im += v * phase.sin();
            }
            values.push(re.hypot(im));
        }
    }
    Descriptor::new(values, "polar-hist")
}

/// A retrieval candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub node_id: NodeId,
    pub distance: f64,
}

/// The descriptor index over graph nodes: one entry per node, all entries
/// the same length. One writer at a time; any number of readers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlaceIndex {
    entries: BTreeMap<NodeId, Descriptor>,
    encoder: String,
}

impl PlaceIndex {
    pub fn new(encoder: impl Into<String>) -> Self {
        Self {
            entries: BTreeMap::new(),
            encoder: encoder.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn encoder(&self) -> &str {
        &self.encoder
    }

    pub fn insert(&mut self, node_id: NodeId, d: Descriptor) -> Result<(), PlaceRecError> {
        if self.entries.contains_key(&node_id) {
            return Err(PlaceRecError::DuplicateNode(node_id));
        }
        if let Some(first) = self.entries.values().next() {
            if first.len() != d.len() {
                return Err(PlaceRecError::LengthMismatch {
                    expected: first.len(),
                    actual: d.len(),
                });
            }
        }
        self.entries.insert(node_id, d);
        Ok(())
    }

    /// Exact top-k by ascending Euclidean distance; ties break toward the
    /// lower node id. Returns fewer than `k` when the index is small.
    pub fn query_top_k(&self, q: &Descriptor, k: usize) -> Vec<Candidate> {
        let mut all: Vec<Candidate> = self
            .entries
            .iter()
            .filter(|(_, d)| d.len() == q.len())
            .map(|(&node_id, d)| Candidate {
                node_id,
                distance: q.distance(d),
            })
            .collect();
        all.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.node_id.cmp(&b.node_id))
        });
        all.truncate(k);
        all
    }
}
