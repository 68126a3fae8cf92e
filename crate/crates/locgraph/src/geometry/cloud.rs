use serde::{Deserialize, Serialize};

/// A single 3D point in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// An unordered set of 3D points tagged with the frame they were captured in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub sensor_frame: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, sensor_frame: impl Into<String>) -> Self {
        Self {
            points,
            sensor_frame: sensor_frame.into(),
        }
    }

    pub fn empty(sensor_frame: impl Into<String>) -> Self {
        Self::new(Vec::new(), sensor_frame)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Serializes as little-endian f32 (x, y, z) triples, the on-disk
    /// cloud block format.
    pub fn to_f32_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * 12);
        for p in &self.points {
            out.extend_from_slice(&(p.x as f32).to_le_bytes());
            out.extend_from_slice(&(p.y as f32).to_le_bytes());
            out.extend_from_slice(&(p.z as f32).to_le_bytes());
        }
        out
    }

    pub fn from_f32_bytes(bytes: &[u8], sensor_frame: impl Into<String>) -> Result<Self, String> {
        if bytes.len() % 12 != 0 {
            return Err(format!(
                "cloud block length {} is not a multiple of 12",
                bytes.len()
            ));
        }
        let mut points = Vec::with_capacity(bytes.len() / 12);
        for chunk in bytes.chunks_exact(12) {
            let x = f32::from_le_bytes(chunk[0..4].try_into().unwrap()) as f64;
            let y = f32::from_le_bytes(chunk[4..8].try_into().unwrap()) as f64;
            let z = f32::from_le_bytes(chunk[8..12].try_into().unwrap()) as f64;
            let p = Point3::new(x, y, z);
            if !p.is_finite() {
                return Err("cloud block contains non-finite coordinates".to_string());
            }
            points.push(p);
        }
        Ok(Self::new(points, sensor_frame))
    }
}
