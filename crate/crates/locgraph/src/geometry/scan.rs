use super::Transform2;

/// Magic prefix of the serialized scan block.
pub const SCAN_MAGIC: [u8; 4] = *b"SC2D";
/// Fixed serialized header: magic, u16 width, u16 height, f32 resolution,
/// f32 x3 origin (dx, dy, dtheta), little-endian.
pub const SCAN_HEADER_LEN: usize = 24;

/// A square binary occupancy projection of a point cloud, stored as a packed
/// bitmask (one bit per cell, ~16.2 kB at 360x360 instead of a byte image).
///
/// `origin` maps scan-grid metric coordinates into the sensor frame: the
/// center of cell `(ix, iy)` sits at
/// `origin.apply(((ix + 0.5) * resolution, (iy + 0.5) * resolution))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scan2D {
    width: u16,
    height: u16,
    resolution: f32,
    // Kept in header precision so values survive serialization unchanged.
    origin_x: f32,
    origin_y: f32,
    origin_theta: f32,
    occupancy: Vec<u8>,
}

#[derive(Debug)]
pub enum ScanDecodeError {
    TooShort(usize),
    BadMagic([u8; 4]),
    LengthMismatch { expected: usize, actual: usize },
    NonFinite,
}

impl std::fmt::Display for ScanDecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanDecodeError::TooShort(n) => write!(f, "scan block of {n} bytes is too short"),
            ScanDecodeError::BadMagic(m) => write!(f, "bad scan magic {m:?}"),
            ScanDecodeError::LengthMismatch { expected, actual } => {
                write!(f, "scan block length {actual}, expected {expected}")
            }
            ScanDecodeError::NonFinite => write!(f, "scan header contains non-finite values"),
        }
    }
}

impl std::error::Error for ScanDecodeError {}

impl Scan2D {
    /// An all-free scan window of `size` x `size` cells centered on the
    /// sensor: cell (0,0) sits at the window's lower-left corner.
    pub fn centered(size: u16, resolution: f32) -> Self {
        let half = f64::from(size) * f64::from(resolution) / 2.0;
        Self::new(
            size,
            size,
            resolution,
            Transform2::translation(-half, -half),
        )
    }

    pub fn new(width: u16, height: u16, resolution: f32, origin: Transform2) -> Self {
        let cells = usize::from(width) * usize::from(height);
        Self {
            width,
            height,
            resolution,
            origin_x: origin.dx as f32,
            origin_y: origin.dy as f32,
            origin_theta: origin.dtheta as f32,
            occupancy: vec![0u8; cells.div_ceil(8)],
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn resolution(&self) -> f32 {
        self.resolution
    }

    pub fn origin(&self) -> Transform2 {
        Transform2::new(
            f64::from(self.origin_x),
            f64::from(self.origin_y),
            f64::from(self.origin_theta),
        )
    }

    #[inline]
    pub fn get(&self, ix: u16, iy: u16) -> bool {
        debug_assert!(ix < self.width && iy < self.height);
        let idx = usize::from(iy) * usize::from(self.width) + usize::from(ix);
        self.occupancy[idx / 8] & (1 << (idx % 8)) != 0
    }

    #[inline]
    pub fn set(&mut self, ix: u16, iy: u16, occupied: bool) {
        debug_assert!(ix < self.width && iy < self.height);
        let idx = usize::from(iy) * usize::from(self.width) + usize::from(ix);
        if occupied {
            self.occupancy[idx / 8] |= 1 << (idx % 8);
        } else {
            self.occupancy[idx / 8] &= !(1 << (idx % 8));
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Occupied cells as grid indices, row-major order.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (u16, u16)> + '_ {
        let width = usize::from(self.width);
        self.occupancy.iter().enumerate().flat_map(move |(bi, &b)| {
            (0..8).filter_map(move |bit| {
                if b & (1 << bit) != 0 {
                    let idx = bi * 8 + bit;
                    Some(((idx % width) as u16, (idx / width) as u16))
                } else {
                    None
                }
            })
        })
    }

    /// Metric coordinates (sensor frame) of the center of cell `(ix, iy)`.
    pub fn cell_to_metric(&self, ix: u16, iy: u16) -> (f64, f64) {
        let res = f64::from(self.resolution);
        self.origin()
            .apply(((f64::from(ix) + 0.5) * res, (f64::from(iy) + 0.5) * res))
    }

    /// Grid cell containing the sensor-frame point, if inside the window.
    pub fn metric_to_cell(&self, p: (f64, f64)) -> Option<(u16, u16)> {
        let local = self.origin().invert().apply(p);
        let res = f64::from(self.resolution);
        let ix = (local.0 / res).floor();
        let iy = (local.1 / res).floor();
        if ix >= 0.0 && iy >= 0.0 && ix < f64::from(self.width) && iy < f64::from(self.height) {
            Some((ix as u16, iy as u16))
        } else {
            None
        }
    }

    /// Serialized block: fixed header plus the packed bitmask.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SCAN_HEADER_LEN + self.occupancy.len());
        out.extend_from_slice(&SCAN_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.resolution.to_le_bytes());
        out.extend_from_slice(&self.origin_x.to_le_bytes());
        out.extend_from_slice(&self.origin_y.to_le_bytes());
        out.extend_from_slice(&self.origin_theta.to_le_bytes());
        out.extend_from_slice(&self.occupancy);
        out
    }

    pub fn serialized_len(&self) -> usize {
        SCAN_HEADER_LEN + self.occupancy.len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ScanDecodeError> {
        if bytes.len() < SCAN_HEADER_LEN {
            return Err(ScanDecodeError::TooShort(bytes.len()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != SCAN_MAGIC {
            return Err(ScanDecodeError::BadMagic(magic));
        }
        let width = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        let height = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
        let resolution = f32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let ox = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let oy = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let ot = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
        if !resolution.is_finite() || !ox.is_finite() || !oy.is_finite() || !ot.is_finite() {
            return Err(ScanDecodeError::NonFinite);
        }
        let cells = usize::from(width) * usize::from(height);
        let expected = SCAN_HEADER_LEN + cells.div_ceil(8);
        if bytes.len() != expected {
            return Err(ScanDecodeError::LengthMismatch {
                expected,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin_x: ox,
            origin_y: oy,
            origin_theta: ot,
            occupancy: bytes[SCAN_HEADER_LEN..].to_vec(),
        })
    }

    /// Unpacked byte-image form, one byte per cell (0 free, 255 occupied),
    /// row-major. This reproduces the uncompressed on-disk layout older
    /// tooling expects.
    pub fn to_byte_image(&self) -> Vec<u8> {
        let cells = usize::from(self.width) * usize::from(self.height);
        let mut img = vec![0u8; cells];
        for idx in 0..cells {
            if self.occupancy[idx / 8] & (1 << (idx % 8)) != 0 {
                img[idx] = 255;
            }
        }
        img
    }
}
