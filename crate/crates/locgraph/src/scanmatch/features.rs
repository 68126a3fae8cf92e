use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::Scan2D;

/// Number of bit tests in the binary patch descriptor.
pub const DESCRIPTOR_BITS: usize = 256;
/// Rotation slots sampled per keypoint.
pub const DESCRIPTOR_ROTATIONS: usize = 16;
/// One 256-bit descriptor in four words.
pub type BinaryDescriptor = [u64; 4];
/// A keypoint's descriptor at each sampled pattern rotation; slot 0 is the
/// canonical (unrotated) one. Matching searches over the query's rotations,
/// which sidesteps per-keypoint orientation estimation: on sparse scans the
/// visible mass around a corner depends on the viewpoint, making centroid
/// orientations unstable by tens of degrees.
pub type RotDescriptor = [BinaryDescriptor; DESCRIPTOR_ROTATIONS];

const PATCH_RADIUS: i32 = 16;
// Rotated patch samples plus rounding must stay inside the image.
const BORDER_MARGIN: i32 = 25;
const NMS_RADIUS: usize = 2;
const HARRIS_K: f32 = 0.04;
const ABS_RESPONSE_FLOOR: f32 = 1e-7;
const MAX_FEATURES: usize = 150;
// Distance-transform cap, cells. Bits sampled beyond any structure saturate
// here and stay stable.
const DIST_CAP: f32 = 24.0;

/// A corner keypoint in a 2D scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    /// Grid cell of the corner.
    pub cell: (u16, u16),
    /// Cell center in sensor-frame meters.
    pub metric: (f64, f64),
    /// Harris corner response at the cell.
    pub response: f32,
}

/// Keypoints plus their binary patch descriptors for one scan.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<RotDescriptor>,
    pub detector: String,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

/// Hamming distance between two single-rotation descriptors.
#[inline]
pub fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

/// Rotation-searched distance: the query descriptor is tried at every
/// sampled pattern rotation against the candidate's canonical slot.
#[inline]
pub fn hamming_rot(query: &RotDescriptor, candidate: &RotDescriptor) -> u32 {
    query
        .iter()
        .map(|q| hamming(q, &candidate[0]))
        .min()
        .expect("non-empty rotation set")
}

struct DetectorParams {
    response_threshold: f32,
}

fn detector_params(tag: &str) -> DetectorParams {
    // Absolute thresholds: responses on binary scans have a fixed scale, and
    // a per-scan relative cut would starve weakly structured scenes.
    // Unknown tags are rejected at config validation; fall back to the
    // default here.
    match tag {
        "harris-low" => DetectorParams {
            response_threshold: 0.05,
        },
        _ => DetectorParams {
            response_threshold: 0.5,
        },
    }
}

/// Tags accepted by `detect_features`; config validation checks against this.
pub fn known_detector(tag: &str) -> bool {
    matches!(tag, "harris" | "harris-low")
}

/// Detects Harris corners on the smoothed occupancy image and attaches a
/// rotation-steered binary descriptor sampled from the scan's distance
/// transform. Deterministic for a fixed scan and tag; a featureless scan
/// yields an empty set.
pub fn detect_features(scan: &Scan2D, detector: &str) -> FeatureSet {
    let params = detector_params(detector);
    let w = usize::from(scan.width());
    let h = usize::from(scan.height());
    let empty = FeatureSet {
        keypoints: Vec::new(),
        descriptors: Vec::new(),
        detector: detector.to_string(),
    };
    if w < (2 * BORDER_MARGIN + 2) as usize || h < (2 * BORDER_MARGIN + 2) as usize {
        return empty;
    }
    if scan.occupied_count() == 0 {
        return empty;
    }

    let img = Image::from_scan(scan);
    let smooth = img.box_blur().box_blur();
    let response = harris_response(&smooth);
    let dist = distance_transform(&img);

    let threshold = params.response_threshold.max(ABS_RESPONSE_FLOOR);
    let mut candidates = local_maxima(&response, threshold);
    // Strongest first; raster index breaks ties so output is reproducible.
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    candidates.truncate(MAX_FEATURES);

    let patterns = rotated_patterns();
    let mut keypoints = Vec::with_capacity(candidates.len());
    let mut descriptors = Vec::with_capacity(candidates.len());
    for &(x, y, r) in &candidates {
        let mut rotations = [[0u64; 4]; DESCRIPTOR_ROTATIONS];
        for (k, slot) in rotations.iter_mut().enumerate() {
            *slot = describe_patch(&dist, x as i32, y as i32, &patterns[k]);
        }
        keypoints.push(Keypoint {
            cell: (x as u16, y as u16),
            metric: scan.cell_to_metric(x as u16, y as u16),
            response: r,
        });
        descriptors.push(rotations);
    }
    FeatureSet {
        keypoints,
        descriptors,
        detector: detector.to_string(),
    }
}

struct Image {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Image {
    fn from_scan(scan: &Scan2D) -> Self {
        let w = usize::from(scan.width());
        let h = usize::from(scan.height());
        let mut data = vec![0.0f32; w * h];
        for (ix, iy) in scan.occupied_cells() {
            data[usize::from(iy) * w + usize::from(ix)] = 1.0;
        }
        Self { w, h, data }
    }

    #[inline]
    fn at(&self, x: i32, y: i32) -> f32 {
        let x = x.clamp(0, self.w as i32 - 1) as usize;
        let y = y.clamp(0, self.h as i32 - 1) as usize;
        self.data[y * self.w + x]
    }

    /// Radius-1 box blur, separable.
    fn box_blur(&self) -> Image {
        let horiz = Image {
            w: self.w,
            h: self.h,
            data: separable_pass_x(&self.data, self.w, self.h, 1, 1.0 / 3.0),
        };
        Image {
            w: self.w,
            h: self.h,
            data: separable_pass_y(&horiz.data, self.w, self.h, 1, 1.0 / 3.0),
        }
    }
}

/// Horizontal windowed sum with edge clamping; the interior skips bounds
/// logic so the loop vectorizes.
fn separable_pass_x(src: &[f32], w: usize, h: usize, radius: usize, scale: f32) -> Vec<f32> {
    let mut out = vec![0.0f32; w * h];
    let r = radius as i32;
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out_row = &mut out[y * w..(y + 1) * w];
        for (x, o) in out_row.iter_mut().enumerate().take(radius.min(w)) {
            let mut s = 0.0;
            for dx in -r..=r {
                let xi = (x as i32 + dx).clamp(0, w as i32 - 1) as usize;
                s += row[xi];
            }
            *o = s * scale;
        }
        if w > 2 * radius {
            for x in radius..w - radius {
                let mut s = 0.0;
                for dx in 0..=2 * radius {
                    s += row[x - radius + dx];
                }
                out_row[x] = s * scale;
            }
            for x in w - radius..w {
                let mut s = 0.0;
                for dx in -r..=r {
                    let xi = (x as i32 + dx).clamp(0, w as i32 - 1) as usize;
                    s += row[xi];
                }
                out_row[x] = s * scale;
            }
        }
    }
    out
}

/// Vertical companion of `separable_pass_x`.
fn separable_pass_y(src: &[f32], w: usize, h: usize, radius: usize, scale: f32) -> Vec<f32> {
    let mut out = vec![0.0f32; w * h];
    let r = radius as i32;
    for y in 0..h {
        let clamped = y < radius || y + radius >= h;
        for x in 0..w {
            let mut s = 0.0;
            if clamped {
                for dy in -r..=r {
                    let yi = (y as i32 + dy).clamp(0, h as i32 - 1) as usize;
                    s += src[yi * w + x];
                }
            } else {
                for dy in 0..=2 * radius {
                    s += src[(y - radius + dy) * w + x];
                }
            }
            out[y * w + x] = s * scale;
        }
    }
    out
}

/// Two-pass chamfer distance to the nearest occupied cell, capped at
/// `DIST_CAP`. Smooth almost everywhere, which keeps descriptor bits stable
/// under small steering errors.
fn distance_transform(img: &Image) -> Image {
    let (w, h) = (img.w, img.h);
    const DIAG: f32 = 1.4142135;
    let mut d = vec![DIST_CAP; w * h];
    for i in 0..w * h {
        if img.data[i] > 0.5 {
            d[i] = 0.0;
        }
    }
    // Forward pass.
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut best = d[i];
            if x > 0 {
                best = best.min(d[i - 1] + 1.0);
            }
            if y > 0 {
                best = best.min(d[i - w] + 1.0);
                if x > 0 {
                    best = best.min(d[i - w - 1] + DIAG);
                }
                if x + 1 < w {
                    best = best.min(d[i - w + 1] + DIAG);
                }
            }
            d[i] = best.min(DIST_CAP);
        }
    }
    // Backward pass.
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut best = d[i];
            if x + 1 < w {
                best = best.min(d[i + 1] + 1.0);
            }
            if y + 1 < h {
                best = best.min(d[i + w] + 1.0);
                if x > 0 {
                    best = best.min(d[i + w - 1] + DIAG);
                }
                if x + 1 < w {
                    best = best.min(d[i + w + 1] + DIAG);
                }
            }
            d[i] = best.min(DIST_CAP);
        }
    }
    Image { w, h, data: d }
}

/// Harris corner response: Sobel gradients, 5x5 box-summed structure tensor,
/// det(M) - k * trace(M)^2.
fn harris_response(img: &Image) -> Image {
    let (w, h) = (img.w, img.h);
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let interior_y = y > 0 && y + 1 < h;
        for x in 0..w {
            let i = y * w + x;
            if interior_y && x > 0 && x + 1 < w {
                let up = i - w;
                let down = i + w;
                let d = &img.data;
                gx[i] = (d[up + 1] + 2.0 * d[i + 1] + d[down + 1])
                    - (d[up - 1] + 2.0 * d[i - 1] + d[down - 1]);
                gy[i] = (d[down - 1] + 2.0 * d[down] + d[down + 1])
                    - (d[up - 1] + 2.0 * d[up] + d[up + 1]);
            } else {
                let (xi, yi) = (x as i32, y as i32);
                let tl = img.at(xi - 1, yi - 1);
                let tc = img.at(xi, yi - 1);
                let tr = img.at(xi + 1, yi - 1);
                let ml = img.at(xi - 1, yi);
                let mr = img.at(xi + 1, yi);
                let bl = img.at(xi - 1, yi + 1);
                let bc = img.at(xi, yi + 1);
                let br = img.at(xi + 1, yi + 1);
                gx[i] = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
                gy[i] = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
            }
        }
    }

    let mut ixx = vec![0.0f32; w * h];
    let mut iyy = vec![0.0f32; w * h];
    let mut ixy = vec![0.0f32; w * h];
    for i in 0..w * h {
        ixx[i] = gx[i] * gx[i];
        iyy[i] = gy[i] * gy[i];
        ixy[i] = gx[i] * gy[i];
    }
    let sxx = box_sum(&ixx, w, h, 2);
    let syy = box_sum(&iyy, w, h, 2);
    let sxy = box_sum(&ixy, w, h, 2);

    let mut data = vec![0.0f32; w * h];
    for i in 0..w * h {
        let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
        let trace = sxx[i] + syy[i];
        data[i] = det - HARRIS_K * trace * trace;
    }
    Image { w, h, data }
}

fn box_sum(src: &[f32], w: usize, h: usize, radius: usize) -> Vec<f32> {
    let tmp = separable_pass_x(src, w, h, radius, 1.0);
    separable_pass_y(&tmp, w, h, radius, 1.0)
}

/// Cells above `threshold` that dominate their (2*NMS_RADIUS+1)^2 window.
/// Plateau ties resolve to the first cell in raster order.
fn local_maxima(response: &Image, threshold: f32) -> Vec<(usize, usize, f32)> {
    let margin = BORDER_MARGIN as usize;
    let mut out = Vec::new();
    for y in margin..response.h - margin {
        for x in margin..response.w - margin {
            let r = response.data[y * response.w + x];
            if r < threshold {
                continue;
            }
            let mut is_max = true;
            // The margin guarantees the window stays in bounds.
            'window: for dy in -(NMS_RADIUS as i32)..=NMS_RADIUS as i32 {
                let row = ((y as i32 + dy) as usize) * response.w;
                for dx in -(NMS_RADIUS as i32)..=NMS_RADIUS as i32 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let other = response.data[row + (x as i32 + dx) as usize];
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if other > r || (earlier && other == r) {
                        is_max = false;
                        break 'window;
                    }
                }
            }
            if is_max {
                out.push((x, y, r));
            }
        }
    }
    out
}

/// The fixed sampling pattern, pre-rotated: for each rotation slot, 256
/// integer offset pairs inside the patch. Rounding the rotated offsets once
/// here makes each descriptor bit two array reads.
fn rotated_patterns() -> &'static [[((i32, i32), (i32, i32)); DESCRIPTOR_BITS]; DESCRIPTOR_ROTATIONS]
{
    static PATTERNS: OnceLock<[[((i32, i32), (i32, i32)); DESCRIPTOR_BITS]; DESCRIPTOR_ROTATIONS]> =
        OnceLock::new();
    PATTERNS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e55ed);
        let mut base = [((0, 0), (0, 0)); DESCRIPTOR_BITS];
        for slot in base.iter_mut() {
            loop {
                let a = (
                    rng.random_range(-PATCH_RADIUS..=PATCH_RADIUS),
                    rng.random_range(-PATCH_RADIUS..=PATCH_RADIUS),
                );
                let b = (
                    rng.random_range(-PATCH_RADIUS..=PATCH_RADIUS),
                    rng.random_range(-PATCH_RADIUS..=PATCH_RADIUS),
                );
                if a != b {
                    *slot = (a, b);
                    break;
                }
            }
        }
        let mut out = [[((0, 0), (0, 0)); DESCRIPTOR_BITS]; DESCRIPTOR_ROTATIONS];
        for (k, rotated) in out.iter_mut().enumerate() {
            let angle = std::f32::consts::TAU * k as f32 / DESCRIPTOR_ROTATIONS as f32;
            let (sin, cos) = angle.sin_cos();
            let rot = |(ox, oy): (i32, i32)| -> (i32, i32) {
                (
                    (cos * ox as f32 - sin * oy as f32).round() as i32,
                    (sin * ox as f32 + cos * oy as f32).round() as i32,
                )
            };
            for (bit, (a, b)) in base.iter().enumerate() {
                rotated[bit] = (rot(*a), rot(*b));
            }
        }
        out
    })
}

/// Samples one pre-rotated test pattern around (x, y) on the distance field.
fn describe_patch(
    dist: &Image,
    x: i32,
    y: i32,
    pattern: &[((i32, i32), (i32, i32)); DESCRIPTOR_BITS],
) -> BinaryDescriptor {
    let mut desc = [0u64; 4];
    for (bit, ((ax, ay), (bx, by))) in pattern.iter().enumerate() {
        if dist.at(x + ax, y + ay) < dist.at(x + bx, y + by) {
            desc[bit / 64] |= 1u64 << (bit % 64);
        }
    }
    desc
}

/// Fills the axis-aligned cell rectangle [x0, x1) x [y0, y1). Test support.
#[cfg(test)]
pub(crate) fn fill_rect(scan: &mut Scan2D, x0: u16, x1: u16, y0: u16, y1: u16) {
    for y in y0..y1 {
        for x in x0..x1 {
            scan.set(x, y, true);
        }
    }
}
