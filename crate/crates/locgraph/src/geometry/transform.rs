use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// A rigid SE(2) transform: rotation by `dtheta` followed by translation
/// by `(dx, dy)`.
///
/// The crate-wide convention is left multiplication: a `Transform2` named
/// `a_from_b` maps points expressed in frame `b` into frame `a`, and
/// `compose(a_from_b, b_from_c) == a_from_c`. See `docs/frames.md`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform2 {
    pub dx: f64,
    pub dy: f64,
    /// Rotation in radians, kept normalized to (-pi, pi].
    pub dtheta: f64,
}

impl Transform2 {
    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self {
            dx,
            dy,
            dtheta: normalize_angle(dtheta),
        }
    }

    pub fn identity() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            dtheta: 0.0,
        }
    }

    /// Pure translation.
    pub fn translation(dx: f64, dy: f64) -> Self {
        Self::new(dx, dy, 0.0)
    }

    /// Euclidean norm of the translation part.
    pub fn translation_norm(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dtheta.is_finite()
    }

    /// `compose(a, b)` applies `b` first, then `a`: with `a = p_from_c` and
    /// `b = c_from_g`, the result is `p_from_g`.
    pub fn compose(&self, other: &Transform2) -> Transform2 {
        let (sin, cos) = self.dtheta.sin_cos();
        Transform2 {
            dx: self.dx + cos * other.dx - sin * other.dy,
            dy: self.dy + sin * other.dx + cos * other.dy,
            dtheta: normalize_angle(self.dtheta + other.dtheta),
        }
    }

    pub fn invert(&self) -> Transform2 {
        let (sin, cos) = self.dtheta.sin_cos();
        // R(-theta) * -t
        Transform2 {
            dx: -(cos * self.dx + sin * self.dy),
            dy: -(-sin * self.dx + cos * self.dy),
            dtheta: normalize_angle(-self.dtheta),
        }
    }

    /// Maps a point from the child frame into the parent frame.
    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (sin, cos) = self.dtheta.sin_cos();
        (
            self.dx + cos * p.0 - sin * p.1,
            self.dy + sin * p.0 + cos * p.1,
        )
    }

    /// Translation scaled by `factor`, rotation unchanged. Used for
    /// injecting odometry scale bias in tests and experiments.
    pub fn scale_translation(&self, factor: f64) -> Transform2 {
        Transform2 {
            dx: self.dx * factor,
            dy: self.dy * factor,
            dtheta: self.dtheta,
        }
    }

    /// Relative transform taking this pose's frame onto `other`'s frame
    /// when both are expressed in a common parent frame.
    pub fn relative_to(&self, other: &Transform2) -> Transform2 {
        self.invert().compose(other)
    }
}

/// A global pose is the same algebraic object as a relative transform:
/// `world_from_body`. The alias marks intent at API boundaries.
pub type Pose2 = Transform2;

/// Normalizes an angle to (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI);
    if r == 0.0 {
        PI
    } else {
        r - PI
    }
}

/// Absolute angular difference on the circle, in [0, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}
