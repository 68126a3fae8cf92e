use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::evaluation::WorldModel;
use crate::geometry::{Point3, PointCloud, Pose2, Transform2};
use crate::placerec::Descriptor;

/// Odometry noise: Gaussian perturbations resampled at a fixed cadence and
/// held between events. `linear_std` scales the translation magnitude
/// (fraction of motion); `angular_std` adds heading error proportional to
/// distance traveled (radians per meter).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub linear_std: f64,
    pub angular_std: f64,
    /// Resample period, seconds.
    pub cadence: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            linear_std: 0.0,
            angular_std: 0.0,
            cadence: 1.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.linear_std < 0.0 || self.angular_std < 0.0 {
            return Err("noise stds must be non-negative".into());
        }
        if !(self.cadence > 0.0) {
            return Err("noise cadence must be positive".into());
        }
        Ok(())
    }
}

/// Lidar simulation settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub n_rays: u32,
    pub max_range: f64,
    /// Frame period, seconds.
    pub dt: f64,
    /// Heights at which each wall hit is replicated.
    pub wall_heights: Vec<f64>,
    /// Height of synthetic floor returns along the ray path.
    pub floor_z: f64,
    /// Height of synthetic ceiling returns along the ray path.
    pub ceiling_z: f64,
    /// Spacing of floor/ceiling returns along each ray, meters.
    pub band_step: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            n_rays: 720,
            max_range: 25.0,
            dt: 0.2,
            wall_heights: vec![0.6, 1.0, 1.4, 1.8],
            floor_z: 0.05,
            ceiling_z: 2.9,
            band_step: 0.5,
        }
    }
}

/// One replayable frame of the simulated (or recorded) stream.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub cloud: PointCloud,
    /// Incremental motion, previous robot frame from current robot frame.
    pub odom: Transform2,
    /// Ground truth, for evaluation and rendering only.
    pub debug_pose: Pose2,
    /// Injected descriptor for the `external` encoder.
    pub external_descriptor: Option<Descriptor>,
}

/// Simulates the sensor stream along a trajectory: a 2D lidar lifted to 3D
/// with synthetic floor and ceiling bands, plus odometry increments
/// perturbed per the noise model. Deterministic given the noise seed.
pub fn simulate_sensors(
    world: &WorldModel,
    trajectory: &[Pose2],
    noise: &NoiseModel,
    cfg: &SensorConfig,
) -> Vec<SequenceFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let linear = Normal::new(0.0, noise.linear_std).expect("validated std");
    let angular = Normal::new(0.0, noise.angular_std).expect("validated std");

    let mut frames = Vec::with_capacity(trajectory.len());
    let mut eps_linear = 0.0;
    let mut eps_angular = 0.0;
    let mut next_event = 0.0f64;
    for (i, pose) in trajectory.iter().enumerate() {
        let timestamp = i as f64 * cfg.dt;
        if timestamp >= next_event {
            eps_linear = linear.sample(&mut rng);
            eps_angular = angular.sample(&mut rng);
            next_event += noise.cadence;
        }
        let odom = if i == 0 {
            Transform2::identity()
        } else {
            let truth = trajectory[i - 1].relative_to(pose);
            let dist = truth.translation_norm();
            Transform2::new(
                truth.dx * (1.0 + eps_linear),
                truth.dy * (1.0 + eps_linear),
                truth.dtheta + eps_angular * dist,
            )
        };
        frames.push(SequenceFrame {
            frame_id: i as u64,
            timestamp,
            cloud: scan_cloud(world, pose, cfg),
            odom,
            debug_pose: *pose,
            external_descriptor: None,
        });
    }
    frames
}

/// Ray-casts one 3D point cloud in the robot frame.
pub fn scan_cloud(world: &WorldModel, pose: &Pose2, cfg: &SensorConfig) -> PointCloud {
    let mut points = Vec::new();
    let from = (pose.dx, pose.dy);
    for k in 0..cfg.n_rays {
        let rel_angle = std::f64::consts::TAU * f64::from(k) / f64::from(cfg.n_rays);
        let world_angle = pose.dtheta + rel_angle;
        let hit = world.raycast(from, world_angle, cfg.max_range);
        let free_len = hit.unwrap_or(cfg.max_range);

        let (sin, cos) = rel_angle.sin_cos();
        if let Some(d) = hit {
            for &z in &cfg.wall_heights {
                points.push(Point3::new(d * cos, d * sin, z));
            }
        }
        // Floor and ceiling returns along the traversed free space; the
        // projection stage is expected to cut these bands away.
        let mut r = cfg.band_step;
        while r < free_len {
            points.push(Point3::new(r * cos, r * sin, cfg.floor_z));
            points.push(Point3::new(r * cos, r * sin, cfg.ceiling_z));
            r += cfg.band_step;
        }
    }
    PointCloud::new(points, "sim-lidar")
}
