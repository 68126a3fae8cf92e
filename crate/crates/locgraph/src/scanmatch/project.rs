use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, Scan2D};

/// Controls the point-cloud to 2D scan projection.
///
/// Points with `z` inside `[floor_height_min, floor_height_max]` belong to
/// the floor band and are dropped; points with `z >= ceiling_height_min` are
/// dropped as ceiling. A cell becomes occupied when at least
/// `occupancy_threshold` surviving points fall into it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub floor_height_min: f64,
    pub floor_height_max: f64,
    pub ceiling_height_min: f64,
    pub scan_size: u16,
    pub resolution: f32,
    pub occupancy_threshold: u32,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            floor_height_min: -100.0,
            floor_height_max: 0.2,
            ceiling_height_min: 2.5,
            scan_size: 360,
            resolution: 0.1,
            occupancy_threshold: 1,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.floor_height_min > self.floor_height_max {
            return Err("floor_height_min must not exceed floor_height_max".into());
        }
        if self.floor_height_max >= self.ceiling_height_min {
            return Err("floor cut must lie below the ceiling cut".into());
        }
        if self.scan_size == 0 {
            return Err("scan_size must be positive".into());
        }
        if !(self.resolution > 0.0) {
            return Err("resolution must be positive".into());
        }
        if self.occupancy_threshold < 1 {
            return Err("occupancy_threshold must be at least 1".into());
        }
        Ok(())
    }
}

/// Projects a cloud onto the sensor-centered scan window, removing floor and
/// ceiling bands first. An empty cloud yields an empty scan.
pub fn project_cloud(cloud: &PointCloud, cfg: &ProjectionConfig) -> Scan2D {
    let mut scan = Scan2D::centered(cfg.scan_size, cfg.resolution);
    let cells = usize::from(cfg.scan_size) * usize::from(cfg.scan_size);
    let mut counts = vec![0u32; cells];
    for p in &cloud.points {
        if !p.is_finite() {
            continue;
        }
        if p.z >= cfg.floor_height_min && p.z <= cfg.floor_height_max {
            continue;
        }
        if p.z >= cfg.ceiling_height_min {
            continue;
        }
        if let Some((ix, iy)) = scan.metric_to_cell((p.x, p.y)) {
            counts[usize::from(iy) * usize::from(cfg.scan_size) + usize::from(ix)] += 1;
        }
    }
    for iy in 0..cfg.scan_size {
        for ix in 0..cfg.scan_size {
            let idx = usize::from(iy) * usize::from(cfg.scan_size) + usize::from(ix);
            if counts[idx] >= cfg.occupancy_threshold {
                scan.set(ix, iy, true);
            }
        }
    }
    scan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    #[test]
    fn empty_cloud_projects_to_empty_scan() {
        let scan = project_cloud(&PointCloud::empty("lidar"), &ProjectionConfig::default());
        assert_eq!(scan.occupied_count(), 0);
    }

    #[test]
    fn stacked_points_fill_exactly_one_cell() {
        let points: Vec<_> = (0..10)
            .map(|i| Point3::new(1.0, 2.0, 0.5 + 0.1 * f64::from(i)))
            .collect();
        let cloud = PointCloud::new(points, "lidar");
        let cfg = ProjectionConfig::default();
        let scan = project_cloud(&cloud, &cfg);
        assert_eq!(scan.occupied_count(), 1);
        // The one occupied cell is the one the grid assigns to (1.0, 2.0),
        // and its center sits within a cell of that point.
        let cell = scan.metric_to_cell((1.0, 2.0)).unwrap();
        assert!(scan.get(cell.0, cell.1));
        let center = scan.cell_to_metric(cell.0, cell.1);
        assert!((center.0 - 1.0).abs() <= 0.1 && (center.1 - 2.0).abs() <= 0.1);
    }

    #[test]
    fn floor_and_ceiling_points_are_removed() {
        let cloud = PointCloud::new(
            vec![Point3::new(1.0, 1.0, 0.05), Point3::new(1.0, 1.0, 3.0)],
            "lidar",
        );
        let scan = project_cloud(&cloud, &ProjectionConfig::default());
        assert_eq!(scan.occupied_count(), 0);
    }

    #[test]
    fn occupancy_threshold_requires_enough_points() {
        let cfg = ProjectionConfig {
            occupancy_threshold: 3,
            ..ProjectionConfig::default()
        };
        let two = PointCloud::new(
            vec![Point3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 1.1)],
            "lidar",
        );
        assert_eq!(project_cloud(&two, &cfg).occupied_count(), 0);
        let mut pts = two.points.clone();
        pts.push(Point3::new(0.0, 0.0, 1.2));
        let three = PointCloud::new(pts, "lidar");
        assert_eq!(project_cloud(&three, &cfg).occupied_count(), 1);
    }

    #[test]
    fn config_validation_catches_inverted_bands() {
        let mut cfg = ProjectionConfig::default();
        cfg.floor_height_max = 3.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ProjectionConfig::default();
        cfg.resolution = 0.0;
        assert!(cfg.validate().is_err());
    }
}
