//! SE(2) transform algebra, point clouds, and packed 2D scan grids.
//!
//! Every other module builds on these value types. All of them are plain
//! immutable data: share and send them across threads freely.

mod cloud;
mod scan;
mod transform;

pub use cloud::{Point3, PointCloud};
pub use scan::{Scan2D, ScanDecodeError, SCAN_HEADER_LEN, SCAN_MAGIC};
pub use transform::{angle_diff, normalize_angle, Pose2, Transform2};
