//! Point cloud quality assessment toolkit.
//!
//! The crate covers the full objective/subjective evaluation loop:
//!
//! * [`cloud`] and [`ply`]: the point cloud model, PLY I/O and voxel pre-processing.
//! * [`kdtree`]: exact nearest-neighbour search used for point correspondences.
//! * [`point_metrics`]: point-to-point (D1), point-to-plane (D2), Hausdorff and
//!   YUV colour PSNR metrics.
//! * [`projection`], [`iqa`] and [`pooling`]: six-view orthographic rendering,
//!   full-reference image metrics and weighted view pooling.
//! * [`subjective`]: differential scores, subject screening, Grubbs sample
//!   rejection, DMOS, two-way ANOVA and content descriptors.
//! * [`stats`] and [`benchmark`]: correlation statistics, distribution tails and
//!   the logistic regression used to benchmark objective metrics.

pub mod benchmark;
pub mod cloud;
pub mod color;
mod error;
pub mod image;
pub mod iqa;
pub mod kdtree;
pub mod ply;
pub mod point_metrics;
pub mod pooling;
pub mod projection;
pub mod stats;
pub mod subjective;

pub use benchmark::{evaluate_metric, fit_logistic, BenchmarkReport, LogisticParams, ReportRow};
pub use cloud::{BoundingBox, PointCloud};
pub use error::{Error, Result};
pub use image::Image;
pub use iqa::{iqa_score, IqaMetric, IqaMetricId, MetricRegistry};
pub use kdtree::NnIndex;
pub use point_metrics::{ColorError, GeometryError, YuvPsnr};
pub use pooling::{pool_views, projection_pcqa, ViewScores};
pub use projection::{project_pair, project_six_views, View, ViewSet};

/// Point position in voxel units.
pub type Point3 = [f64; 3];

/// 8-bit RGB triple.
pub type Rgb = [u8; 3];
