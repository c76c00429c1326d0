//! Classification of 3D LiDAR pointcloud frames into pedestrians, cars,
//! cyclists, and ignored points.
//!
//! The processing chain: parse a velodyne frame ([`kitti`]), split it into
//! ground and object points with a simulated cloth or a RANSAC plane
//! ([`ground`]), group the object points into candidate clusters by mean
//! shift or DBSCAN ([`cluster`]), reduce each cluster to a five-dimensional
//! feature vector ([`features`]), and classify the clusters with a decision
//! tree, a linear SVM, or a small MLP ([`classify`]). [`eval`] scores
//! per-point predictions against ground truth and [`pipeline`] wires the
//! stages into reproducible batch runs.

pub mod classify;
pub mod cluster;
pub mod eval;
pub mod features;
pub mod ground;
pub mod kitti;
pub mod pipeline;

pub use kitti::{Point, PointClass, PointCloud};
