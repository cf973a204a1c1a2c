//! Building static factory models from point clouds.
//!
//! The crate covers the processing chain from a (possibly labeled) point cloud
//! of an industrial interior to a list of object poses:
//!
//! - [`geometry`]: point clouds, XYZL files, k-d tree, blocks, scan quality metrics
//! - [`scene`]: deterministic synthetic factory tacts with ground truth
//! - [`segnet`]: point-wise segmentation network with variational weights
//! - [`uncertainty`]: entropy, variance and credible-interval uncertainty
//! - [`clustering`]: k-means, fuzzy c-means, DBSCAN, OPTICS, spectral clustering
//! - [`pose`]: RANSAC + ICP registration and pose extraction
//! - [`export`]: AML-style scene files and the digitalization savings estimate

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod export;
pub mod geometry;
pub mod pose;
pub mod scene;
pub mod segnet;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{Point, PointCloud};
