//! Point-cloud container, XYZL file I/O, spatial indexing, block partitioning
//! and point-cloud quality metrics.
//!
//! Coordinates are stored in meters. Quality metrics report distances in
//! millimeters, matching how scan quality is usually quoted.

mod blocks;
mod index;
pub mod io;
mod metrics;

pub use blocks::{downsample_voxel, partition_blocks, Block};
pub use index::KdTree;
pub use io::{load_cloud, save_cloud};
pub use metrics::{accuracy_mm, completeness, density, nearest_distances};

use nalgebra::Point3;

use crate::error::{Error, Result};

pub type Point = Point3<f64>;

/// An ordered list of 3D points with optional per-point color and class label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    colors: Option<Vec<[u8; 3]>>,
    labels: Option<Vec<u32>>,
}

impl PointCloud {
    /// Builds a cloud, checking that coordinates are finite and attribute
    /// lengths match the point count.
    pub fn new(
        points: Vec<Point>,
        colors: Option<Vec<[u8; 3]>>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::validation(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(Error::validation(format!(
                    "{} colors for {} points",
                    c.len(),
                    points.len()
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::validation(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, colors, labels })
    }

    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        Self::new(points, None, None)
    }

    pub fn with_labels(points: Vec<Point>, labels: Vec<u32>) -> Result<Self> {
        Self::new(points, None, Some(labels))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Replaces the label column.
    pub fn set_labels(&mut self, labels: Vec<u32>) -> Result<()> {
        if labels.len() != self.points.len() {
            return Err(Error::validation(format!(
                "{} labels for {} points",
                labels.len(),
                self.points.len()
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    /// A new cloud holding the points at `indices`, attributes carried along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Applies `f` to every point, keeping attributes.
    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(f).collect(),
            colors: self.colors.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point::from(sum / self.points.len() as f64))
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    #[allow(clippy::type_complexity)]
    pub fn into_parts(self) -> (Vec<Point>, Option<Vec<[u8; 3]>>, Option<Vec<u32>>) {
        (self.points, self.colors, self.labels)
    }

    /// Concatenates clouds. Attributes survive only if every part has them.
    pub fn concat(parts: &[PointCloud]) -> PointCloud {
        let points = parts.iter().flat_map(|p| p.points.iter().copied()).collect();
        let colors = parts
            .iter()
            .map(|p| p.colors.as_ref())
            .collect::<Option<Vec<_>>>()
            .map(|cs| cs.into_iter().flatten().copied().collect());
        let labels = parts
            .iter()
            .map(|p| p.labels.as_ref())
            .collect::<Option<Vec<_>>>()
            .map(|ls| ls.into_iter().flatten().copied().collect());
        PointCloud { points, colors, labels }
    }
}
