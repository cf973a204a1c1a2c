//! Scan quality against a reference cloud: accuracy (RMS nearest-reference
//! distance), completeness (share of points within a tolerance) and density
//! (mean neighbor count within a radius).
//!
//! Distances to the reference are point-to-point nearest-neighbor distances.

use super::{KdTree, PointCloud};
use crate::error::{Error, Result};

fn require_points(cloud: &PointCloud, what: &str) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::validation(format!("{what} cloud is empty")));
    }
    Ok(())
}

/// Distance in meters from each measured point to its nearest reference point.
pub fn nearest_distances(measured: &PointCloud, reference: &PointCloud) -> Result<Vec<f64>> {
    require_points(measured, "measured")?;
    require_points(reference, "reference")?;
    let tree = KdTree::build(reference.points());
    Ok(measured
        .points()
        .iter()
        .map(|p| tree.nearest(p).expect("reference is non-empty").1.sqrt())
        .collect())
}

/// Standard deviation of the nearest-reference distances about zero, in mm.
pub fn accuracy_mm(measured: &PointCloud, reference: &PointCloud) -> Result<f64> {
    let d = nearest_distances(measured, reference)?;
    let mean_sq = d.iter().map(|x| (x * 1000.0) * (x * 1000.0)).sum::<f64>() / d.len() as f64;
    Ok(mean_sq.sqrt())
}

/// Fraction of measured points whose nearest reference point lies within
/// `tol_mm` (inclusive).
pub fn completeness(measured: &PointCloud, reference: &PointCloud, tol_mm: f64) -> Result<f64> {
    if !(tol_mm >= 0.0) || !tol_mm.is_finite() {
        return Err(Error::validation(format!("completeness tolerance must be >= 0, got {tol_mm}")));
    }
    let d = nearest_distances(measured, reference)?;
    let hits = d.iter().filter(|&&x| x * 1000.0 <= tol_mm).count();
    Ok(hits as f64 / d.len() as f64)
}

/// Mean number of other points within `radius_mm` of each point.
pub fn density(cloud: &PointCloud, radius_mm: f64) -> Result<f64> {
    require_points(cloud, "input")?;
    let r = radius_mm / 1000.0;
    let tree = KdTree::build(cloud.points());
    let total: usize = cloud
        .points()
        .iter()
        .map(|p| tree.count_within(p, r) - 1)
        .sum();
    Ok(total as f64 / cloud.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_points(pts.iter().map(|p| Point::new(p[0], p[1], p[2])).collect()).unwrap()
    }

    #[test]
    fn identical_clouds_are_perfect() {
        let c = cloud(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.5, 0.5, 0.5]]);
        assert_eq!(accuracy_mm(&c, &c).unwrap(), 0.0);
        assert_eq!(completeness(&c, &c, 10.0).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_of_three_and_four_mm() {
        let reference = cloud(&[[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]]);
        let measured = cloud(&[[0.003, 0.0, 0.0], [10.0, 0.004, 0.0]]);
        let sigma = accuracy_mm(&measured, &reference).unwrap();
        assert!((sigma - 12.5f64.sqrt()).abs() < 1e-9, "{sigma}");
        assert!((sigma - 3.5355).abs() < 1e-4);
    }

    #[test]
    fn completeness_counts_displaced_points() {
        let reference = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let measured = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.02]]);
        assert_eq!(completeness(&measured, &reference, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn completeness_validates_tolerance() {
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        assert!(completeness(&c, &c, -1.0).is_err());
        assert!(completeness(&c, &c, f64::NAN).is_err());
        // The boundary is inclusive, so exact duplicates pass a zero tolerance.
        assert_eq!(completeness(&c, &c, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn density_excludes_self() {
        assert_eq!(density(&cloud(&[[0.0, 0.0, 0.0]]), 10.0).unwrap(), 0.0);
        let pair = cloud(&[[0.0, 0.0, 0.0], [0.005, 0.0, 0.0]]);
        assert_eq!(density(&pair, 10.0).unwrap(), 1.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let e = PointCloud::default();
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        assert!(accuracy_mm(&e, &c).is_err());
        assert!(accuracy_mm(&c, &e).is_err());
        assert!(completeness(&e, &c, 10.0).is_err());
        assert!(density(&e, 10.0).is_err());
    }
}
