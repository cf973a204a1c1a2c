use crate::error::{Error, Result};
use crate::geometry::{KdTree, Point};

use super::transform::{fit_transform, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iter: usize,
    /// Stop once an iteration improves the RMS by less than this.
    pub tol: f64,
    /// Correspondences farther apart than this are left out of the fit and
    /// count with this distance in the RMS.
    pub max_distance: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams { max_iter: 50, tol: 1e-7, max_distance: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps the source onto the target.
    pub transform: RigidTransform,
    /// RMS of the final correspondences.
    pub rms: f64,
    /// RMS at every correspondence step; non-increasing.
    pub history: Vec<f64>,
}

/// Nearest-target correspondences under `t`: matched pairs within the cap
/// and the capped RMS over all source points.
fn correspond(source: &[Point], tree: &KdTree, t: &RigidTransform, cap: f64) -> (Vec<Point>, Vec<Point>, f64) {
    let cap2 = cap * cap;
    let mut src = Vec::with_capacity(source.len());
    let mut dst = Vec::with_capacity(source.len());
    let mut sum = 0.0;
    for p in source {
        let q = t.apply(p);
        let (j, d2) = tree.nearest(&q).expect("target is non-empty");
        if d2 <= cap2 {
            src.push(*p);
            dst.push(tree.points()[j]);
            sum += d2;
        } else {
            sum += cap2;
        }
    }
    (src, dst, (sum / source.len() as f64).sqrt())
}

/// Point-to-point ICP. Every iteration re-matches each transformed source
/// point to its nearest target point and solves the least-squares rigid
/// transform of the original source onto the matches.
pub fn icp(source: &[Point], target: &[Point], init: &RigidTransform, params: &IcpParams) -> Result<IcpResult> {
    if source.len() < 3 || target.len() < 3 {
        return Err(Error::Estimation(format!(
            "icp needs >= 3 points per cloud, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let tree = KdTree::build(target);
    let mut t = *init;
    let (mut src, mut dst, mut rms) = correspond(source, &tree, &t, params.max_distance);
    let mut history = vec![rms];
    for _ in 0..params.max_iter {
        if rms == 0.0 {
            break;
        }
        let next = fit_transform(&src, &dst, false)?;
        let (s2, d2, r2) = correspond(source, &tree, &next, params.max_distance);
        // Keep the better of the two; the fit cannot make the matched error
        // worse, so this only guards against rounding.
        if r2 > rms {
            break;
        }
        let improvement = rms - r2;
        t = next;
        (src, dst, rms) = (s2, d2, r2);
        history.push(rms);
        if improvement < params.tol {
            break;
        }
    }
    Ok(IcpResult { transform: t, rms, history })
}
