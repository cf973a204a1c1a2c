use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_class_detailed, ClusterParams, Method};
use crate::error::{Error, Result};
use crate::geometry::{downsample_voxel, Point, PointCloud};
use crate::scene::Class;

use super::icp::{icp, IcpParams};
use super::ransac::{ransac_align, RansacParams};
use super::transform::{euler_zyx_matrix, ObjectPose, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseParams {
    pub ransac_iter: usize,
    pub inlier_tol: f64,
    pub min_inlier_fraction: f64,
    pub stop_fraction: f64,
    pub icp_max_iter: usize,
    pub icp_tol: f64,
    /// ICP correspondence cap in meters.
    pub icp_max_distance: f64,
    /// Clusters with fewer points are ignored.
    pub min_instance_points: usize,
    pub seed: u64,
}

impl Default for PoseParams {
    fn default() -> Self {
        PoseParams {
            ransac_iter: 4096,
            inlier_tol: 0.02,
            min_inlier_fraction: 0.1,
            stop_fraction: 0.99,
            icp_max_iter: 50,
            icp_tol: 1e-7,
            icp_max_distance: 0.1,
            min_instance_points: 50,
            seed: 0,
        }
    }
}

impl PoseParams {
    pub fn ransac(&self, seed: u64) -> RansacParams {
        RansacParams {
            n_iter: self.ransac_iter,
            inlier_tol: self.inlier_tol,
            seed,
            min_inlier_fraction: self.min_inlier_fraction,
            stop_fraction: self.stop_fraction,
            ..RansacParams::default()
        }
    }

    pub fn icp(&self) -> IcpParams {
        IcpParams { max_iter: self.icp_max_iter, tol: self.icp_tol, max_distance: self.icp_max_distance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: ObjectPose,
    /// Places the reference onto the instance.
    pub transform: RigidTransform,
    pub rms: f64,
    pub inlier_fraction: f64,
    pub icp_history: Vec<f64>,
}

/// Among the `order`-fold symmetric equivalents `R·Rz(k·360°/order)` of a
/// placement, the one with the smallest absolute yaw.
pub fn canonical_yaw(t: &RigidTransform, order: u32) -> RigidTransform {
    if order <= 1 {
        return *t;
    }
    (0..order)
        .map(|k| {
            let turn = euler_zyx_matrix(0.0, 0.0, std::f64::consts::TAU * k as f64 / order as f64);
            RigidTransform { rotation: t.rotation * turn, ..*t }
        })
        .min_by(|a, b| a.euler_zyx().2.abs().total_cmp(&b.euler_zyx().2.abs()))
        .expect("order >= 1")
}

/// Pose of one instance: coarse congruent-triplet alignment, ICP
/// refinement, then pose extraction.
///
/// Registration runs from the instance onto the complete reference, so
/// occluded parts of the object never lack a counterpart, and the result is
/// inverted to place the reference.
pub fn estimate_pose(
    instance: &[Point],
    reference: &[Point],
    class: Class,
    instance_id: u32,
    params: &PoseParams,
    seed: u64,
) -> Result<PoseEstimate> {
    let tag = |e: Error| Error::Pose { class: class.name().to_string(), instance: instance_id as usize, source: Box::new(e) };
    let coarse = ransac_align(instance, reference, &params.ransac(seed)).map_err(tag)?;
    let fine = icp(instance, reference, &coarse.transform, &params.icp()).map_err(tag)?;
    let transform = canonical_yaw(&fine.transform.inverse(), class.yaw_symmetry());
    Ok(PoseEstimate {
        pose: ObjectPose::from_transform(class.name(), instance_id, &transform),
        transform,
        rms: fine.rms,
        inlier_fraction: coarse.inlier_fraction,
        icp_history: fine.history,
    })
}

/// Centroid and unit normal of the least-squares plane.
pub fn fit_plane(points: &[Point]) -> Result<(Point, Vector3<f64>)> {
    if points.len() < 3 {
        return Err(Error::Estimation(format!("plane fit needs >= 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if eig.eigenvalues[order[1]] <= 1e-12 * eig.eigenvalues[order[2]].max(f64::MIN_POSITIVE) {
        return Err(Error::Estimation("points are collinear; no unique plane".into()));
    }
    Ok((Point::from(c), eig.eigenvectors.column(order[0]).normalize()))
}

/// Smallest rotation turning unit vector `from` onto unit vector `to`.
fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let v = from.cross(to);
    let c = from.dot(to);
    if c <= -1.0 + 1e-12 {
        // Antiparallel: half turn about any axis perpendicular to `from`.
        let axis = if from.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let k = from.cross(&axis).normalize();
        return 2.0 * k * k.transpose() - Matrix3::identity();
    }
    let vx = v.cross_matrix();
    Matrix3::identity() + vx + vx * vx / (1.0 + c)
}

/// Placement of a planar reference onto a planar instance. The tilt comes
/// from the normals and the offset along the normal from the plane fit; the
/// in-plane offset, ill-posed for a plane, matches bounding-box centers.
pub fn fit_plane_pose(instance: &[Point], reference: &[Point]) -> Result<RigidTransform> {
    let (c_ref, n_ref) = fit_plane(reference)?;
    let (c_ins, mut n_ins) = fit_plane(instance)?;
    if n_ins.dot(&n_ref) < 0.0 {
        n_ins = -n_ins;
    }
    let rotation = rotation_between(&n_ref, &n_ins);
    let mid = |pts: &mut dyn Iterator<Item = Vector3<f64>>| {
        let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
        for p in pts {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        (lo + hi) / 2.0
    };
    let local_ins = mid(&mut instance.iter().map(|p| rotation.transpose() * p.coords));
    let local_ref = mid(&mut reference.iter().map(|p| p.coords));
    let mut offset = local_ins - local_ref;
    let along = (rotation.transpose() * c_ins.coords - c_ref.coords).dot(&n_ref);
    offset += n_ref * (along - offset.dot(&n_ref));
    Ok(RigidTransform::new(rotation, rotation * offset))
}

/// Joins clusters lying on one plane: objects standing on a floor cut it
/// into pieces that density clustering reports separately.
/// Centroid and unit normal.
type Plane = (Point, Vector3<f64>);

fn merge_coplanar(parts: Vec<Vec<Point>>) -> Vec<Vec<Point>> {
    const MAX_ANGLE: f64 = 0.035;
    const MAX_OFFSET: f64 = 0.05;
    let mut merged: Vec<(Vec<Point>, Option<Plane>)> = Vec::new();
    for part in parts {
        let plane = fit_plane(&part).ok();
        let hit = plane.and_then(|(c, n)| {
            merged.iter().position(|(_, q)| {
                q.is_some_and(|(c2, n2)| {
                    n.dot(&n2).abs() >= MAX_ANGLE.cos() && (c - c2).dot(&n2).abs() <= MAX_OFFSET
                })
            })
        });
        match hit {
            Some(k) => {
                merged[k].0.extend(part);
                merged[k].1 = fit_plane(&merged[k].0).ok();
            }
            None => merged.push((part, plane)),
        }
    }
    merged.into_iter().map(|(p, _)| p).collect()
}

/// Failure of one instance during [`estimate_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFailure {
    pub class: String,
    pub instance: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneEstimate {
    /// Ordered by class, then instance id.
    pub poses: Vec<ObjectPose>,
    pub failures: Vec<PoseFailure>,
}

/// Per-instance seed stream.
fn instance_seed(seed: u64, class: Class, instance: u32) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((class.index() as u64) << 32 | instance as u64)
}

/// Poses of every instance of every class in `classes`. Instances are the
/// clusters of each class, numbered by ascending centroid x (then y).
pub fn estimate_all(
    cloud: &PointCloud,
    classes: &[Class],
    references: &BTreeMap<Class, PointCloud>,
    method: Method,
    cluster_params: &ClusterParams,
    params: &PoseParams,
) -> Result<SceneEstimate> {
    let mut out = SceneEstimate::default();
    for &class in classes {
        let reference = references
            .get(&class)
            .ok_or_else(|| Error::validation(format!("no reference template for class {class}")))?;
        let clusters = cluster_class_detailed(cloud, class.index() as u32, method, cluster_params)?;
        let mut instances: Vec<Vec<Point>> = clusters
            .instances()
            .into_iter()
            .filter(|m| m.len() >= params.min_instance_points)
            .map(|m| m.iter().map(|&i| cloud.points()[i]).collect())
            .collect();
        if class.is_structural() {
            instances = merge_coplanar(instances);
        }
        let centroid = |v: &Vec<Point>| v.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / v.len() as f64;
        instances.sort_by(|a, b| {
            let (ca, cb) = (centroid(a), centroid(b));
            ca.x.total_cmp(&cb.x).then(ca.y.total_cmp(&cb.y))
        });
        let results: Vec<Result<ObjectPose>> = instances
            .par_iter()
            .enumerate()
            .map(|(i, pts)| {
                let id = i as u32;
                if class.is_structural() {
                    let t = fit_plane_pose(pts, reference.points()).map_err(|e| Error::Pose {
                        class: class.name().into(),
                        instance: i,
                        source: Box::new(e),
                    })?;
                    Ok(ObjectPose::from_transform(class.name(), id, &t))
                } else {
                    estimate_pose(pts, reference.points(), class, id, params, instance_seed(params.seed, class, id))
                        .map(|e| e.pose)
                }
            })
            .collect();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(p) => out.poses.push(p),
                Err(e) => out.failures.push(PoseFailure {
                    class: class.name().into(),
                    instance: i as u32,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(out)
}

/// Pairs estimated and true poses of the same class by nearest position,
/// greedily from the closest pair; returns `(estimated, truth)` indices.
pub fn match_poses(estimated: &[ObjectPose], truth: &[ObjectPose]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, e) in estimated.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            if e.class == t.class {
                let d = ((e.x_mm - t.x_mm).powi(2) + (e.y_mm - t.y_mm).powi(2) + (e.z_mm - t.z_mm).powi(2)).sqrt();
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let (mut used_e, mut used_t) = (vec![false; estimated.len()], vec![false; truth.len()]);
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_e[i] && !used_t[j] {
            used_e[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    pub ransac: RansacParams,
    pub icp: IcpParams,
    /// Voxel size for the coarse search; ICP always uses the full scans.
    pub voxel: Option<f64>,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        RegistrationParams {
            ransac: RansacParams { stop_fraction: 0.8, ..RansacParams::default() },
            icp: IcpParams { max_distance: 0.2, ..IcpParams::default() },
            voxel: None,
        }
    }
}

/// Transform of every scan into the frame of scan `anchor`, chaining
/// pairwise registrations of neighbouring scans.
pub fn register_scans(scans: &[PointCloud], anchor: usize, params: &RegistrationParams) -> Result<Vec<RigidTransform>> {
    if anchor >= scans.len() {
        return Err(Error::validation(format!("anchor {anchor} out of range for {} scans", scans.len())));
    }
    let coarse_pts = |c: &PointCloud| -> Result<Vec<Point>> {
        Ok(match params.voxel {
            Some(v) => downsample_voxel(c, v)?.points().to_vec(),
            None => c.points().to_vec(),
        })
    };
    let pair = |from: usize, to: usize| -> Result<RigidTransform> {
        let wrap = |e: Error| Error::Registration { from, to, source: Box::new(e) };
        let src = coarse_pts(&scans[from]).map_err(wrap)?;
        let dst = coarse_pts(&scans[to]).map_err(wrap)?;
        let coarse = ransac_align(&src, &dst, &params.ransac).map_err(wrap)?;
        let fine = icp(scans[from].points(), scans[to].points(), &coarse.transform, &params.icp).map_err(wrap)?;
        Ok(fine.transform)
    };
    let mut out = vec![RigidTransform::identity(); scans.len()];
    for i in anchor + 1..scans.len() {
        out[i] = out[i - 1].compose(&pair(i, i - 1)?);
    }
    for i in (0..anchor).rev() {
        out[i] = out[i + 1].compose(&pair(i, i + 1)?);
    }
    Ok(out)
}
