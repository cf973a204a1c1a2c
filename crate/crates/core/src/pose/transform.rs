use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Similarity transform `p ↦ s·R·p + t` (rigid when `s == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    /// Meters.
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros(), scale: 1.0 }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation, scale: 1.0 }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Rotation `Rz(yaw)·Ry(pitch)·Rx(roll)` (intrinsic Z-Y-X), radians.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64, t: Vector3<f64>) -> Self {
        Self::new(euler_zyx_matrix(roll, pitch, yaw), t)
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn apply_all(&self, pts: &[Point]) -> Vec<Point> {
        pts.iter().map(|p| self.apply(p)).collect()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }

    /// Rotation angle of `R` in radians.
    pub fn angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// `‖RᵀR − I‖∞` and `det R > 0`.
    pub fn is_proper_rotation(&self, tol: f64) -> bool {
        let e = self.rotation.transpose() * self.rotation - Matrix3::identity();
        e.amax() <= tol && self.rotation.determinant() > 0.0
    }

    /// (roll, pitch, yaw) in radians for the Z-Y-X convention.
    ///
    /// At gimbal lock (|pitch| = 90°) yaw is set to zero and roll carries the
    /// remaining rotation about the common axis.
    pub fn euler_zyx(&self) -> (f64, f64, f64) {
        let r = &self.rotation;
        let cos_pitch = r[(0, 0)].hypot(r[(1, 0)]);
        let pitch = (-r[(2, 0)]).atan2(cos_pitch);
        if cos_pitch > 1e-12 {
            let roll = r[(2, 1)].atan2(r[(2, 2)]);
            let yaw = r[(1, 0)].atan2(r[(0, 0)]);
            (roll, pitch, yaw)
        } else if r[(2, 0)] < 0.0 {
            (r[(0, 1)].atan2(r[(0, 2)]), pitch, 0.0)
        } else {
            ((-r[(0, 1)]).atan2(-r[(0, 2)]), pitch, 0.0)
        }
    }
}

pub fn euler_zyx_matrix(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Least-squares transform mapping `src[i]` onto `dst[i]` (Kabsch; Umeyama
/// when `with_scale`).
pub fn fit_transform(src: &[Point], dst: &[Point], with_scale: bool) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::validation(format!(
            "correspondence sets differ in size: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::Estimation(format!("need >= 3 correspondences, got {}", src.len())));
    }
    let n = src.len() as f64;
    let mu_s = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;

    let mut h = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s.coords - mu_s;
        let dc = d.coords - mu_d;
        h += sc * dc.transpose();
        var_s += sc.norm_squared();
    }
    h /= n;
    var_s /= n;

    let svd = h.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Estimation("SVD did not converge".into()));
    };
    let sv = svd.singular_values;
    // Collinear (or coincident) sources leave the rotation about their axis free.
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= 1e-12 * sorted[0] {
        return Err(Error::Estimation("rank-deficient cross-covariance (degenerate geometry)".into()));
    }

    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    let scale = if with_scale {
        let mut trace = 0.0;
        for i in 0..3 {
            // The sign flip lands on the singular vector paired with U's last column.
            trace += sv[i] * if i == 2 { d } else { 1.0 };
        }
        trace / var_s
    } else {
        1.0
    };
    let translation = mu_d - rotation * mu_s * scale;
    Ok(RigidTransform { rotation, translation, scale })
}

/// Object placement relative to the scene origin, in the units a layout tool
/// expects: millimeters and degrees, intrinsic Z-Y-X angles in (−180°, 180°].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub class: String,
    pub instance: u32,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

fn wrap_degrees(a: f64) -> f64 {
    let mut a = a % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

impl ObjectPose {
    pub fn from_transform(class: impl Into<String>, instance: u32, t: &RigidTransform) -> Self {
        let (roll, pitch, yaw) = t.euler_zyx();
        ObjectPose {
            class: class.into(),
            instance,
            x_mm: t.translation.x * 1000.0,
            y_mm: t.translation.y * 1000.0,
            z_mm: t.translation.z * 1000.0,
            roll_deg: wrap_degrees(roll.to_degrees()),
            pitch_deg: wrap_degrees(pitch.to_degrees()),
            yaw_deg: wrap_degrees(yaw.to_degrees()),
        }
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_euler_zyx(
            self.roll_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.yaw_deg.to_radians(),
            Vector3::new(self.x_mm, self.y_mm, self.z_mm) / 1000.0,
        )
    }

    /// Absolute per-component differences: (x, y, z) in mm and
    /// (roll, pitch, yaw) in degrees, angles compared on the circle.
    pub fn deviation(&self, other: &ObjectPose) -> [f64; 6] {
        [
            (self.x_mm - other.x_mm).abs(),
            (self.y_mm - other.y_mm).abs(),
            (self.z_mm - other.z_mm).abs(),
            wrap_degrees(self.roll_deg - other.roll_deg).abs(),
            wrap_degrees(self.pitch_deg - other.pitch_deg).abs(),
            wrap_degrees(self.yaw_deg - other.yaw_deg).abs(),
        ]
    }
}
