mod estimate;
mod icp;
mod ransac;
mod transform;

pub use estimate::{
    canonical_yaw, estimate_all, estimate_pose, fit_plane, fit_plane_pose, match_poses, register_scans, PoseEstimate,
    PoseFailure, PoseParams, RegistrationParams, SceneEstimate,
};
pub use icp::{icp, IcpParams, IcpResult};
pub use ransac::{ransac_align, RansacParams, RansacResult};
pub use transform::{euler_zyx_matrix, fit_transform, rotation_angle, ObjectPose, RigidTransform};
