//! Capsule body model: forward kinematics, surface samples, scaling and
//! camera projection.

mod body;
mod camera;
mod state;
mod template;

pub use body::{body_surface, forward_kinematics, inside_body_count, pose_body, Capsule, Posed};
pub use camera::{project, project_with_near, CameraIntrinsics, DEFAULT_Z_MIN};
pub use state::{BodyScale, KinematicState};
pub use template::{
    SkeletonTemplate, SurfaceSample, TemplateFile, NUM_JOINTS, NUM_SURFACE_POINTS, TEMPLATE_VERSION,
};
