//! Scene-aware recovery of global human trajectories, body scale and poses
//! from monocular 2D keypoints and a scene point cloud.

pub mod bench;
pub mod contacts;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod manifold;
pub mod objective;
pub mod pipeline;
pub mod real;
pub mod scene;

pub use error::{Error, Result};
pub use geometry::{Mat3, Vec3};
pub use real::Real;
