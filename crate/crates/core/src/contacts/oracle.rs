//! Geometric contact annotation from known body and scene geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::real::Real;
use crate::scene::SceneIndex;

use super::ContactLabels;

/// Distance and velocity thresholds of the annotation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationConfig {
    /// Metres.
    pub dist_thresh: f64,
    /// Metres per second.
    pub vel_thresh: f64,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            dist_thresh: 0.05,
            vel_thresh: 0.1,
        }
    }
}

/// Per-frame binary body labels: a point is in contact when its nearest scene
/// point is closer than `dist_thresh` and its speed is below `vel_thresh`.
///
/// Speed is the forward difference `(x[t+1] - x[t]) / dt`; the last frame
/// uses the backward difference. A single frame is labelled by distance only.
pub fn annotate_body_contacts<T: Real>(
    surface_traj: &[Vec<Vec3<T>>],
    scene: &SceneIndex<T>,
    dist_thresh: T,
    vel_thresh: T,
    dt: T,
) -> Result<Vec<Vec<bool>>> {
    let n_frames = surface_traj.len();
    if n_frames == 0 {
        return Ok(Vec::new());
    }
    if !(dt > T::zero()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let n = surface_traj[0].len();
    if surface_traj.iter().any(|f| f.len() != n) {
        return Err(Error::invalid("surface frames differ in point count"));
    }
    if n_frames == 1 {
        log::warn!("single-frame contact annotation: velocity criterion skipped");
    }
    let d2 = dist_thresh * dist_thresh;
    let step = vel_thresh * dt;
    let step2 = step * step;
    Ok((0..n_frames)
        .into_par_iter()
        .map(|t| {
            let frame = &surface_traj[t];
            let other = match n_frames {
                1 => None,
                _ if t + 1 < n_frames => Some(&surface_traj[t + 1]),
                _ => Some(&surface_traj[t - 1]),
            };
            (0..n)
                .map(|i| {
                    let slow = other.is_none_or(|o| o[i].distance_squared(frame[i]) < step2);
                    slow && scene.nearest(frame[i]).1 < d2
                })
                .collect()
        })
        .collect())
}

/// Marks the nearest scene point of every contacting body point.
pub fn transfer_env_contacts<T: Real>(
    body_labels: &[bool],
    surface: &[Vec3<T>],
    scene: &SceneIndex<T>,
) -> Result<Vec<bool>> {
    if body_labels.len() != surface.len() {
        return Err(Error::invalid(format!(
            "{} body labels for {} surface points",
            body_labels.len(),
            surface.len()
        )));
    }
    let mut env = vec![false; scene.len()];
    for (p, _) in surface.iter().zip(body_labels).filter(|(_, c)| **c) {
        env[scene.nearest(*p).0] = true;
    }
    Ok(env)
}

/// Oracle labels for a whole trajectory: annotation then transfer.
pub fn oracle_labels<T: Real>(
    surface_traj: &[Vec<Vec3<T>>],
    scene: &SceneIndex<T>,
    cfg: &AnnotationConfig,
    dt: T,
) -> Result<Vec<ContactLabels<T>>> {
    let body = annotate_body_contacts(surface_traj, scene, T::lit(cfg.dist_thresh), T::lit(cfg.vel_thresh), dt)?;
    body.iter()
        .zip(surface_traj)
        .map(|(b, s)| Ok(ContactLabels::from_binary(b, &transfer_env_contacts(b, s, scene)?)))
        .collect()
}
