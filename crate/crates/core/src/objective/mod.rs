//! Loss terms, composite window and per-frame objectives, gradients and the
//! descent routines used by the gradient-based stages.

mod optim;
mod scale_depth;
mod terms;
mod window;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{check_version, read_json, write_json};
use crate::real::Real;

pub use optim::{central_gradient, minimize, DescentMethod, MinimizeResult, Objective, OptimizerConfig};
pub use scale_depth::ScaleDepthProblem;
pub use terms::{
    contact_loss_with, loss_2d, loss_contact, loss_data, loss_sliding, loss_smooth, loss_smooth_state,
    reprojection_loss,
};
pub use window::{flatten_states, loss_opt, unflatten_states, loss_sam, FrameContacts, LossBreakdown, PrevFrame, SamObjective, WindowInputs};

/// Detected 2D keypoints of one frame, in pixels, with per-joint confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Observation2D<T> {
    pub keypoints: Vec<[T; 2]>,
    pub confidences: Vec<T>,
}

impl<T: Real> Observation2D<T> {
    pub fn new(keypoints: Vec<[T; 2]>, confidences: Vec<T>) -> Result<Self> {
        let o = Observation2D { keypoints, confidences };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.keypoints.len() != self.confidences.len() {
            return Err(Error::invalid(format!(
                "{} keypoints but {} confidences",
                self.keypoints.len(),
                self.confidences.len()
            )));
        }
        if !self.keypoints.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "keypoints".into(),
            });
        }
        if let Some(c) = self.confidences.iter().find(|c| !(**c >= T::zero() && **c <= T::one())) {
            return Err(Error::invalid(format!("keypoint confidence {c} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn num_joints(&self) -> usize {
        self.keypoints.len()
    }
}

pub const OBSERVATIONS_VERSION: &str = "1.0";

/// On-disk keypoint sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ObservationFile<T> {
    pub version: String,
    pub frames: Vec<Observation2D<T>>,
}

pub fn save_observations<T: Real>(path: &Path, frames: &[Observation2D<T>]) -> Result<()> {
    write_json(
        path,
        &ObservationFile {
            version: OBSERVATIONS_VERSION.into(),
            frames: frames.to_vec(),
        },
    )
}

pub fn load_observations<T: Real>(path: &Path) -> Result<Vec<Observation2D<T>>> {
    let f: ObservationFile<T> = read_json(path)?;
    check_version("observations", &f.version, 1)?;
    for o in &f.frames {
        o.validate()?;
    }
    Ok(f.frames)
}

/// Multipliers of the composite objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_2d: f64,
    pub lambda_smooth: f64,
    pub lambda_con: f64,
    pub lambda_sli: f64,
    pub lambda_data: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_2d: 1.0,
            lambda_smooth: 0.01,
            lambda_con: 0.01,
            lambda_sli: 0.05,
            lambda_data: 0.1,
        }
    }
}

impl LossWeights {
    /// Weights of the final refinement: as the defaults with `lambda_data = 1`.
    pub fn refinement() -> Self {
        LossWeights {
            lambda_data: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_2d, self.lambda_smooth, self.lambda_con, self.lambda_sli, self.lambda_data];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(format!("loss weights must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}
