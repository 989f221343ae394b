use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_axis_angle, Vec3};
use crate::real::Real;

/// Per-frame body state: root translation `tau`, root orientation `phi` and
/// relative joint rotations `theta`, all axis-angle in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KinematicState<T> {
    pub tau: Vec3<T>,
    pub phi: Vec3<T>,
    pub theta: Vec<Vec3<T>>,
}

impl<T: Real> KinematicState<T> {
    /// Validates finiteness and wraps every rotation to an angle of at most pi.
    pub fn new(tau: Vec3<T>, phi: Vec3<T>, theta: Vec<Vec3<T>>) -> Result<Self> {
        let s = KinematicState { tau, phi, theta };
        s.validate()?;
        Ok(s.normalized())
    }

    pub fn rest(num_joints: usize) -> Self {
        KinematicState {
            tau: Vec3::zero(),
            phi: Vec3::zero(),
            theta: vec![Vec3::zero(); num_joints],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau.is_finite()
            && self.phi.is_finite()
            && self.theta.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite {
                what: "kinematic state".into(),
            })
        }
    }

    pub fn normalized(mut self) -> Self {
        self.phi = normalize_axis_angle(self.phi);
        for v in &mut self.theta {
            *v = normalize_axis_angle(*v);
        }
        self
    }

    pub fn num_joints(&self) -> usize {
        self.theta.len()
    }

    /// Length of the flat `(tau, phi, theta)` vector.
    pub fn dof(&self) -> usize {
        6 + 3 * self.theta.len()
    }

    /// Flat `(tau, phi, theta)` layout used by the optimisers.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dof());
        self.write_flat(&mut out);
        out
    }

    pub fn write_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.tau.to_array());
        out.extend_from_slice(&self.phi.to_array());
        for v in &self.theta {
            out.extend_from_slice(&v.to_array());
        }
    }

    /// Inverse of [`to_flat`](Self::to_flat); no normalisation, so that
    /// finite-difference probes stay continuous.
    pub fn from_flat(flat: &[T]) -> Self {
        debug_assert!(flat.len() >= 6 && (flat.len() - 6).is_multiple_of(3));
        KinematicState {
            tau: Vec3::from_slice(&flat[0..3]),
            phi: Vec3::from_slice(&flat[3..6]),
            theta: flat[6..].chunks_exact(3).map(Vec3::from_slice).collect(),
        }
    }

    /// Flat pose vector `theta` (3K entries).
    pub fn theta_flat(&self) -> Vec<T> {
        self.theta.iter().flat_map(|v| v.to_array()).collect()
    }

    pub fn set_theta_flat(&mut self, flat: &[T]) {
        for (v, c) in self.theta.iter_mut().zip(flat.chunks_exact(3)) {
            *v = Vec3::from_slice(c);
        }
    }

    /// Squared Euclidean distance of the flat state vectors.
    pub fn distance_squared(&self, other: &Self) -> T {
        let mut acc = self.tau.distance_squared(other.tau) + self.phi.distance_squared(other.phi);
        for (a, b) in self.theta.iter().zip(&other.theta) {
            acc += a.distance_squared(*b);
        }
        acc
    }
}

/// Shared absolute body scale, applied to bone lengths and capsule radii.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Real")]
pub struct BodyScale<T>(pub T);

impl<T: Real> BodyScale<T> {
    pub const MIN: f64 = 0.5;
    pub const MAX: f64 = 2.0;

    pub fn new(h: T) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::NonFinite {
                what: "body scale".into(),
            });
        }
        if h < T::lit(Self::MIN) || h > T::lit(Self::MAX) {
            return Err(Error::invalid(format!(
                "body scale {h} outside [{}, {}]",
                Self::MIN,
                Self::MAX
            )));
        }
        Ok(BodyScale(h))
    }

    pub fn clamped(h: T) -> Self {
        BodyScale(h.max(T::lit(Self::MIN)).min(T::lit(Self::MAX)))
    }

    pub fn unit() -> Self {
        BodyScale(T::one())
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}
