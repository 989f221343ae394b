use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::real::Real;

/// Near-plane guard for the pinhole projection, in metres.
pub const DEFAULT_Z_MIN: f64 = 0.05;

/// Static pinhole camera. All geometry lives in this camera's frame:
/// `x` right, `y` down, `z` forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub image_w: T,
    pub image_h: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, image_w: T, image_h: T) -> Result<Self> {
        let cam = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            image_w,
            image_h,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.fx, self.fy, self.cx, self.cy, self.image_w, self.image_h];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "camera intrinsics".into(),
            });
        }
        if self.fx <= T::zero() || self.fy <= T::zero() {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        let inside = |c: T, size: T| c >= T::zero() && c <= size;
        if !inside(self.cx, self.image_w) || !inside(self.cy, self.image_h) {
            return Err(Error::invalid("principal point outside the image"));
        }
        Ok(())
    }

    /// Projects one point; `None` when it is not in front of the near plane.
    #[inline]
    pub fn project_point(&self, p: Vec3<T>, z_min: T) -> Option<[T; 2]> {
        if p.z <= z_min {
            return None;
        }
        let inv_z = T::one() / p.z;
        Some([self.fx * p.x * inv_z + self.cx, self.fy * p.y * inv_z + self.cy])
    }

    /// 640x480 camera with a 500 px focal length.
    pub fn default_vga() -> Self {
        CameraIntrinsics {
            fx: T::lit(500.0),
            fy: T::lit(500.0),
            cx: T::lit(320.0),
            cy: T::lit(240.0),
            image_w: T::lit(640.0),
            image_h: T::lit(480.0),
        }
    }
}

/// Pinhole projection `(fx x / z + cx, fy y / z + cy)` of every point.
pub fn project<T: Real>(points: &[Vec3<T>], cam: &CameraIntrinsics<T>) -> Result<Vec<[T; 2]>> {
    project_with_near(points, cam, T::lit(DEFAULT_Z_MIN))
}

pub fn project_with_near<T: Real>(
    points: &[Vec3<T>],
    cam: &CameraIntrinsics<T>,
    z_min: T,
) -> Result<Vec<[T; 2]>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            cam.project_point(*p, z_min)
                .ok_or(Error::PointBehindCamera {
                    index: i,
                    z: p.z.to_f64_lossy(),
                    z_min: z_min.to_f64_lossy(),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(f: f64, c: f64) -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(f, f, c, c, 2.0 * c.max(1.0), 2.0 * c.max(1.0)).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let out = project(&[Vec3::new(0.0, 0.0, 2.0)], &cam(300.0, 112.5)).unwrap();
        assert_eq!(out[0], [112.5, 112.5]);
    }

    #[test]
    fn pinhole_formula() {
        let c = CameraIntrinsics::new(2.0, 2.0, 0.0, 0.0, 10.0, 10.0).unwrap();
        let out = project(&[Vec3::new(1.0, 2.0, 4.0)], &c).unwrap();
        assert_eq!(out[0], [0.5, 1.0]);
    }

    #[test]
    fn behind_camera_reports_index() {
        let pts = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 0.0)];
        match project(&pts, &cam(300.0, 112.5)) {
            Err(Error::PointBehindCamera { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected PointBehindCamera, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 3.0, 1.0, 2.0, 2.0).is_err());
        assert!(CameraIntrinsics::new(f64::NAN, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
    }
}
