//! Individual loss terms.

use crate::contacts::EffectiveContacts;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{forward_kinematics, BodyScale, CameraIntrinsics, KinematicState, SkeletonTemplate, DEFAULT_Z_MIN};
use crate::real::Real;
use crate::scene::{KdTree, SceneIndex};

use super::Observation2D;

/// Confidence-weighted mean squared reprojection residual of `joints`, with
/// pixel coordinates normalised by the image width and height.
pub fn reprojection_loss<T: Real>(
    joints: &[Vec3<T>],
    obs: &Observation2D<T>,
    cam: &CameraIntrinsics<T>,
    z_min: T,
) -> Result<T> {
    if joints.len() != obs.keypoints.len() {
        return Err(Error::invalid(format!(
            "{} joints but {} keypoints",
            joints.len(),
            obs.keypoints.len()
        )));
    }
    let (iw, ih) = (T::one() / cam.image_w, T::one() / cam.image_h);
    let mut acc = T::zero();
    for (k, ((x, p), w)) in joints.iter().zip(&obs.keypoints).zip(&obs.confidences).enumerate() {
        let q = cam.project_point(*x, z_min).ok_or(Error::PointBehindCamera {
            index: k,
            z: x.z.to_f64_lossy(),
            z_min: z_min.to_f64_lossy(),
        })?;
        let ru = (q[0] - p[0]) * iw;
        let rv = (q[1] - p[1]) * ih;
        acc += *w * (ru * ru + rv * rv);
    }
    Ok(acc / T::from_usize_lossy(joints.len().max(1)))
}

pub fn loss_2d<T: Real>(
    state: &KinematicState<T>,
    scale: BodyScale<T>,
    obs: &Observation2D<T>,
    cam: &CameraIntrinsics<T>,
    template: &SkeletonTemplate<T>,
) -> Result<T> {
    let joints = forward_kinematics(state, scale, template)?;
    reprojection_loss(&joints, obs, cam, T::lit(DEFAULT_Z_MIN))
}

/// `||tau - tau_prev||^2`.
pub fn loss_smooth<T: Real>(tau: Vec3<T>, tau_prev: Vec3<T>) -> T {
    tau.distance_squared(tau_prev)
}

/// Whole-state smoothness `||Phi - Phi_prev||^2`.
pub fn loss_smooth_state<T: Real>(state: &KinematicState<T>, prev: &KinematicState<T>) -> T {
    state.distance_squared(prev)
}

/// `||Phi - Phi_ref||^2` over the concatenated `(tau, phi, theta)`.
pub fn loss_data<T: Real>(state: &KinematicState<T>, reference: &KinematicState<T>) -> T {
    state.distance_squared(reference)
}

/// Directed Hausdorff contact loss: for every contact body point, the squared
/// distance to the nearest contact scene point. Zero when either set is
/// empty.
pub fn loss_contact<T: Real>(surface: &[Vec3<T>], eff: &EffectiveContacts, scene: &SceneIndex<T>) -> Result<T> {
    if eff.body_idx.is_empty() || eff.env_idx.is_empty() {
        log::warn!("contact loss with an empty effective contact set is zero");
        return Ok(T::zero());
    }
    if let Some(&bad) = eff.body_idx.iter().find(|&&i| i >= surface.len()) {
        return Err(Error::invalid(format!("body contact index {bad} out of range")));
    }
    let tree = scene.subset(&eff.env_idx)?;
    let verts: Vec<Vec3<T>> = eff.body_idx.iter().map(|&i| surface[i]).collect();
    Ok(contact_loss_with(&verts, &tree))
}

/// [`loss_contact`] on already gathered contact vertices and a prebuilt
/// tree over the contact scene points.
pub fn contact_loss_with<T: Real>(verts: &[Vec3<T>], env: &KdTree<T>) -> T {
    if env.is_empty() {
        return T::zero();
    }
    verts.iter().map(|v| env.nearest(*v).map_or(T::zero(), |(_, d)| d)).sum()
}

/// `sum ||V_c - V_c,pre||^2` over corresponding contact vertices.
pub fn loss_sliding<T: Real>(current: &[Vec3<T>], previous: &[Vec3<T>]) -> Result<T> {
    if current.len() != previous.len() {
        return Err(Error::invalid(format!(
            "sliding loss needs matching vertex sets, got {} and {}",
            current.len(),
            previous.len()
        )));
    }
    Ok(current.iter().zip(previous).map(|(a, b)| a.distance_squared(*b)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ScenePointCloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100.0, 100.0).unwrap()
    }

    #[test]
    fn reprojection_zero_and_weightless() {
        let joints = vec![Vec3::new(0.1, 0.2, 2.0), Vec3::new(-0.3, 0.0, 3.0)];
        let c = cam();
        let kp: Vec<[f64; 2]> = joints.iter().map(|j| c.project_point(*j, 0.05).unwrap()).collect();
        let obs = Observation2D::new(kp.clone(), vec![1.0, 1.0]).unwrap();
        assert_eq!(reprojection_loss(&joints, &obs, &c, 0.05).unwrap(), 0.0);
        let off = Observation2D::new(vec![[0.0, 0.0], [99.0, 99.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(reprojection_loss(&joints, &off, &c, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn reprojection_two_joint_hand_computation() {
        // Joint 0 projects to (55, 60), joint 1 to (40, 50).
        let joints = vec![Vec3::new(0.1, 0.2, 2.0), Vec3::new(-0.3, 0.0, 3.0)];
        let obs = Observation2D::new(vec![[50.0, 60.0], [40.0, 40.0]], vec![0.5, 1.0]).unwrap();
        // Residuals normalised by 100 px: (0.05, 0) and (0, 0.1).
        let want = (0.5 * 0.0025 + 1.0 * 0.01) / 2.0;
        let got = reprojection_loss(&joints, &obs, &cam(), 0.05).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn reprojection_behind_camera_errors() {
        let obs = Observation2D::new(vec![[0.0, 0.0]], vec![1.0]).unwrap();
        let r = reprojection_loss(&[Vec3::new(0.0, 0.0, -1.0)], &obs, &cam(), 0.05);
        assert!(matches!(r, Err(Error::PointBehindCamera { index: 0, .. })));
    }

    #[test]
    fn smooth_and_data_terms() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(loss_smooth(a, a), 0.0);
        assert_eq!(loss_smooth(a, a + Vec3::new(0.0, 1.0, 0.0)), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = || Vec3::<f64>::new(rng.random(), rng.random(), rng.random());
        let (p, q) = (r(), r());
        let direct = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
        assert!((loss_smooth(p, q) - direct).abs() < 1e-15);

        let s = KinematicState::new(r(), r(), vec![r(), r()]).unwrap();
        assert_eq!(loss_data(&s, &s), 0.0);
        let mut t = s.clone();
        t.theta[1].y += 1.0;
        assert!((loss_data(&s, &t) - 1.0).abs() < 1e-15);
        let u = KinematicState::new(r(), r(), vec![r(), r()]).unwrap();
        let direct: f64 = s.to_flat().iter().zip(u.to_flat()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((loss_data(&s, &u) - direct).abs() < 1e-14);
        assert_eq!(loss_smooth_state(&s, &u), loss_data(&s, &u));
    }

    #[test]
    fn contact_examples() {
        // Body {(0,0,1),(1,0,1)} and env {(0,0,2)} (shifted to z > 0): 1 + 2 = 3.
        let scene = ScenePointCloud::new(vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(5.0, 5.0, 5.0)]).unwrap().index();
        let surface = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0)];
        let eff = EffectiveContacts {
            body_idx: vec![0, 1],
            env_idx: vec![0],
        };
        assert!((loss_contact::<f64>(&surface, &eff, &scene).unwrap() - 3.0).abs() < 1e-15);
        let coincide = vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 2.0)];
        assert_eq!(loss_contact(&coincide, &eff, &scene).unwrap(), 0.0);
        let empty = EffectiveContacts {
            body_idx: vec![],
            env_idx: vec![0],
        };
        assert_eq!(loss_contact(&surface, &empty, &scene).unwrap(), 0.0);
    }

    #[test]
    fn contact_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..1000)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..3.0)))
            .collect();
        let scene = ScenePointCloud::new(pts.clone()).unwrap().index();
        let surface: Vec<_> = (0..300)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..3.0)))
            .collect();
        let eff = EffectiveContacts {
            body_idx: (0..300).filter(|i| i % 3 == 0).collect(),
            env_idx: (0..1000).filter(|i| i % 7 == 0).collect(),
        };
        let mut want = 0.0;
        for &n in &eff.body_idx {
            let mut best = f64::INFINITY;
            for &m in &eff.env_idx {
                best = best.min(surface[n].distance_squared(pts[m]));
            }
            want += best;
        }
        let got = loss_contact(&surface, &eff, &scene).unwrap();
        assert!((got - want).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn sliding_examples() {
        let a = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0)];
        assert_eq!(loss_sliding(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[1].x += 0.1;
        assert!((loss_sliding::<f64>(&b, &a).unwrap() - 0.01).abs() < 1e-15);
        assert!(loss_sliding(&a[..1], &a).is_err());
    }
}
