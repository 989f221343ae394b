use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance_squared, Mat3, Vec3};
use crate::real::Real;
use crate::scene::SceneIndex;

use super::state::{BodyScale, KinematicState};
use super::template::SkeletonTemplate;

/// Global joint positions and orientations of one posed body.
#[derive(Debug, Clone, PartialEq)]
pub struct Posed<T> {
    pub joints: Vec<Vec3<T>>,
    pub rotations: Vec<Mat3<T>>,
    pub scale: T,
}

/// A bone capsule in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule<T> {
    pub bone: usize,
    pub a: Vec3<T>,
    pub b: Vec3<T>,
    pub radius: T,
}

impl<T: Real> Capsule<T> {
    #[inline]
    pub fn contains(&self, p: Vec3<T>) -> bool {
        point_segment_distance_squared(p, self.a, self.b) < self.radius * self.radius
    }

    pub fn aabb(&self) -> (Vec3<T>, Vec3<T>) {
        let r = Vec3::splat(self.radius);
        (self.a.component_min(self.b) - r, self.a.component_max(self.b) + r)
    }
}

/// Composes the kinematic chain without validating inputs.
///
/// The root frame is `R(phi) R(theta_0)` placed at `tau`; every other joint
/// sits at its parent plus the parent's rotation applied to the scaled rest
/// offset.
pub fn pose_body<T: Real>(
    state: &KinematicState<T>,
    scale: BodyScale<T>,
    template: &SkeletonTemplate<T>,
) -> Posed<T> {
    let k = template.num_joints();
    let h = scale.get();
    let mut joints = Vec::with_capacity(k);
    let mut rotations = Vec::with_capacity(k);
    let root_rot = Mat3::from_axis_angle(state.phi).mul_mat(&Mat3::from_axis_angle(state.theta[0]));
    joints.push(state.tau);
    rotations.push(root_rot);
    for j in 1..k {
        let p = template.parent(j).expect("non-root joint has a parent");
        let rp = rotations[p];
        joints.push(joints[p] + rp.mul_vec(template.offset(j) * h));
        let local = if template.children(j).is_empty() {
            Mat3::identity()
        } else {
            Mat3::from_axis_angle(state.theta[j])
        };
        rotations.push(rp.mul_mat(&local));
    }
    Posed {
        joints,
        rotations,
        scale: h,
    }
}

fn check_inputs<T: Real>(
    state: &KinematicState<T>,
    scale: BodyScale<T>,
    template: &SkeletonTemplate<T>,
) -> Result<()> {
    state.validate()?;
    if !scale.get().is_finite() {
        return Err(Error::NonFinite {
            what: "body scale".into(),
        });
    }
    if state.num_joints() != template.num_joints() {
        return Err(Error::invalid(format!(
            "state has {} joints, template {}",
            state.num_joints(),
            template.num_joints()
        )));
    }
    Ok(())
}

/// Global joint positions `K x 3`.
pub fn forward_kinematics<T: Real>(
    state: &KinematicState<T>,
    scale: BodyScale<T>,
    template: &SkeletonTemplate<T>,
) -> Result<Vec<Vec3<T>>> {
    check_inputs(state, scale, template)?;
    Ok(pose_body(state, scale, template).joints)
}

impl<T: Real> Posed<T> {
    #[inline]
    pub fn surface_point(&self, template: &SkeletonTemplate<T>, i: usize) -> Vec3<T> {
        let p = template.surface_parent(i);
        self.joints[p] + self.rotations[p].mul_vec(template.surface_local(i) * self.scale)
    }

    pub fn surface(&self, template: &SkeletonTemplate<T>) -> Vec<Vec3<T>> {
        (0..template.num_surface_points())
            .map(|i| self.surface_point(template, i))
            .collect()
    }

    pub fn surface_subset(&self, template: &SkeletonTemplate<T>, idx: &[usize]) -> Vec<Vec3<T>> {
        idx.iter().map(|&i| self.surface_point(template, i)).collect()
    }

    pub fn capsule(&self, template: &SkeletonTemplate<T>, bone: usize) -> Capsule<T> {
        let p = template.parent(bone).expect("bone has a parent");
        Capsule {
            bone,
            a: self.joints[p],
            b: self.joints[bone],
            radius: template.bone_radius(bone) * self.scale,
        }
    }

    pub fn capsules(&self, template: &SkeletonTemplate<T>) -> Vec<Capsule<T>> {
        template.bones().map(|b| self.capsule(template, b)).collect()
    }

    /// Number of distinct scene points strictly inside any capsule.
    pub fn inside_count(&self, template: &SkeletonTemplate<T>, scene: &SceneIndex<T>) -> usize {
        let mut hits = Vec::new();
        for b in template.bones() {
            let cap = self.capsule(template, b);
            let (lo, hi) = cap.aabb();
            scene.for_each_in_aabb(lo, hi, |idx, p| {
                if cap.contains(p) {
                    hits.push(idx);
                }
            });
        }
        hits.sort_unstable();
        hits.dedup();
        hits.len()
    }
}

/// Surface samples `N x 3`: each sample placed on its bone's capsule through
/// its stored cylindrical coordinates, radius scaled by `h`.
pub fn body_surface<T: Real>(
    state: &KinematicState<T>,
    scale: BodyScale<T>,
    template: &SkeletonTemplate<T>,
) -> Result<Vec<Vec3<T>>> {
    check_inputs(state, scale, template)?;
    Ok(pose_body(state, scale, template).surface(template))
}

/// Count of scene points strictly inside any body capsule.
pub fn inside_body_count<T: Real>(
    scene: &SceneIndex<T>,
    state: &KinematicState<T>,
    scale: BodyScale<T>,
    template: &SkeletonTemplate<T>,
) -> Result<usize> {
    check_inputs(state, scale, template)?;
    Ok(pose_body(state, scale, template).inside_count(template, scene))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ScenePointCloud;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn template() -> SkeletonTemplate<f64> {
        SkeletonTemplate::default_humanoid()
    }

    fn random_state(rng: &mut ChaCha8Rng, k: usize) -> KinematicState<f64> {
        let mut v = || Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let tau = v();
        let phi = v();
        let theta = (0..k).map(|_| v()).collect();
        KinematicState::new(tau, phi, theta).unwrap()
    }

    fn cumulative_rest(t: &SkeletonTemplate<f64>) -> Vec<Vec3<f64>> {
        let mut out = vec![Vec3::zero(); t.num_joints()];
        for j in 1..t.num_joints() {
            out[j] = out[t.parent(j).unwrap()] + t.offset(j);
        }
        out
    }

    #[test]
    fn identity_pose_gives_cumulative_offsets() {
        let t = template();
        let s = KinematicState::rest(21);
        let joints = forward_kinematics(&s, BodyScale::unit(), &t).unwrap();
        for (a, b) in joints.iter().zip(cumulative_rest(&t)) {
            assert_abs_diff_eq!(a.distance_squared(b), 0.0, epsilon = 1e-24);
        }
    }

    #[test]
    fn identity_pose_translates_with_tau() {
        let t = template();
        let mut s = KinematicState::rest(21);
        s.tau = Vec3::new(0.0, 0.0, 3.0);
        let joints = forward_kinematics(&s, BodyScale::unit(), &t).unwrap();
        for (a, b) in joints.iter().zip(cumulative_rest(&t)) {
            let expect = b + Vec3::new(0.0, 0.0, 3.0);
            assert_abs_diff_eq!(a.distance_squared(expect), 0.0, epsilon = 1e-24);
        }
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let t = template();
        let mut s = KinematicState::rest(21);
        s.theta[4].x = f64::INFINITY;
        assert!(forward_kinematics(&s, BodyScale::unit(), &t).is_err());
    }

    #[test]
    fn identity_surface_lies_on_capsules() {
        let t = template();
        let s = KinematicState::rest(21);
        let posed = pose_body(&s, BodyScale::unit(), &t);
        let surface = body_surface(&s, BodyScale::unit(), &t).unwrap();
        for (v, sample) in surface.iter().zip(t.surface_samples()) {
            let cap = posed.capsule(&t, sample.bone);
            let d = point_segment_distance_squared(*v, cap.a, cap.b).sqrt();
            assert!(d <= cap.radius + 1e-12);
        }
        assert_eq!(surface, body_surface(&s, BodyScale::unit(), &t).unwrap());
    }

    #[test]
    fn surface_radius_scales_with_h() {
        let t = template();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_state(&mut rng, 21);
        for h in [1.0, 1.5] {
            let posed = pose_body(&s, BodyScale(h), &t);
            let surface = posed.surface(&t);
            for (v, sample) in surface.iter().zip(t.surface_samples()) {
                // distance to the infinite bone axis, recomputed directly
                let cap = posed.capsule(&t, sample.bone);
                let axis = cap.b - cap.a;
                let rel = *v - cap.a;
                let along = rel.dot(axis) / axis.norm_squared();
                let radial = (rel - axis * along).norm();
                assert_abs_diff_eq!(radial, h * t.bone_radius(sample.bone), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn far_point_is_outside_and_joint_center_inside() {
        let t = template();
        let mut s = KinematicState::rest(21);
        s.tau = Vec3::new(0.0, 0.0, 3.0);
        let joints = forward_kinematics(&s, BodyScale::unit(), &t).unwrap();
        let far = ScenePointCloud::new(vec![Vec3::new(10.0, 0.0, 13.0)]).unwrap();
        assert_eq!(inside_body_count(&far.index(), &s, BodyScale::unit(), &t).unwrap(), 0);
        let knee = ScenePointCloud::new(vec![joints[4]]).unwrap();
        assert_eq!(inside_body_count(&knee.index(), &s, BodyScale::unit(), &t).unwrap(), 1);
    }

    #[test]
    fn inside_count_matches_exhaustive_capsule_test() {
        let t = template();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut s = random_state(&mut rng, 21);
            s.tau = Vec3::new(0.0, 0.0, 3.0);
            let h = rng.random_range(0.8..1.2);
            let pts: Vec<_> = (0..1000)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(2.0..4.0),
                    )
                })
                .collect();
            let cloud = ScenePointCloud::new(pts.clone()).unwrap();
            let posed = pose_body(&s, BodyScale(h), &t);
            let brute = pts
                .iter()
                .filter(|p| {
                    t.bones().any(|b| {
                        let par = t.parent(b).unwrap();
                        let r = t.bone_radius(b) * h;
                        point_segment_distance_squared(**p, posed.joints[par], posed.joints[b]) < r * r
                    })
                })
                .count();
            let fast = inside_body_count(&cloud.index(), &s, BodyScale(h), &t).unwrap();
            assert_eq!(fast, brute);
            assert!(brute > 0);
        }
    }

    #[test]
    fn moving_away_never_increases_inside_count() {
        // Every scene point lies behind all bone axes, so moving the body
        // towards the camera can only increase point-to-axis distances.
        let t = template();
        let mut s = KinematicState::rest(21);
        s.tau = Vec3::new(0.0, 0.0, 3.0);
        let posed = pose_body(&s, BodyScale::unit(), &t);
        let zmax = posed.joints.iter().map(|j| j.z).fold(f64::MIN, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<_> = (0..1500)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), zmax + rng.random_range(0.0..0.5)))
            .collect();
        let index = ScenePointCloud::new(pts).unwrap().index();
        let mut prev = usize::MAX;
        for step in 0..40 {
            s.tau.z = 3.0 - 0.05 * step as f64;
            let c = inside_body_count(&index, &s, BodyScale::unit(), &t).unwrap();
            if step == 0 {
                assert!(c > 0);
            }
            assert!(c <= prev);
            prev = c;
        }
        assert_eq!(prev, 0);
    }

    #[test]
    fn f32_forward_kinematics_tracks_f64() {
        let t64 = template();
        let t32 = SkeletonTemplate::<f32>::default_humanoid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s64 = random_state(&mut rng, 21);
        let s32 = KinematicState::from_flat(&s64.to_flat().iter().map(|v| *v as f32).collect::<Vec<_>>());
        let j64 = forward_kinematics(&s64, BodyScale(1.1), &t64).unwrap();
        let j32 = forward_kinematics(&s32, BodyScale(1.1f32), &t32).unwrap();
        for (a, b) in j64.iter().zip(&j32) {
            assert!((a.x - b.x as f64).abs() < 1e-5);
            assert!((a.z - b.z as f64).abs() < 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn scale_law_is_linear(seed in 0u64..10_000, h in 0.5f64..2.0) {
            let t = template();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_state(&mut rng, 21);
            s.tau = Vec3::zero();
            let unit = forward_kinematics(&s, BodyScale::unit(), &t).unwrap();
            let scaled = forward_kinematics(&s, BodyScale(h), &t).unwrap();
            for (a, b) in unit.iter().zip(&scaled) {
                prop_assert!((*a * h).distance_squared(*b) < 1e-24);
            }
        }
    }
}
