//! Joint recovery of per-frame root translations and a shared body scale
//! with fixed poses and root orientations.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{pose_body, BodyScale, KinematicState};
use crate::real::Real;

use super::window::WindowInputs;
use super::optim::Objective;
use super::LossWeights;

/// Window objective over `x = [tau_0, .., tau_{T-1}, h]`.
///
/// With rotations fixed, every joint and surface point is `tau + h * r` for
/// a rest-relative offset `r`, so values and gradients are exact and cheap.
#[derive(Debug, Clone)]
pub struct ScaleDepthProblem<'a, T> {
    inputs: WindowInputs<'a, T>,
    weights: LossWeights,
    tau_prev: Option<Vec3<T>>,
    base: Vec<KinematicState<T>>,
    joint_rel: Vec<Vec<Vec3<T>>>,
    contact_rel: Vec<Vec<Vec3<T>>>,
}

impl<'a, T: Real> ScaleDepthProblem<'a, T> {
    pub fn new(
        states: &[KinematicState<T>],
        inputs: WindowInputs<'a, T>,
        weights: LossWeights,
        tau_prev: Option<Vec3<T>>,
    ) -> Result<Self> {
        inputs.check(Some(states))?;
        weights.validate()?;
        if inputs.is_empty() {
            return Err(Error::invalid("empty window"));
        }
        let mut joint_rel = Vec::with_capacity(states.len());
        let mut contact_rel = Vec::with_capacity(states.len());
        let base: Vec<KinematicState<T>> = states
            .iter()
            .map(|s| KinematicState {
                tau: Vec3::zero(),
                ..s.clone()
            })
            .collect();
        for (t, s) in base.iter().enumerate() {
            let posed = pose_body(s, BodyScale::unit(), inputs.template);
            contact_rel.push(posed.surface_subset(inputs.template, inputs.contacts[t].body_idx()));
            joint_rel.push(posed.joints);
        }
        Ok(ScaleDepthProblem {
            inputs,
            weights,
            tau_prev,
            base,
            joint_rel,
            contact_rel,
        })
    }

    pub fn dim(&self) -> usize {
        3 * self.base.len() + 1
    }

    pub fn num_frames(&self) -> usize {
        self.base.len()
    }

    pub fn pack(taus: &[Vec3<T>], scale: BodyScale<T>) -> Vec<T> {
        let mut x: Vec<T> = taus.iter().flat_map(|v| v.to_array()).collect();
        x.push(scale.get());
        x
    }

    /// Box constraints: free translations, `h` within the scale limits.
    pub fn bounds(&self) -> Vec<(T, T)> {
        let mut b = vec![(T::neg_infinity(), T::infinity()); self.dim()];
        b[self.dim() - 1] = (T::lit(BodyScale::<T>::MIN), T::lit(BodyScale::<T>::MAX));
        b
    }

    pub fn states(&self, x: &[T]) -> (Vec<KinematicState<T>>, BodyScale<T>) {
        let states = self
            .base
            .iter()
            .enumerate()
            .map(|(t, s)| KinematicState {
                tau: Vec3::from_slice(&x[3 * t..3 * t + 3]),
                ..s.clone()
            })
            .collect();
        (states, BodyScale(x[x.len() - 1]))
    }

    pub fn value(&self, x: &[T]) -> Option<T> {
        self.eval(x, false).map(|(v, _)| v)
    }

    /// Loss and gradient; `None` when a joint is within the near plane.
    pub fn value_grad(&self, x: &[T]) -> Option<(T, Vec<T>)> {
        self.eval(x, true)
    }

    fn eval(&self, x: &[T], want_grad: bool) -> Option<(T, Vec<T>)> {
        assert_eq!(x.len(), self.dim(), "scale-depth variable length");
        let n = self.base.len();
        let h = x[3 * n];
        let cam = self.inputs.cam;
        let two = T::lit(2.0);
        let (iw, ih) = (T::one() / cam.image_w, T::one() / cam.image_h);
        let (l2d, lcon, lsm) = (
            T::lit(self.weights.lambda_2d),
            T::lit(self.weights.lambda_con),
            T::lit(self.weights.lambda_smooth),
        );
        let mut f = T::zero();
        let mut g = vec![T::zero(); if want_grad { x.len() } else { 0 }];
        for t in 0..n {
            let tau = Vec3::from_slice(&x[3 * t..3 * t + 3]);
            let obs = &self.inputs.obs[t];
            let inv_k = T::one() / T::from_usize_lossy(obs.num_joints().max(1));
            let mut g_tau = Vec3::zero();
            let mut g_h = T::zero();
            for ((r, p), w) in self.joint_rel[t].iter().zip(&obs.keypoints).zip(&obs.confidences) {
                let q = tau + *r * h;
                if !(q.z > self.inputs.z_min) {
                    return None;
                }
                let iz = T::one() / q.z;
                let ru = (cam.fx * q.x * iz + cam.cx - p[0]) * iw;
                let rv = (cam.fy * q.y * iz + cam.cy - p[1]) * ih;
                let c = l2d * *w * inv_k;
                f += c * (ru * ru + rv * rv);
                if want_grad {
                    let a = two * c * ru * iw * cam.fx * iz;
                    let b = two * c * rv * ih * cam.fy * iz;
                    let dq = Vec3::new(a, b, -(a * q.x + b * q.y) * iz);
                    g_tau += dq;
                    g_h += dq.dot(*r);
                }
            }
            let env = self.inputs.contacts[t].env_tree();
            if lcon > T::zero() && !env.is_empty() {
                for r in &self.contact_rel[t] {
                    let v = tau + *r * h;
                    let (_, target, d2) = env.nearest_point(v).expect("non-empty tree");
                    f += lcon * d2;
                    if want_grad {
                        let dv = (v - target) * (two * lcon);
                        g_tau += dv;
                        g_h += dv.dot(*r);
                    }
                }
            }
            let prev = if t == 0 {
                self.tau_prev
            } else {
                Some(Vec3::from_slice(&x[3 * (t - 1)..3 * t]))
            };
            if let Some(pt) = prev {
                let d = tau - pt;
                f += lsm * d.dot(d);
                if want_grad {
                    let dd = d * (two * lsm);
                    g_tau += dd;
                    if t > 0 {
                        for a in 0..3 {
                            g[3 * (t - 1) + a] -= dd[a];
                        }
                    }
                }
            }
            if want_grad {
                for a in 0..3 {
                    g[3 * t + a] += g_tau[a];
                }
                g[3 * n] += g_h;
            }
        }
        f.is_finite().then_some((f, g))
    }
}

impl<T: Real> Objective<T> for ScaleDepthProblem<'_, T> {
    fn value(&self, x: &[T]) -> Option<T> {
        ScaleDepthProblem::value(self, x)
    }

    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        self.eval(x, true).map(|r| r.1)
    }

    fn value_grad(&self, x: &[T]) -> Option<(T, Vec<T>)> {
        self.eval(x, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contacts::EffectiveContacts;
    use crate::kinematics::{body_surface, CameraIntrinsics, SkeletonTemplate};
    use crate::objective::{loss_opt, FrameContacts, Observation2D};
    use crate::scene::{SceneIndex, ScenePointCloud};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fx {
        template: SkeletonTemplate<f64>,
        cam: CameraIntrinsics<f64>,
        scene: SceneIndex<f64>,
        obs: Vec<Observation2D<f64>>,
        contacts: Vec<FrameContacts<f64>>,
        states: Vec<KinematicState<f64>>,
    }

    fn fixture(rng: &mut ChaCha8Rng, frames: usize) -> Fx {
        let template = SkeletonTemplate::default_humanoid();
        let cam = CameraIntrinsics::default_vga();
        let pts: Vec<_> = (0..300)
            .map(|_| Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(0.8..0.9), rng.random_range(2.0..5.0)))
            .collect();
        let scene = ScenePointCloud::new(pts).unwrap().index();
        let ns = template.num_surface_points();
        let mut obs = Vec::new();
        let mut contacts = Vec::new();
        let mut states = Vec::new();
        for t in 0..frames {
            let mut s = KinematicState::rest(21);
            s.tau = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(3.0..4.0));
            s.phi = Vec3::new(0.0, rng.random_range(-1.0..1.0), 0.0);
            for th in s.theta.iter_mut().skip(1) {
                *th = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            }
            obs.push(
                Observation2D::new(
                    (0..21).map(|_| [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)]).collect(),
                    (0..21).map(|_| rng.random_range(0.0..1.0)).collect(),
                )
                .unwrap(),
            );
            let eff = EffectiveContacts {
                body_idx: (0..ns).filter(|i| (i + t) % 31 == 0).collect(),
                env_idx: (0..300).filter(|i| i % 5 == 0).collect(),
            };
            contacts.push(FrameContacts::new(eff, &scene, ns).unwrap());
            states.push(s);
        }
        Fx {
            template,
            cam,
            scene,
            obs,
            contacts,
            states,
        }
    }

    fn inputs(f: &Fx) -> WindowInputs<'_, f64> {
        WindowInputs {
            template: &f.template,
            cam: &f.cam,
            obs: &f.obs,
            contacts: &f.contacts,
            z_min: 0.05,
        }
    }

    #[test]
    fn surface_is_affine_in_translation_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = fixture(&mut rng, 1);
        let s = &f.states[0];
        let rel = body_surface(&KinematicState { tau: Vec3::zero(), ..s.clone() }, BodyScale(1.0), &f.template).unwrap();
        let got = body_surface(s, BodyScale(1.3), &f.template).unwrap();
        for (a, r) in got.iter().zip(&rel) {
            assert!(a.distance_squared(s.tau + *r * 1.3) < 1e-24);
        }
    }

    #[test]
    fn value_matches_loss_opt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = fixture(&mut rng, 4);
        let w = LossWeights::default();
        let prev = Some(Vec3::new(0.1, 0.0, 3.5));
        let p = ScaleDepthProblem::new(&f.states, inputs(&f), w, prev).unwrap();
        let taus: Vec<_> = f.states.iter().map(|s| s.tau).collect();
        let x = ScaleDepthProblem::pack(&taus, BodyScale(1.2));
        let (states, h) = p.states(&x);
        let want = loss_opt(&states, h, &inputs(&f), &w, prev).unwrap().total;
        let got = p.value(&x).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        let _ = &f.scene;
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for trial in 0..100 {
            let f = fixture(&mut rng, 2 + trial % 3);
            let p = ScaleDepthProblem::new(&f.states, inputs(&f), LossWeights::default(), Some(Vec3::new(0.0, 0.0, 3.0))).unwrap();
            let taus: Vec<_> = f.states.iter().map(|s| s.tau).collect();
            let x = ScaleDepthProblem::pack(&taus, BodyScale(rng.random_range(0.6..1.8)));
            let (_, g) = p.value_grad(&x).unwrap();
            let h = 1e-6;
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (p.value(&xp).unwrap() - p.value(&xm).unwrap()) / (2.0 * h);
                // Nearest-neighbour switches make the contact term piecewise;
                // skip coordinates where the difference straddles one.
                let tol = 1e-4 * fd.abs().max(g[i].abs()).max(1e-3);
                if (g[i] - fd).abs() > tol {
                    let fd2 = {
                        let h2 = 1e-8;
                        let mut xp = x.clone();
                        xp[i] += h2;
                        let mut xm = x.clone();
                        xm[i] -= h2;
                        (p.value(&xp).unwrap() - p.value(&xm).unwrap()) / (2.0 * h2)
                    };
                    assert!((g[i] - fd2).abs() <= 1e-3 * fd2.abs().max(1e-2), "trial {trial} coord {i}: {} vs {fd}", g[i]);
                }
                checked += 1;
            }
        }
        assert!(checked > 700);
    }

    #[test]
    fn projection_is_scale_depth_ambiguous() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = fixture(&mut rng, 3);
        let w = LossWeights {
            lambda_con: 0.0,
            lambda_smooth: 0.0,
            ..LossWeights::default()
        };
        let p = ScaleDepthProblem::new(&f.states, inputs(&f), w, None).unwrap();
        let taus: Vec<_> = f.states.iter().map(|s| s.tau).collect();
        for alpha in [0.6, 1.5, 1.9] {
            let a = p.value(&ScaleDepthProblem::pack(&taus, BodyScale(1.0))).unwrap();
            let scaled: Vec<_> = taus.iter().map(|t| *t * alpha).collect();
            let b = p.value(&ScaleDepthProblem::pack(&scaled, BodyScale(alpha))).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn behind_camera_is_infeasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = fixture(&mut rng, 1);
        let p = ScaleDepthProblem::new(&f.states, inputs(&f), LossWeights::default(), None).unwrap();
        assert!(p.value_grad(&[0.0, 0.0, -1.0, 1.0]).is_none());
        assert_eq!(p.bounds()[3], (0.5, 2.0));
    }
}
