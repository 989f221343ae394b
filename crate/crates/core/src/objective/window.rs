//! Composite objectives over a window of frames and per frame.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contacts::{effective_contacts, ContactLabels, EffectiveContacts};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{pose_body, BodyScale, CameraIntrinsics, KinematicState, Posed, SkeletonTemplate};
use crate::real::Real;
use crate::scene::{KdTree, SceneIndex};

use super::terms::{contact_loss_with, reprojection_loss};
use super::optim::Objective;
use super::{LossWeights, Observation2D};

/// Effective contacts of one frame with a search tree over its scene points.
#[derive(Debug, Clone)]
pub struct FrameContacts<T> {
    eff: EffectiveContacts,
    env: KdTree<T>,
}

impl<T: Real> FrameContacts<T> {
    pub fn new(eff: EffectiveContacts, scene: &SceneIndex<T>, num_body_points: usize) -> Result<Self> {
        if let Some(&bad) = eff.body_idx.iter().find(|&&i| i >= num_body_points) {
            return Err(Error::invalid(format!("body contact index {bad} out of range")));
        }
        let env = scene.subset(&eff.env_idx)?;
        if eff.body_idx.is_empty() != eff.env_idx.is_empty() {
            log::debug!(
                "one-sided effective contacts ({} body, {} scene): contact term is zero",
                eff.body_idx.len(),
                eff.env_idx.len()
            );
        }
        Ok(FrameContacts { eff, env })
    }

    pub fn from_labels(labels: &ContactLabels<T>, scene: &SceneIndex<T>, threshold: T) -> Result<Self> {
        labels.check_sizes(labels.body.len(), scene.len())?;
        Self::new(effective_contacts(labels, threshold), scene, labels.body.len())
    }

    pub fn empty() -> Self {
        FrameContacts {
            eff: EffectiveContacts::default(),
            env: KdTree::new(&[]),
        }
    }

    pub fn effective(&self) -> &EffectiveContacts {
        &self.eff
    }

    pub fn body_idx(&self) -> &[usize] {
        &self.eff.body_idx
    }

    pub fn env_tree(&self) -> &KdTree<T> {
        &self.env
    }

    /// Contact loss of the frame's contact vertices, given in `body_idx` order.
    pub fn loss(&self, verts: &[Vec3<T>]) -> T {
        if self.eff.body_idx.is_empty() {
            return T::zero();
        }
        contact_loss_with(verts, &self.env)
    }
}

/// Shared inputs of a window of frames.
#[derive(Debug, Clone, Copy)]
pub struct WindowInputs<'a, T> {
    pub template: &'a SkeletonTemplate<T>,
    pub cam: &'a CameraIntrinsics<T>,
    pub obs: &'a [Observation2D<T>],
    pub contacts: &'a [FrameContacts<T>],
    /// Near-plane guard for the projection.
    pub z_min: T,
}

impl<'a, T: Real> WindowInputs<'a, T> {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn check(&self, states: Option<&[KinematicState<T>]>) -> Result<()> {
        if self.obs.len() != self.contacts.len() {
            return Err(Error::invalid(format!(
                "{} observation frames but {} contact frames",
                self.obs.len(),
                self.contacts.len()
            )));
        }
        let k = self.template.num_joints();
        if let Some(o) = self.obs.iter().find(|o| o.num_joints() != k) {
            return Err(Error::invalid(format!("observation has {} joints, template {k}", o.num_joints())));
        }
        if let Some(s) = states {
            if s.len() != self.obs.len() {
                return Err(Error::invalid(format!("{} states for {} frames", s.len(), self.obs.len())));
            }
            for st in s {
                st.validate()?;
                if st.num_joints() != k {
                    return Err(Error::invalid(format!("state has {} joints, template {k}", st.num_joints())));
                }
            }
        }
        Ok(())
    }
}

/// Unweighted term values and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l2d: f64,
    pub smooth: f64,
    pub contact: f64,
    pub sliding: f64,
    pub data: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn add(&mut self, o: &LossBreakdown) {
        self.l2d += o.l2d;
        self.smooth += o.smooth;
        self.contact += o.contact;
        self.sliding += o.sliding;
        self.data += o.data;
        self.total += o.total;
    }
}

/// Contact-based window objective: `lambda_2d L_2D + lambda_con L_con` per
/// frame plus `lambda_smooth ||tau_t - tau_{t-1}||^2` between consecutive
/// frames (and against `tau_prev` for the first frame, when given).
pub fn loss_opt<T: Real>(
    states: &[KinematicState<T>],
    scale: BodyScale<T>,
    inputs: &WindowInputs<'_, T>,
    weights: &LossWeights,
    tau_prev: Option<Vec3<T>>,
) -> Result<LossBreakdown> {
    inputs.check(Some(states))?;
    let mut out = LossBreakdown::default();
    for (t, s) in states.iter().enumerate() {
        let posed = pose_body(s, scale, inputs.template);
        out.l2d += reprojection_loss(&posed.joints, &inputs.obs[t], inputs.cam, inputs.z_min)?.to_f64_lossy();
        let c = &inputs.contacts[t];
        out.contact += c.loss(&posed.surface_subset(inputs.template, c.body_idx())).to_f64_lossy();
        let prev = if t == 0 { tau_prev } else { Some(states[t - 1].tau) };
        if let Some(p) = prev {
            out.smooth += s.tau.distance_squared(p).to_f64_lossy();
        }
    }
    out.total = weights.lambda_2d * out.l2d + weights.lambda_smooth * out.smooth + weights.lambda_con * out.contact;
    Ok(out)
}

/// The neighbouring frame a per-frame cost is coupled to: its state and the
/// positions of its contact vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevFrame<T> {
    pub state: KinematicState<T>,
    /// Sorted surface indices.
    pub contact_idx: Vec<usize>,
    pub contact_pos: Vec<Vec3<T>>,
}

impl<T: Real> PrevFrame<T> {
    pub fn new(state: KinematicState<T>, contact_idx: &[usize], scale: BodyScale<T>, template: &SkeletonTemplate<T>) -> Self {
        let posed = pose_body(&state, scale, template);
        let mut idx = contact_idx.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let contact_pos = posed.surface_subset(template, &idx);
        PrevFrame {
            state,
            contact_idx: idx,
            contact_pos,
        }
    }
}

/// Pairs `(position in a, position in b)` of indices present in both sorted
/// lists.
fn common_positions(a: &[usize], b: &[usize]) -> Vec<(usize, usize)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((i, j));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn sorted(idx: &[usize]) -> Vec<usize> {
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Per-frame sample cost
/// `L_opt (whole-state smoothness) + lambda_sli L_sli + lambda_data L_data`.
pub fn loss_sam<T: Real>(
    state: &KinematicState<T>,
    reference: &KinematicState<T>,
    prev: Option<&PrevFrame<T>>,
    scale: BodyScale<T>,
    obs: &Observation2D<T>,
    contacts: &FrameContacts<T>,
    template: &SkeletonTemplate<T>,
    cam: &CameraIntrinsics<T>,
    weights: &LossWeights,
    z_min: T,
) -> Result<LossBreakdown> {
    let posed = pose_body(state, scale, template);
    let idx = sorted(contacts.body_idx());
    let verts = posed.surface_subset(template, &idx);
    let mut out = LossBreakdown {
        l2d: reprojection_loss(&posed.joints, obs, cam, z_min)?.to_f64_lossy(),
        contact: contacts.loss(&verts).to_f64_lossy(),
        data: state.distance_squared(reference).to_f64_lossy(),
        ..Default::default()
    };
    if let Some(p) = prev {
        out.smooth = state.distance_squared(&p.state).to_f64_lossy();
        out.sliding = common_positions(&idx, &p.contact_idx)
            .iter()
            .map(|&(i, j)| verts[i].distance_squared(p.contact_pos[j]).to_f64_lossy())
            .sum();
    }
    out.total = weights.lambda_2d * out.l2d
        + weights.lambda_smooth * out.smooth
        + weights.lambda_con * out.contact
        + weights.lambda_sli * out.sliding
        + weights.lambda_data * out.data;
    Ok(out)
}

/// Window sample objective with fixed scale: the per-frame costs of
/// [`loss_sam`] summed over the window, each frame coupled to its
/// predecessor. Gradients by frame-local central differences.
#[derive(Debug, Clone)]
pub struct SamObjective<'a, T> {
    inputs: WindowInputs<'a, T>,
    scale: BodyScale<T>,
    weights: LossWeights,
    references: &'a [KinematicState<T>],
    boundary: Option<PrevFrame<T>>,
    /// Sorted contact indices per frame.
    idx: Vec<Vec<usize>>,
    /// Common contact positions between frame t and t - 1 (or the boundary).
    pairs: Vec<Vec<(usize, usize)>>,
    fd_step: T,
}

struct FrameEval<T> {
    posed: Posed<T>,
    verts: Vec<Vec3<T>>,
}

impl<'a, T: Real> SamObjective<'a, T> {
    pub fn new(
        inputs: WindowInputs<'a, T>,
        scale: BodyScale<T>,
        weights: LossWeights,
        references: &'a [KinematicState<T>],
        boundary: Option<PrevFrame<T>>,
    ) -> Result<Self> {
        inputs.check(Some(references))?;
        weights.validate()?;
        let idx: Vec<Vec<usize>> = inputs.contacts.iter().map(|c| sorted(c.body_idx())).collect();
        let pairs = (0..idx.len())
            .map(|t| match t {
                0 => boundary
                    .as_ref()
                    .map(|b| common_positions(&idx[0], &b.contact_idx))
                    .unwrap_or_default(),
                _ => common_positions(&idx[t], &idx[t - 1]),
            })
            .collect();
        Ok(SamObjective {
            inputs,
            scale,
            weights,
            references,
            boundary,
            idx,
            pairs,
            fd_step: T::fd_step(),
        })
    }

    pub fn num_frames(&self) -> usize {
        self.inputs.len()
    }

    /// Values per frame in the flat layout.
    pub fn dof(&self) -> usize {
        6 + 3 * self.inputs.template.num_joints()
    }

    pub fn with_fd_step(mut self, step: T) -> Self {
        self.fd_step = step;
        self
    }

    fn eval_frame(&self, t: usize, s: &KinematicState<T>) -> FrameEval<T> {
        let posed = pose_body(s, self.scale, self.inputs.template);
        let verts = posed.surface_subset(self.inputs.template, &self.idx[t]);
        FrameEval { posed, verts }
    }

    /// Terms that depend on frame `t` alone.
    fn unary(&self, t: usize, s: &KinematicState<T>, e: &FrameEval<T>) -> Option<LossBreakdown> {
        let w = &self.weights;
        let l2d = reprojection_loss(&e.posed.joints, &self.inputs.obs[t], self.inputs.cam, self.inputs.z_min)
            .ok()?
            .to_f64_lossy();
        let contact = self.inputs.contacts[t].loss(&e.verts).to_f64_lossy();
        let data = s.distance_squared(&self.references[t]).to_f64_lossy();
        Some(LossBreakdown {
            l2d,
            contact,
            data,
            total: w.lambda_2d * l2d + w.lambda_con * contact + w.lambda_data * data,
            ..Default::default()
        })
    }

    /// Coupling between frame `t` and its predecessor.
    fn pairwise(&self, t: usize, s: &KinematicState<T>, e: &FrameEval<T>, prev: Option<(&KinematicState<T>, &[Vec3<T>])>) -> LossBreakdown {
        let prev = match (t, prev) {
            (_, Some(p)) => Some(p),
            (0, None) => self.boundary.as_ref().map(|b| (&b.state, &b.contact_pos[..])),
            _ => None,
        };
        let Some((ps, pv)) = prev else {
            return LossBreakdown::default();
        };
        let smooth = s.distance_squared(ps).to_f64_lossy();
        let sliding: f64 = self.pairs[t]
            .iter()
            .map(|&(i, j)| e.verts[i].distance_squared(pv[j]).to_f64_lossy())
            .sum();
        LossBreakdown {
            smooth,
            sliding,
            total: self.weights.lambda_smooth * smooth + self.weights.lambda_sli * sliding,
            ..Default::default()
        }
    }

    /// Window loss; `None` when a joint falls behind the near plane.
    pub fn breakdown(&self, states: &[KinematicState<T>]) -> Option<LossBreakdown> {
        let evals: Vec<FrameEval<T>> = states.iter().enumerate().map(|(t, s)| self.eval_frame(t, s)).collect();
        let mut out = LossBreakdown::default();
        for t in 0..states.len() {
            out.add(&self.unary(t, &states[t], &evals[t])?);
            let prev = (t > 0).then(|| (&states[t - 1], &evals[t - 1].verts[..]));
            out.add(&self.pairwise(t, &states[t], &evals[t], prev));
        }
        Some(out)
    }

    pub fn value(&self, states: &[KinematicState<T>]) -> Option<f64> {
        self.breakdown(states).map(|b| b.total)
    }

    /// All terms involving frame `t`, with the neighbours held fixed.
    fn local(&self, t: usize, s: &KinematicState<T>, states: &[KinematicState<T>], evals: &[FrameEval<T>]) -> Option<f64> {
        let e = self.eval_frame(t, s);
        let mut v = self.unary(t, s, &e)?.total;
        let prev = (t > 0).then(|| (&states[t - 1], &evals[t - 1].verts[..]));
        v += self.pairwise(t, s, &e, prev).total;
        if t + 1 < states.len() {
            v += self.pairwise(t + 1, &states[t + 1], &evals[t + 1], Some((s, &e.verts[..]))).total;
        }
        Some(v)
    }

    /// Central-difference gradient over the flat `(tau, phi, theta)` of every
    /// frame; each coordinate only re-evaluates the terms it touches.
    pub fn gradient(&self, states: &[KinematicState<T>]) -> Result<Vec<T>> {
        let evals: Vec<FrameEval<T>> = states.iter().enumerate().map(|(t, s)| self.eval_frame(t, s)).collect();
        let dof = states.first().map_or(0, |s| s.dof());
        let flats: Vec<Vec<T>> = states.iter().map(|s| s.to_flat()).collect();
        let h = self.fd_step;
        let two_h = (h + h).to_f64_lossy();
        let grads: Vec<Option<f64>> = (0..states.len() * dof)
            .into_par_iter()
            .map(|k| {
                let (t, c) = (k / dof, k % dof);
                let mut x = flats[t].clone();
                x[c] = flats[t][c] + h;
                let fp = self.local(t, &KinematicState::from_flat(&x), states, &evals)?;
                x[c] = flats[t][c] - h;
                let fm = self.local(t, &KinematicState::from_flat(&x), states, &evals)?;
                Some((fp - fm) / two_h)
            })
            .collect();
        grads
            .into_iter()
            .map(|g| match g {
                Some(v) if v.is_finite() => Ok(T::lit(v)),
                _ => Err(Error::NonFinite {
                    what: "refinement gradient".into(),
                }),
            })
            .collect()
    }
}

/// Splits a flat vector into per-frame states of `dof` values each.
pub fn unflatten_states<T: Real>(x: &[T], dof: usize) -> Vec<KinematicState<T>> {
    x.chunks(dof).map(KinematicState::from_flat).collect()
}

pub fn flatten_states<T: Real>(states: &[KinematicState<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for s in states {
        s.write_flat(&mut out);
    }
    out
}

impl<T: Real> Objective<T> for SamObjective<'_, T> {
    fn value(&self, x: &[T]) -> Option<T> {
        SamObjective::value(self, &unflatten_states(x, self.dof())).map(T::lit)
    }

    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        SamObjective::gradient(self, &unflatten_states(x, self.dof())).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ScenePointCloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        template: SkeletonTemplate<f64>,
        cam: CameraIntrinsics<f64>,
        scene: SceneIndex<f64>,
        obs: Vec<Observation2D<f64>>,
        contacts: Vec<FrameContacts<f64>>,
        states: Vec<KinematicState<f64>>,
    }

    fn fixture(seed: u64) -> Fixture {
        let template = SkeletonTemplate::default_humanoid();
        let cam = CameraIntrinsics::default_vga();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<_> = (0..400)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(0.7..0.9), rng.random_range(2.5..3.5)))
            .collect();
        let scene = ScenePointCloud::new(pts).unwrap().index();
        let mut states = Vec::new();
        let mut obs = Vec::new();
        let mut contacts = Vec::new();
        for t in 0..3 {
            let mut s = KinematicState::rest(21);
            s.tau = Vec3::new(0.05 * t as f64, 0.0, 3.0);
            for th in s.theta.iter_mut().skip(1) {
                *th = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            }
            let kp = pose_body(&s, BodyScale::unit(), &template)
                .joints
                .iter()
                .map(|j| {
                    let p = cam.project_point(*j, 0.05).unwrap();
                    [p[0] + rng.random_range(-3.0..3.0), p[1] + rng.random_range(-3.0..3.0)]
                })
                .collect();
            obs.push(Observation2D::new(kp, (0..21).map(|_| rng.random_range(0.5..1.0)).collect()).unwrap());
            let eff = EffectiveContacts {
                body_idx: (0..template.num_surface_points()).filter(|i| (i + t) % 40 == 0).collect(),
                env_idx: (0..400).filter(|i| i % 9 == t).collect(),
            };
            contacts.push(FrameContacts::new(eff, &scene, template.num_surface_points()).unwrap());
            states.push(s);
        }
        Fixture {
            template,
            cam,
            scene,
            obs,
            contacts,
            states,
        }
    }

    fn inputs(f: &Fixture) -> WindowInputs<'_, f64> {
        WindowInputs {
            template: &f.template,
            cam: &f.cam,
            obs: &f.obs,
            contacts: &f.contacts,
            z_min: 0.05,
        }
    }

    #[test]
    fn loss_opt_zero_weights_and_recomposition() {
        let f = fixture(1);
        let zero = LossWeights {
            lambda_2d: 0.0,
            lambda_smooth: 0.0,
            lambda_con: 0.0,
            lambda_sli: 0.0,
            lambda_data: 0.0,
        };
        assert_eq!(loss_opt(&f.states, BodyScale(1.1), &inputs(&f), &zero, None).unwrap().total, 0.0);
        let w = LossWeights::default();
        let b = loss_opt(&f.states, BodyScale(1.1), &inputs(&f), &w, None).unwrap();
        // Recompose from the individual terms.
        let mut l2d = 0.0;
        let mut con = 0.0;
        let mut smooth = 0.0;
        for t in 0..3 {
            let surf = crate::kinematics::body_surface(&f.states[t], BodyScale(1.1), &f.template).unwrap();
            l2d += super::super::loss_2d(&f.states[t], BodyScale(1.1), &f.obs[t], &f.cam, &f.template).unwrap();
            con += super::super::loss_contact(&surf, f.contacts[t].effective(), &f.scene).unwrap();
            if t > 0 {
                smooth += super::super::loss_smooth(f.states[t].tau, f.states[t - 1].tau);
            }
        }
        let want = l2d + 0.01 * smooth + 0.01 * con;
        assert!((b.total - want).abs() < 1e-12 * want);
        assert!(b.contact > 0.0 && b.l2d > 0.0 && b.smooth > 0.0);
    }

    #[test]
    fn scale_depth_ambiguity_without_contacts() {
        let f = fixture(2);
        let w = LossWeights {
            lambda_con: 0.0,
            ..LossWeights::default()
        };
        let alpha = 1.37;
        let scaled: Vec<_> = f
            .states
            .iter()
            .map(|s| KinematicState {
                tau: s.tau * alpha,
                ..s.clone()
            })
            .collect();
        let a = loss_opt(&f.states, BodyScale(1.0), &inputs(&f), &w, None).unwrap();
        let b = loss_opt(&scaled, BodyScale(alpha), &inputs(&f), &w, None).unwrap();
        assert!((a.l2d - b.l2d).abs() < 1e-8);
    }

    #[test]
    fn loss_sam_reduces_to_loss_opt_terms() {
        let f = fixture(3);
        let w = LossWeights {
            lambda_sli: 0.0,
            lambda_data: 0.0,
            ..LossWeights::default()
        };
        let s = &f.states[1];
        let prev = PrevFrame::new(f.states[0].clone(), f.contacts[0].body_idx(), BodyScale(1.0), &f.template);
        let b = loss_sam(s, &f.states[0], Some(&prev), BodyScale(1.0), &f.obs[1], &f.contacts[1], &f.template, &f.cam, &w, 0.05).unwrap();
        let single = loss_opt(&f.states[1..2], BodyScale(1.0), &WindowInputs { obs: &f.obs[1..2], contacts: &f.contacts[1..2], ..inputs(&f) }, &w, None).unwrap();
        assert!((b.total - (single.total + 0.01 * s.distance_squared(&f.states[0]))).abs() < 1e-14);
    }

    #[test]
    fn sliding_uses_common_contacts_only() {
        assert_eq!(common_positions(&[1, 3, 5, 9], &[0, 3, 9, 10]), vec![(1, 1), (3, 2)]);
        let f = fixture(4);
        let w = LossWeights::default();
        let mut idx = f.contacts[1].body_idx().to_vec();
        idx.push(idx[0]);
        let prev = PrevFrame::new(f.states[1].clone(), &idx, BodyScale(1.0), &f.template);
        // Same state as the previous frame: no sliding.
        let b = loss_sam(&f.states[1], &f.states[1], Some(&prev), BodyScale(1.0), &f.obs[1], &f.contacts[1], &f.template, &f.cam, &w, 0.05).unwrap();
        assert_eq!(b.sliding, 0.0);
        assert_eq!(b.smooth, 0.0);
        assert_eq!(b.data, 0.0);
    }

    #[test]
    fn window_sam_value_matches_per_frame_sum() {
        let f = fixture(5);
        let w = LossWeights::refinement();
        let refs: Vec<_> = f.states.iter().map(|s| {
            let mut r = s.clone();
            r.tau.x += 0.01;
            r
        }).collect();
        let obj = SamObjective::new(inputs(&f), BodyScale(1.0), w, &refs, None).unwrap();
        let total = obj.value(&f.states).unwrap();
        let mut want = 0.0;
        for t in 0..3 {
            let prev = (t > 0).then(|| PrevFrame::new(f.states[t - 1].clone(), f.contacts[t - 1].body_idx(), BodyScale(1.0), &f.template));
            want += loss_sam(&f.states[t], &refs[t], prev.as_ref(), BodyScale(1.0), &f.obs[t], &f.contacts[t], &f.template, &f.cam, &w, 0.05).unwrap().total;
        }
        assert!((total - want).abs() < 1e-12 * want);
    }

    #[test]
    fn frame_local_gradient_matches_full_difference() {
        let f = fixture(6);
        let refs = f.states.clone();
        let mut states = f.states.clone();
        states[1].theta[4].x += 0.05;
        let obj = SamObjective::new(inputs(&f), BodyScale(1.0), LossWeights::refinement(), &refs, None).unwrap();
        let g = obj.gradient(&states).unwrap();
        let dof = states[0].dof();
        let h = 1e-6;
        for k in [0, 5, 10, dof + 2, dof + 20, 2 * dof + 7, 2 * dof + 40] {
            let (t, c) = (k / dof, k % dof);
            let mut p = states.clone();
            let mut x = p[t].to_flat();
            x[c] += h;
            p[t] = KinematicState::from_flat(&x);
            let fp = obj.value(&p).unwrap();
            x[c] -= 2.0 * h;
            p[t] = KinematicState::from_flat(&x);
            let fm = obj.value(&p).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "coord {k}: {} vs {fd}", g[k]);
        }
    }
}
