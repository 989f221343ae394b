//! Per-frame sampling with hard collision rejection and elite resampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinematics::{pose_body, BodyScale, CameraIntrinsics, KinematicState, SkeletonTemplate};
use crate::manifold::{expand_joint_confidences, sample_poses_naive, sample_root, PoseManifold};
use crate::objective::{loss_sam, FrameContacts, LossWeights, Observation2D, PrevFrame};
use crate::real::Real;
use crate::scene::SceneIndex;

use super::{Sampler, StageConfig};

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream seed for a tuple of indices under `seed`.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(seed), |acc, p| mix(acc ^ mix(*p)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub state: KinematicState<T>,
    /// `+inf` where the cost is undefined (joint behind the camera).
    pub cost: f64,
    pub collisions: usize,
}

/// Elite selector: indices of the `u` lowest-cost samples among those with
/// at most `gamma` scene points inside the body, sorted by cost then index.
pub fn select_elites(costs: &[f64], collisions: &[usize], gamma: usize, u: usize) -> Vec<usize> {
    let mut ok: Vec<usize> = (0..costs.len())
        .filter(|&i| collisions[i] <= gamma && costs[i].is_finite())
        .collect();
    ok.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    ok.truncate(u);
    ok
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSamplingDiag {
    /// Root-offset escalation factor the selection succeeded at.
    pub psi: u32,
    /// No sample passed the collision test up to the largest `psi`.
    pub flagged: bool,
    pub evaluated: usize,
    pub survivors: usize,
    pub best_cost: f64,
    pub collisions: usize,
    pub collisions_smoothed: usize,
}

pub(crate) struct FrameSampler<'a, T> {
    pub template: &'a SkeletonTemplate<T>,
    pub cam: &'a CameraIntrinsics<T>,
    pub scene: &'a SceneIndex<T>,
    pub manifold: Option<&'a PoseManifold<T>>,
    pub obs: &'a Observation2D<T>,
    pub contacts: &'a FrameContacts<T>,
    pub reference: &'a KinematicState<T>,
    pub prev: Option<&'a PrevFrame<T>>,
    pub scale: BodyScale<T>,
    pub weights: LossWeights,
    pub cfg: &'a StageConfig,
    pub seed: u64,
}

impl<T: Real> FrameSampler<'_, T> {
    fn merge_weights(&self) -> Vec<T> {
        if self.cfg.confidence_merge {
            expand_joint_confidences(&self.obs.confidences)
        } else {
            vec![T::zero(); 3 * self.obs.confidences.len()]
        }
    }

    pub fn evaluate(&self, state: KinematicState<T>) -> Sample<T> {
        let cost = loss_sam(
            &state,
            self.reference,
            self.prev,
            self.scale,
            self.obs,
            self.contacts,
            self.template,
            self.cam,
            &self.weights,
            T::lit(self.cfg.z_min),
        )
        .map_or(f64::INFINITY, |b| b.total);
        let collisions = pose_body(&state, self.scale, self.template).inside_count(self.template, self.scene);
        Sample { state, cost, collisions }
    }

    fn draw(&self, center: &KinematicState<T>, w: &[T], psi: u32, key: u64) -> KinematicState<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let psi_t = T::lit(psi as f64);
        let theta_c = center.theta_flat();
        let theta = match (self.cfg.sampler, self.manifold) {
            (Sampler::Manifold, Some(m)) => {
                m.sample_poses(&theta_c, w, T::lit(self.cfg.latent_sigma), 1, &mut rng).remove(0)
            }
            _ => sample_poses_naive(&theta_c, psi_t, 1, &mut rng).remove(0),
        };
        let (tau, phi) = sample_root(center.tau, center.phi, psi_t, 1, &mut rng)[0];
        let mut s = KinematicState {
            tau,
            phi,
            theta: center.theta.clone(),
        };
        s.set_theta_flat(&theta);
        s.normalized()
    }

    /// `per_center` fresh samples around each center, evaluated in parallel.
    fn generation(&self, centers: &[&KinematicState<T>], per_center: usize, psi: u32, gen: u64) -> Vec<Sample<T>> {
        let w = self.merge_weights();
        (0..centers.len() * per_center)
            .into_par_iter()
            .map(|i| {
                let (c, j) = (i / per_center, i % per_center);
                let key = derive_seed(self.seed, &[psi as u64, gen, c as u64, j as u64]);
                self.evaluate(self.draw(centers[c], &w, psi, key))
            })
            .collect()
    }

    /// Sampling, elite resampling and selection with root-offset escalation.
    pub fn run(&self) -> (Sample<T>, FrameSamplingDiag) {
        let cfg = self.cfg;
        let u = cfg.elites.max(1);
        let mut evaluated = 0;
        let mut fallback: Option<Sample<T>> = None;
        for psi in 1..=cfg.psi_max.max(1) {
            let mut gen = self.generation(&[self.reference], cfg.n_sam, psi, 0);
            evaluated += gen.len();
            for it in 0..cfg.iterations {
                let (costs, cols) = split(&gen);
                let elites = select_elites(&costs, &cols, cfg.gamma, u);
                if elites.is_empty() {
                    break;
                }
                let centers: Vec<&KinematicState<T>> = elites.iter().map(|&i| &gen[i].state).collect();
                let fresh = self.generation(&centers, cfg.n_sam / u, psi, it as u64 + 1);
                evaluated += fresh.len();
                let mut next: Vec<Sample<T>> = elites.iter().map(|&i| gen[i].clone()).collect();
                next.extend(fresh);
                gen = next;
            }
            let (costs, cols) = split(&gen);
            let survivors = costs
                .iter()
                .zip(&cols)
                .filter(|(c, n)| c.is_finite() && **n <= cfg.gamma)
                .count();
            if let Some(&best) = select_elites(&costs, &cols, cfg.gamma, 1).first() {
                let s = gen.swap_remove(best);
                let diag = FrameSamplingDiag {
                    psi,
                    flagged: false,
                    evaluated,
                    survivors,
                    best_cost: s.cost,
                    collisions: s.collisions,
                    collisions_smoothed: s.collisions,
                };
                return (s, diag);
            }
            for s in gen {
                let better = match &fallback {
                    None => true,
                    Some(f) => (s.collisions, s.cost) < (f.collisions, f.cost),
                };
                if better {
                    fallback = Some(s);
                }
            }
            log::debug!("no collision-free sample at psi = {psi}");
        }
        let s = fallback.expect("at least one sample generated");
        log::warn!(
            "no sample with at most {} scene points inside the body; keeping one with {}",
            cfg.gamma,
            s.collisions
        );
        let diag = FrameSamplingDiag {
            psi: cfg.psi_max.max(1),
            flagged: true,
            evaluated,
            survivors: 0,
            best_cost: s.cost,
            collisions: s.collisions,
            collisions_smoothed: s.collisions,
        };
        (s, diag)
    }
}

fn split<T>(gen: &[Sample<T>]) -> (Vec<f64>, Vec<usize>) {
    (gen.iter().map(|s| s.cost).collect(), gen.iter().map(|s| s.collisions).collect())
}
