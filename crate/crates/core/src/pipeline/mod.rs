//! Three-stage trajectory optimisation over consecutive windows: scale and
//! depth recovery from contacts, collision-constrained sampling, and a final
//! gradient refinement, followed by temporal smoothing of the samples.

mod sampling;
mod smooth;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contacts::ContactLabels;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::{check_version, read_json, write_json};
use crate::kinematics::{pose_body, BodyScale, CameraIntrinsics, KinematicState, SkeletonTemplate};
use crate::manifold::{PoseManifold, DEFAULT_LATENT_SIGMA};
use crate::objective::{
    flatten_states, loss_opt, minimize, unflatten_states, FrameContacts, LossBreakdown, LossWeights, Observation2D,
    OptimizerConfig, PrevFrame, SamObjective, ScaleDepthProblem, WindowInputs,
};
use crate::real::Real;
use crate::scene::SceneIndex;

pub use sampling::{derive_seed, select_elites, FrameSamplingDiag, Sample};
pub use smooth::{gaussian_kernel, gaussian_smooth_1d, gaussian_smooth_trajectory};

pub const RESULT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Latent-space pose samples decoded through the manifold.
    Manifold,
    /// Uniform joint-space offsets.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    /// Frames optimised jointly.
    pub window: usize,
    pub n_sam: usize,
    /// Elites kept per generation.
    pub elites: usize,
    /// Elite resampling rounds.
    pub iterations: usize,
    /// Scene points allowed inside the body.
    pub gamma: usize,
    pub smoothing_sigma_frames: f64,
    pub psi_max: u32,
    pub latent_sigma: f64,
    pub sampler: Sampler,
    /// Keep confidently detected joints from the current estimate when
    /// merging with decoded samples.
    pub confidence_merge: bool,
    pub contact_threshold: f64,
    pub z_min: f64,
    /// Run the sampling stage.
    pub sampling: bool,
    /// Run the refinement stage.
    pub refine: bool,
    pub weights: LossWeights,
    /// Data weight used by the refinement.
    pub refine_lambda_data: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            window: 5,
            n_sam: 1000,
            elites: 3,
            iterations: 1,
            gamma: 5,
            smoothing_sigma_frames: 1.0,
            psi_max: 10,
            latent_sigma: DEFAULT_LATENT_SIGMA,
            sampler: Sampler::Manifold,
            confidence_merge: true,
            contact_threshold: 0.5,
            z_min: 0.05,
            sampling: true,
            refine: true,
            weights: LossWeights::default(),
            refine_lambda_data: 1.0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window length must be at least 1"));
        }
        if self.elites == 0 || self.n_sam < self.elites {
            return Err(Error::invalid(format!(
                "need n_sam >= elites >= 1, got n_sam = {}, elites = {}",
                self.n_sam, self.elites
            )));
        }
        if self.psi_max == 0 {
            return Err(Error::invalid("psi_max must be at least 1"));
        }
        for (name, v) in [
            ("smoothing_sigma_frames", self.smoothing_sigma_frames),
            ("latent_sigma", self.latent_sigma),
            ("refine_lambda_data", self.refine_lambda_data),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        if !(self.z_min.is_finite() && self.z_min > 0.0) {
            return Err(Error::invalid(format!("z_min = {} must be positive", self.z_min)));
        }
        if !(0.0..1.0).contains(&self.contact_threshold) {
            return Err(Error::invalid(format!("contact threshold {} outside [0, 1)", self.contact_threshold)));
        }
        self.weights.validate()?;
        self.optimizer.validate()
    }

    pub fn refine_weights(&self) -> LossWeights {
        LossWeights {
            lambda_data: self.refine_lambda_data,
            ..self.weights
        }
    }
}

/// Everything the pipeline reads; all per-frame slices have equal length.
#[derive(Debug, Clone, Copy)]
pub struct PipelineInputs<'a, T> {
    pub template: &'a SkeletonTemplate<T>,
    pub cam: &'a CameraIntrinsics<T>,
    pub scene: &'a SceneIndex<T>,
    /// Required for manifold sampling.
    pub manifold: Option<&'a PoseManifold<T>>,
    pub obs: &'a [Observation2D<T>],
    pub contacts: &'a [ContactLabels<T>],
    pub phi0: &'a [KinematicState<T>],
    pub h0: BodyScale<T>,
}

impl<T: Real> PipelineInputs<'_, T> {
    fn check(&self, cfg: &StageConfig) -> Result<()> {
        let n = self.phi0.len();
        if n == 0 {
            return Err(Error::invalid("no frames to optimise"));
        }
        if self.obs.len() != n || self.contacts.len() != n {
            return Err(Error::invalid(format!(
                "{n} initial states, {} observations, {} contact frames",
                self.obs.len(),
                self.contacts.len()
            )));
        }
        let (nb, ne) = (self.template.num_surface_points(), self.scene.len());
        for c in self.contacts {
            c.check_sizes(nb, ne)?;
        }
        for o in self.obs {
            o.validate()?;
        }
        self.cam.validate()?;
        if !(self.h0.get().is_finite()) {
            return Err(Error::NonFinite {
                what: "initial body scale".into(),
            });
        }
        if cfg.sampling && cfg.sampler == Sampler::Manifold {
            let m = self
                .manifold
                .ok_or_else(|| Error::invalid("manifold sampling requires a pose manifold"))?;
            if m.pose_dim() != 3 * self.template.num_joints() {
                return Err(Error::invalid(format!(
                    "manifold pose dimension {} does not match {} joints",
                    m.pose_dim(),
                    self.template.num_joints()
                )));
            }
        }
        Ok(())
    }
}

/// Summary of one gradient-based stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OptDiag {
    pub iterations: usize,
    pub converged: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub start: usize,
    pub len: usize,
    pub scale: f64,
    pub stage1: OptDiag,
    /// Contact objective at the initial and stage-I states.
    pub loss_opt_initial: LossBreakdown,
    pub loss_opt_final: LossBreakdown,
    pub stage2: Vec<FrameSamplingDiag>,
    pub stage3: Option<OptDiag>,
    /// Refinement objective at the smoothed samples and at the output.
    pub loss_sam_initial: Option<LossBreakdown>,
    pub loss_sam_final: Option<LossBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub gamma: usize,
    pub windows: Vec<WindowDiagnostics>,
    pub flagged_frames: Vec<usize>,
}

/// States after every stage, one entry per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrajectoryResult<T> {
    pub version: String,
    pub window: usize,
    pub phi0: Vec<KinematicState<T>>,
    pub h0: T,
    pub phi_opt: Vec<KinematicState<T>>,
    /// Best samples before temporal smoothing.
    pub phi_sam: Vec<KinematicState<T>>,
    pub phi_sam_hat: Vec<KinematicState<T>>,
    pub phi_ref: Vec<KinematicState<T>>,
    /// Body scale per frame, constant within each window.
    pub scales: Vec<T>,
    pub diagnostics: Diagnostics,
}

impl<T: Real> TrajectoryResult<T> {
    pub fn len(&self) -> usize {
        self.phi_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_ref.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r: Self = read_json(path)?;
        check_version("trajectory result", &r.version, 1)?;
        let n = r.phi0.len();
        if [r.phi_opt.len(), r.phi_sam.len(), r.phi_sam_hat.len(), r.phi_ref.len(), r.scales.len()]
            .iter()
            .any(|l| *l != n)
        {
            return Err(Error::invalid("trajectory result sequences differ in length"));
        }
        Ok(r)
    }
}

struct Carry<T> {
    tau1: Vec3<T>,
    sam: PrevFrame<T>,
    refined: PrevFrame<T>,
}

/// Runs all stages over consecutive windows of `cfg.window` frames. Temporal
/// terms of each window's first frame couple to the previous window's last.
pub fn run_pipeline<T: Real>(inputs: &PipelineInputs<'_, T>, cfg: &StageConfig, seed: u64) -> Result<TrajectoryResult<T>> {
    cfg.validate()?;
    inputs.check(cfg)?;
    let n = inputs.phi0.len();
    let contacts: Vec<FrameContacts<T>> = inputs
        .contacts
        .iter()
        .map(|c| FrameContacts::from_labels(c, inputs.scene, T::lit(cfg.contact_threshold)))
        .collect::<Result<_>>()?;
    let mut out = TrajectoryResult {
        version: RESULT_VERSION.into(),
        window: cfg.window,
        phi0: inputs.phi0.to_vec(),
        h0: inputs.h0.get(),
        phi_opt: Vec::with_capacity(n),
        phi_sam: Vec::with_capacity(n),
        phi_sam_hat: Vec::with_capacity(n),
        phi_ref: Vec::with_capacity(n),
        scales: Vec::with_capacity(n),
        diagnostics: Diagnostics {
            gamma: cfg.gamma,
            windows: Vec::new(),
            flagged_frames: Vec::new(),
        },
    };
    let mut carry: Option<Carry<T>> = None;
    for (w, start) in (0..n).step_by(cfg.window).enumerate() {
        let end = (start + cfg.window).min(n);
        let win = WindowInputs {
            template: inputs.template,
            cam: inputs.cam,
            obs: &inputs.obs[start..end],
            contacts: &contacts[start..end],
            z_min: T::lit(cfg.z_min),
        };
        let ctx = WindowRun {
            inputs,
            win,
            cfg,
            seed: derive_seed(seed, &[w as u64]),
            start,
        };
        let (res, next) = ctx.run(&inputs.phi0[start..end], carry.as_ref())?;
        carry = Some(next);
        out.diagnostics
            .flagged_frames
            .extend(res.diag.stage2.iter().enumerate().filter(|(_, d)| d.flagged).map(|(i, _)| start + i));
        out.phi_opt.extend(res.phi_opt);
        out.phi_sam.extend(res.phi_sam);
        out.phi_sam_hat.extend(res.phi_sam_hat);
        out.phi_ref.extend(res.phi_ref);
        out.scales.extend(std::iter::repeat_n(res.scale.get(), end - start));
        out.diagnostics.windows.push(res.diag);
    }
    Ok(out)
}

struct WindowResult<T> {
    phi_opt: Vec<KinematicState<T>>,
    phi_sam: Vec<KinematicState<T>>,
    phi_sam_hat: Vec<KinematicState<T>>,
    phi_ref: Vec<KinematicState<T>>,
    scale: BodyScale<T>,
    diag: WindowDiagnostics,
}

struct WindowRun<'a, 'b, T> {
    inputs: &'b PipelineInputs<'a, T>,
    win: WindowInputs<'b, T>,
    cfg: &'b StageConfig,
    seed: u64,
    start: usize,
}

impl<T: Real> WindowRun<'_, '_, T> {
    fn run(&self, phi0: &[KinematicState<T>], carry: Option<&Carry<T>>) -> Result<(WindowResult<T>, Carry<T>)> {
        let cfg = self.cfg;
        let (phi_opt, scale, stage1) = stage1_contact_opt(phi0, self.inputs.h0, &self.win, cfg, carry.map(|c| c.tau1))?;
        let loss_opt_initial = loss_opt(phi0, BodyScale::clamped(self.inputs.h0.get()), &self.win, &cfg.weights, carry.map(|c| c.tau1))?;
        let loss_opt_final = loss_opt(&phi_opt, scale, &self.win, &cfg.weights, carry.map(|c| c.tau1))?;

        let (phi_sam, mut stage2) = if cfg.sampling {
            self.stage2(&phi_opt, scale, carry.map(|c| &c.sam))
        } else {
            (phi_opt.clone(), Vec::new())
        };
        let phi_sam_hat = if cfg.sampling {
            gaussian_smooth_trajectory(&phi_sam, cfg.smoothing_sigma_frames)
        } else {
            phi_sam.clone()
        };
        for (d, s) in stage2.iter_mut().zip(&phi_sam_hat) {
            d.collisions_smoothed = pose_body(s, scale, self.win.template).inside_count(self.win.template, self.inputs.scene);
        }

        let (phi_ref, stage3, loss_sam_initial, loss_sam_final) = if cfg.refine {
            let boundary = carry.map(|c| c.refined.clone());
            let (r, d, a, b) = stage3_refine(&phi_sam_hat, scale, &self.win, cfg, boundary)?;
            (r, Some(d), Some(a), Some(b))
        } else {
            (phi_sam_hat.clone(), None, None, None)
        };

        let last = phi_opt.len() - 1;
        let idx = self.win.contacts[last].body_idx();
        let next = Carry {
            tau1: phi_opt[last].tau,
            sam: PrevFrame::new(phi_sam[last].clone(), idx, scale, self.win.template),
            refined: PrevFrame::new(phi_ref[last].clone(), idx, scale, self.win.template),
        };
        let diag = WindowDiagnostics {
            start: self.start,
            len: phi0.len(),
            scale: scale.get().to_f64_lossy(),
            stage1,
            loss_opt_initial,
            loss_opt_final,
            stage2,
            stage3,
            loss_sam_initial,
            loss_sam_final,
        };
        Ok((
            WindowResult {
                phi_opt,
                phi_sam,
                phi_sam_hat,
                phi_ref,
                scale,
                diag,
            },
            next,
        ))
    }

    fn stage2(
        &self,
        phi_opt: &[KinematicState<T>],
        scale: BodyScale<T>,
        boundary: Option<&PrevFrame<T>>,
    ) -> (Vec<KinematicState<T>>, Vec<FrameSamplingDiag>) {
        let mut chosen: Vec<KinematicState<T>> = Vec::with_capacity(phi_opt.len());
        let mut diags = Vec::with_capacity(phi_opt.len());
        let mut prev: Option<PrevFrame<T>> = boundary.cloned();
        for (t, reference) in phi_opt.iter().enumerate() {
            let sampler = sampling::FrameSampler {
                template: self.win.template,
                cam: self.win.cam,
                scene: self.inputs.scene,
                manifold: self.inputs.manifold,
                obs: &self.win.obs[t],
                contacts: &self.win.contacts[t],
                reference,
                prev: prev.as_ref(),
                scale,
                weights: self.cfg.weights,
                cfg: self.cfg,
                seed: derive_seed(self.seed, &[t as u64]),
            };
            let (s, d) = sampler.run();
            prev = Some(PrevFrame::new(s.state.clone(), self.win.contacts[t].body_idx(), scale, self.win.template));
            chosen.push(s.state);
            diags.push(d);
        }
        (chosen, diags)
    }
}

/// Stage I: per-frame root translations and one shared scale with rotations
/// fixed from `phi0`.
pub fn stage1_contact_opt<T: Real>(
    phi0: &[KinematicState<T>],
    h0: BodyScale<T>,
    win: &WindowInputs<'_, T>,
    cfg: &StageConfig,
    tau_prev: Option<Vec3<T>>,
) -> Result<(Vec<KinematicState<T>>, BodyScale<T>, OptDiag)> {
    let problem = ScaleDepthProblem::new(phi0, *win, cfg.weights, tau_prev)?;
    let taus: Vec<Vec3<T>> = phi0.iter().map(|s| s.tau).collect();
    let x0 = ScaleDepthProblem::pack(&taus, BodyScale::clamped(h0.get()));
    let r = minimize(&problem, &x0, &problem.bounds(), &cfg.optimizer)?;
    let (states, scale) = problem.states(&r.x);
    let diag = OptDiag {
        iterations: r.iterations,
        converged: r.converged,
        initial_loss: r.trace[0],
        final_loss: r.value.to_f64_lossy(),
    };
    Ok((states, BodyScale::clamped(scale.get()), diag))
}

/// Stage III: descent on the window sample objective over every state DoF,
/// anchored to `phi_sam_hat`, scale fixed.
pub fn stage3_refine<T: Real>(
    phi_sam_hat: &[KinematicState<T>],
    scale: BodyScale<T>,
    win: &WindowInputs<'_, T>,
    cfg: &StageConfig,
    boundary: Option<PrevFrame<T>>,
) -> Result<(Vec<KinematicState<T>>, OptDiag, LossBreakdown, LossBreakdown)> {
    let obj = SamObjective::new(*win, scale, cfg.refine_weights(), phi_sam_hat, boundary)?;
    let before = obj.breakdown(phi_sam_hat).ok_or_else(|| Error::Diverged {
        iteration: 0,
        reason: "refinement starts with a joint behind the camera".into(),
        trace: Vec::new(),
    })?;
    let r = minimize(&obj, &flatten_states(phi_sam_hat), &[], &cfg.optimizer)?;
    let states: Vec<KinematicState<T>> = unflatten_states(&r.x, obj.dof()).into_iter().map(|s| s.normalized()).collect();
    let after = obj.breakdown(&states).unwrap_or_default();
    let diag = OptDiag {
        iterations: r.iterations,
        converged: r.converged,
        initial_loss: r.trace[0],
        final_loss: r.value.to_f64_lossy(),
    };
    Ok((states, diag, before, after))
}
