//! Procedural scenes, ground-truth motion touching them, simulated 2D
//! detections and simulated initial 3D estimates.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::contacts::{oracle_labels, AnnotationConfig, ContactLabels};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::{check_version, read_json, write_json};
use crate::kinematics::{pose_body, BodyScale, CameraIntrinsics, KinematicState, SkeletonTemplate};
use crate::manifold::{generate_motion, MotionFamily, MotionParams};
use crate::objective::Observation2D;
use crate::scene::{SceneIndex, ScenePointCloud};

pub const SCENARIO_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Standing on a floor.
    Floor,
    /// Standing on a floor with the back against a wall.
    Wall,
    /// Sitting on a box seat.
    Seat,
    /// Sitting on a seat in front of a wall.
    Combo,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [ScenarioKind::Floor, ScenarioKind::Wall, ScenarioKind::Seat, ScenarioKind::Combo];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Floor => "floor",
            ScenarioKind::Wall => "wall",
            ScenarioKind::Seat => "seat",
            ScenarioKind::Combo => "combo",
        }
    }
}

/// Closed solid region of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Solid {
    /// Points with `normal . p > offset`.
    HalfSpace { normal: Vec3<f64>, offset: f64 },
    /// Axis-aligned box.
    Box { lo: Vec3<f64>, hi: Vec3<f64> },
}

impl Solid {
    /// Strict interior test.
    pub fn contains(&self, p: Vec3<f64>) -> bool {
        match *self {
            Solid::HalfSpace { normal, offset } => normal.dot(p) > offset,
            Solid::Box { lo, hi } => (0..3).all(|a| p[a] > lo[a] && p[a] < hi[a]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub frames: usize,
    pub fps: f64,
    /// Keypoint noise standard deviation, pixels.
    pub noise_px: f64,
    /// Probability that a joint is occluded in a frame.
    pub occlusion_rate: f64,
    /// Extra keypoint noise on occluded joints, pixels.
    pub occluded_noise_px: f64,
    /// Scene sampling grid spacing, metres.
    pub point_spacing: f64,
    pub annotation: AnnotationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            frames: 10,
            fps: 10.0,
            noise_px: 2.0,
            occlusion_rate: 0.0,
            occluded_noise_px: 20.0,
            point_spacing: 0.05,
            annotation: AnnotationConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("scenario needs at least one frame"));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::invalid(format!("fps {} must be positive", self.fps)));
        }
        if !(self.noise_px >= 0.0 && self.occluded_noise_px >= 0.0) {
            return Err(Error::invalid("keypoint noise must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_rate) {
            return Err(Error::invalid(format!("occlusion rate {} outside [0, 1]", self.occlusion_rate)));
        }
        if !(self.point_spacing >= 0.01 && self.point_spacing <= 0.5) {
            return Err(Error::invalid(format!("point spacing {} outside [0.01, 0.5]", self.point_spacing)));
        }
        Ok(())
    }
}

/// A synthetic sequence with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub fps: f64,
    pub cam: CameraIntrinsics<f64>,
    pub scene_points: Vec<Vec3<f64>>,
    pub solids: Vec<Solid>,
    pub gt_states: Vec<KinematicState<f64>>,
    pub gt_scale: BodyScale<f64>,
    #[serde(with = "sparse_labels")]
    pub gt_contacts: Vec<ContactLabels<f64>>,
    pub obs: Vec<Observation2D<f64>>,
    /// Per frame and joint: whether the detection was simulated as occluded.
    pub occluded: Vec<Vec<bool>>,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.gt_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_states.is_empty()
    }

    pub fn cloud(&self) -> Result<ScenePointCloud<f64>> {
        ScenePointCloud::new(self.scene_points.clone())
    }

    pub fn scene_index(&self) -> Result<SceneIndex<f64>> {
        Ok(self.cloud()?.index())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Scenario = read_json(path)?;
        check_version("scenario", &s.version, 1)?;
        let n = s.gt_states.len();
        if s.gt_contacts.len() != n || s.obs.len() != n || s.occluded.len() != n {
            return Err(Error::invalid("scenario sequences differ in length"));
        }
        s.cam.validate()?;
        Ok(s)
    }
}

mod sparse_labels {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::contacts::{ContactLabels, LabelSequenceFile};

    pub fn serialize<S: Serializer>(v: &[ContactLabels<f64>], s: S) -> Result<S::Ok, S::Error> {
        LabelSequenceFile::from_labels(v)
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ContactLabels<f64>>, D::Error> {
        LabelSequenceFile::<f64>::deserialize(d)?
            .to_labels()
            .map_err(serde::de::Error::custom)
    }
}

const CAMERA_HEIGHT: f64 = 1.0;
const SEAT_HEIGHT: f64 = 0.48;
const CONTACT_GAP: f64 = 0.002;
const LEG_JOINTS: [&str; 6] = ["left_hip", "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle"];

/// Jittered grid over a rectangle spanned by `u` and `v` from `origin`.
fn sample_rect<R: Rng>(
    origin: Vec3<f64>,
    u: Vec3<f64>,
    v: Vec3<f64>,
    spacing: f64,
    rng: &mut R,
    out: &mut Vec<Vec3<f64>>,
) {
    let (lu, lv) = (u.norm(), v.norm());
    let (nu, nv) = ((lu / spacing).round().max(1.0) as usize, (lv / spacing).round().max(1.0) as usize);
    for i in 0..nu {
        for j in 0..nv {
            let a = (i as f64 + 0.5 + rng.random_range(-0.3..0.3)) / nu as f64;
            let b = (j as f64 + 0.5 + rng.random_range(-0.3..0.3)) / nv as f64;
            let p = origin + u * a + v * b;
            if p.z > 0.2 {
                out.push(p);
            }
        }
    }
}

fn motion_params(kind: ScenarioKind) -> MotionParams {
    match kind {
        ScenarioKind::Floor | ScenarioKind::Wall => MotionParams {
            upper_amp: 0.8,
            lower_amp: 0.25,
            detail_amp: 0.03,
            ..MotionParams::default()
        },
        ScenarioKind::Seat | ScenarioKind::Combo => MotionParams {
            upper_amp: 0.8,
            lower_amp: 0.15,
            detail_amp: 0.03,
            ..MotionParams::default()
        },
    }
}

/// Builds a seeded scenario: scene, ground-truth motion resting on the scene,
/// oracle contacts and noisy detections.
pub fn make_scenario(
    kind: ScenarioKind,
    cfg: &ScenarioConfig,
    template: &SkeletonTemplate<f64>,
    cam: &CameraIntrinsics<f64>,
    seed: u64,
) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = cfg.frames;
    let h: f64 = rng.random_range(0.85..1.15);
    let scale = BodyScale(h);
    let sitting = matches!(kind, ScenarioKind::Seat | ScenarioKind::Combo);
    let family = if sitting { MotionFamily::Sitting } else { MotionFamily::Standing };
    let mut thetas = generate_motion(template, family, frames, cfg.fps, &motion_params(kind), &mut rng);
    // Planted legs: they hold their first pose so scene contacts are static.
    let legs: Vec<usize> = LEG_JOINTS.iter().filter_map(|n| template.joint_index(n)).collect();
    let first = thetas[0].clone();
    for th in thetas.iter_mut().skip(1) {
        for &j in &legs {
            th[3 * j..3 * j + 3].copy_from_slice(&first[3 * j..3 * j + 3]);
        }
    }
    let yaw = match kind {
        ScenarioKind::Floor => rng.random_range(-0.6..0.6),
        ScenarioKind::Wall => rng.random_range(-0.2..0.2),
        _ => 0.0,
    };
    let x0: f64 = rng.random_range(-0.5..0.5);
    let z0: f64 = rng.random_range(3.0..4.5);
    let floor_nominal = CAMERA_HEIGHT + rng.random_range(-0.1..0.1);

    let mut states: Vec<KinematicState<f64>> = thetas
        .iter()
        .map(|th| {
            let mut s = KinematicState::rest(template.num_joints());
            s.set_theta_flat(th);
            s.phi = Vec3::new(0.0, yaw, 0.0);
            s.tau = Vec3::new(x0, 0.0, z0);
            s
        })
        .collect();

    // Seat footprint around the pelvis, extending backwards.
    let seat_lo_xz = (x0 - 0.3, z0 - 0.15);
    let seat_hi_xz = (x0 + 0.3, z0 + 0.35);
    let in_seat = |p: Vec3<f64>| p.x > seat_lo_xz.0 && p.x < seat_hi_xz.0 && p.z > seat_lo_xz.1 && p.z < seat_hi_xz.1;
    let seat_top = floor_nominal - SEAT_HEIGHT;
    let mut floor_y = floor_nominal;
    for s in states.iter_mut() {
        let surf = pose_body(s, scale, template).surface(template);
        let lowest = if sitting {
            surf.iter().filter(|p| in_seat(**p)).map(|p| p.y).fold(f64::NEG_INFINITY, f64::max)
        } else {
            surf.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max)
        };
        let target = if sitting { seat_top } else { floor_y };
        if lowest.is_finite() {
            s.tau.y = target - lowest - CONTACT_GAP;
        }
    }
    let surfaces: Vec<Vec<Vec3<f64>>> = states.iter().map(|s| pose_body(s, scale, template).surface(template)).collect();
    if sitting {
        // Feet must not reach below the floor.
        let deepest = surfaces.iter().flatten().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        floor_y = floor_y.max(deepest + CONTACT_GAP);
    }
    let wall_z = match kind {
        ScenarioKind::Wall => surfaces.iter().flatten().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max) + CONTACT_GAP,
        ScenarioKind::Combo => seat_hi_xz.1 + 0.3,
        _ => f64::INFINITY,
    };

    let sp = cfg.point_spacing;
    let mut pts = Vec::new();
    let mut solids = vec![Solid::HalfSpace {
        normal: Vec3::new(0.0, 1.0, 0.0),
        offset: floor_y,
    }];
    let far = if wall_z.is_finite() { wall_z } else { 7.0 };
    let mut floor_pts = Vec::new();
    sample_rect(
        Vec3::new(-2.5, floor_y, 1.0),
        Vec3::new(5.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, far - 1.0),
        sp,
        &mut rng,
        &mut floor_pts,
    );
    if sitting {
        floor_pts.retain(|p| !in_seat(*p));
    }
    pts.extend(floor_pts);
    if wall_z.is_finite() {
        sample_rect(
            Vec3::new(-2.5, floor_y - 2.2, wall_z),
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(0.0, 2.2, 0.0),
            sp,
            &mut rng,
            &mut pts,
        );
        solids.push(Solid::HalfSpace {
            normal: Vec3::new(0.0, 0.0, 1.0),
            offset: wall_z,
        });
    }
    if sitting {
        let (lx, lz, hx, hz) = (seat_lo_xz.0, seat_lo_xz.1, seat_hi_xz.0, seat_hi_xz.1);
        let height = floor_y - seat_top;
        // Top, front and both sides.
        sample_rect(Vec3::new(lx, seat_top, lz), Vec3::new(hx - lx, 0.0, 0.0), Vec3::new(0.0, 0.0, hz - lz), sp, &mut rng, &mut pts);
        sample_rect(Vec3::new(lx, seat_top, lz), Vec3::new(hx - lx, 0.0, 0.0), Vec3::new(0.0, height, 0.0), sp, &mut rng, &mut pts);
        sample_rect(Vec3::new(lx, seat_top, lz), Vec3::new(0.0, 0.0, hz - lz), Vec3::new(0.0, height, 0.0), sp, &mut rng, &mut pts);
        sample_rect(Vec3::new(hx, seat_top, lz), Vec3::new(0.0, 0.0, hz - lz), Vec3::new(0.0, height, 0.0), sp, &mut rng, &mut pts);
        solids.push(Solid::Box {
            lo: Vec3::new(lx, seat_top, lz),
            hi: Vec3::new(hx, floor_y, hz),
        });
    }
    let index = ScenePointCloud::new(pts.clone())?.index();

    // Back off any residual penetration of the sampled scene.
    let away = match kind {
        ScenarioKind::Wall => Vec3::new(0.0, 0.0, -0.002),
        _ => Vec3::new(0.0, -0.002, 0.0),
    };
    for s in states.iter_mut() {
        for _ in 0..25 {
            if pose_body(s, scale, template).inside_count(template, &index) == 0 {
                break;
            }
            s.tau += away;
        }
    }
    let surfaces: Vec<Vec<Vec3<f64>>> = states.iter().map(|s| pose_body(s, scale, template).surface(template)).collect();
    let gt_contacts = oracle_labels(&surfaces, &index, &cfg.annotation, 1.0 / cfg.fps)?;

    let (obs, occluded) = simulate_detections(&states, scale, template, cam, cfg, &mut rng)?;
    Ok(Scenario {
        version: SCENARIO_VERSION.into(),
        kind,
        seed,
        fps: cfg.fps,
        cam: *cam,
        scene_points: pts,
        solids,
        gt_states: states,
        gt_scale: scale,
        gt_contacts,
        obs,
        occluded,
    })
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Projected ground-truth joints with Gaussian pixel noise. Occluded joints
/// get confidence below 0.3 and extra noise; visible ones above 0.7 (exactly
/// 1 for noise-free detections).
fn simulate_detections<R: Rng>(
    states: &[KinematicState<f64>],
    scale: BodyScale<f64>,
    template: &SkeletonTemplate<f64>,
    cam: &CameraIntrinsics<f64>,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<(Vec<Observation2D<f64>>, Vec<Vec<bool>>)> {
    let mut obs = Vec::with_capacity(states.len());
    let mut occ = Vec::with_capacity(states.len());
    for s in states {
        let joints = pose_body(s, scale, template).joints;
        let mut kp = Vec::with_capacity(joints.len());
        let mut conf = Vec::with_capacity(joints.len());
        let mut hidden = Vec::with_capacity(joints.len());
        for (k, j) in joints.iter().enumerate() {
            let p = cam.project_point(*j, 0.05).ok_or(Error::PointBehindCamera {
                index: k,
                z: j.z,
                z_min: 0.05,
            })?;
            let is_occ = cfg.occlusion_rate > 0.0 && rng.random::<f64>() < cfg.occlusion_rate;
            let sd = if is_occ { (cfg.noise_px.powi(2) + cfg.occluded_noise_px.powi(2)).sqrt() } else { cfg.noise_px };
            kp.push([p[0] + sd * gauss(rng), p[1] + sd * gauss(rng)]);
            conf.push(if is_occ {
                rng.random_range(0.05..0.3)
            } else if cfg.noise_px > 0.0 {
                rng.random_range(0.7..=1.0)
            } else {
                1.0
            });
            hidden.push(is_occ);
        }
        obs.push(Observation2D::new(kp, conf)?);
        occ.push(hidden);
    }
    Ok((obs, occ))
}

/// Error model of the simulated monocular 3D estimate the pipeline starts
/// from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    /// Per-DoF pose noise on joints detected as visible, radians.
    pub visible_pose_noise: f64,
    /// Per-DoF pose noise on joints detected as occluded, radians.
    pub occluded_pose_noise: f64,
    pub orient_noise: f64,
    /// Per-frame translation jitter, metres, before scale ambiguity.
    pub trans_noise: f64,
    /// Assumed body scale; the estimate's depth follows from it.
    pub h0: f64,
    /// Extra distance along the viewing ray, metres.
    pub depth_offset: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            visible_pose_noise: 0.03,
            occluded_pose_noise: 0.25,
            orient_noise: 0.03,
            trans_noise: 0.03,
            h0: 1.0,
            depth_offset: 0.0,
        }
    }
}

/// Scale-ambiguous noisy estimate: the ground truth seen with body scale
/// `h0` (translations rescaled along their rays by `h0 / h*`), with pose,
/// orientation and translation noise and an optional depth offset.
pub fn initial_estimate(
    sc: &Scenario,
    cfg: &InitConfig,
    template: &SkeletonTemplate<f64>,
    seed: u64,
) -> Result<(Vec<KinematicState<f64>>, BodyScale<f64>)> {
    let h0 = BodyScale::new(cfg.h0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = cfg.h0 / sc.gt_scale.get();
    let states = sc
        .gt_states
        .iter()
        .zip(&sc.obs)
        .map(|(gt, o)| {
            let mut s = gt.clone();
            for (j, th) in s.theta.iter_mut().enumerate() {
                let sd = if o.confidences[j] < 0.5 { cfg.occluded_pose_noise } else { cfg.visible_pose_noise };
                let lim = template.limits(j);
                for a in 0..3 {
                    let noise = sd * gauss(&mut rng);
                    if lim[a][1] > lim[a][0] {
                        let v = match a {
                            0 => &mut th.x,
                            1 => &mut th.y,
                            _ => &mut th.z,
                        };
                        *v = (*v + noise).clamp(lim[a][0], lim[a][1]);
                    }
                }
            }
            s.phi += Vec3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * cfg.orient_noise;
            let jitter = Vec3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * cfg.trans_noise;
            let tau = (gt.tau + jitter) * ratio;
            s.tau = tau + tau * (cfg.depth_offset / tau.norm());
            s.normalized()
        })
        .collect();
    Ok((states, h0))
}
