//! Evaluation metrics on predicted against ground-truth trajectories.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::contacts::ContactLabels;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{pose_body, BodyScale, KinematicState, SkeletonTemplate};
use crate::scene::SceneIndex;

use super::scenario::Solid;

pub const PCK_THRESHOLD_MM: f64 = 150.0;
/// Tolerance behind a locally fitted scene plane before a vertex counts as
/// penetrating, metres.
pub const PLANE_EPS: f64 = 0.01;
/// Neighbours used for the local plane fit.
pub const PLANE_NEIGHBOURS: usize = 8;
/// Vertices farther than this from every scene point are never penetrating
/// under the plane test, metres.
pub const PLANE_REACH: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mpjpe_mm: f64,
    pub mpjpe_pa_mm: f64,
    pub pck_pct: f64,
    pub pve_mm: f64,
    pub pve_pa_mm: f64,
    pub trans_err_m: f64,
    pub bone_len_err_m: f64,
    pub non_penet_pct: f64,
    pub e_smooth: f64,
    pub sliding_err_mm: f64,
}

impl MetricReport {
    pub const FIELDS: [&'static str; 10] = [
        "mpjpe_mm",
        "mpjpe_pa_mm",
        "pck_pct",
        "pve_mm",
        "pve_pa_mm",
        "trans_err_m",
        "bone_len_err_m",
        "non_penet_pct",
        "e_smooth",
        "sliding_err_mm",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.mpjpe_mm,
            self.mpjpe_pa_mm,
            self.pck_pct,
            self.pve_mm,
            self.pve_pa_mm,
            self.trans_err_m,
            self.bone_len_err_m,
            self.non_penet_pct,
            self.e_smooth,
            self.sliding_err_mm,
        ]
    }

    pub fn from_values(v: [f64; 10]) -> Self {
        MetricReport {
            mpjpe_mm: v[0],
            mpjpe_pa_mm: v[1],
            pck_pct: v[2],
            pve_mm: v[3],
            pve_pa_mm: v[4],
            trans_err_m: v[5],
            bone_len_err_m: v[6],
            non_penet_pct: v[7],
            e_smooth: v[8],
            sliding_err_mm: v[9],
        }
    }
}

fn check_frames<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!("metric needs equal non-empty sequences, got {} and {}", a.len(), b.len())));
    }
    Ok(())
}

fn mean_distance_mm(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>]) -> Result<f64> {
    check_frames(pred, gt)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        check_frames(p, g)?;
        sum += p.iter().zip(g).map(|(a, b)| a.distance_squared(*b).sqrt()).sum::<f64>();
        n += p.len();
    }
    Ok(1000.0 * sum / n as f64)
}

/// Mean per-joint position error, millimetres.
pub fn mpjpe(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>]) -> Result<f64> {
    mean_distance_mm(pred, gt)
}

/// Mean surface vertex error, millimetres.
pub fn pve(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>]) -> Result<f64> {
    mean_distance_mm(pred, gt)
}

/// Percentage of joints within `threshold_mm` of the ground truth.
pub fn pck(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>], threshold_mm: f64) -> Result<f64> {
    check_frames(pred, gt)?;
    let t = threshold_mm / 1000.0;
    let mut hit = 0usize;
    let mut n = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        check_frames(p, g)?;
        hit += p.iter().zip(g).filter(|(a, b)| a.distance_squared(**b) <= t * t).count();
        n += p.len();
    }
    Ok(100.0 * hit as f64 / n as f64)
}

/// Similarity transform `s R x + t` minimising the squared distance from the
/// transformed `src` to `dst`.
pub fn procrustes(src: &[Vec3<f64>], dst: &[Vec3<f64>]) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let to = |v: &Vec3<f64>| Vector3::new(v.x, v.y, v.z);
    let n = src.len() as f64;
    let ms = src.iter().map(to).sum::<Vector3<f64>>() / n;
    let md = dst.iter().map(to).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let (a, b) = (to(a) - ms, to(b) - md);
        cov += b * a.transpose();
        var += a.norm_squared();
    }
    cov /= n;
    var /= n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let s = if var > 0.0 { (svd.singular_values.component_mul(&d.diagonal())).sum() / var } else { 1.0 };
    let t = md - r * ms * s;
    (s, r, t)
}

/// Applies [`procrustes`] per frame, aligning predictions onto ground truth.
pub fn align_frames(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>]) -> Vec<Vec<Vec3<f64>>> {
    pred.iter()
        .zip(gt)
        .map(|(p, g)| {
            let (s, r, t) = procrustes(p, g);
            p.iter()
                .map(|v| {
                    let w = r * Vector3::new(v.x, v.y, v.z) * s + t;
                    Vec3::new(w.x, w.y, w.z)
                })
                .collect()
        })
        .collect()
}

/// `(mean ||tau - tau*||, mean |h L - h* L|)` with `L` the template's summed
/// bone length.
pub fn translation_and_bone_errors(
    pred: &[KinematicState<f64>],
    pred_scales: &[f64],
    gt: &[KinematicState<f64>],
    gt_scale: BodyScale<f64>,
    template: &SkeletonTemplate<f64>,
) -> Result<(f64, f64)> {
    check_frames(pred, gt)?;
    check_frames(pred, pred_scales)?;
    let n = pred.len() as f64;
    let trans = pred.iter().zip(gt).map(|(a, b)| a.tau.distance_squared(b.tau).sqrt()).sum::<f64>() / n;
    let l = template.total_bone_length();
    let bone = pred_scales.iter().map(|h| (h * l - gt_scale.get() * l).abs()).sum::<f64>() / n;
    Ok((trans, bone))
}

/// Non-penetration percentage against known solids: `100 (1 - mean fraction
/// of vertices strictly inside any solid)`.
pub fn non_penetration_pct_solids(surfaces: &[Vec<Vec3<f64>>], solids: &[Solid]) -> f64 {
    frame_mean_pct(surfaces, |v| solids.iter().any(|s| s.contains(v)))
}

fn frame_mean_pct(surfaces: &[Vec<Vec3<f64>>], penetrates: impl Fn(Vec3<f64>) -> bool) -> f64 {
    if surfaces.is_empty() {
        return 100.0;
    }
    let ok: f64 = surfaces
        .iter()
        .map(|f| {
            if f.is_empty() {
                return 1.0;
            }
            1.0 - f.iter().filter(|v| penetrates(**v)).count() as f64 / f.len() as f64
        })
        .sum();
    100.0 * ok / surfaces.len() as f64
}

/// Unit normal of the least-squares plane through `pts`, oriented towards
/// the camera, and the centroid.
pub fn fit_plane(pts: &[Vec3<f64>]) -> (Vec3<f64>, Vec3<f64>) {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vec3::zero(), |a, p| a + *p) * (1.0 / n);
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let e = eig.eigenvectors.column(k);
    let mut normal = Vec3::new(e[0], e[1], e[2]);
    // Camera at the origin: the visible side faces it.
    if normal.dot(c) > 0.0 {
        normal = -normal;
    }
    (normal, c)
}

/// Local-plane penetration test for raw clouds: a vertex penetrates when it
/// lies more than [`PLANE_EPS`] behind the plane fitted to its nearest scene
/// points and within [`PLANE_REACH`] of the scene.
pub fn penetrates_cloud(v: Vec3<f64>, scene: &SceneIndex<f64>) -> bool {
    let nn = scene.k_nearest(v, PLANE_NEIGHBOURS);
    if nn.len() < 3 || nn[0].1 > PLANE_REACH * PLANE_REACH {
        return false;
    }
    let pts: Vec<Vec3<f64>> = nn.iter().map(|(i, _)| scene.points()[*i]).collect();
    let (normal, c) = fit_plane(&pts);
    normal.dot(v - c) < -PLANE_EPS
}

pub fn non_penetration_pct_cloud(surfaces: &[Vec<Vec3<f64>>], scene: &SceneIndex<f64>) -> f64 {
    frame_mean_pct(surfaces, |v| penetrates_cloud(v, scene))
}

/// Mean norm of second differences of joint positions, millimetres per
/// frame squared. Zero for fewer than three frames.
pub fn e_smooth(joints: &[Vec<Vec3<f64>>]) -> Result<f64> {
    if joints.len() < 3 {
        return Ok(0.0);
    }
    let k = joints[0].len();
    if joints.iter().any(|f| f.len() != k) {
        return Err(Error::invalid("joint frames differ in length"));
    }
    let mut sum = 0.0;
    for w in joints.windows(3) {
        for j in 0..k {
            let acc = w[2][j] - w[1][j] * 2.0 + w[0][j];
            sum += acc.norm();
        }
    }
    Ok(1000.0 * sum / ((joints.len() - 2) * k) as f64)
}

/// Mean displacement, millimetres, of vertices labelled in contact in two
/// consecutive frames. Zero when no vertex qualifies.
pub fn sliding_error(surfaces: &[Vec<Vec3<f64>>], contacts: &[ContactLabels<f64>]) -> Result<f64> {
    check_frames(surfaces, contacts)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in 1..surfaces.len() {
        let (a, b) = (&contacts[t - 1].body, &contacts[t].body);
        for i in 0..surfaces[t].len().min(a.len()).min(b.len()) {
            if a[i] > 0.5 && b[i] > 0.5 {
                sum += surfaces[t][i].distance_squared(surfaces[t - 1][i]).sqrt();
                n += 1;
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { 1000.0 * sum / n as f64 })
}

/// Joint and surface trajectories of states under per-frame scales.
pub fn posed_trajectories(
    states: &[KinematicState<f64>],
    scales: &[f64],
    template: &SkeletonTemplate<f64>,
) -> (Vec<Vec<Vec3<f64>>>, Vec<Vec<Vec3<f64>>>) {
    states
        .iter()
        .zip(scales)
        .map(|(s, h)| {
            let p = pose_body(s, BodyScale(*h), template);
            let surf = p.surface(template);
            (p.joints, surf)
        })
        .unzip()
}

/// Where the penetration test gets its geometry from.
#[derive(Debug, Clone, Copy)]
pub enum Penetration<'a> {
    Solids(&'a [Solid]),
    Cloud(&'a SceneIndex<f64>),
}

/// Every metric of a predicted trajectory.
pub fn evaluate(
    pred: &[KinematicState<f64>],
    pred_scales: &[f64],
    gt: &[KinematicState<f64>],
    gt_scale: BodyScale<f64>,
    gt_contacts: &[ContactLabels<f64>],
    penetration: Penetration<'_>,
    template: &SkeletonTemplate<f64>,
) -> Result<MetricReport> {
    check_frames(pred, gt)?;
    let (pj, ps) = posed_trajectories(pred, pred_scales, template);
    let (gj, gs) = posed_trajectories(gt, &vec![gt_scale.get(); gt.len()], template);
    let (trans, bone) = translation_and_bone_errors(pred, pred_scales, gt, gt_scale, template)?;
    let r = MetricReport {
        mpjpe_mm: mpjpe(&pj, &gj)?,
        mpjpe_pa_mm: mpjpe(&align_frames(&pj, &gj), &gj)?,
        pck_pct: pck(&pj, &gj, PCK_THRESHOLD_MM)?,
        pve_mm: pve(&ps, &gs)?,
        pve_pa_mm: pve(&align_frames(&ps, &gs), &gs)?,
        trans_err_m: trans,
        bone_len_err_m: bone,
        non_penet_pct: match penetration {
            Penetration::Solids(s) => non_penetration_pct_solids(&ps, s),
            Penetration::Cloud(c) => non_penetration_pct_cloud(&ps, c),
        },
        e_smooth: e_smooth(&pj)?,
        sliding_err_mm: sliding_error(&ps, gt_contacts)?,
    };
    if r.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "metric report".into(),
        });
    }
    Ok(r)
}
