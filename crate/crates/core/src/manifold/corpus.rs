//! Procedural pose corpus: smooth sinusoidal joint-angle motion around
//! standing and sitting base poses, clamped to the template's joint limits.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::SkeletonTemplate;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionFamily {
    Standing,
    Sitting,
}

/// Amplitude multipliers for the motion generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    /// Scales torso, head and arm primitives.
    pub upper_amp: f64,
    /// Scales hip, knee and ankle primitives.
    pub lower_amp: f64,
    /// Peak amplitude (rad) of the independent per-DoF oscillations.
    pub detail_amp: f64,
    /// Shortest and longest primitive period, seconds.
    pub period_range: [f64; 2],
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            upper_amp: 1.0,
            lower_amp: 1.0,
            detail_amp: 0.06,
            period_range: [2.0, 6.0],
        }
    }
}

// (joint name, axis, coefficient)
type Direction = &'static [(&'static str, usize, f64)];

const UPPER: &[Direction] = &[
    &[("left_shoulder", 0, 0.5), ("right_shoulder", 0, -0.5)],
    &[("left_shoulder", 2, -0.6), ("left_elbow", 1, 0.5)],
    &[("right_shoulder", 2, 0.6), ("right_elbow", 1, -0.5)],
    &[("left_shoulder", 1, 0.4), ("right_shoulder", 1, -0.4), ("left_elbow", 1, 0.3), ("right_elbow", 1, -0.3)],
    &[("spine1", 0, 0.2), ("spine2", 0, 0.15), ("neck", 0, -0.1)],
    &[("spine1", 1, 0.2), ("spine2", 1, 0.2), ("neck", 1, 0.15)],
    &[("spine1", 2, 0.15), ("spine2", 2, 0.1)],
    &[("neck", 0, 0.3)],
    &[("neck", 1, 0.35)],
    &[("left_collar", 2, -0.2), ("right_collar", 2, 0.2)],
];

const LOWER: &[Direction] = &[
    &[("left_hip", 0, -0.3), ("left_knee", 0, 0.4)],
    &[("right_hip", 0, -0.3), ("right_knee", 0, 0.4)],
    &[("left_hip", 0, -0.2), ("right_hip", 0, -0.2), ("left_knee", 0, 0.35), ("right_knee", 0, 0.35), ("left_ankle", 0, -0.15), ("right_ankle", 0, -0.15)],
    &[("left_hip", 2, 0.1), ("right_hip", 2, 0.1)],
    &[("left_ankle", 0, 0.2), ("right_ankle", 0, 0.2)],
];

fn dof<T: Real>(template: &SkeletonTemplate<T>, joint: &str, axis: usize) -> usize {
    3 * template
        .joint_index(joint)
        .unwrap_or_else(|| panic!("template lacks joint {joint}"))
        + axis
}

/// Base pose with randomised posture details.
fn base_pose<T: Real, R: Rng>(template: &SkeletonTemplate<T>, family: MotionFamily, rng: &mut R) -> Vec<f64> {
    let mut th = vec![0.0; 3 * template.num_joints()];
    let mut set = |j: &str, a: usize, v: f64| th[dof(template, j, a)] = v;
    let arm = rng.random_range(0.9..1.4);
    set("left_shoulder", 2, arm + rng.random_range(-0.1..0.1));
    set("right_shoulder", 2, -arm + rng.random_range(-0.1..0.1));
    match family {
        MotionFamily::Standing => {
            set("left_elbow", 1, rng.random_range(0.1..0.6));
            set("right_elbow", 1, -rng.random_range(0.1..0.6));
            let hip = rng.random_range(-0.1..0.05);
            set("left_hip", 0, hip);
            set("right_hip", 0, hip);
            let knee = rng.random_range(0.0..0.15);
            set("left_knee", 0, knee);
            set("right_knee", 0, knee);
            set("left_ankle", 0, -0.5 * (hip + knee));
            set("right_ankle", 0, -0.5 * (hip + knee));
        }
        MotionFamily::Sitting => {
            set("left_elbow", 1, rng.random_range(0.5..1.2));
            set("right_elbow", 1, -rng.random_range(0.5..1.2));
            let hip = -rng.random_range(1.35..1.6);
            let knee = -hip + rng.random_range(-0.1..0.1);
            for side in ["left", "right"] {
                set(&format!("{side}_hip"), 0, hip);
                set(&format!("{side}_knee"), 0, knee);
            }
            set("spine1", 0, rng.random_range(0.0..0.2));
        }
    }
    th
}

struct Wave {
    amp: f64,
    omega: f64,
    phase: f64,
}

impl Wave {
    fn draw<R: Rng>(rng: &mut R, peak: f64, periods: [f64; 2]) -> Self {
        let period = rng.random_range(periods[0]..=periods[1]);
        Wave {
            amp: rng.random_range(0.0..=1.0) * peak,
            omega: TAU / period,
            phase: rng.random_range(0.0..TAU),
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.amp * (self.omega * t + self.phase).sin()
    }
}

/// One smooth joint-angle sequence of `frames` poses sampled at `fps`.
pub fn generate_motion<T: Real, R: Rng>(
    template: &SkeletonTemplate<T>,
    family: MotionFamily,
    frames: usize,
    fps: f64,
    params: &MotionParams,
    rng: &mut R,
) -> Vec<Vec<T>> {
    let k = template.num_joints();
    let base = base_pose(template, family, rng);
    let mut prims: Vec<(Direction, Wave)> = Vec::new();
    for dir in UPPER {
        prims.push((dir, Wave::draw(rng, params.upper_amp, params.period_range)));
    }
    for dir in LOWER {
        prims.push((dir, Wave::draw(rng, params.lower_amp, params.period_range)));
    }
    let limits: Vec<[[f64; 2]; 3]> = (0..k)
        .map(|j| template.limits(j).map(|a| a.map(|v| v.to_f64_lossy())))
        .collect();
    let free: Vec<usize> = (0..3 * k)
        .filter(|&i| {
            let l = limits[i / 3][i % 3];
            l[1] > l[0]
        })
        .collect();
    let detail: Vec<(usize, Wave)> = free
        .iter()
        .map(|&i| (i, Wave::draw(rng, params.detail_amp, [1.0, 4.0])))
        .collect();

    (0..frames)
        .map(|f| {
            let t = f as f64 / fps;
            let mut th = base.clone();
            for (dir, w) in &prims {
                let s = w.at(t);
                for &(j, a, c) in dir.iter() {
                    th[dof(template, j, a)] += c * s;
                }
            }
            for (i, w) in &detail {
                th[*i] += w.at(t);
            }
            th.iter()
                .enumerate()
                .map(|(i, v)| {
                    let l = limits[i / 3][i % 3];
                    T::lit(v.clamp(l[0], l[1]))
                })
                .collect()
        })
        .collect()
}

/// `n` corpus poses from 100-frame sequences at 10 fps, alternating
/// standing and sitting families.
pub fn generate_pose_corpus<T: Real, R: Rng>(
    template: &SkeletonTemplate<T>,
    n: usize,
    params: &MotionParams,
    rng: &mut R,
) -> Vec<Vec<T>> {
    const SEQ: usize = 100;
    let mut out = Vec::with_capacity(n);
    let mut s = 0;
    while out.len() < n {
        let family = if s % 2 == 0 {
            MotionFamily::Standing
        } else {
            MotionFamily::Sitting
        };
        let take = SEQ.min(n - out.len());
        out.extend(generate_motion(template, family, SEQ, 10.0, params, rng).into_iter().take(take));
        s += 1;
    }
    out
}
