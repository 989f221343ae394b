//! Linear latent pose manifold (PCA), the confidence-merged latent sampler
//! and the root and naive joint-space samplers.

mod corpus;
mod pca;

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::{check_version, read_json, write_json};
use crate::kinematics::KinematicState;
use crate::real::Real;

pub use corpus::{generate_motion, generate_pose_corpus, MotionFamily, MotionParams};
pub use pca::{mean_and_covariance, symmetric_eigen};

pub const MANIFOLD_VERSION: &str = "1.0";
pub const DEFAULT_LATENT_DIM: usize = 16;
pub const DEFAULT_LATENT_SIGMA: f64 = 0.1;
/// Half-width of the per-axis root translation offset at `psi = 1`, metres.
pub const ROOT_TRANSLATION_RANGE: f64 = 0.03;
/// Half-width of the per-axis root orientation offset at `psi = 1`, radians.
pub const ROOT_ORIENTATION_RANGE: f64 = 0.01;
/// Half-width of the per-DoF naive joint offset at `psi = 1`, radians.
pub const NAIVE_POSE_RANGE: f64 = 0.26;

/// `theta ~ mean + basis * (scales ∘ z)`, with orthonormal basis columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PoseManifold<T> {
    pub version: String,
    pub mean: Vec<T>,
    /// `d` columns of length `3K`.
    pub basis: Vec<Vec<T>>,
    pub scales: Vec<T>,
}

/// Eigenvalues below this fraction of the larger of the top eigenvalue and
/// the mean squared pose entry count as zero rank.
const RANK_TOL: f64 = 1e-10;

/// Principal-component fit of a pose corpus: mean, top-`d` covariance
/// eigenvectors and the standard deviation along each (population
/// convention).
pub fn fit_manifold<T: Real>(corpus: &[Vec<T>], d: usize) -> Result<PoseManifold<T>> {
    if d == 0 {
        return Err(Error::invalid("latent dimension must be positive"));
    }
    if corpus.len() <= d {
        return Err(Error::invalid(format!(
            "corpus of {} poses cannot support {d} latent dimensions",
            corpus.len()
        )));
    }
    let n = corpus[0].len();
    if corpus.iter().any(|p| p.len() != n) {
        return Err(Error::invalid("corpus poses differ in length"));
    }
    if d > n {
        return Err(Error::DegenerateCorpus { rank: n, requested: d });
    }
    let rows: Vec<Vec<f64>> = corpus
        .iter()
        .map(|p| p.iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "pose corpus".into(),
        });
    }
    let (mean, cov) = mean_and_covariance(&rows);
    let (vals, vecs) = symmetric_eigen(&cov, n);
    let magnitude = mean.iter().map(|m| m * m).sum::<f64>() / n as f64;
    let floor = RANK_TOL * vals[0].max(magnitude).max(f64::MIN_POSITIVE);
    let rank = vals.iter().filter(|&&v| v > floor).count();
    if rank < d {
        return Err(Error::DegenerateCorpus { rank, requested: d });
    }
    Ok(PoseManifold {
        version: MANIFOLD_VERSION.into(),
        mean: mean.into_iter().map(T::lit).collect(),
        basis: vecs[..d].iter().map(|c| c.iter().map(|v| T::lit(*v)).collect()).collect(),
        scales: vals[..d].iter().map(|v| T::lit(v.sqrt())).collect(),
    })
}

impl<T: Real> PoseManifold<T> {
    pub fn latent_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn pose_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn max_scale(&self) -> T {
        self.scales.iter().copied().fold(T::zero(), T::max)
    }

    pub fn validate(&self) -> Result<()> {
        check_version("pose manifold", &self.version, 1)?;
        let n = self.mean.len();
        if self.basis.is_empty() || self.basis.len() != self.scales.len() || self.basis.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("pose manifold arrays have inconsistent sizes"));
        }
        if self.scales.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::invalid("pose manifold scales must be positive"));
        }
        let finite = self.mean.iter().chain(self.basis.iter().flatten()).chain(&self.scales).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                what: "pose manifold".into(),
            });
        }
        Ok(())
    }

    /// `z = basis^T (theta - mean) / scales`.
    pub fn encode(&self, theta: &[T]) -> Vec<T> {
        debug_assert_eq!(theta.len(), self.pose_dim());
        self.basis
            .iter()
            .zip(&self.scales)
            .map(|(col, s)| {
                let mut acc = T::zero();
                for ((b, t), m) in col.iter().zip(theta).zip(&self.mean) {
                    acc += *b * (*t - *m);
                }
                acc / *s
            })
            .collect()
    }

    /// `theta = mean + basis (scales ∘ z)`.
    pub fn decode(&self, z: &[T]) -> Vec<T> {
        debug_assert_eq!(z.len(), self.latent_dim());
        let mut out = self.mean.clone();
        for ((col, s), zi) in self.basis.iter().zip(&self.scales).zip(z) {
            let c = *s * *zi;
            for (o, b) in out.iter_mut().zip(col) {
                *o += *b * c;
            }
        }
        out
    }

    pub fn project(&self, theta: &[T]) -> Vec<T> {
        self.decode(&self.encode(theta))
    }

    /// Latent samples `z ~ N(encode(theta_opt), sigma)` decoded and merged as
    /// `w ∘ theta_opt + (1 - w) ∘ decode(z)`, with `w` per DoF.
    pub fn sample_poses<R: Rng>(&self, theta_opt: &[T], w: &[T], sigma: T, n: usize, rng: &mut R) -> Vec<Vec<T>> {
        assert_eq!(w.len(), theta_opt.len(), "confidence weights must be per DoF");
        let center = self.encode(theta_opt);
        (0..n)
            .map(|_| {
                let z: Vec<T> = center
                    .iter()
                    .map(|c| *c + sigma * T::lit(rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                merge_confident(theta_opt, &self.decode(&z), w)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        m.validate()?;
        Ok(m)
    }
}

/// `w ∘ a + (1 - w) ∘ b`.
pub fn merge_confident<T: Real>(a: &[T], b: &[T], w: &[T]) -> Vec<T> {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), wi)| *wi * *x + (T::one() - *wi) * *y)
        .collect()
}

/// Per-joint confidences repeated over each joint's three DoF.
pub fn expand_joint_confidences<T: Real>(conf: &[T]) -> Vec<T> {
    conf.iter().flat_map(|c| [*c; 3]).collect()
}

/// Root offsets `tau + psi u`, `u ~ U[-0.03, 0.03]^3`, and
/// `phi + psi v`, `v ~ U[-0.01, 0.01]^3`.
pub fn sample_root<T: Real, R: Rng>(tau: Vec3<T>, phi: Vec3<T>, psi: T, n: usize, rng: &mut R) -> Vec<(Vec3<T>, Vec3<T>)> {
    let mut uni = |half: f64| T::lit(rng.random_range(-half..=half));
    (0..n)
        .map(|_| {
            let dt = Vec3::new(uni(ROOT_TRANSLATION_RANGE), uni(ROOT_TRANSLATION_RANGE), uni(ROOT_TRANSLATION_RANGE));
            let dp = Vec3::new(uni(ROOT_ORIENTATION_RANGE), uni(ROOT_ORIENTATION_RANGE), uni(ROOT_ORIENTATION_RANGE));
            (tau + dt * psi, phi + dp * psi)
        })
        .collect()
}

/// Joint-space baseline: `theta + psi u`, `u ~ U[-0.26, 0.26]^{3K}`.
pub fn sample_poses_naive<T: Real, R: Rng>(theta_opt: &[T], psi: T, n: usize, rng: &mut R) -> Vec<Vec<T>> {
    (0..n)
        .map(|_| {
            theta_opt
                .iter()
                .map(|t| *t + psi * T::lit(rng.random_range(-NAIVE_POSE_RANGE..=NAIVE_POSE_RANGE)))
                .collect()
        })
        .collect()
}

/// Candidate states with their costs and in-body scene point counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleBatch<T> {
    pub states: Vec<KinematicState<T>>,
    pub costs: Option<Vec<T>>,
    pub collision_counts: Vec<usize>,
}

impl<T: Real> SampleBatch<T> {
    pub fn new(states: Vec<KinematicState<T>>, costs: Option<Vec<T>>, collision_counts: Vec<usize>) -> Result<Self> {
        let n = states.len();
        if collision_counts.len() != n || costs.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::invalid("sample batch arrays differ in length"));
        }
        Ok(SampleBatch {
            states,
            costs,
            collision_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}
