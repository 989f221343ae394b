use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{check_version, read_json, write_json};
use crate::real::Real;

pub const LABELS_VERSION: &str = "1.0";

/// Contact probabilities for one frame: one per body surface point and one
/// per scene point.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactLabels<T> {
    pub body: Vec<T>,
    pub env: Vec<T>,
}

impl<T: Real> ContactLabels<T> {
    pub fn new(body: Vec<T>, env: Vec<T>) -> Result<Self> {
        for (what, v) in [("body", &body), ("env", &env)] {
            if let Some(i) = v.iter().position(|p| !(*p >= T::zero() && *p <= T::one())) {
                return Err(Error::invalid(format!("{what} contact label {i} = {} outside [0, 1]", v[i])));
            }
        }
        Ok(ContactLabels { body, env })
    }

    pub fn zeros(n_body: usize, n_env: usize) -> Self {
        ContactLabels {
            body: vec![T::zero(); n_body],
            env: vec![T::zero(); n_env],
        }
    }

    pub fn from_binary(body: &[bool], env: &[bool]) -> Self {
        let f = |b: &bool| if *b { T::one() } else { T::zero() };
        ContactLabels {
            body: body.iter().map(f).collect(),
            env: env.iter().map(f).collect(),
        }
    }

    /// Checks lengths against the body template and scene size.
    pub fn check_sizes(&self, n_body: usize, n_env: usize) -> Result<()> {
        if self.body.len() != n_body || self.env.len() != n_env {
            return Err(Error::invalid(format!(
                "contact labels sized ({}, {}), expected ({n_body}, {n_env})",
                self.body.len(),
                self.env.len()
            )));
        }
        Ok(())
    }
}

/// Index sets of body and scene points whose probability exceeds the
/// threshold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveContacts {
    pub body_idx: Vec<usize>,
    pub env_idx: Vec<usize>,
}

impl EffectiveContacts {
    pub fn is_empty(&self) -> bool {
        self.body_idx.is_empty() || self.env_idx.is_empty()
    }
}

pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.5;

/// Indices with probability strictly above `threshold`, ascending.
pub fn effective_contacts<T: Real>(labels: &ContactLabels<T>, threshold: T) -> EffectiveContacts {
    let pick = |v: &[T]| v.iter().enumerate().filter(|(_, p)| **p > threshold).map(|(i, _)| i).collect();
    EffectiveContacts {
        body_idx: pick(&labels.body),
        env_idx: pick(&labels.env),
    }
}

/// Flips each label independently: positives (`> 0.5`) with probability
/// `rate_fn`, negatives with `rate_fp`. A flip maps `p` to `1 - p`.
///
/// One uniform draw is consumed per element, body first, so the flip mask
/// depends only on the seed and the label values.
pub fn corrupt_labels<T: Real>(labels: &ContactLabels<T>, rate_fp: f64, rate_fn: f64, seed: u64) -> Result<ContactLabels<T>> {
    for r in [rate_fp, rate_fn] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("flip rate {r} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = T::lit(0.5);
    let mut flip = |v: &[T]| -> Vec<T> {
        v.iter()
            .map(|&p| {
                let u: f64 = rng.random();
                let rate = if p > half { rate_fn } else { rate_fp };
                if u < rate {
                    T::one() - p
                } else {
                    p
                }
            })
            .collect()
    };
    let body = flip(&labels.body);
    let env = flip(&labels.env);
    Ok(ContactLabels { body, env })
}

/// Binary classification summary of predicted against reference labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

/// Precision, recall and accuracy after thresholding both sides at
/// `threshold` (strict). Precision and recall are 1 when undefined.
pub fn label_metrics<T: Real>(pred: &[T], truth: &[T], threshold: T) -> Result<LabelMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "label length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        match (*p > threshold, *t > threshold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(LabelMetrics {
        tp,
        fp,
        fn_,
        tn,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        accuracy: ratio(tp + tn, pred.len()),
    })
}

/// On-disk label sequence. Scene labels are stored sparsely: the indices of
/// non-zero entries and their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LabelSequenceFile<T> {
    pub version: String,
    pub num_body_points: usize,
    pub num_env_points: usize,
    pub frames: Vec<FrameLabelRecord<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FrameLabelRecord<T> {
    pub body: Vec<T>,
    pub env_idx: Vec<usize>,
    pub env_prob: Vec<T>,
}

impl<T: Real> LabelSequenceFile<T> {
    pub fn from_labels(frames: &[ContactLabels<T>]) -> Result<Self> {
        let (nb, ne) = frames.first().map(|f| (f.body.len(), f.env.len())).unwrap_or((0, 0));
        let mut out = Vec::with_capacity(frames.len());
        for f in frames {
            f.check_sizes(nb, ne)?;
            let (env_idx, env_prob) = f
                .env
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > T::zero())
                .map(|(i, p)| (i, *p))
                .unzip();
            out.push(FrameLabelRecord {
                body: f.body.clone(),
                env_idx,
                env_prob,
            });
        }
        Ok(LabelSequenceFile {
            version: LABELS_VERSION.into(),
            num_body_points: nb,
            num_env_points: ne,
            frames: out,
        })
    }

    pub fn to_labels(&self) -> Result<Vec<ContactLabels<T>>> {
        check_version("contact labels", &self.version, 1)?;
        self.frames
            .iter()
            .enumerate()
            .map(|(t, f)| {
                if f.body.len() != self.num_body_points || f.env_idx.len() != f.env_prob.len() {
                    return Err(Error::invalid(format!("frame {t}: inconsistent label arrays")));
                }
                let mut env = vec![T::zero(); self.num_env_points];
                for (&i, &p) in f.env_idx.iter().zip(&f.env_prob) {
                    *env.get_mut(i)
                        .ok_or_else(|| Error::invalid(format!("frame {t}: scene index {i} out of range")))? = p;
                }
                ContactLabels::new(f.body.clone(), env)
            })
            .collect()
    }
}

pub fn save_labels<T: Real>(path: &Path, frames: &[ContactLabels<T>]) -> Result<()> {
    write_json(path, &LabelSequenceFile::from_labels(frames)?)
}

pub fn load_labels<T: Real>(path: &Path) -> Result<Vec<ContactLabels<T>>> {
    read_json::<LabelSequenceFile<T>>(path)?.to_labels()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(ContactLabels::new(vec![1.2_f64], vec![]).is_err());
        assert!(ContactLabels::new(vec![0.2_f64], vec![f64::NAN]).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let l = ContactLabels::new(vec![0.4, 0.5, 0.51, 1.0], vec![0.4, 0.4]).unwrap();
        let e = effective_contacts(&l, 0.5);
        assert_eq!(e.body_idx, vec![2, 3]);
        assert!(e.env_idx.is_empty());
        let all_low = ContactLabels::new(vec![0.4; 5], vec![0.4; 7]).unwrap();
        assert_eq!(effective_contacts(&all_low, 0.5), EffectiveContacts::default());
    }

    #[test]
    fn mixed_labels_match_linear_filter() {
        let body: Vec<f64> = (0..50).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let env: Vec<f64> = (0..80).map(|i| ((i * 53) % 97) as f64 / 96.0).collect();
        let l = ContactLabels::new(body.clone(), env.clone()).unwrap();
        let e = effective_contacts(&l, 0.5);
        let mut want_b = Vec::new();
        for (i, p) in body.iter().enumerate() {
            if *p > 0.5 {
                want_b.push(i);
            }
        }
        let mut want_e = Vec::new();
        for (i, p) in env.iter().enumerate() {
            if *p > 0.5 {
                want_e.push(i);
            }
        }
        assert_eq!(e.body_idx, want_b);
        assert_eq!(e.env_idx, want_e);
    }

    #[test]
    fn corruption_extremes() {
        let l = ContactLabels::<f64>::from_binary(&[true, false, true], &[false; 4]);
        assert_eq!(corrupt_labels(&l, 0.0, 0.0, 3).unwrap(), l);
        let zeros = ContactLabels::<f64>::zeros(6, 9);
        let ones = corrupt_labels(&zeros, 1.0, 0.0, 3).unwrap();
        assert!(ones.body.iter().chain(&ones.env).all(|p| *p == 1.0));
        assert!(corrupt_labels(&l, 1.5, 0.0, 0).is_err());
    }

    #[test]
    fn corruption_reproduces_seeded_mask() {
        let l = ContactLabels::<f64>::zeros(100, 200);
        let a = corrupt_labels(&l, 0.1, 0.1, 42).unwrap();
        assert_eq!(a, corrupt_labels(&l, 0.1, 0.1, 42).unwrap());
        // Oracle: replay the generator.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mask: Vec<bool> = (0..300).map(|_| rng.random::<f64>() < 0.1).collect();
        let got: Vec<bool> = a.body.iter().chain(&a.env).map(|p| *p == 1.0).collect();
        assert_eq!(got, mask);
    }

    #[test]
    fn metrics_counts() {
        let m = label_metrics(&[1.0, 1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0, 1.0], 0.5).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 1));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 0.6).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let frames = vec![
            ContactLabels::new(vec![0.0, 0.9], vec![0.0, 0.7, 0.0]).unwrap(),
            ContactLabels::new(vec![1.0, 0.0], vec![1.0, 0.0, 0.0]).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.json");
        save_labels(&p, &frames).unwrap();
        assert_eq!(load_labels::<f64>(&p).unwrap(), frames);
        let mut file = LabelSequenceFile::from_labels(&frames).unwrap();
        file.version = "2.0".into();
        assert!(matches!(file.to_labels(), Err(Error::UnsupportedVersion { .. })));
    }
}
