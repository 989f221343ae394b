//! Seeded benchmark runs over scenarios and pipeline variants.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{CameraIntrinsics, KinematicState, SkeletonTemplate};
use crate::manifold::{fit_manifold, generate_pose_corpus, MotionParams, PoseManifold, DEFAULT_LATENT_DIM};
use crate::pipeline::{derive_seed, run_pipeline, PipelineInputs, Sampler, StageConfig, TrajectoryResult};

use super::metrics::{evaluate, MetricReport, Penetration};
use super::scenario::{initial_estimate, make_scenario, InitConfig, Scenario, ScenarioConfig, ScenarioKind};

/// Corpus size and seed of the manifold used by the benchmarks.
pub const BENCH_CORPUS_SIZE: usize = 4000;
pub const BENCH_CORPUS_SEED: u64 = 0x5eed_c0de;

/// Pose manifold fitted to a fixed procedural corpus, independent of every
/// scenario seed.
pub fn bench_manifold(template: &SkeletonTemplate<f64>) -> Result<PoseManifold<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(BENCH_CORPUS_SEED);
    let corpus = generate_pose_corpus(template, BENCH_CORPUS_SIZE, &MotionParams::default(), &mut rng);
    fit_manifold(&corpus, DEFAULT_LATENT_DIM)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// The configured pipeline only.
    Full,
    SamplingCount,
    Iterations,
    NaiveVsManifold,
    NoS,
    NoR,
    NoSr,
    NoLcon,
    NoLsli,
    ConfidenceMerge,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Full,
        Suite::SamplingCount,
        Suite::Iterations,
        Suite::NaiveVsManifold,
        Suite::NoS,
        Suite::NoR,
        Suite::NoSr,
        Suite::NoLcon,
        Suite::NoLsli,
        Suite::ConfidenceMerge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Full => "full",
            Suite::SamplingCount => "sampling_count",
            Suite::Iterations => "iterations",
            Suite::NaiveVsManifold => "naive_vs_manifold",
            Suite::NoS => "no_s",
            Suite::NoR => "no_r",
            Suite::NoSr => "no_sr",
            Suite::NoLcon => "no_lcon",
            Suite::NoLsli => "no_lsli",
            Suite::ConfidenceMerge => "confidence_merge",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ablation suite '{s}'")))
    }
}

/// One pipeline configuration of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub stage: StageConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub kinds: Vec<ScenarioKind>,
    pub seeds: Vec<u64>,
    pub scenario: ScenarioConfig,
    pub init: InitConfig,
    pub stage: StageConfig,
    /// Sample counts of the sampling suites.
    pub sample_counts: Vec<usize>,
    /// Resampling rounds of the iteration suite.
    pub iteration_counts: Vec<usize>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            kinds: ScenarioKind::ALL.to_vec(),
            seeds: (0..3).collect(),
            scenario: ScenarioConfig::default(),
            init: InitConfig::default(),
            stage: StageConfig::default(),
            sample_counts: vec![50, 200, 1000, 2000],
            iteration_counts: vec![0, 1, 2],
        }
    }
}

/// Variants of `suite` derived from the base configuration.
pub fn suite_variants(suite: Suite, spec: &BenchSpec) -> Vec<Variant> {
    let base = spec.stage;
    let v = |name: String, stage: StageConfig| Variant { name, stage };
    match suite {
        Suite::Full => vec![v("full".into(), base)],
        Suite::SamplingCount => spec
            .sample_counts
            .iter()
            .map(|&n| v(format!("manifold_n{n}"), StageConfig { n_sam: n.max(base.elites), ..base }))
            .collect(),
        Suite::NaiveVsManifold => [Sampler::Manifold, Sampler::Naive]
            .into_iter()
            .flat_map(|s| {
                spec.sample_counts.iter().map(move |&n| {
                    let name = match s {
                        Sampler::Manifold => format!("manifold_n{n}"),
                        Sampler::Naive => format!("naive_n{n}"),
                    };
                    v(name, StageConfig { n_sam: n.max(base.elites), sampler: s, ..base })
                })
            })
            .collect(),
        Suite::Iterations => spec
            .iteration_counts
            .iter()
            .map(|&i| v(format!("iterations_{i}"), StageConfig { iterations: i, ..base }))
            .collect(),
        Suite::NoS => vec![v("full".into(), base), v("no_s".into(), StageConfig { sampling: false, ..base })],
        Suite::NoR => vec![v("full".into(), base), v("no_r".into(), StageConfig { refine: false, ..base })],
        Suite::NoSr => vec![
            v("full".into(), base),
            v("no_sr".into(), StageConfig { sampling: false, refine: false, ..base }),
        ],
        Suite::NoLcon => {
            let mut w = base.weights;
            w.lambda_con = 0.0;
            vec![v("full".into(), base), v("no_lcon".into(), StageConfig { weights: w, ..base })]
        }
        Suite::NoLsli => {
            let mut w = base.weights;
            w.lambda_sli = 0.0;
            vec![v("full".into(), base), v("no_lsli".into(), StageConfig { weights: w, ..base })]
        }
        Suite::ConfidenceMerge => vec![
            v("merge".into(), StageConfig { confidence_merge: true, ..base }),
            v("no_merge".into(), StageConfig { confidence_merge: false, ..base }),
        ],
    }
}

/// Metrics of one run at each stage output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub stage1: MetricReport,
    pub stage2: MetricReport,
    pub final_: MetricReport,
    pub flagged_frames: usize,
    /// Frames of the sampled (unsmoothed) output with more than `gamma`
    /// scene points inside the body that were not flagged.
    pub unflagged_violations: usize,
}

/// Ground-truth scenario plus the initial estimate for a `(kind, seed)` pair.
pub fn prepare(
    kind: ScenarioKind,
    seed: u64,
    spec: &BenchSpec,
    template: &SkeletonTemplate<f64>,
    cam: &CameraIntrinsics<f64>,
) -> Result<(Scenario, Vec<KinematicState<f64>>, f64)> {
    let sc = make_scenario(kind, &spec.scenario, template, cam, derive_seed(seed, &[kind as u64, 1]))?;
    let (phi0, h0) = initial_estimate(&sc, &spec.init, template, derive_seed(seed, &[kind as u64, 2]))?;
    Ok((sc, phi0, h0.get()))
}

/// Runs the pipeline on a prepared scenario.
pub fn run_on(
    sc: &Scenario,
    phi0: &[KinematicState<f64>],
    h0: f64,
    stage: &StageConfig,
    template: &SkeletonTemplate<f64>,
    manifold: &PoseManifold<f64>,
    seed: u64,
) -> Result<TrajectoryResult<f64>> {
    let scene = sc.scene_index()?;
    let inputs = PipelineInputs {
        template,
        cam: &sc.cam,
        scene: &scene,
        manifold: Some(manifold),
        obs: &sc.obs,
        contacts: &sc.gt_contacts,
        phi0,
        h0: crate::kinematics::BodyScale(h0),
    };
    run_pipeline(&inputs, stage, derive_seed(seed, &[sc.kind as u64, 3]))
}

/// Metrics of a result's three stage outputs against the scenario.
pub fn score(sc: &Scenario, r: &TrajectoryResult<f64>, gamma: usize, template: &SkeletonTemplate<f64>) -> Result<RunRecord> {
    let eval = |states: &[KinematicState<f64>]| {
        evaluate(
            states,
            &r.scales,
            &sc.gt_states,
            sc.gt_scale,
            &sc.gt_contacts,
            Penetration::Solids(&sc.solids),
            template,
        )
    };
    let unflagged_violations = r
        .diagnostics
        .windows
        .iter()
        .flat_map(|w| &w.stage2)
        .filter(|d| !d.flagged && d.collisions > gamma)
        .count();
    Ok(RunRecord {
        variant: String::new(),
        scenario: sc.kind,
        seed: sc.seed,
        stage1: eval(&r.phi_opt)?,
        stage2: eval(&r.phi_sam_hat)?,
        final_: eval(&r.phi_ref)?,
        flagged_frames: r.diagnostics.flagged_frames.len(),
        unflagged_violations,
    })
}

/// Runs every variant of `suite` on every `(kind, seed)`, in parallel over
/// scenarios. Records are ordered by scenario, seed, then variant.
pub fn run_ablation(
    suite: Suite,
    spec: &BenchSpec,
    template: &SkeletonTemplate<f64>,
    cam: &CameraIntrinsics<f64>,
    manifold: &PoseManifold<f64>,
) -> Result<Vec<RunRecord>> {
    let variants = suite_variants(suite, spec);
    for v in &variants {
        v.stage.validate()?;
    }
    let jobs: Vec<(ScenarioKind, u64)> = spec
        .kinds
        .iter()
        .flat_map(|k| spec.seeds.iter().map(move |s| (*k, *s)))
        .collect();
    let per_job: Vec<Result<Vec<RunRecord>>> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let (sc, phi0, h0) = prepare(kind, seed, spec, template, cam)?;
            let mut sc = sc;
            sc.seed = seed;
            variants
                .iter()
                .map(|v| {
                    let r = run_on(&sc, &phi0, h0, &v.stage, template, manifold, seed)?;
                    let mut rec = score(&sc, &r, v.stage.gamma, template)?;
                    rec.variant = v.name.clone();
                    Ok(rec)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_job {
        out.extend(r?);
    }
    Ok(out)
}

/// CSV with one row per variant, scenario, seed and stage output.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut s = String::from("variant,scenario,seed,stage,flagged_frames");
    for f in MetricReport::FIELDS {
        s.push(',');
        s.push_str(f);
    }
    s.push('\n');
    for r in records {
        for (stage, m) in [("stage1", &r.stage1), ("stage2", &r.stage2), ("final", &r.final_)] {
            let _ = write!(s, "{},{},{},{},{}", r.variant, r.scenario.name(), r.seed, stage, r.flagged_frames);
            for v in m.values() {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub stage: String,
    pub runs: usize,
    pub mean: MetricReport,
    pub std: MetricReport,
}

/// Mean and population standard deviation per variant and stage, variants in
/// first-appearance order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.variant.as_str()) {
            names.push(&r.variant);
        }
    }
    let mut out = Vec::new();
    for name in names {
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.variant == name).collect();
        for stage in ["stage1", "stage2", "final"] {
            let vals: Vec<[f64; 10]> = rs
                .iter()
                .map(|r| match stage {
                    "stage1" => r.stage1.values(),
                    "stage2" => r.stage2.values(),
                    _ => r.final_.values(),
                })
                .collect();
            let n = vals.len() as f64;
            let mut mean = [0.0; 10];
            let mut std = [0.0; 10];
            for k in 0..10 {
                mean[k] = vals.iter().map(|v| v[k]).sum::<f64>() / n;
                std[k] = (vals.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
            }
            out.push(SummaryRow {
                variant: name.to_string(),
                stage: stage.into(),
                runs: vals.len(),
                mean: MetricReport::from_values(mean),
                std: MetricReport::from_values(std),
            });
        }
    }
    out
}
