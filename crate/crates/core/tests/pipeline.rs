use scenemocap::bench::*;
use scenemocap::kinematics::*;
use scenemocap::manifold::PoseManifold;
use scenemocap::objective::*;
use scenemocap::pipeline::*;

struct Fixture {
    template: SkeletonTemplate<f64>,
    manifold: PoseManifold<f64>,
    sc: Scenario,
    phi0: Vec<KinematicState<f64>>,
    h0: f64,
}

fn fixture(kind: ScenarioKind, frames: usize) -> Fixture {
    let template = SkeletonTemplate::default_humanoid();
    let manifold = bench_manifold(&template).unwrap();
    let mut spec = BenchSpec::default();
    spec.scenario.frames = frames;
    let (sc, phi0, h0) = prepare(kind, 4, &spec, &template, &CameraIntrinsics::default_vga()).unwrap();
    Fixture {
        template,
        manifold,
        sc,
        phi0,
        h0,
    }
}

fn quick() -> StageConfig {
    StageConfig {
        n_sam: 120,
        ..StageConfig::default()
    }
}

fn run(f: &Fixture, cfg: &StageConfig, seed: u64) -> scenemocap::Result<TrajectoryResult<f64>> {
    let scene = f.sc.scene_index()?;
    let inputs = PipelineInputs {
        template: &f.template,
        cam: &f.sc.cam,
        scene: &scene,
        manifold: Some(&f.manifold),
        obs: &f.sc.obs,
        contacts: &f.sc.gt_contacts,
        phi0: &f.phi0,
        h0: BodyScale(f.h0),
    };
    run_pipeline(&inputs, cfg, seed)
}

#[test]
fn seeded_runs_repeat() {
    let f = fixture(ScenarioKind::Floor, 6);
    let a = run(&f, &quick(), 1).unwrap();
    let b = run(&f, &quick(), 1).unwrap();
    let c = run(&f, &quick(), 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.phi_sam, c.phi_sam);
    // Stage I has no randomness.
    assert_eq!(a.phi_opt, c.phi_opt);
}

#[test]
fn windows_partition_the_sequence() {
    let f = fixture(ScenarioKind::Seat, 7);
    let r = run(&f, &quick(), 0).unwrap();
    assert_eq!(r.len(), 7);
    let spans: Vec<(usize, usize)> = r.diagnostics.windows.iter().map(|w| (w.start, w.len)).collect();
    assert_eq!(spans, vec![(0, 5), (5, 2)]);
    assert!(r.scales[..5].iter().all(|h| *h == r.scales[0]));
    assert!(r.scales[5..].iter().all(|h| *h == r.scales[5]));
    for h in &r.scales {
        assert!((0.5..=2.0).contains(h));
    }
}

#[test]
fn unflagged_samples_respect_the_collision_budget() {
    let f = fixture(ScenarioKind::Wall, 6);
    let cfg = quick();
    let r = run(&f, &cfg, 3).unwrap();
    let scene = f.sc.scene_index().unwrap();
    for (t, (s, h)) in r.phi_sam.iter().zip(&r.scales).enumerate() {
        if !r.diagnostics.flagged_frames.contains(&t) {
            assert!(inside_body_count(&scene, s, BodyScale(*h), &f.template).unwrap() <= cfg.gamma, "frame {t}");
        }
    }
}

#[test]
fn stages_do_not_increase_their_objectives() {
    let f = fixture(ScenarioKind::Combo, 10);
    let r = run(&f, &quick(), 5).unwrap();
    for w in &r.diagnostics.windows {
        assert!(w.loss_opt_final.total <= w.loss_opt_initial.total);
        let (a, b) = (w.loss_sam_initial.unwrap(), w.loss_sam_final.unwrap());
        assert!(b.total <= a.total + 1e-12, "refinement {} -> {}", a.total, b.total);
        for d in &w.stage2 {
            assert!(d.best_cost.is_finite());
            assert!(d.survivors <= d.evaluated);
        }
    }
}

#[test]
fn smoothing_is_applied_per_window() {
    let f = fixture(ScenarioKind::Floor, 8);
    let cfg = quick();
    let r = run(&f, &cfg, 0).unwrap();
    for w in &r.diagnostics.windows {
        let span = w.start..w.start + w.len;
        let want = gaussian_smooth_trajectory(&r.phi_sam[span.clone()], cfg.smoothing_sigma_frames);
        assert_eq!(want, r.phi_sam_hat[span]);
    }
}

#[test]
fn disabled_stages_pass_states_through() {
    let f = fixture(ScenarioKind::Seat, 5);
    let r = run(
        &f,
        &StageConfig {
            sampling: false,
            refine: false,
            ..quick()
        },
        0,
    )
    .unwrap();
    assert_eq!(r.phi_sam, r.phi_opt);
    assert_eq!(r.phi_sam_hat, r.phi_opt);
    assert_eq!(r.phi_ref, r.phi_opt);
    assert!(r.diagnostics.windows[0].stage3.is_none());
}

#[test]
fn refinement_leaves_a_stationary_point() {
    let f = fixture(ScenarioKind::Floor, 5);
    let cfg = quick();
    let r = run(&f, &cfg, 0).unwrap();
    let scene = f.sc.scene_index().unwrap();
    let contacts: Vec<FrameContacts<f64>> =
        f.sc.gt_contacts.iter().map(|c| FrameContacts::from_labels(c, &scene, cfg.contact_threshold).unwrap()).collect();
    let win = WindowInputs {
        template: &f.template,
        cam: &f.sc.cam,
        obs: &f.sc.obs,
        contacts: &contacts,
        z_min: cfg.z_min,
    };
    let scale = BodyScale(r.scales[0]);
    let (_, d1, before, after) = stage3_refine(&r.phi_sam_hat, scale, &win, &cfg, None).unwrap();
    assert!(d1.final_loss <= d1.initial_loss);
    assert!(after.total <= before.total);
    // With only the data prior active, the anchor itself is the minimiser.
    let anchored = StageConfig {
        weights: LossWeights {
            lambda_2d: 0.0,
            lambda_smooth: 0.0,
            lambda_con: 0.0,
            lambda_sli: 0.0,
            lambda_data: 0.0,
        },
        ..cfg
    };
    let (out, d2, _, _) = stage3_refine(&r.phi_sam_hat, scale, &win, &anchored, None).unwrap();
    assert!(d2.initial_loss.abs() < 1e-12);
    let moved = out.iter().zip(&r.phi_sam_hat).map(|(a, b)| a.distance_squared(b).sqrt()).fold(0.0, f64::max);
    assert!(moved < 1e-9, "moved {moved}");
}

#[test]
fn results_round_trip() {
    let f = fixture(ScenarioKind::Wall, 5);
    let r = run(&f, &quick(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("result.json");
    r.save(&path).unwrap();
    assert_eq!(TrajectoryResult::<f64>::load(&path).unwrap(), r);
}

#[test]
fn invalid_inputs_are_rejected() {
    let f = fixture(ScenarioKind::Floor, 5);
    assert!(run(&f, &StageConfig { window: 0, ..quick() }, 0).is_err());
    assert!(run(&f, &StageConfig { elites: 0, ..quick() }, 0).is_err());
    let scene = f.sc.scene_index().unwrap();
    let inputs = PipelineInputs {
        template: &f.template,
        cam: &f.sc.cam,
        scene: &scene,
        manifold: None,
        obs: &f.sc.obs,
        contacts: &f.sc.gt_contacts,
        phi0: &f.phi0,
        h0: BodyScale(f.h0),
    };
    assert!(run_pipeline(&inputs, &quick(), 0).is_err(), "manifold sampling without a manifold");
    let naive = StageConfig {
        sampler: Sampler::Naive,
        ..quick()
    };
    assert!(run_pipeline(&inputs, &naive, 0).is_ok());
    let short = PipelineInputs {
        obs: &f.sc.obs[..4],
        ..inputs
    };
    assert!(run_pipeline(&short, &naive, 0).is_err());
}
