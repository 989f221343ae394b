use std::path::{Path, PathBuf};

use scenemocap::bench::{
    bench_manifold, initial_estimate, make_scenario, records_to_csv, run_ablation, summarize, BenchSpec, RunRecord,
    Scenario, Suite,
};
use scenemocap::contacts::{load_labels, oracle_labels, save_labels, ContactLabels};
use scenemocap::io::{read_json, write_json};
use scenemocap::kinematics::{pose_body, BodyScale, CameraIntrinsics, SkeletonTemplate};
use scenemocap::manifold::PoseManifold;
use scenemocap::objective::{load_observations, Observation2D};
use scenemocap::pipeline::{derive_seed, run_pipeline, PipelineInputs, Sampler};
use scenemocap::scene::{read_point_cloud, write_point_cloud, SceneIndex};

use crate::config::{resolve, AnnotateConfig, InitialEstimate, MakeScenarioConfig, OptimizeConfig};
use crate::CliError;

fn input<T>(r: scenemocap::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(e.to_string()))
}

fn load_template(path: Option<PathBuf>) -> Result<SkeletonTemplate<f64>, CliError> {
    match path {
        Some(p) => input(SkeletonTemplate::load(&p)).map_err(|e| e.context(&p)),
        None => Ok(SkeletonTemplate::default_humanoid()),
    }
}

fn load_scenario(p: &Path) -> Result<Scenario, CliError> {
    input(Scenario::load(p)).map_err(|e| e.context(p))
}

fn required(p: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.ok_or_else(|| CliError::Input(format!("config is missing '{what}'")))
}

pub fn make_scenario_cmd(cfg: &MakeScenarioConfig, base: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let template = load_template(resolve(base, &cfg.template))?;
    let sc = make_scenario(cfg.kind, &cfg.scenario, &template, &cfg.camera, seed)?;
    let (states, h0) = initial_estimate(&sc, &cfg.init, &template, derive_seed(seed, &[2]))?;
    sc.save(&out.join("scenario.json"))?;
    write_point_cloud(&out.join("scene.ply"), &sc.scene_points)?;
    write_json(
        &out.join("initial.json"),
        &InitialEstimate {
            states,
            scale: h0.get(),
        },
    )?;
    log::info!("wrote {} frames of a {} scenario", sc.len(), cfg.kind.name());
    Ok(())
}

struct OptimizeInputs {
    template: SkeletonTemplate<f64>,
    cam: CameraIntrinsics<f64>,
    scene: SceneIndex<f64>,
    manifold: Option<PoseManifold<f64>>,
    obs: Vec<Observation2D<f64>>,
    contacts: Vec<ContactLabels<f64>>,
    initial: InitialEstimate,
}

fn load_optimize_inputs(cfg: &OptimizeConfig, base: &Path, seed: u64) -> Result<OptimizeInputs, CliError> {
    let template = load_template(resolve(base, &cfg.template))?;
    let initial_file = resolve(base, &cfg.initial)
        .map(|p| input(read_json::<InitialEstimate>(&p)).map_err(|e| e.context(&p)))
        .transpose()?;
    let contacts_file = resolve(base, &cfg.contacts)
        .map(|p| input(load_labels(&p)).map_err(|e| e.context(&p)))
        .transpose()?;
    let (cam, scene, obs, contacts, initial) = match resolve(base, &cfg.scenario) {
        Some(p) => {
            let sc = load_scenario(&p)?;
            let initial = match initial_file {
                Some(i) => i,
                None => {
                    let (states, h) = input(initial_estimate(&sc, &cfg.init, &template, derive_seed(seed, &[2])))?;
                    InitialEstimate { states, scale: h.get() }
                }
            };
            let contacts = contacts_file.unwrap_or_else(|| sc.gt_contacts.clone());
            (sc.cam, input(sc.scene_index())?, sc.obs, contacts, initial)
        }
        None => {
            let scene = required(resolve(base, &cfg.scene), "scene")?;
            let obs = required(resolve(base, &cfg.observations), "observations")?;
            let cloud = input(read_point_cloud(&scene))?;
            let obs = input(load_observations(&obs)).map_err(|e| e.context(&obs))?;
            let contacts = contacts_file.ok_or_else(|| CliError::Input("config is missing 'contacts'".into()))?;
            let initial = initial_file.ok_or_else(|| CliError::Input("config is missing 'initial'".into()))?;
            (cfg.camera, cloud.index(), obs, contacts, initial)
        }
    };
    let needs_manifold = cfg.stage.sampling && cfg.stage.sampler == Sampler::Manifold;
    let manifold = match resolve(base, &cfg.manifold) {
        Some(p) => Some(input(PoseManifold::load(&p)).map_err(|e| e.context(&p))?),
        None if needs_manifold => Some(bench_manifold(&template)?),
        None => None,
    };
    Ok(OptimizeInputs {
        template,
        cam,
        scene,
        manifold,
        obs,
        contacts,
        initial,
    })
}

pub fn optimize_cmd(cfg: &OptimizeConfig, base: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let inp = load_optimize_inputs(cfg, base, seed)?;
    let h0 = input(BodyScale::new(inp.initial.scale))?;
    let inputs = PipelineInputs {
        template: &inp.template,
        cam: &inp.cam,
        scene: &inp.scene,
        manifold: inp.manifold.as_ref(),
        obs: &inp.obs,
        contacts: &inp.contacts,
        phi0: &inp.initial.states,
        h0,
    };
    let result = run_pipeline(&inputs, &cfg.stage, seed)?;
    result.save(&out.join("result.json"))?;
    if cfg.dump_ply {
        for (t, (s, h)) in result.phi_ref.iter().zip(&result.scales).enumerate() {
            let surface = pose_body(s, BodyScale(*h), &inp.template).surface(&inp.template);
            write_point_cloud(&out.join("ply").join(format!("frame_{t:05}.ply")), &surface)?;
        }
    }
    log::info!(
        "optimised {} frames, {} flagged",
        result.len(),
        result.diagnostics.flagged_frames.len()
    );
    Ok(())
}

pub fn annotate_cmd(cfg: &AnnotateConfig, base: &Path, out: &Path) -> Result<(), CliError> {
    let template = load_template(resolve(base, &cfg.template))?;
    let (states, scale, scene, fps) = match resolve(base, &cfg.scenario) {
        Some(p) => {
            let sc = load_scenario(&p)?;
            (sc.gt_states.clone(), sc.gt_scale.get(), input(sc.scene_index())?, sc.fps)
        }
        None => {
            let traj = required(resolve(base, &cfg.trajectory), "trajectory")?;
            let scene = required(resolve(base, &cfg.scene), "scene")?;
            let t: InitialEstimate = input(read_json(&traj)).map_err(|e| e.context(&traj))?;
            (t.states, t.scale, input(read_point_cloud(&scene))?.index(), cfg.fps)
        }
    };
    if !(fps.is_finite() && fps > 0.0) {
        return Err(CliError::Input(format!("fps = {fps} must be positive")));
    }
    let h = input(BodyScale::new(scale))?;
    for s in &states {
        input(s.validate())?;
        if s.num_joints() != template.num_joints() {
            return Err(CliError::Input(format!(
                "trajectory has {} joints, template {}",
                s.num_joints(),
                template.num_joints()
            )));
        }
    }
    let surfaces: Vec<_> = states.iter().map(|s| pose_body(s, h, &template).surface(&template)).collect();
    let labels = oracle_labels(&surfaces, &scene, &cfg.annotation, 1.0 / fps)?;
    save_labels(&out.join("contacts.json"), &labels)?;
    log::info!("annotated {} frames", labels.len());
    Ok(())
}

fn write_suite(out: &Path, name: &str, records: &[RunRecord]) -> Result<(), CliError> {
    scenemocap::io::write_atomic(&out.join(format!("{name}.csv")), records_to_csv(records).as_bytes())?;
    write_json(&out.join(format!("{name}_summary.json")), &summarize(records))?;
    Ok(())
}

struct BenchAssets {
    template: SkeletonTemplate<f64>,
    cam: CameraIntrinsics<f64>,
    manifold: PoseManifold<f64>,
}

fn bench_assets(spec: &BenchSpec) -> Result<BenchAssets, CliError> {
    input(spec.stage.validate())?;
    input(spec.scenario.validate())?;
    let template = SkeletonTemplate::default_humanoid();
    let manifold = bench_manifold(&template)?;
    Ok(BenchAssets {
        template,
        cam: CameraIntrinsics::default_vga(),
        manifold,
    })
}

pub fn bench_cmd(spec: &BenchSpec, out: &Path) -> Result<(), CliError> {
    let a = bench_assets(spec)?;
    let records = run_ablation(Suite::Full, spec, &a.template, &a.cam, &a.manifold)?;
    write_json(&out.join("records.json"), &records)?;
    write_suite(out, "bench", &records)
}

pub fn ablate_cmd(spec: &BenchSpec, suites: &[Suite], out: &Path) -> Result<(), CliError> {
    let a = bench_assets(spec)?;
    for &suite in suites {
        log::info!("running suite {}", suite.name());
        let records = run_ablation(suite, spec, &a.template, &a.cam, &a.manifold)?;
        write_suite(out, suite.name(), &records)?;
    }
    Ok(())
}
