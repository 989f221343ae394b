//! Run configurations: JSON files, dotted `key=value` overrides and path
//! resolution relative to the configuration file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use scenemocap::bench::{InitConfig, ScenarioConfig, ScenarioKind};
use scenemocap::contacts::AnnotationConfig;
use scenemocap::kinematics::{CameraIntrinsics, KinematicState};
use scenemocap::pipeline::StageConfig;

use crate::CliError;

/// Inputs and settings of `optimize`.
///
/// With `scenario` set, the scene, camera, detections and contact labels come
/// from the scenario file; `contacts` and `initial` still override it when
/// given. Without it, `scene`, `observations`, `contacts` and `initial` are
/// all required.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub scenario: Option<PathBuf>,
    /// `.ply` or `.csv` point cloud in camera coordinates.
    pub scene: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub contacts: Option<PathBuf>,
    /// Initial states and body scale, see [`InitialEstimate`].
    pub initial: Option<PathBuf>,
    pub camera: CameraIntrinsics<f64>,
    pub template: Option<PathBuf>,
    /// Fitted pose manifold; the bench manifold is used when absent.
    pub manifold: Option<PathBuf>,
    /// Noise model of the simulated initial estimate for scenarios without
    /// an `initial` file.
    pub init: InitConfig,
    pub stage: StageConfig,
    /// Write the refined body surface of every frame as PLY.
    pub dump_ply: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            scenario: None,
            scene: None,
            observations: None,
            contacts: None,
            initial: None,
            camera: CameraIntrinsics::default_vga(),
            template: None,
            manifold: None,
            init: InitConfig::default(),
            stage: StageConfig::default(),
            dump_ply: false,
        }
    }
}

/// Inputs of `annotate`: either a scenario (its ground-truth motion is
/// annotated) or a trajectory file with a scene cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateConfig {
    pub scenario: Option<PathBuf>,
    /// States and scale in the [`InitialEstimate`] layout.
    pub trajectory: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub fps: f64,
    pub annotation: AnnotationConfig,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig {
            scenario: None,
            trajectory: None,
            scene: None,
            template: None,
            fps: 30.0,
            annotation: AnnotationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MakeScenarioConfig {
    pub kind: ScenarioKind,
    pub scenario: ScenarioConfig,
    pub init: InitConfig,
    pub camera: CameraIntrinsics<f64>,
    pub template: Option<PathBuf>,
}

impl Default for MakeScenarioConfig {
    fn default() -> Self {
        MakeScenarioConfig {
            kind: ScenarioKind::Floor,
            scenario: ScenarioConfig::default(),
            init: InitConfig::default(),
            camera: CameraIntrinsics::default_vga(),
            template: None,
        }
    }
}

/// A state sequence with one body scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialEstimate {
    pub states: Vec<KinematicState<f64>>,
    pub scale: f64,
}

/// Reads `path` (or the defaults), applies the overrides and deserialises.
/// Relative paths inside the result are resolved by the caller against the
/// returned base directory.
pub fn load_config<C>(path: Option<&Path>, overrides: &[String]) -> Result<(C, PathBuf), CliError>
where
    C: Serialize + DeserializeOwned + Default,
{
    let (mut value, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (v, base)
        }
        None => (serde_json::to_value(C::default()).expect("default config serialises"), PathBuf::new()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg = serde_json::from_value(value).map_err(|e| CliError::Input(format!("config: {e}")))?;
    Ok((cfg, base))
}

/// Sets `a.b.c=value`. The value is parsed as JSON and taken as a plain
/// string when that fails. Missing intermediate objects are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override '{assignment}' is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Input(format!("override '{assignment}' has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in key.split('.') {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = node
            .as_object_mut()
            .ok_or_else(|| CliError::Input(format!("override '{key}': '{part}' is inside a non-object value")))?
            .entry(part)
            .or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}

pub fn resolve(base: &Path, p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let (cfg, _) = load_config::<OptimizeConfig>(
            None,
            &[
                "stage.n_sam=250".into(),
                "stage.weights.lambda_sli=0".into(),
                "scenario=runs/a.json".into(),
                "dump_ply=true".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.stage.n_sam, 250);
        assert_eq!(cfg.stage.weights.lambda_sli, 0.0);
        assert_eq!(cfg.scenario, Some(PathBuf::from("runs/a.json")));
        assert!(cfg.dump_ply);
    }

    #[test]
    fn bad_overrides_are_input_errors() {
        for o in ["stage.n_sam", "stage..n_sam=3", "stage.n_sam.x=3", "stage.bogus=1", "stage.n_sam=\"many\""] {
            let r = load_config::<OptimizeConfig>(None, &[o.to_string()]);
            assert!(matches!(r, Err(CliError::Input(_))), "{o}");
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let base = Path::new("/data/run");
        assert_eq!(resolve(base, &Some("s.json".into())), Some(PathBuf::from("/data/run/s.json")));
        assert_eq!(resolve(base, &Some("/abs.json".into())), Some(PathBuf::from("/abs.json")));
        assert_eq!(resolve(base, &None), None);
    }
}
