//! Synthetic scenarios, evaluation metrics and ablation runs.

mod ablation;
mod metrics;
mod scenario;

pub use ablation::{
    bench_manifold, prepare, records_to_csv, run_ablation, run_on, score, suite_variants, summarize, BenchSpec,
    RunRecord, Suite, SummaryRow, Variant, BENCH_CORPUS_SEED, BENCH_CORPUS_SIZE,
};
pub use metrics::{
    align_frames, e_smooth, evaluate, fit_plane, mpjpe, non_penetration_pct_cloud, non_penetration_pct_solids,
    penetrates_cloud, pck, posed_trajectories, procrustes, pve, sliding_error, translation_and_bone_errors,
    MetricReport, Penetration, PCK_THRESHOLD_MM, PLANE_EPS, PLANE_NEIGHBOURS, PLANE_REACH,
};
pub use scenario::{
    initial_estimate, make_scenario, InitConfig, Scenario, ScenarioConfig, ScenarioKind, Solid, SCENARIO_VERSION,
};
