//! Every runnable example completes without error.

#[path = "../examples/nifti_roundtrip.rs"]
mod nifti_roundtrip;
#[path = "../examples/connected_components.rs"]
mod connected_components;
#[path = "../examples/voxel_and_cluster_metrics.rs"]
mod voxel_and_cluster_metrics;
#[path = "../examples/preprocess_pipelines.rs"]
mod preprocess_pipelines;
#[path = "../examples/fold_schedules.rs"]
mod fold_schedules;
#[path = "../examples/phantom_cohort_eval.rs"]
mod phantom_cohort_eval;
#[path = "../examples/compare_algorithms.rs"]
mod compare_algorithms;

#[test]
fn nifti_roundtrip_runs() {
    nifti_roundtrip::main().unwrap();
}

#[test]
fn connected_components_runs() {
    connected_components::main().unwrap();
}

#[test]
fn voxel_and_cluster_metrics_runs() {
    voxel_and_cluster_metrics::main().unwrap();
}

#[test]
fn preprocess_pipelines_runs() {
    preprocess_pipelines::main().unwrap();
}

#[test]
fn fold_schedules_runs() {
    fold_schedules::main();
}

#[test]
fn phantom_cohort_eval_runs() {
    phantom_cohort_eval::main().unwrap();
}

#[test]
fn compare_algorithms_runs() {
    compare_algorithms::main().unwrap();
}
