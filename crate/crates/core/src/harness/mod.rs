//! Datasets, evaluation, ablation and fixtures.

mod ablation;
mod dataset;
mod export;
mod metrics;
mod runner;
mod scenario;

pub use ablation::{run_ablation, AblationRow, AblationTable, ABLATION_ROWS};
pub use dataset::{
    load_dataset, load_reports, parse_dataset, read_jsonl, reports_json, save_dataset, save_reports, write_jsonl,
    DatasetError,
};
pub use export::{
    ate_timeline, export_timeline, graph_dot, match_styles, report_dot, timeline_csv, TimelineRow, MATCHED_COLOR,
    MISMATCHED_COLOR,
};
pub use metrics::{
    aligned_errors, ate_rmse, evaluate, evaluate_pairs, label_ground_truth_loops, AteError, EvaluationReport,
    GroundTruthLoopLabel, LABEL_MAX_ANGLE_DEG, LABEL_MAX_DISTANCE_M,
};
pub use runner::{ate_before_after, estimated_trajectory, evaluate_sequence, run_online, OnlineRun};
pub use scenario::{moderate_noise, Scenario, Simulation, TwinSpec};
