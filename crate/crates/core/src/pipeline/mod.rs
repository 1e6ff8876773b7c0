//! The patch-wise experiment protocol: configuration, running, reporting
//! and comparison of runs.
//!
//! Outputs of a run, all inside the configured output directory:
//!
//! * `report.csv`: one row per image plus a `micro` row with pooled counts
//! * `macro.csv`: per-metric mean and sample standard deviation over images
//! * `predictions/<image>_pNNNN.pgm`: patch predictions
//! * `<image>_prediction.ppm`: the stitched prediction map
//! * `manifest.txt`: the resolved configuration and the patch table

mod compare;
mod config;
mod report;
mod run;

pub use compare::{compare_reports, compare_runs};
pub use config::{Extractor, InputImage, PhantomSource, Representation, RunConfig, MICRO_ROW};
pub use report::{fmt_value, read_report, write_macro, write_report, write_significance, ReportRow, ALPHA};
pub use run::{
    classify_patches, evaluate_predictions, extract_features, label_colours, load_images, load_source_images,
    patch_seed, plan_patches, prediction_path, run_classification, run_experiment, run_extraction, run_rgb,
    run_synthesis, summarize, with_workers, ImageData, ImageSummary, PatchJob, PatchRecord, PatchStatus,
    RunSummary, WORKERS_ENV,
};
