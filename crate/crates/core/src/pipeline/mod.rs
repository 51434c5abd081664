//! End-to-end orchestration, the synthetic collage benchmark and the
//! submission file.

mod collage;
mod config;
mod runner;
mod stages;
mod submission;
mod workers;

pub use collage::{
    collage_textures, generate_collage, make_collage_dataset, CollageDataset, CollagePaths,
    CollageSpec, Texture,
};
pub use config::{
    EmbedParams, ExtractorChoice, PathsConfig, PipelineConfig, PreprocessParams, SubmitParams,
};
pub use runner::{run_pipeline, PipelineOutcome, StageStatus, WorkLayout};
pub use stages::{
    embed_stage, evaluate_stage, infer_stage, preprocess_stage, shard_paths, submit_stage,
    train_stage, EmbedSummary, PreprocessSummary, TrainSummary, CATALOG_FILE,
};
pub use submission::{
    format_submission, parse_submission, read_submission, submission_rows, write_submission,
    SubmissionRow, SUBMISSION_HEADER,
};
pub use workers::{resolve_workers, with_workers, WORKERS_ENV};
