//! Configuration, data ingestion, experiment pipelines and reports.

pub mod config;
pub mod csv_io;
pub mod pipeline;
pub mod report;
pub mod synthetic;
pub mod wilcoxon;

pub use config::{CertificateSpec, DatasetSpec, ExperimentConfig, FutureSmoothingSpec, ModelSpec, SmoothingSpec};
pub use csv_io::{export_csv, export_samples_csv, ingest_csv, IngestDiagnostic, IngestOptions, Ingested};
pub use pipeline::{
    run_adversarial_pipeline, run_adversarial_pipeline_with_artifacts, run_timeshift_pipeline,
    run_timeshift_pipeline_with_artifacts, eval_series_from, train_models, TrainedModels, ADVERSARIAL_METHODS, TIMESHIFT_METHODS,
};
pub use report::RunReport;
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
