//! Dataset handling, cross-validation and run artifacts.

mod config;
mod dataset;
mod experiment;
mod folds;
mod synth;

pub use config::{ExperimentConfig, ModelSettings, Pipeline, Scope, RUN_CONFIG_VERSION};
pub use dataset::{load_dataset, write_dataset, Manifest, ManifestEntry, Sample};
pub use experiment::{
    cross_validate, prepare, run_experiment, run_experiment_on, run_fold, split_samples, train_final, train_on,
    write_run, ExperimentOutput, ExperimentReport, FoldOutcome, FoldSummary, PreparedSample, TrainedModel,
};
pub use folds::{make_folds, make_subject_folds, FoldKey, FoldSplit};
pub use synth::{synth_generate, synth_sample, SynthExercise, SynthParams};
