//! Configuration, feature caching, synthetic corpora and the commands the
//! binary exposes.

mod commands;
mod config;
mod features;
mod synth;

pub use commands::{
    cmd_crossvalidate, cmd_extract, cmd_predict, cmd_report, cmd_synth, cmd_train_final, experiment_options,
    model_path, report_path, ExtractOutcome, ModelBundle, ScoreRow, BUNDLE_FORMAT, BUNDLE_VERSION,
};
pub use config::{sha256_hex, Experiment, FeatureSettings, FeatureToggles, Paths, PipelineConfig};
pub use features::{
    extract_features, log_mel_bytes, parse_log_mel_bytes, summary_names, write_lld_csv, ClipFailure, ClipSummary,
    ExportTargets, FeatureTable,
};
pub use synth::{band_noise, generate_corpus, synth_metadata, SynthSummary, SyntheticCorpusSpec};
