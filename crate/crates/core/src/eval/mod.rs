//! Grouped cross-validation, AUC and run reports.

mod auc;
mod experiment;
mod folds;

pub use auc::{aggregate_by_participant, aggregate_groups, auc, ParticipantScore};
pub use experiment::{
    derive_seed, nested_tune, render_summary, run_experiment, write_folds_csv, AucSummary, Dataset,
    ExperimentOptions, FoldReport, RunReport, TuneResult, FOLDS_CSV_HEADER, REPORT_VERSION,
};
pub use folds::{check_disjoint, groups_from_rows, groups_of, stratified_group_kfold, FoldPlan, Group};
