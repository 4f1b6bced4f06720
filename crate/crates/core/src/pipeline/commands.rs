use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Experiment, FeatureSettings, PipelineConfig};
use super::features::{extract_features, ExportTargets, FeatureTable};
use super::synth::{generate_corpus, SynthSummary, SyntheticCorpusSpec};
use crate::audio::{load_manifest, Manifest};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_groups, derive_seed, nested_tune, render_summary, run_experiment, write_folds_csv, ExperimentOptions,
    RunReport, TuneResult,
};
use crate::models::{fit, grid_with, Family, ModelEnvelope, TrainedModel};
use crate::tabular::{FusionLayout, MetadataImputer, Partition, Scaler};

pub const BUNDLE_FORMAT: &str = "coughscreen-bundle";
pub const BUNDLE_VERSION: u32 = 1;

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn create_file(p: &Path) -> Result<fs::File> {
    fs::File::create(p).map_err(|e| Error::io(p, e))
}

fn write_failures(dir: &Path, table: &FeatureTable) -> Result<()> {
    let path = dir.join("extraction_errors.csv");
    if table.failures.is_empty() {
        if path.exists() {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    for f in &table.failures {
        w.serialize(f)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn extraction_result(table: &FeatureTable, total: usize) -> Result<()> {
    if table.failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Extraction {
            failed: table.failures.len(),
            total,
        })
    }
}

fn load_features(cfg: &PipelineConfig, settings: &FeatureSettings, exports: &ExportTargets) -> Result<(Manifest, FeatureTable)> {
    let manifest = load_manifest(&cfg.paths.manifest)?;
    let cache = cfg.cache_dir();
    let table = extract_features(&manifest, settings, &cfg.audio_root(), Some(&cache), exports)?;
    log::info!(
        "features: {} clips ({} cached, {} computed, {} failed)",
        manifest.len(),
        table.cache_hits,
        table.computed,
        table.failures.len()
    );
    Ok((manifest, table))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractOutcome {
    pub features_csv: PathBuf,
    pub n_clips: usize,
    pub cache_hits: usize,
    pub computed: usize,
    pub failed: usize,
}

/// Writes `features.csv` (and any configured exports). Clips that fail are
/// listed in `extraction_errors.csv`; the table is still written, and the
/// call then returns an extraction error.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<ExtractOutcome> {
    cfg.validate()?;
    let out = &cfg.paths.output_dir;
    create_dir(out)?;
    let exports = ExportTargets {
        lld_dir: cfg.features.export_lld.then(|| out.join("lld")),
        log_mel_dir: cfg.features.export_log_mel.then(|| out.join("log_mel")),
    };
    let (manifest, table) = load_features(cfg, &cfg.feature_settings(), &exports)?;
    let path = out.join("features.csv");
    table.write_csv(&cfg.fingerprint(), create_file(&path)?)?;
    write_failures(out, &table)?;
    extraction_result(&table, manifest.len())?;
    Ok(ExtractOutcome {
        features_csv: path,
        n_clips: table.len(),
        cache_hits: table.cache_hits,
        computed: table.computed,
        failed: table.failures.len(),
    })
}

pub fn experiment_options(cfg: &PipelineConfig) -> ExperimentOptions {
    ExperimentOptions {
        k_outer: cfg.k_outer,
        k_inner: cfg.k_inner,
        seed: cfg.seed,
        grid: cfg.grid.clone(),
    }
}

pub fn report_path(dir: &Path, family: Family) -> PathBuf {
    dir.join(format!("report_{}.json", family.name()))
}

/// One report per family plus `folds.csv`.
pub fn cmd_crossvalidate(cfg: &PipelineConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let out = &cfg.paths.output_dir;
    create_dir(out)?;
    let settings = cfg.feature_settings();
    let (manifest, table) = load_features(cfg, &settings, &ExportTargets::default())?;
    write_failures(out, &table)?;
    extraction_result(&table, manifest.len())?;
    let ds = table.dataset(&settings)?;
    let fingerprint = cfg.fingerprint();
    let opts = experiment_options(cfg);
    let mut reports = Vec::new();
    for &family in &cfg.families {
        log::info!("cross-validating {family}");
        let r = run_experiment(&ds, family, &opts, cfg.experiment.name(), &fingerprint)?;
        fs::write(report_path(out, family), r.to_json()?).map_err(|e| Error::io(report_path(out, family), e))?;
        reports.push(r);
    }
    let path = out.join("folds.csv");
    let mut f = create_file(&path)?;
    writeln!(f, "# config_fingerprint: {fingerprint}").map_err(|e| Error::io(&path, e))?;
    write_folds_csv(&reports, f)?;
    Ok(reports)
}

/// A trained model together with everything needed to featurize new clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub config_fingerprint: String,
    pub experiment: Experiment,
    pub features: FeatureSettings,
    pub layout: FusionLayout,
    pub imputer: Option<MetadataImputer>,
    pub scaler: Option<Scaler>,
    pub tuning: TuneResult,
    pub model: ModelEnvelope,
}

impl ModelBundle {
    pub fn load(path: &Path) -> Result<(Self, TrainedModel)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: ModelBundle = serde_json::from_str(&text)?;
        if b.format != BUNDLE_FORMAT || b.version != BUNDLE_VERSION {
            return Err(Error::Schema(format!(
                "{}: not a version-{BUNDLE_VERSION} model bundle",
                path.display()
            )));
        }
        let model = TrainedModel::from_envelope(&b.model)?;
        if model.n_features != b.layout.total_len() {
            return Err(Error::Layout {
                expected: b.layout.total_len(),
                actual: model.n_features,
            });
        }
        Ok((b, model))
    }
}

pub fn model_path(dir: &Path, family: Family) -> PathBuf {
    dir.join(format!("model_{}.json", family.name()))
}

/// Tunes on the whole dataset, fits once, and writes `model_<family>.json`.
pub fn cmd_train_final(cfg: &PipelineConfig, family: Family) -> Result<PathBuf> {
    cfg.validate()?;
    let out = &cfg.paths.output_dir;
    create_dir(out)?;
    let settings = cfg.feature_settings();
    let (manifest, table) = load_features(cfg, &settings, &ExportTargets::default())?;
    extraction_result(&table, manifest.len())?;
    let ds = table.dataset(&settings)?;
    let rows: Vec<usize> = (0..ds.len()).collect();
    let grid = grid_with(family, &cfg.grid)?;
    let tuning = nested_tune(
        &ds,
        &rows,
        &grid,
        cfg.k_inner,
        derive_seed(cfg.seed, 1),
        derive_seed(cfg.seed, 1000),
    )?;
    let imputer = ds.fit_imputer(&rows);
    let (mut x, _) = ds.assemble(&rows, imputer.as_ref())?;
    let scaler = if family.wants_scaling() {
        let mut s = Scaler::new();
        s.fit(&x, Partition::Full)?;
        x = s.apply(&x)?;
        Some(s)
    } else {
        None
    };
    let model = fit(&tuning.best, &x, &ds.labels(&rows))?;
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        config_fingerprint: cfg.fingerprint(),
        experiment: cfg.experiment,
        features: settings,
        layout: ds.layout().clone(),
        imputer,
        scaler,
        tuning,
        model: model.to_envelope(),
    };
    let path = model_path(out, family);
    let mut text = serde_json::to_string_pretty(&bundle)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub clip_id: String,
    pub participant_id: String,
    pub clip_probability: f64,
    pub participant_probability: f64,
}

/// Scores every clip of `manifest_path` with a saved bundle and writes
/// `scores.csv` into `out_dir`.
pub fn cmd_predict(
    bundle_path: &Path,
    manifest_path: &Path,
    audio_root: Option<&Path>,
    out_dir: &Path,
    cache_dir: Option<&Path>,
) -> Result<Vec<ScoreRow>> {
    let (bundle, model) = ModelBundle::load(bundle_path)?;
    let manifest = load_manifest(manifest_path)?;
    let root = audio_root
        .map(Path::to_path_buf)
        .unwrap_or_else(|| manifest_path.parent().map(Path::to_path_buf).unwrap_or_default());
    let table = extract_features(&manifest, &bundle.features, &root, cache_dir, &ExportTargets::default())?;
    extraction_result(&table, manifest.len())?;
    let ds = table.dataset(&bundle.features)?;
    if ds.layout() != &bundle.layout {
        return Err(Error::Layout {
            expected: bundle.layout.total_len(),
            actual: ds.layout().total_len(),
        });
    }
    let rows: Vec<usize> = (0..ds.len()).collect();
    let (mut x, _) = ds.assemble(&rows, bundle.imputer.as_ref())?;
    if let Some(s) = &bundle.scaler {
        x = s.apply(&x)?;
    }
    let probs = model.predict_proba(&x)?;
    let parts = ds.participant_refs();
    let per = aggregate_groups(&parts, &ds.positive, &probs)?;
    let mean_of = |p: &str| {
        per.binary_search_by(|s| s.participant_id.as_str().cmp(p))
            .map(|i| per[i].score)
            .expect("participant aggregated")
    };
    let scores: Vec<ScoreRow> = rows
        .iter()
        .map(|&i| ScoreRow {
            clip_id: ds.clip_ids[i].clone(),
            participant_id: ds.participants[i].clone(),
            clip_probability: probs[i],
            participant_probability: mean_of(parts[i]),
        })
        .collect();
    create_dir(out_dir)?;
    let path = out_dir.join("scores.csv");
    let mut f = create_file(&path)?;
    writeln!(f, "# config_fingerprint: {}", bundle.config_fingerprint).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(f);
    for s in &scores {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(scores)
}

pub fn cmd_synth(spec: &SyntheticCorpusSpec, out_dir: &Path) -> Result<SynthSummary> {
    generate_corpus(spec, out_dir).map(|(_, s)| s)
}

/// Text summary of every `report_*.json` found in `dir`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Integrity(format!("no report_*.json files in {}", dir.display())));
    }
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str::<RunReport>(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(render_summary(&reports))
}
