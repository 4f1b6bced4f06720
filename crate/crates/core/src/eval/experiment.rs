use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::MetadataRecord;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{fit, grid_with, Family, GridOverrides, Hyperparameters, ModelSpec};
use crate::summarize;
use crate::tabular::{encode_metadata, BlockKind, FusionLayout, MetadataImputer, Partition, Scaler, N_METADATA};

use super::auc::{aggregate_groups, auc};
use super::folds::{groups_from_rows, stratified_group_kfold, FoldPlan};

pub const REPORT_VERSION: u32 = 1;

/// Clip-level table the experiments run on. Metadata stays raw so that
/// imputation can be learned inside each training split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub clip_ids: Vec<String>,
    pub participants: Vec<String>,
    pub positive: Vec<bool>,
    pub audio: Matrix,
    pub metadata: Option<Vec<MetadataRecord>>,
    pub extra: Vec<(BlockKind, Matrix)>,
    layout: FusionLayout,
}

impl Dataset {
    pub fn new(
        clip_ids: Vec<String>,
        participants: Vec<String>,
        positive: Vec<bool>,
        audio: Matrix,
        metadata: Option<Vec<MetadataRecord>>,
        extra: Vec<(BlockKind, Matrix)>,
    ) -> Result<Self> {
        let n = clip_ids.len();
        let lens_ok = participants.len() == n
            && positive.len() == n
            && audio.n_rows() == n
            && metadata.as_ref().is_none_or(|m| m.len() == n)
            && extra.iter().all(|(_, m)| m.n_rows() == n);
        if !lens_ok {
            return Err(Error::Integrity("dataset columns have different row counts".into()));
        }
        if n == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let mut blocks = vec![(BlockKind::AudioSummary, audio.n_cols())];
        if metadata.is_some() {
            blocks.push((BlockKind::Metadata, N_METADATA));
        }
        blocks.extend(extra.iter().map(|(k, m)| (*k, m.n_cols())));
        let layout = FusionLayout::new(&blocks);
        Ok(Self {
            clip_ids,
            participants,
            positive,
            audio,
            metadata,
            extra,
            layout,
        })
    }

    pub fn len(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clip_ids.is_empty()
    }

    pub fn layout(&self) -> &FusionLayout {
        &self.layout
    }

    pub fn participant_refs(&self) -> Vec<&str> {
        self.participants.iter().map(String::as_str).collect()
    }

    pub fn labels(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| f64::from(u8::from(self.positive[i]))).collect()
    }

    /// Imputer learned from one record per participant among `rows`.
    pub fn fit_imputer(&self, rows: &[usize]) -> Option<MetadataImputer> {
        let meta = self.metadata.as_ref()?;
        let mut first: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in rows {
            first.entry(self.participants[i].as_str()).or_insert(i);
        }
        Some(MetadataImputer::fit(first.values().map(|&i| &meta[i])))
    }

    /// Fused rows in layout order, with the number of imputed metadata cells.
    pub fn assemble(&self, rows: &[usize], imputer: Option<&MetadataImputer>) -> Result<(Matrix, usize)> {
        let width = self.layout.total_len();
        let mut data = Vec::with_capacity(rows.len() * width);
        let mut imputed = 0;
        for &i in rows {
            data.extend_from_slice(self.audio.row(i));
            if let Some(meta) = &self.metadata {
                let imp = imputer.ok_or_else(|| Error::State("metadata block needs a fitted imputer".into()))?;
                let (v, idx) = encode_metadata(&meta[i], imp);
                imputed += idx.len();
                data.extend(v);
            }
            for (_, m) in &self.extra {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok((Matrix::new(rows.len(), width, data)?, imputed))
    }

    /// Model-ready train and held-out matrices: imputation and, for the
    /// families that want it, scaling are learned on `train` only.
    pub fn prepare(
        &self,
        family: Family,
        train: &[usize],
        holdout: &[usize],
        fold: usize,
    ) -> Result<(Matrix, Matrix, usize)> {
        let imputer = self.fit_imputer(train);
        let (mut xtr, a) = self.assemble(train, imputer.as_ref())?;
        let (mut xte, b) = self.assemble(holdout, imputer.as_ref())?;
        if family.wants_scaling() {
            let mut s = Scaler::new();
            s.fit(&xtr, Partition::Train(fold))?;
            xtr = s.apply(&xtr)?;
            xte = s.apply(&xte)?;
        }
        Ok((xtr, xte, a + b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
    pub grid: GridOverrides,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            k_outer: 10,
            k_inner: 5,
            seed: 0,
            grid: GridOverrides::default(),
        }
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: ModelSpec,
    pub best_index: usize,
    /// Mean inner-fold cough AUC per grid point, in grid order; empty when
    /// the grid has a single point and nothing was evaluated.
    pub grid_auc: Vec<f64>,
}

/// Picks the grid point with the best mean cough AUC over grouped inner
/// folds of `train`. Ties go to the earlier grid point.
pub fn nested_tune(
    ds: &Dataset,
    train: &[usize],
    grid: &[Hyperparameters],
    inner_k: usize,
    seed: u64,
    model_seed: u64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let family = grid[0].family();
    if grid.iter().any(|h| h.family() != family) {
        return Err(Error::Config("grid mixes model families".into()));
    }
    if grid.len() == 1 {
        return Ok(TuneResult {
            best: ModelSpec::new(grid[0].clone(), model_seed),
            best_index: 0,
            grid_auc: Vec::new(),
        });
    }
    let parts: Vec<&str> = train.iter().map(|&i| ds.participants[i].as_str()).collect();
    let pos: Vec<bool> = train.iter().map(|&i| ds.positive[i]).collect();
    let plan = stratified_group_kfold(&groups_from_rows(&parts, &pos)?, inner_k, seed)?;
    let mut splits = Vec::with_capacity(inner_k);
    for f in 0..inner_k {
        let (a, b) = plan.split(f, &parts)?;
        let a: Vec<usize> = a.into_iter().map(|i| train[i]).collect();
        let b: Vec<usize> = b.into_iter().map(|i| train[i]).collect();
        let (xtr, xva, _) = ds.prepare(family, &a, &b, f)?;
        splits.push((xtr, ds.labels(&a), xva, b));
    }
    let grid_auc = grid
        .par_iter()
        .map(|h| {
            let spec = ModelSpec::new(h.clone(), model_seed);
            let mut total = 0.0;
            for (xtr, ytr, xva, va_rows) in &splits {
                let model = fit(&spec, xtr, ytr)?;
                let p = model.predict_proba(xva)?;
                let truth: Vec<bool> = va_rows.iter().map(|&i| ds.positive[i]).collect();
                total += auc(&p, &truth)?;
            }
            Ok(total / splits.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best_index = 0;
    for (i, &a) in grid_auc.iter().enumerate() {
        if a > grid_auc[best_index] {
            best_index = i;
        }
    }
    Ok(TuneResult {
        best: ModelSpec::new(grid[best_index].clone(), model_seed),
        best_index,
        grid_auc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub spec: ModelSpec,
    pub cough_auc: f64,
    pub participant_auc: f64,
    pub n_test_coughs: usize,
    pub n_test_participants: usize,
    pub n_train_coughs: usize,
    pub imputed_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub cough_auc_mean: f64,
    pub cough_auc_std: f64,
    pub participant_auc_mean: f64,
    pub participant_auc_std: f64,
}

impl AucSummary {
    pub fn from_folds(folds: &[FoldReport]) -> Result<Self> {
        let c: Vec<f64> = folds.iter().map(|f| f.cough_auc).collect();
        let p: Vec<f64> = folds.iter().map(|f| f.participant_auc).collect();
        Ok(Self {
            cough_auc_mean: summarize::mean(&c)?,
            cough_auc_std: summarize::std(&c)?,
            participant_auc_mean: summarize::mean(&p)?,
            participant_auc_std: summarize::std(&p)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub family: Family,
    pub experiment: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub k_outer: usize,
    pub k_inner: usize,
    pub n_clips: usize,
    pub n_participants: usize,
    pub layout: FusionLayout,
    pub folds: Vec<FoldReport>,
    pub summary: AucSummary,
    pub imputed_values: usize,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn run_fold(ds: &Dataset, plan: &FoldPlan, fold: usize, grid: &[Hyperparameters], opts: &ExperimentOptions) -> Result<FoldReport> {
    let parts = ds.participant_refs();
    let (train, test) = plan.split(fold, &parts)?;
    let tuned = nested_tune(
        ds,
        &train,
        grid,
        opts.k_inner,
        derive_seed(opts.seed, 1 + fold as u64),
        derive_seed(opts.seed, 1000 + fold as u64),
    )?;
    let family = tuned.best.family();
    let (xtr, xte, imputed) = ds.prepare(family, &train, &test, fold)?;
    let model = fit(&tuned.best, &xtr, &ds.labels(&train))?;
    let scores = model.predict_proba(&xte)?;
    let truth: Vec<bool> = test.iter().map(|&i| ds.positive[i]).collect();
    let test_parts: Vec<&str> = test.iter().map(|&i| parts[i]).collect();
    let per_participant = aggregate_groups(&test_parts, &truth, &scores)?;
    let p_scores: Vec<f64> = per_participant.iter().map(|p| p.score).collect();
    let p_truth: Vec<bool> = per_participant.iter().map(|p| p.label).collect();
    Ok(FoldReport {
        fold,
        spec: tuned.best,
        cough_auc: auc(&scores, &truth)?,
        participant_auc: auc(&p_scores, &p_truth)?,
        n_test_coughs: test.len(),
        n_test_participants: per_participant.len(),
        n_train_coughs: train.len(),
        imputed_values: imputed,
    })
}

/// Outer grouped cross-validation with nested tuning inside each training
/// split.
pub fn run_experiment(
    ds: &Dataset,
    family: Family,
    opts: &ExperimentOptions,
    experiment: &str,
    config_fingerprint: &str,
) -> Result<RunReport> {
    let grid = grid_with(family, &opts.grid)?;
    let parts = ds.participant_refs();
    let groups = groups_from_rows(&parts, &ds.positive)?;
    let plan = stratified_group_kfold(&groups, opts.k_outer, opts.seed)?;
    let folds = (0..opts.k_outer)
        .into_par_iter()
        .map(|f| run_fold(ds, &plan, f, &grid, opts).map_err(|e| Error::Fold { fold: f, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    let summary = AucSummary::from_folds(&folds)?;
    Ok(RunReport {
        report_version: REPORT_VERSION,
        family,
        experiment: experiment.to_string(),
        config_fingerprint: config_fingerprint.to_string(),
        seed: opts.seed,
        k_outer: opts.k_outer,
        k_inner: opts.k_inner,
        n_clips: ds.len(),
        n_participants: groups.len(),
        layout: ds.layout().clone(),
        imputed_values: folds.iter().map(|f| f.imputed_values).sum(),
        folds,
        summary,
    })
}

pub const FOLDS_CSV_HEADER: [&str; 9] = [
    "family",
    "experiment",
    "fold",
    "cough_auc",
    "participant_auc",
    "n_test_coughs",
    "n_test_participants",
    "imputed_values",
    "hyperparameters",
];

/// One row per fold per report.
pub fn write_folds_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FOLDS_CSV_HEADER)?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.family.name().to_string(),
                r.experiment.clone(),
                f.fold.to_string(),
                f.cough_auc.to_string(),
                f.participant_auc.to_string(),
                f.n_test_coughs.to_string(),
                f.n_test_participants.to_string(),
                f.imputed_values.to_string(),
                serde_json::to_string(&f.spec.hyper)?,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("folds csv", e))?;
    Ok(())
}

/// Plain-text table of mean and spread per family.
pub fn render_summary(reports: &[RunReport]) -> String {
    let mut s = format!(
        "{:<8} {:<16} {:>6} {:>22} {:>22}\n",
        "family", "experiment", "folds", "cough AUC", "participant AUC"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<8} {:<16} {:>6} {:>22} {:>22}\n",
            r.family.name(),
            r.experiment,
            r.folds.len(),
            format!("{:.3} ± {:.3}", r.summary.cough_auc_mean, r.summary.cough_auc_std),
            format!(
                "{:.3} ± {:.3}",
                r.summary.participant_auc_mean, r.summary.participant_auc_std
            ),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two informative columns plus noise; `shift` controls separation.
    fn toy(n_participants: usize, shift: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut ids, mut parts, mut pos, mut rows) = (vec![], vec![], vec![], vec![]);
        for p in 0..n_participants {
            let positive = p % 2 == 0;
            for c in 0..(2 + p % 3) {
                ids.push(format!("p{p}_c{c}"));
                parts.push(format!("p{p:03}"));
                pos.push(positive);
                let m = if positive { shift } else { 0.0 };
                rows.push(vec![
                    m + rng.gen_range(-1.0..1.0),
                    -m + rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]);
            }
        }
        Dataset::new(ids, parts, pos, Matrix::from_rows(&rows).unwrap(), None, vec![]).unwrap()
    }

    fn small_opts(seed: u64) -> ExperimentOptions {
        ExperimentOptions {
            k_outer: 4,
            k_inner: 3,
            seed,
            grid: GridOverrides {
                lr_c: Some(vec![1e-3, 1.0]),
                ..Default::default()
            },
        }
    }

    #[test]
    fn derive_seed_spreads() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }

    #[test]
    fn separable_run_scores_high_and_summary_recomputes() {
        let ds = toy(24, 3.0, 1);
        let r = run_experiment(&ds, Family::Lr, &small_opts(3), "cough-only", "fp").unwrap();
        assert_eq!(r.folds.len(), 4);
        assert!(r.summary.cough_auc_mean > 0.95, "{:?}", r.summary);
        assert_eq!(AucSummary::from_folds(&r.folds).unwrap(), r.summary);
        assert_eq!(r.n_participants, 24);
        assert_eq!(r.folds.iter().map(|f| f.n_test_coughs).sum::<usize>(), ds.len());
    }

    #[test]
    fn single_point_grid_is_selected() {
        let ds = toy(12, 1.0, 2);
        let train: Vec<usize> = (0..ds.len()).collect();
        let grid = vec![Hyperparameters::Lr { c: 0.5 }];
        let t = nested_tune(&ds, &train, &grid, 3, 0, 7).unwrap();
        assert_eq!(t.best_index, 0);
        assert_eq!(t.best.hyper, grid[0]);
    }

    #[test]
    fn tuner_prefers_large_c_when_signal_needs_a_contrast() {
        // the label lives in x0 - x1; the mean-difference direction that a
        // heavily shrunk model falls back to only sees x0
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut ids, mut parts, mut pos, mut rows) = (vec![], vec![], vec![], vec![]);
        for p in 0..30 {
            let positive = p % 2 == 0;
            for c in 0..3 {
                let s = if positive { 0.5 } else { -0.5 } + rng.gen_range(-0.1..0.1);
                let n: f64 = rng.gen_range(-3.0..3.0);
                ids.push(format!("p{p}_c{c}"));
                parts.push(format!("p{p:03}"));
                pos.push(positive);
                rows.push(vec![s + n, n]);
            }
        }
        let ds = Dataset::new(ids, parts, pos, Matrix::from_rows(&rows).unwrap(), None, vec![]).unwrap();
        let train: Vec<usize> = (0..ds.len()).collect();
        let grid = vec![Hyperparameters::Lr { c: 1e-5 }, Hyperparameters::Lr { c: 1.0 }];
        let t = nested_tune(&ds, &train, &grid, 3, 1, 0).unwrap();
        assert!(t.grid_auc[1] > t.grid_auc[0], "{:?}", t.grid_auc);
        assert_eq!(t.best_index, 1);
    }

    #[test]
    fn fold_failure_names_index() {
        let ds = toy(6, 1.0, 5);
        let opts = ExperimentOptions {
            k_outer: 3,
            k_inner: 5,
            ..small_opts(0)
        };
        match run_experiment(&ds, Family::Lr, &opts, "x", "fp") {
            Err(Error::Fold { .. }) => {}
            other => panic!("expected fold error, got {other:?}"),
        }
    }

    #[test]
    fn folds_csv_has_row_per_fold() {
        let ds = toy(16, 2.0, 6);
        let r = run_experiment(&ds, Family::Lr, &small_opts(1), "cough-only", "fp").unwrap();
        let mut buf = Vec::new();
        write_folds_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(render_summary(&[]).starts_with("family"));
    }
}
