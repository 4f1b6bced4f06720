use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lld::LldConfig;
use crate::models::{Family, GridOverrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Experiment {
    #[default]
    #[serde(rename = "cough-only")]
    CoughOnly,
    #[serde(rename = "cough-metadata")]
    CoughMetadata,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::CoughOnly => "cough-only",
            Experiment::CoughMetadata => "cough-metadata",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cough-only" => Ok(Experiment::CoughOnly),
            "cough-metadata" => Ok(Experiment::CoughMetadata),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?} (expected cough-only or cough-metadata)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    /// Base for relative clip paths; the manifest's directory when unset.
    pub audio_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Feature cache; `<output_dir>/cache` when unset.
    pub cache_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.csv"),
            audio_root: None,
            output_dir: PathBuf::from("out"),
            cache_dir: None,
        }
    }
}

/// Which blocks enter the fused vector, plus the optional exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureToggles {
    pub audio_summary: bool,
    /// Follows the experiment when unset.
    pub metadata: Option<bool>,
    pub flat_spectrogram: bool,
    pub flat_mfcc: bool,
    pub target_frames: usize,
    pub export_lld: bool,
    pub export_log_mel: bool,
}

impl Default for FeatureToggles {
    fn default() -> Self {
        Self {
            audio_summary: true,
            metadata: None,
            flat_spectrogram: false,
            flat_mfcc: false,
            target_frames: 24,
            export_lld: false,
            export_log_mel: false,
        }
    }
}

/// The part of the configuration that determines per-clip features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSettings {
    pub lld: LldConfig,
    pub audio_summary: bool,
    pub metadata: bool,
    pub flat_spectrogram: bool,
    pub flat_mfcc: bool,
    pub target_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub experiment: Experiment,
    pub families: Vec<Family>,
    pub k_outer: usize,
    pub k_inner: usize,
    /// Worker threads; 0 picks the number of cores. Not part of the fingerprint.
    pub jobs: usize,
    pub paths: Paths,
    pub features: FeatureToggles,
    pub lld: LldConfig,
    pub grid: GridOverrides,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            experiment: Experiment::CoughOnly,
            families: vec![Family::Lr],
            k_outer: 10,
            k_inner: 5,
            jobs: 0,
            paths: Paths::default(),
            features: FeatureToggles::default(),
            lld: LldConfig::default(),
            grid: GridOverrides::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.manifest);
        fix(&mut self.paths.output_dir);
        if let Some(p) = self.paths.audio_root.as_mut() {
            fix(p);
        }
        if let Some(p) = self.paths.cache_dir.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn metadata_enabled(&self) -> bool {
        self.features
            .metadata
            .unwrap_or(self.experiment == Experiment::CoughMetadata)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.experiment, self.features.metadata) {
            (Experiment::CoughOnly, Some(true)) => {
                return Err(Error::Config(
                    "the cough-only experiment cannot enable the metadata block".into(),
                ))
            }
            (Experiment::CoughMetadata, Some(false)) => {
                return Err(Error::Config(
                    "the cough-metadata experiment needs the metadata block".into(),
                ))
            }
            _ => {}
        }
        let f = &self.features;
        if !f.audio_summary && !self.metadata_enabled() && !f.flat_spectrogram && !f.flat_mfcc {
            return Err(Error::Config("no feature block enabled".into()));
        }
        if (f.flat_spectrogram || f.flat_mfcc) && f.target_frames == 0 {
            return Err(Error::Config("target_frames must be positive".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("no model family selected".into()));
        }
        if self.k_outer < 2 || self.k_inner < 2 {
            return Err(Error::Config("k_outer and k_inner must be at least 2".into()));
        }
        self.lld.validate()?;
        for &fam in &self.families {
            crate::models::grid_with(fam, &self.grid)?;
        }
        Ok(())
    }

    pub fn feature_settings(&self) -> FeatureSettings {
        FeatureSettings {
            lld: self.lld.clone(),
            audio_summary: self.features.audio_summary,
            metadata: self.metadata_enabled(),
            flat_spectrogram: self.features.flat_spectrogram,
            flat_mfcc: self.features.flat_mfcc,
            target_frames: self.features.target_frames,
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.paths
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("cache"))
    }

    pub fn audio_root(&self) -> PathBuf {
        self.paths.audio_root.clone().unwrap_or_else(|| {
            self.paths
                .manifest
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
    }

    /// SHA-256 over the canonical JSON form, leaving out settings that do
    /// not affect results (worker count and output locations).
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("jobs");
            if let Some(paths) = obj.get_mut("paths").and_then(|p| p.as_object_mut()) {
                paths.remove("output_dir");
                paths.remove("cache_dir");
            }
            if let Some(feat) = obj.get_mut("features").and_then(|p| p.as_object_mut()) {
                feat.remove("export_lld");
                feat.remove("export_log_mel");
            }
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
