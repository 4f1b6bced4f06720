use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{sha256_hex, FeatureSettings};
use crate::audio::{decode_wav_bytes, Label, Manifest, MetadataRecord};
use crate::error::{Error, Result};
use crate::eval::Dataset;
use crate::lld::{ClipFeatures, Extractor, LldMatrix, Spectrogram};
use crate::matrix::Matrix;
use crate::models::{ParamReader, ParamWriter};
use crate::summarize::summarize_clip;
use crate::tabular::{flatten_spectrogram, BlockKind};

const CACHE_VERSION: u64 = 1;

/// Everything kept per clip after extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSummary {
    pub values: Vec<f64>,
    pub flat_spectrogram: Vec<f64>,
    pub flat_mfcc: Vec<f64>,
    pub short_columns: Vec<usize>,
}

impl ClipSummary {
    fn from_features(f: &ClipFeatures<f64>, target_frames: usize) -> Result<Self> {
        let fv = summarize_clip(&f.lld)?;
        let short_columns = fv
            .short_columns
            .iter()
            .filter_map(|n| f.lld.descriptor_names.iter().position(|d| d == n))
            .collect();
        Ok(Self {
            values: fv.values,
            flat_spectrogram: flatten_spectrogram(&f.log_mel, target_frames),
            flat_mfcc: flatten_spectrogram(&f.mfcc, target_frames),
            short_columns,
        })
    }

    fn encode(&self) -> Vec<u8> {
        let mut w = ParamWriter::new();
        w.u64(CACHE_VERSION);
        w.f64s(&self.values);
        w.f64s(&self.flat_spectrogram);
        w.f64s(&self.flat_mfcc);
        w.usize(self.short_columns.len());
        for &c in &self.short_columns {
            w.usize(c);
        }
        w.into_bytes()
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ParamReader::new(bytes);
        if r.u64()? != CACHE_VERSION {
            return Err(Error::Decode("stale cache entry".into()));
        }
        let values = r.f64s()?;
        let flat_spectrogram = r.f64s()?;
        let flat_mfcc = r.f64s()?;
        let n = r.usize()?;
        let short_columns = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(Self {
            values,
            flat_spectrogram,
            flat_mfcc,
            short_columns,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClipFailure {
    pub clip_id: String,
    pub path: String,
    pub error: String,
}

/// Per-clip features for the clips that extracted cleanly, in manifest order.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub clip_ids: Vec<String>,
    pub participants: Vec<String>,
    pub labels: Vec<Label>,
    pub metadata: Vec<MetadataRecord>,
    pub summaries: Vec<ClipSummary>,
    pub failures: Vec<ClipFailure>,
    pub cache_hits: usize,
    pub computed: usize,
}

/// Where the optional per-frame exports go.
#[derive(Debug, Clone, Default)]
pub struct ExportTargets {
    pub lld_dir: Option<PathBuf>,
    pub log_mel_dir: Option<PathBuf>,
}

impl ExportTargets {
    fn any(&self) -> bool {
        self.lld_dir.is_some() || self.log_mel_dir.is_some()
    }
}

pub fn summary_names(settings: &FeatureSettings) -> Vec<String> {
    settings
        .lld
        .descriptor_names()
        .iter()
        .flat_map(|d| crate::summarize::STAT_SUFFIXES.iter().map(move |s| format!("{d}_{s}")))
        .collect()
}

fn cache_key(bytes: &[u8], settings: &FeatureSettings) -> String {
    let material = serde_json::json!({
        "clip_sha256": sha256_hex(bytes),
        "lld": settings.lld,
        "target_frames": settings.target_frames,
    });
    sha256_hex(material.to_string().as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

enum Outcome {
    Done(ClipSummary, bool),
    Failed(ClipFailure),
}

/// Decodes, extracts and summarizes every manifest clip in parallel.
///
/// Unreadable or undecodable clips are collected in `failures` and left
/// out of the table. With a cache directory, results are stored under a
/// hash of the clip bytes and the feature settings and reused when found.
pub fn extract_features(
    manifest: &Manifest,
    settings: &FeatureSettings,
    audio_root: &Path,
    cache_dir: Option<&Path>,
    exports: &ExportTargets,
) -> Result<FeatureTable> {
    let extractor = Extractor::<f64>::new(settings.lld.clone())?;
    for dir in [cache_dir, exports.lld_dir.as_deref(), exports.log_mel_dir.as_deref()]
        .into_iter()
        .flatten()
    {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let names = settings.lld.descriptor_names();
    let outcomes: Vec<Outcome> = manifest
        .rows
        .par_iter()
        .map(|row| {
            let path = audio_root.join(&row.file_path);
            let fail = |e: Error| {
                Outcome::Failed(ClipFailure {
                    clip_id: row.clip_id.clone(),
                    path: path.display().to_string(),
                    error: e.to_string(),
                })
            };
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                Err(e) => return fail(Error::io(&path, e)),
            };
            let key = cache_key(&bytes, settings);
            let cached = cache_dir
                .map(|d| d.join(format!("{key}.bin")))
                .and_then(|p| fs::read(&p).ok().and_then(|b| ClipSummary::decode(&b).ok()));
            if let (Some(hit), false) = (&cached, exports.any()) {
                return Outcome::Done(hit.clone(), true);
            }
            let computed = decode_wav_bytes::<f64>(&bytes, &row.clip_id)
                .and_then(|clip| extractor.extract(&clip))
                .and_then(|f| {
                    write_exports(&row.clip_id, &f, &names, exports)?;
                    Ok((ClipSummary::from_features(&f, settings.target_frames)?, f))
                });
            match (computed, cached) {
                (Err(e), _) => fail(e),
                (Ok((s, _)), Some(_)) => Outcome::Done(s, true),
                (Ok((s, _)), None) => {
                    if let Some(d) = cache_dir {
                        if let Err(e) = write_atomic(&d.join(format!("{key}.bin")), &s.encode()) {
                            log::warn!("could not cache features of {}: {e}", row.clip_id);
                        }
                    }
                    Outcome::Done(s, false)
                }
            }
        })
        .collect();

    let mut table = FeatureTable {
        names: summary_names(settings),
        clip_ids: Vec::new(),
        participants: Vec::new(),
        labels: Vec::new(),
        metadata: Vec::new(),
        summaries: Vec::new(),
        failures: Vec::new(),
        cache_hits: 0,
        computed: 0,
    };
    for (row, out) in manifest.rows.iter().zip(outcomes) {
        match out {
            Outcome::Done(s, hit) => {
                if hit {
                    table.cache_hits += 1;
                } else {
                    table.computed += 1;
                }
                table.clip_ids.push(row.clip_id.clone());
                table.participants.push(row.participant_id.clone());
                table.labels.push(row.label);
                table.metadata.push(row.metadata.clone());
                table.summaries.push(s);
            }
            Outcome::Failed(f) => {
                log::error!("{}: {}", f.clip_id, f.error);
                table.failures.push(f);
            }
        }
    }
    Ok(table)
}

fn write_exports(clip_id: &str, f: &ClipFeatures<f64>, names: &[String], exports: &ExportTargets) -> Result<()> {
    if let Some(dir) = &exports.lld_dir {
        let path = dir.join(format!("{clip_id}.csv"));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_lld_csv(&f.lld, names, file)?;
    }
    if let Some(dir) = &exports.log_mel_dir {
        let path = dir.join(format!("{clip_id}.bin"));
        fs::write(&path, log_mel_bytes(&f.log_mel)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// One row per frame; a column whose grid has fewer frames is left blank.
pub fn write_lld_csv<W: Write>(m: &LldMatrix<f64>, names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["frame".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for t in 0..m.max_frames() {
        let mut rec = vec![t.to_string()];
        rec.extend(m.columns.iter().map(|c| c.get(t).map_or(String::new(), |v| v.to_string())));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("lld csv", e))
}

/// `u32 n_mels`, `u32 n_frames`, then `f32` values mel-row by mel-row,
/// all little-endian.
pub fn log_mel_bytes(s: &Spectrogram<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * s.values.len());
    out.extend_from_slice(&(s.n_rows as u32).to_le_bytes());
    out.extend_from_slice(&(s.n_frames as u32).to_le_bytes());
    for &v in &s.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Inverse of [`log_mel_bytes`]: `(n_mels, n_frames, values)`.
pub fn parse_log_mel_bytes(b: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if b.len() < 8 {
        return Err(Error::Decode("log-mel block shorter than its header".into()));
    }
    let rows = u32::from_le_bytes(b[0..4].try_into().expect("4 bytes")) as usize;
    let frames = u32::from_le_bytes(b[4..8].try_into().expect("4 bytes")) as usize;
    let body = &b[8..];
    if body.len() != 4 * rows * frames {
        return Err(Error::Decode(format!(
            "log-mel block holds {} bytes, header implies {}",
            body.len(),
            4 * rows * frames
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((rows, frames, values))
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clip_ids.is_empty()
    }

    fn stack(&self, pick: impl Fn(&ClipSummary) -> &[f64]) -> Result<Matrix> {
        let width = self.summaries.first().map_or(0, |s| pick(s).len());
        let mut data = Vec::with_capacity(width * self.len());
        for s in &self.summaries {
            let v = pick(s);
            if v.len() != width {
                return Err(Error::Layout {
                    expected: width,
                    actual: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Matrix::new(self.len(), width, data)
    }

    /// Experiment table with the blocks enabled in `settings`.
    pub fn dataset(&self, settings: &FeatureSettings) -> Result<Dataset> {
        let audio = if settings.audio_summary {
            self.stack(|s| &s.values)?
        } else {
            Matrix::new(self.len(), 0, Vec::new())?
        };
        let mut extra = Vec::new();
        if settings.flat_spectrogram {
            extra.push((BlockKind::FlatSpectrogram, self.stack(|s| &s.flat_spectrogram)?));
        }
        if settings.flat_mfcc {
            extra.push((BlockKind::FlatMfcc, self.stack(|s| &s.flat_mfcc)?));
        }
        Dataset::new(
            self.clip_ids.clone(),
            self.participants.clone(),
            self.labels.iter().map(|l| l.is_positive()).collect(),
            audio,
            settings.metadata.then(|| self.metadata.clone()),
            extra,
        )
    }

    /// Audio-summary table, preceded by a provenance comment line.
    pub fn write_csv<W: Write>(&self, fingerprint: &str, mut out: W) -> Result<()> {
        writeln!(out, "# config_fingerprint: {fingerprint}").map_err(|e| Error::io("features csv", e))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["clip_id".to_string(), "participant_id".into(), "label".into()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.clip_ids[i].clone(),
                self.participants[i].clone(),
                self.labels[i].to_string(),
            ];
            rec.extend(self.summaries[i].values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("features csv", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_entry_round_trip() {
        let s = ClipSummary {
            values: vec![1.5, -0.0, f64::MIN_POSITIVE],
            flat_spectrogram: vec![0.1; 4],
            flat_mfcc: vec![],
            short_columns: vec![3, 20],
        };
        assert_eq!(ClipSummary::decode(&s.encode()).unwrap(), s);
        let mut bad = s.encode();
        bad[0] = 9;
        assert!(ClipSummary::decode(&bad).is_err());
    }

    #[test]
    fn log_mel_block_layout() {
        let s = Spectrogram {
            n_rows: 2,
            n_frames: 3,
            values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.5],
            silence: vec![-23.0; 2],
        };
        let b = log_mel_bytes(&s);
        assert_eq!(b.len(), 8 + 24);
        assert_eq!(&b[0..8], &[2, 0, 0, 0, 3, 0, 0, 0]);
        let (r, t, v) = parse_log_mel_bytes(&b).unwrap();
        assert_eq!((r, t), (2, 3));
        assert_eq!(v[5], 5.5);
        assert!(parse_log_mel_bytes(&b[..10]).is_err());
    }
}
