use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const METADATA_COLUMNS: [&str; 16] = [
    "age",
    "sex",
    "height",
    "weight",
    "cough_duration_days",
    "prior_tb",
    "prior_tb_pulmonary",
    "prior_tb_extrapulmonary",
    "prior_tb_unknown",
    "hemoptysis",
    "heart_rate",
    "temperature",
    "smoke_last_week",
    "fever",
    "night_sweats",
    "weight_loss",
];

pub const MANIFEST_COLUMNS: [&str; 4] = ["clip_id", "file_path", "participant_id", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "TB-")]
    Negative,
    #[serde(rename = "TB+")]
    Positive,
}

impl Label {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "TB+" => Some(Label::Positive),
            // both the ASCII hyphen and the Unicode minus sign
            "TB-" | "TB\u{2212}" => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn as_f64(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "TB+",
            Label::Negative => "TB-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

/// Demographic and clinical fields of one participant. `None` is missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub age: Option<f64>,
    pub sex: Option<Sex>,
    pub height: Option<f64>,
    pub weight: Option<f64>,
    pub cough_duration_days: Option<f64>,
    pub prior_tb: Option<bool>,
    pub prior_tb_pulmonary: Option<bool>,
    pub prior_tb_extrapulmonary: Option<bool>,
    pub prior_tb_unknown: Option<bool>,
    pub hemoptysis: Option<bool>,
    pub heart_rate: Option<f64>,
    pub temperature: Option<f64>,
    pub smoke_last_week: Option<bool>,
    pub fever: Option<bool>,
    pub night_sweats: Option<bool>,
    pub weight_loss: Option<bool>,
}

/// A metadata field viewed generically, in `METADATA_COLUMNS` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Numeric(Option<f64>),
    Binary(Option<bool>),
}

impl MetadataRecord {
    pub fn fields(&self) -> [FieldValue; 16] {
        use FieldValue::{Binary, Numeric};
        [
            Numeric(self.age),
            Binary(self.sex.map(|s| s == Sex::Male)),
            Numeric(self.height),
            Numeric(self.weight),
            Numeric(self.cough_duration_days),
            Binary(self.prior_tb),
            Binary(self.prior_tb_pulmonary),
            Binary(self.prior_tb_extrapulmonary),
            Binary(self.prior_tb_unknown),
            Binary(self.hemoptysis),
            Numeric(self.heart_rate),
            Numeric(self.temperature),
            Binary(self.smoke_last_week),
            Binary(self.fever),
            Binary(self.night_sweats),
            Binary(self.weight_loss),
        ]
    }

    fn from_cells(cells: &[&str], ctx: &str) -> Result<Self> {
        let num = |i: usize| parse_numeric(cells[i], METADATA_COLUMNS[i], ctx);
        let bin = |i: usize| parse_binary(cells[i], METADATA_COLUMNS[i], ctx);
        let sex = match cells[1].trim() {
            "" => None,
            "male" => Some(Sex::Male),
            "female" => Some(Sex::Female),
            other => {
                return Err(Error::Schema(format!(
                    "{ctx}: sex must be male/female, got {other:?}"
                )))
            }
        };
        Ok(Self {
            age: num(0)?,
            sex,
            height: num(2)?,
            weight: num(3)?,
            cough_duration_days: num(4)?,
            prior_tb: bin(5)?,
            prior_tb_pulmonary: bin(6)?,
            prior_tb_extrapulmonary: bin(7)?,
            prior_tb_unknown: bin(8)?,
            hemoptysis: bin(9)?,
            heart_rate: num(10)?,
            temperature: num(11)?,
            smoke_last_week: bin(12)?,
            fever: bin(13)?,
            night_sweats: bin(14)?,
            weight_loss: bin(15)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .fields()
            .iter()
            .map(|f| match f {
                FieldValue::Numeric(v) => v.map(|x| x.to_string()).unwrap_or_default(),
                FieldValue::Binary(v) => match v {
                    Some(true) => "yes".into(),
                    Some(false) => "no".into(),
                    None => String::new(),
                },
            })
            .collect();
        out[1] = match self.sex {
            Some(Sex::Male) => "male".into(),
            Some(Sex::Female) => "female".into(),
            None => String::new(),
        };
        out
    }
}

fn parse_numeric(cell: &str, name: &str, ctx: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Schema(format!("{ctx}: {name} is not a number: {cell:?}"))),
    }
}

fn parse_binary(cell: &str, name: &str, ctx: &str) -> Result<Option<bool>> {
    match cell.trim() {
        "" => Ok(None),
        "yes" => Ok(Some(true)),
        "no" => Ok(Some(false)),
        other => Err(Error::Schema(format!(
            "{ctx}: {name} must be yes/no, got {other:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub clip_id: String,
    pub file_path: String,
    pub participant_id: String,
    pub label: Label,
    pub metadata: MetadataRecord,
}

/// Validated dataset manifest: one row per clip.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Validates clip-id uniqueness and per-participant label consistency.
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        let mut labels: BTreeMap<&str, Label> = BTreeMap::new();
        for row in &rows {
            if !seen.insert(row.clip_id.as_str()) {
                return Err(Error::Integrity(format!("duplicate clip_id {}", row.clip_id)));
            }
            match labels.get(row.participant_id.as_str()) {
                Some(&l) if l != row.label => {
                    return Err(Error::Integrity(format!(
                        "participant {} has conflicting labels {l} and {}",
                        row.participant_id, row.label
                    )))
                }
                Some(_) => {}
                None => {
                    labels.insert(&row.participant_id, row.label);
                }
            }
            if let Some(age) = row.metadata.age {
                if age < 18.0 {
                    log::warn!(
                        "participant {} is {age} years old, below the adult cohort floor",
                        row.participant_id
                    );
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Participants in id order with their label and clip row indices.
    pub fn participants(&self) -> BTreeMap<&str, (Label, Vec<usize>)> {
        let mut out: BTreeMap<&str, (Label, Vec<usize>)> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            out.entry(&row.participant_id)
                .or_insert_with(|| (row.label, Vec::new()))
                .1
                .push(i);
        }
        out
    }

    pub fn row(&self, clip_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.clip_id == clip_id)
    }

    /// Restricts the manifest to the given participants, keeping row order.
    pub fn subset(&self, participants: &HashSet<&str>) -> Manifest {
        Manifest {
            rows: self
                .rows
                .iter()
                .filter(|r| participants.contains(r.participant_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn stats(&self) -> Result<DatasetStats> {
        DatasetStats::from_counts(self, 0.0)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file)
}

pub fn parse_manifest<R: Read>(reader: R) -> Result<Manifest> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("manifest is missing column {name:?}")))
    };
    let base: Vec<usize> = MANIFEST_COLUMNS
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;
    let meta: Vec<usize> = METADATA_COLUMNS
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let ctx = format!("manifest row {}", line + 1);
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let clip_id = cell(base[0]);
        if clip_id.is_empty() {
            return Err(Error::Schema(format!("{ctx}: empty clip_id")));
        }
        let participant_id = cell(base[2]);
        if participant_id.is_empty() {
            return Err(Error::Schema(format!("{ctx}: empty participant_id")));
        }
        let label = Label::parse(cell(base[3])).ok_or_else(|| {
            Error::Schema(format!("{ctx}: label must be TB+ or TB-, got {:?}", cell(base[3])))
        })?;
        let cells: Vec<&str> = meta.iter().map(|&i| cell(i)).collect();
        rows.push(ManifestRow {
            clip_id: clip_id.to_string(),
            file_path: cell(base[1]).to_string(),
            participant_id: participant_id.to_string(),
            label,
            metadata: MetadataRecord::from_cells(&cells, &ctx)?,
        });
    }
    Manifest::new(rows)
}

pub fn write_manifest<W: Write>(manifest: &Manifest, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = MANIFEST_COLUMNS
        .iter()
        .chain(METADATA_COLUMNS.iter())
        .copied()
        .collect();
    w.write_record(&header)?;
    for row in &manifest.rows {
        let mut rec = vec![
            row.clip_id.clone(),
            row.file_path.clone(),
            row.participant_id.clone(),
            row.label.to_string(),
        ];
        rec.extend(row.metadata.to_cells());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<manifest writer>", e))?;
    Ok(())
}

/// Cohort summary in the shape of a dataset description table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_participants: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_clips: usize,
    pub clips_per_participant_mean: f64,
    pub clips_per_participant_std: f64,
    pub clips_per_participant_min: usize,
    pub clips_per_participant_max: usize,
    pub total_duration_min: f64,
}

impl DatasetStats {
    fn from_counts(m: &Manifest, total_seconds: f64) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Schema("manifest has no rows".into()));
        }
        let parts = m.participants();
        let counts: Vec<usize> = parts.values().map(|(_, rows)| rows.len()).collect();
        let n = counts.len();
        let n_pos = parts.values().filter(|(l, _)| l.is_positive()).count();
        let n_clips: usize = counts.iter().sum();
        let mean = n_clips as f64 / n as f64;
        let std = if n > 1 {
            let ss: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            n_participants: n,
            n_pos,
            n_neg: n - n_pos,
            n_clips,
            clips_per_participant_mean: mean,
            clips_per_participant_std: std,
            clips_per_participant_min: counts.iter().copied().min().unwrap_or(0),
            clips_per_participant_max: counts.iter().copied().max().unwrap_or(0),
            total_duration_min: total_seconds / 60.0,
        })
    }
}

/// Counts from the manifest; duration summed over the decoded clips that
/// belong to it.
pub fn dataset_stats<T: Real>(m: &Manifest, clips: &[AudioClip<T>]) -> Result<DatasetStats> {
    let ids: HashSet<&str> = m.rows.iter().map(|r| r.clip_id.as_str()).collect();
    let seconds: f64 = clips
        .iter()
        .filter(|c| ids.contains(c.clip_id.as_str()))
        .map(AudioClip::duration_s)
        .sum();
    DatasetStats::from_counts(m, seconds)
}
