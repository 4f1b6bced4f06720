use serde::{Deserialize, Serialize};

use crate::audio::{FieldValue, MetadataRecord, METADATA_COLUMNS};

pub const N_METADATA: usize = METADATA_COLUMNS.len();

/// Fill values for missing metadata: the median of each numeric field and
/// the mode of each binary field, learned from training participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataImputer {
    pub fill: Vec<f64>,
}

impl Default for MetadataImputer {
    fn default() -> Self {
        Self {
            fill: vec![0.0; N_METADATA],
        }
    }
}

impl MetadataImputer {
    pub fn fit<'a>(records: impl IntoIterator<Item = &'a MetadataRecord>) -> Self {
        let mut observed: Vec<Vec<f64>> = vec![Vec::new(); N_METADATA];
        let mut binary = [false; N_METADATA];
        for r in records {
            for (j, f) in r.fields().iter().enumerate() {
                match *f {
                    FieldValue::Numeric(Some(v)) => observed[j].push(v),
                    FieldValue::Binary(b) => {
                        binary[j] = true;
                        if let Some(b) = b {
                            observed[j].push(if b { 1.0 } else { 0.0 });
                        }
                    }
                    FieldValue::Numeric(None) => {}
                }
            }
        }
        let fill = observed
            .into_iter()
            .enumerate()
            .map(|(j, mut vals)| {
                if vals.is_empty() {
                    log::warn!("no observed values for {}; imputing 0", METADATA_COLUMNS[j]);
                    return 0.0;
                }
                if binary[j] {
                    let ones = vals.iter().filter(|&&v| v == 1.0).count();
                    // ties resolve to "no"
                    if 2 * ones > vals.len() {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    vals.sort_by(f64::total_cmp);
                    let n = vals.len();
                    if n % 2 == 1 {
                        vals[n / 2]
                    } else {
                        0.5 * (vals[n / 2 - 1] + vals[n / 2])
                    }
                }
            })
            .collect();
        Self { fill }
    }
}

/// Encodes the 16 fields (yes/male -> 1, no/female -> 0, numerics verbatim).
/// Returns the vector and the indices of fields that were imputed.
pub fn encode_metadata(r: &MetadataRecord, imputer: &MetadataImputer) -> (Vec<f64>, Vec<usize>) {
    let mut imputed = Vec::new();
    let values = r
        .fields()
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let v = match *f {
                FieldValue::Numeric(v) => v,
                FieldValue::Binary(b) => b.map(|b| if b { 1.0 } else { 0.0 }),
            };
            v.unwrap_or_else(|| {
                imputed.push(j);
                imputer.fill[j]
            })
        })
        .collect();
    (values, imputed)
}
