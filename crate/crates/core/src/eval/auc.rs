use std::collections::BTreeMap;

use crate::audio::{Label, Manifest};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Area under the ROC curve in its Mann-Whitney form, with ties earning
/// half credit.
///
/// Ranks are kept doubled so every tie average is an integer; the result is
/// the exact ratio `(2 * concordant + tied) / (2 * n_pos * n_neg)` rounded
/// once.
pub fn auc<T: Real>(scores: &[T], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Layout {
            expected: positive.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("AUC scores".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as u128;
    let n_neg = positive.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i..j share the average 1-based rank (i + 1 + j) / 2
        let doubled = (i + 1 + j) as u128;
        let pos_in_tie = order[i..j].iter().filter(|&&k| positive[k]).count() as u128;
        rank_sum2 += doubled * pos_in_tie;
        i = j;
    }
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantScore {
    pub participant_id: String,
    pub label: bool,
    pub score: f64,
    pub n_clips: usize,
}

/// Averages clip scores per participant, ordered by participant id.
///
/// Each participant's scores are summed in sorted order so the result does
/// not depend on clip order.
pub fn aggregate_groups(participants: &[&str], positive: &[bool], scores: &[f64]) -> Result<Vec<ParticipantScore>> {
    if participants.len() != scores.len() || positive.len() != scores.len() {
        return Err(Error::Layout {
            expected: participants.len(),
            actual: scores.len(),
        });
    }
    let mut groups: BTreeMap<&str, (bool, Vec<f64>)> = BTreeMap::new();
    for ((&p, &l), &s) in participants.iter().zip(positive).zip(scores) {
        let e = groups.entry(p).or_insert((l, Vec::new()));
        if e.0 != l {
            return Err(Error::Integrity(format!("participant {p} has clips with both labels")));
        }
        e.1.push(s);
    }
    Ok(groups
        .into_iter()
        .map(|(p, (label, mut v))| {
            v.sort_by(f64::total_cmp);
            ParticipantScore {
                participant_id: p.to_string(),
                label,
                score: v.iter().sum::<f64>() / v.len() as f64,
                n_clips: v.len(),
            }
        })
        .collect())
}

/// Participant means for `(clip_id, score)` pairs resolved through `manifest`.
pub fn aggregate_by_participant(scores: &[(String, f64)], manifest: &Manifest) -> Result<Vec<ParticipantScore>> {
    let mut parts = Vec::with_capacity(scores.len());
    let mut labels = Vec::with_capacity(scores.len());
    for (clip, _) in scores {
        let row = manifest
            .row(clip)
            .ok_or_else(|| Error::Integrity(format!("scored clip {clip} is not in the manifest")))?;
        parts.push(row.participant_id.as_str());
        labels.push(row.label == Label::Positive);
    }
    let values: Vec<f64> = scores.iter().map(|(_, s)| *s).collect();
    aggregate_groups(&parts, &labels, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let a = auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(a, 0.75);
    }

    #[test]
    fn ordered_and_tied() {
        assert_eq!(auc(&[0.1, 0.2, 0.3, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5f32; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc)));
        assert!(matches!(auc::<f64>(&[], &[]), Err(Error::UndefinedAuc)));
        assert!(auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn participant_means() {
        let p = aggregate_groups(&["a", "a", "a", "b"], &[true, true, true, false], &[0.2, 0.4, 0.6, 0.9]).unwrap();
        assert_eq!(p[0].participant_id, "a");
        assert!((p[0].score - 0.4).abs() < 1e-15);
        assert_eq!(p[1].score, 0.9);
        let q = aggregate_groups(&["a", "b", "a", "a"], &[true, false, true, true], &[0.6, 0.9, 0.2, 0.4]).unwrap();
        assert_eq!(p, q);
        assert!(aggregate_groups(&["a", "a"], &[true, false], &[0.1, 0.2]).is_err());
    }
}
