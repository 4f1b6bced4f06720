use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{Label, Manifest};
use crate::error::{Error, Result};

/// One participant as seen by the fold planner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub id: String,
    pub positive: bool,
    pub n_clips: usize,
}

pub fn groups_of(manifest: &Manifest) -> Vec<Group> {
    manifest
        .participants()
        .into_iter()
        .map(|(id, (label, rows))| Group {
            id: id.to_string(),
            positive: label == Label::Positive,
            n_clips: rows.len(),
        })
        .collect()
}

/// Groups for a clip-level table given as parallel participant and label slices.
pub fn groups_from_rows(participants: &[&str], positive: &[bool]) -> Result<Vec<Group>> {
    let mut map: BTreeMap<&str, (bool, usize)> = BTreeMap::new();
    for (&p, &l) in participants.iter().zip(positive) {
        let e = map.entry(p).or_insert((l, 0));
        if e.0 != l {
            return Err(Error::Integrity(format!("participant {p} has clips with both labels")));
        }
        e.1 += 1;
    }
    Ok(map
        .into_iter()
        .map(|(id, (positive, n_clips))| Group {
            id: id.to_string(),
            positive,
            n_clips,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

/// Assigns whole participants to `k` folds, balancing positives and
/// negatives per fold first and clip counts second.
pub fn stratified_group_kfold(groups: &[Group], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let n_pos = groups.iter().filter(|g| g.positive).count();
    let n_neg = groups.len() - n_pos;
    if k > n_pos || k > n_neg {
        return Err(Error::InsufficientSamples {
            needed: k,
            got: n_pos.min(n_neg),
        });
    }
    let mut order: Vec<&Group> = groups.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|a, b| b.positive.cmp(&a.positive).then(b.n_clips.cmp(&a.n_clips)));

    let mut class_count = [vec![0usize; k], vec![0usize; k]];
    let mut clip_count = vec![0usize; k];
    let mut assignments = BTreeMap::new();
    for g in order {
        let c = usize::from(g.positive);
        let fold = (0..k)
            .min_by_key(|&f| (class_count[c][f], clip_count[f], f))
            .expect("k >= 2");
        class_count[c][fold] += 1;
        clip_count[fold] += g.n_clips;
        if assignments.insert(g.id.clone(), fold).is_some() {
            return Err(Error::Integrity(format!("participant {} listed twice", g.id)));
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

impl FoldPlan {
    pub fn fold_of(&self, participant: &str) -> Option<usize> {
        self.assignments.get(participant).copied()
    }

    pub fn participants_in(&self, fold: usize) -> BTreeSet<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Row indices `(train, test)` for `fold`, given each row's participant.
    pub fn split(&self, fold: usize, row_participants: &[&str]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, p) in row_participants.iter().enumerate() {
            match self.fold_of(p) {
                Some(f) if f == fold => test.push(i),
                Some(_) => train.push(i),
                None => return Err(Error::Integrity(format!("participant {p} missing from fold plan"))),
            }
        }
        check_disjoint(&train, &test, row_participants)?;
        Ok((train, test))
    }
}

/// Fails when any participant has rows on both sides of a split.
pub fn check_disjoint(train: &[usize], test: &[usize], row_participants: &[&str]) -> Result<()> {
    let a: BTreeSet<&str> = train.iter().map(|&i| row_participants[i]).collect();
    if let Some(p) = test.iter().map(|&i| row_participants[i]).find(|p| a.contains(p)) {
        return Err(Error::Leakage(format!("participant {p} appears in train and test")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(n_pos: usize, n_neg: usize) -> Vec<Group> {
        (0..n_pos + n_neg)
            .map(|i| Group {
                id: format!("p{i:03}"),
                positive: i < n_pos,
                n_clips: 1 + (i * 7) % 5,
            })
            .collect()
    }

    #[test]
    fn one_of_each_per_fold() {
        let plan = stratified_group_kfold(&cohort(10, 10), 10, 3).unwrap();
        for f in 0..10 {
            let ps = plan.participants_in(f);
            assert_eq!(ps.len(), 2);
            let pos = ps.iter().filter(|p| p[1..].parse::<usize>().unwrap() < 10).count();
            assert_eq!(pos, 1);
        }
    }

    #[test]
    fn thirty_percent_cohort_balanced() {
        let g = cohort(30, 70);
        let plan = stratified_group_kfold(&g, 10, 9).unwrap();
        for f in 0..10 {
            let pos = g.iter().filter(|x| x.positive && plan.fold_of(&x.id) == Some(f)).count();
            assert!((pos as f64 - 3.0).abs() <= 1.0);
        }
        assert_eq!(plan.assignments.len(), 100);
    }

    #[test]
    fn too_many_folds() {
        assert!(stratified_group_kfold(&cohort(3, 20), 5, 0).is_err());
        assert!(stratified_group_kfold(&cohort(5, 5), 1, 0).is_err());
    }

    #[test]
    fn seed_changes_plan_but_is_reproducible() {
        let g = cohort(20, 20);
        let a = stratified_group_kfold(&g, 5, 1).unwrap();
        assert_eq!(a, stratified_group_kfold(&g, 5, 1).unwrap());
        assert_ne!(a.assignments, stratified_group_kfold(&g, 5, 2).unwrap().assignments);
    }

    #[test]
    fn split_is_grouped() {
        let rows = ["a", "a", "b", "c", "c", "d"];
        let g = groups_from_rows(&rows, &[true, true, true, false, false, false]).unwrap();
        let plan = stratified_group_kfold(&g, 2, 0).unwrap();
        for f in 0..2 {
            let (tr, te) = plan.split(f, &rows).unwrap();
            assert_eq!(tr.len() + te.len(), rows.len());
            check_disjoint(&tr, &te, &rows).unwrap();
        }
        assert!(check_disjoint(&[0], &[1], &rows).is_err());
    }
}
