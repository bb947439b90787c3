use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitKind {
    #[default]
    Grouped,
    Random,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Grouped => "grouped",
            SplitKind::Random => "random",
        }
    }
}

/// Fold index per row for one seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub fold_of: Vec<usize>,
    pub n_folds: usize,
    pub kind: SplitKind,
}

impl FoldPlan {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = alloc::vec![0; self.n_folds];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Folds that keep every group whole.
///
/// Distinct labels are taken in sorted order and shuffled with
/// [`SplitMix64`] seeded by `seed`; a stable sort by size (largest first)
/// follows, so the shuffle only decides among equal-size groups. Each group
/// then goes to the fold with the fewest rows so far, lowest index on ties.
pub fn group_kfold(groups: &[String], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::range("n_folds", alloc::format!("{n_folds} < 2")));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    if members.len() < n_folds {
        return Err(Error::TooFewGroups {
            groups: members.len(),
            folds: n_folds,
        });
    }
    let mut order: Vec<&Vec<usize>> = members.values().collect();
    SplitMix64::new(seed).shuffle(&mut order);
    order.sort_by_key(|g| core::cmp::Reverse(g.len()));

    let mut load = alloc::vec![0usize; n_folds];
    let mut fold_of = alloc::vec![0usize; groups.len()];
    for rows in order {
        let target = (0..n_folds).min_by_key(|&f| (load[f], f)).expect("n_folds >= 2");
        load[target] += rows.len();
        for &i in rows {
            fold_of[i] = target;
        }
    }
    Ok(FoldPlan {
        fold_of,
        n_folds,
        kind: SplitKind::Grouped,
    })
}

/// Shuffled rows dealt round-robin into `n_folds` folds.
pub fn random_kfold(n: usize, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 || n < n_folds {
        return Err(Error::range(
            "n_folds",
            alloc::format!("cannot split {n} rows into {n_folds} folds"),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut idx);
    let mut fold_of = alloc::vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold_of[i] = pos % n_folds;
    }
    Ok(FoldPlan {
        fold_of,
        n_folds,
        kind: SplitKind::Random,
    })
}

/// True when no label appears in two folds.
pub fn audit_group_atomicity(groups: &[String], plan: &FoldPlan) -> bool {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    groups
        .iter()
        .zip(&plan.fold_of)
        .all(|(g, &f)| *seen.entry(g.as_str()).or_insert(f) == f)
}
