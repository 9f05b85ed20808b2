use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Rating;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// Split A: held-out users have no ratings in training.
    NewUser,
    /// Split B: held-out items have no ratings in training.
    NewItem,
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitKind::NewUser => "new-user",
            SplitKind::NewItem => "new-item",
        })
    }
}

impl FromStr for SplitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "new-user" | "new_user" | "a" => Ok(SplitKind::NewUser),
            "new-item" | "new_item" | "b" => Ok(SplitKind::NewItem),
            other => Err(Error::InvalidParameter(format!("unknown split '{other}'"))),
        }
    }
}

impl SplitKind {
    fn entity(self, r: &Rating) -> &str {
        match self {
            SplitKind::NewUser => &r.user,
            SplitKind::NewItem => &r.item,
        }
    }
}

/// Indices into the record list for one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSplit {
    pub kind: SplitKind,
    pub fold: usize,
    pub folds: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl ExperimentSplit {
    /// Held-out users or items that still appear in training. Zero for a
    /// well-formed split.
    pub fn leaked_entities(&self, records: &[Rating]) -> usize {
        let train: HashSet<&str> = self
            .train
            .iter()
            .map(|&i| self.kind.entity(&records[i]))
            .collect();
        let test: HashSet<&str> = self
            .test
            .iter()
            .map(|&i| self.kind.entity(&records[i]))
            .collect();
        train.intersection(&test).count()
    }
}

/// Fold `fold` of a `folds`-way partition of the users (new-user) or items
/// (new-item). Entities are sorted, shuffled with `seed` and cut into
/// contiguous chunks, so the folds' test pools are disjoint and together
/// cover every entity; each fold holds out about 1/folds of them.
pub fn make_split(
    records: &[Rating],
    kind: SplitKind,
    folds: usize,
    fold: usize,
    seed: u64,
) -> Result<ExperimentSplit> {
    if folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    if fold >= folds {
        return Err(Error::InvalidParameter(format!(
            "fold {fold} not in 0..{folds}"
        )));
    }
    let mut entities: Vec<&str> = records
        .iter()
        .map(|r| kind.entity(r))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    entities.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = entities.len();
    let (lo, hi) = (fold * n / folds, (fold + 1) * n / folds);
    let held: HashSet<&str> = entities[lo..hi].iter().copied().collect();

    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..records.len()).partition(|&i| held.contains(kind.entity(&records[i])));
    if train.is_empty() || test.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "{kind} fold {fold}/{folds}: {} train, {} test records",
            train.len(),
            test.len()
        )));
    }
    Ok(ExperimentSplit {
        kind,
        fold,
        folds,
        seed,
        train,
        test,
    })
}
