//! k-modes over true/false label attributes, the baseline the stereotypes
//! are compared against.
//!
//! Items are clustered, not labels: every item is a vector with one boolean
//! attribute per vocabulary label and a cluster's mode is the per-attribute
//! majority of its members.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Row = Vec<bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Huang,
    #[default]
    Cao,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Huang => "huang",
            InitKind::Cao => "cao",
        })
    }
}

impl FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "huang" => Ok(InitKind::Huang),
            "cao" => Ok(InitKind::Cao),
            other => Err(Error::InvalidParameter(format!("unknown init '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KModesModel {
    pub k: usize,
    pub modes: Vec<Row>,
    pub assignments: Vec<usize>,
    pub cost: usize,
    pub iterations: usize,
    pub init: InitKind,
    pub seed: u64,
    /// Cost after the initial assignment and after every iteration.
    pub cost_history: Vec<usize>,
}

/// Number of attributes on which `a` and `b` differ.
pub fn matching_dissimilarity(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(distance(a, b))
}

fn distance(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Distinct rows in order of first appearance.
fn distinct_rows(data: &[Row]) -> Vec<&Row> {
    let mut seen: HashMap<&Row, ()> = HashMap::new();
    let mut out = Vec::new();
    for row in data {
        if seen.insert(row, ()).is_none() {
            out.push(row);
        }
    }
    out
}

fn check_data(data: &[Row], k: usize) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::InsufficientData(0));
    }
    let width = data[0].len();
    if let Some(bad) = data.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            actual: bad.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    Ok(width)
}

/// Random initialization: each attribute of a candidate is drawn true with
/// its observed frequency, then the candidate is snapped to the nearest
/// distinct data row not already chosen (ties to the earliest row).
pub fn init_huang(data: &[Row], k: usize, seed: u64) -> Result<Vec<Row>> {
    let width = check_data(data, k)?;
    let distinct = distinct_rows(data);
    if k > distinct.len() {
        return Err(Error::TooManyClusters {
            k,
            distinct: distinct.len(),
        });
    }
    let freq: Vec<f64> = (0..width)
        .map(|j| data.iter().filter(|r| r[j]).count() as f64 / data.len() as f64)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![false; distinct.len()];
    let mut modes = Vec::with_capacity(k);
    for _ in 0..k {
        let candidate: Row = freq.iter().map(|&p| rng.random::<f64>() < p).collect();
        let nearest = (0..distinct.len())
            .filter(|&i| !taken[i])
            .min_by_key(|&i| (distance(&candidate, distinct[i]), i))
            .expect("k <= distinct rows");
        taken[nearest] = true;
        modes.push(distinct[nearest].clone());
    }
    Ok(modes)
}

/// Density-based initialization. The density of a row is its average
/// attribute-wise agreement with all rows; the first mode is the densest
/// row and each further one maximizes density times the distance to the
/// closest mode chosen so far. Deterministic.
pub fn init_cao(data: &[Row], k: usize) -> Result<Vec<Row>> {
    let width = check_data(data, k)?;
    let distinct = distinct_rows(data);
    if k > distinct.len() {
        return Err(Error::TooManyClusters {
            k,
            distinct: distinct.len(),
        });
    }
    let true_counts: Vec<usize> = (0..width)
        .map(|j| data.iter().filter(|r| r[j]).count())
        .collect();
    let n = data.len();
    // density scaled by n * width to stay in integers
    let density: Vec<usize> = distinct
        .iter()
        .map(|row| {
            row.iter()
                .zip(&true_counts)
                .map(|(&v, &t)| if v { t } else { n - t })
                .sum()
        })
        .collect();

    let first = (0..distinct.len())
        .max_by_key(|&i| (density[i], std::cmp::Reverse(i)))
        .expect("non-empty");
    let mut chosen = vec![first];
    while chosen.len() < k {
        let next = (0..distinct.len())
            .filter(|i| !chosen.contains(i))
            .max_by_key(|&i| {
                let closest = chosen
                    .iter()
                    .map(|&c| distance(distinct[i], distinct[c]))
                    .min()
                    .unwrap_or(0);
                (density[i] * closest, std::cmp::Reverse(i))
            })
            .expect("k <= distinct rows");
        chosen.push(next);
    }
    Ok(chosen.into_iter().map(|i| distinct[i].clone()).collect())
}

fn nearest_mode(row: &[bool], modes: &[Row]) -> (usize, usize) {
    modes
        .iter()
        .enumerate()
        .map(|(m, mode)| (distance(row, mode), m))
        .min()
        .expect("at least one mode")
}

fn assign(data: &[Row], modes: &[Row]) -> (Vec<usize>, usize) {
    let mut cost = 0;
    let assignments = data
        .iter()
        .map(|row| {
            let (d, m) = nearest_mode(row, modes);
            cost += d;
            m
        })
        .collect();
    (assignments, cost)
}

/// Alternates nearest-mode assignment (ties to the lowest mode index) and
/// per-attribute majority updates (ties to false) until the assignment
/// repeats or `max_iter` iterations ran.
///
/// A cluster that ends up empty is re-seeded with the row farthest from its
/// current mode (earliest row on ties).
pub fn fit(
    data: &[Row],
    k: usize,
    init: InitKind,
    seed: u64,
    max_iter: usize,
) -> Result<KModesModel> {
    let width = check_data(data, k)?;
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    let mut modes = match init {
        InitKind::Huang => init_huang(data, k, seed)?,
        InitKind::Cao => init_cao(data, k)?,
    };
    let (mut assignments, mut cost) = assign(data, &modes);
    let mut cost_history = vec![cost];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;

        let mut true_counts = vec![vec![0usize; width]; k];
        let mut sizes = vec![0usize; k];
        for (row, &m) in data.iter().zip(&assignments) {
            sizes[m] += 1;
            for (c, &v) in true_counts[m].iter_mut().zip(row) {
                *c += usize::from(v);
            }
        }
        for m in 0..k {
            if sizes[m] == 0 {
                let far = (0..data.len())
                    .max_by_key(|&i| (distance(&data[i], &modes[m]), std::cmp::Reverse(i)))
                    .expect("non-empty data");
                log::debug!("k-modes: cluster {m} empty, re-seeding with row {far}");
                modes[m] = data[far].clone();
            } else {
                modes[m] = true_counts[m].iter().map(|&t| 2 * t > sizes[m]).collect();
            }
        }

        let (next, next_cost) = assign(data, &modes);
        cost_history.push(next_cost);
        cost = next_cost;
        if next == assignments {
            break;
        }
        assignments = next;
    }

    Ok(KModesModel {
        k,
        modes,
        assignments,
        cost,
        iterations,
        init,
        seed,
        cost_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub k: usize,
    pub cost: usize,
    pub iterations: usize,
}

/// Fits every k in `k_range` and reports the final cost per k.
pub fn elbow_scan(
    data: &[Row],
    k_range: &[usize],
    init: InitKind,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<ScanPoint>> {
    if k_range.is_empty() {
        return Err(Error::InvalidParameter("empty k range".into()));
    }
    k_range
        .iter()
        .map(|&k| {
            fit(data, k, init, seed, max_iter).map(|m| ScanPoint {
                k,
                cost: m.cost,
                iterations: m.iterations,
            })
        })
        .collect()
}

/// Labels set to true in each mode.
pub fn mode_labels(model: &KModesModel, labels: &[String]) -> Vec<Vec<String>> {
    model
        .modes
        .iter()
        .map(|mode| {
            mode.iter()
                .zip(labels)
                .filter(|(&v, _)| v)
                .map(|(_, l)| l.clone())
                .collect()
        })
        .collect()
}
