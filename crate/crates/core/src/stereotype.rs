//! Automatic stereotype extraction from a label dendrogram.
//!
//! Along the merge sequence we track how many non-trivial clusters (two or
//! more labels) are present and their mean size. The dendrogram iteration ratio is
//! mean size over cluster count; the cut goes after the rightmost local
//! minimum of that ratio, halfway between the two neighbouring merge
//! heights. A ratio that never decreases means the labels only ever feed
//! one growing cluster, and no stereotypes are produced.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hac::{Dendrogram, Linkage, Metric};

const RATIO_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationPoint {
    /// 1-based merge iteration.
    pub iteration: usize,
    pub clusters: usize,
    pub mean_size: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSeries {
    pub points: Vec<IterationPoint>,
}

impl IterationSeries {
    pub fn ratios(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ratio).collect()
    }

    pub fn from_ratios(ratios: &[f64]) -> Self {
        IterationSeries {
            points: ratios
                .iter()
                .enumerate()
                .map(|(i, &ratio)| IterationPoint {
                    iteration: i + 1,
                    clusters: 0,
                    mean_size: f64::NAN,
                    ratio,
                })
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "clusters", "mean_size", "ratio"])
            .map_err(ser)?;
        for p in &self.points {
            w.write_record([
                p.iteration.to_string(),
                p.clusters.to_string(),
                format!("{:.12}", p.mean_size),
                format!("{:.12}", p.ratio),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialize(e.to_string()))
    }
}

pub fn iteration_series(dendro: &Dendrogram) -> IterationSeries {
    let n = dendro.n_leaves();
    // size of every node that is currently a top-level cluster of size >= 2
    let mut live: Vec<Option<usize>> = vec![None; n + dendro.merges.len()];
    let mut clusters = 0usize;
    let mut members = 0usize;
    let mut points = Vec::with_capacity(dendro.merges.len());

    for (t, m) in dendro.merges.iter().enumerate() {
        for child in [m.left, m.right] {
            if let Some(size) = live[child].take() {
                clusters -= 1;
                members -= size;
            }
        }
        live[n + t] = Some(m.size);
        clusters += 1;
        members += m.size;

        let mean_size = members as f64 / clusters as f64;
        points.push(IterationPoint {
            iteration: t + 1,
            clusters,
            mean_size,
            ratio: mean_size / clusters as f64,
        });
    }
    IterationSeries { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cut {
    /// Cut after this 1-based merge iteration.
    At(usize),
    NoStructure,
}

/// Rightmost local minimum of the iteration ratio.
///
/// The last iteration never qualifies, the first does when it is followed by
/// a larger value, and a plateau counts once at its right end. A
/// non-decreasing series has no structure.
pub fn find_cut(series: &IterationSeries) -> Cut {
    let r = series.ratios();
    let len = r.len();
    if len < 2 || r.windows(2).all(|w| w[1] >= w[0] - RATIO_EPS) {
        return Cut::NoStructure;
    }
    let same = |a: f64, b: f64| (a - b).abs() <= RATIO_EPS;
    // 0-based t, so t + 1 is the iteration; t = len - 1 is excluded
    for t in (0..len - 1).rev() {
        if r[t + 1] - r[t] <= RATIO_EPS {
            continue;
        }
        let mut s = t;
        while s > 0 && same(r[s - 1], r[t]) {
            s -= 1;
        }
        if s == 0 || r[s - 1] > r[t] {
            return Cut::At(t + 1);
        }
    }
    Cut::NoStructure
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereotypeSet {
    pub feature: String,
    pub metric: Metric,
    pub linkage: Linkage,
    /// `None` when the feature shows no structure; every label is then its
    /// own group.
    pub cut_height: Option<f64>,
    pub groups: Vec<Vec<String>>,
}

impl StereotypeSet {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_of(&self, label: &str) -> Option<usize> {
        let key = label.trim().to_lowercase();
        self.groups
            .iter()
            .position(|g| g.iter().any(|l| l.to_lowercase() == key))
    }

    pub fn n_labels(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    fn from_partition(
        dendro: &Dendrogram,
        feature: &str,
        metric: Metric,
        cut_height: Option<f64>,
        partition: Vec<Vec<usize>>,
    ) -> Self {
        StereotypeSet {
            feature: feature.to_string(),
            metric,
            linkage: dendro.linkage,
            cut_height,
            groups: partition
                .into_iter()
                .map(|g| g.into_iter().map(|i| dendro.leaves[i].clone()).collect())
                .collect(),
        }
    }
}

/// Cuts halfway between merge heights `c` and `c + 1` (1-based) and names
/// the groups by their labels. Singleton groups are kept.
pub fn extract_stereotypes(
    dendro: &Dendrogram,
    c: usize,
    feature: &str,
    metric: Metric,
) -> Result<StereotypeSet> {
    let n = dendro.n_leaves();
    if n < 3 || c == 0 || c > n - 2 {
        return Err(Error::CutOutOfRange {
            c,
            max: n.saturating_sub(2),
        });
    }
    let height = 0.5 * (dendro.merges[c - 1].height + dendro.merges[c].height);
    let partition = dendro.cut_at(height);
    Ok(StereotypeSet::from_partition(
        dendro,
        feature,
        metric,
        Some(height),
        partition,
    ))
}

/// Runs the full rule: series, cut search, extraction. Without structure
/// each label becomes its own group.
pub fn generate_stereotypes(
    dendro: &Dendrogram,
    feature: &str,
    metric: Metric,
) -> Result<(StereotypeSet, IterationSeries, Cut)> {
    let series = iteration_series(dendro);
    let cut = find_cut(&series);
    let set = match cut {
        Cut::At(c) => extract_stereotypes(dendro, c, feature, metric)?,
        Cut::NoStructure => {
            let singletons = (0..dendro.n_leaves()).map(|i| vec![i]).collect();
            StereotypeSet::from_partition(dendro, feature, metric, None, singletons)
        }
    };
    Ok((set, series, cut))
}

/// How an item's labels turn into a value per stereotype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// 1 if the item carries any label of the group.
    #[default]
    Binary,
    /// Number of the group's labels the item carries.
    Count,
    /// Count divided by group size.
    Fraction,
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Activation::Binary),
            "count" => Ok(Activation::Count),
            "fraction" => Ok(Activation::Fraction),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Binary => "binary",
            Activation::Count => "count",
            Activation::Fraction => "fraction",
        })
    }
}

pub fn project_item<S: AsRef<str>>(labels: &[S], set: &StereotypeSet) -> Vec<f64> {
    project_item_with(labels, set, Activation::Binary)
}

pub fn project_item_with<S: AsRef<str>>(
    labels: &[S],
    set: &StereotypeSet,
    activation: Activation,
) -> Vec<f64> {
    let mut hits = vec![0usize; set.len()];
    let mut seen: Vec<String> = Vec::new();
    for label in labels {
        let key = label.as_ref().trim().to_lowercase();
        if seen.contains(&key) {
            continue;
        }
        if let Some(g) = set.group_of(&key) {
            hits[g] += 1;
        }
        seen.push(key);
    }
    hits.iter()
        .zip(&set.groups)
        .map(|(&h, g)| match activation {
            Activation::Binary => f64::from(u8::from(h > 0)),
            Activation::Count => h as f64,
            Activation::Fraction => h as f64 / g.len() as f64,
        })
        .collect()
}
