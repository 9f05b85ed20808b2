//! Correlation-derived dissimilarities and agglomerative hierarchical
//! clustering with single, complete and Ward linkage.
//!
//! Ward linkage is applied directly to the dissimilarities through the
//! Lance–Williams recursion ("Ward-on-dissimilarity"); the inputs are not
//! squared first.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `1 - |R|`
    #[default]
    Linear,
    /// `sqrt(1 - R^2)`
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Ward,
}

impl Metric {
    pub fn apply(self, r: f64) -> f64 {
        match self {
            Metric::Linear => 1.0 - r.abs(),
            Metric::Quadratic => (1.0 - r * r).max(0.0).sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Linear => "linear",
            Metric::Quadratic => "quadratic",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Metric::Linear),
            "quadratic" => Ok(Metric::Quadratic),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Ward => "ward",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "ward" => Ok(Linkage::Ward),
            other => Err(Error::InvalidParameter(format!(
                "unknown linkage '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    pub labels: Vec<String>,
    pub values: Array2<f64>,
    pub metric: Metric,
}

impl DissimilarityMatrix {
    /// Wraps an explicit matrix. It must be square, symmetric, zero on the
    /// diagonal and within [0, 1].
    pub fn new(labels: Vec<String>, values: Array2<f64>, metric: Metric) -> Result<Self> {
        let n = labels.len();
        if values.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: values.nrows(),
            });
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(Error::InvalidParameter(format!("D[{i},{i}] is not zero")));
            }
            for j in 0..n {
                let v = values[[i, j]];
                if !(0.0..=1.0).contains(&v) || v != values[[j, i]] {
                    return Err(Error::InvalidParameter(format!(
                        "D[{i},{j}] = {v} breaks symmetry or [0, 1] range"
                    )));
                }
            }
        }
        Ok(DissimilarityMatrix {
            labels,
            values,
            metric,
        })
    }

    /// Unlabeled matrix, mostly for tests and synthetic inputs.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let labels = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::new(labels, values, Metric::Linear)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn to_dissimilarity(r: &CorrelationMatrix, metric: Metric) -> DissimilarityMatrix {
    let mut values = r.values.mapv(|v| metric.apply(v));
    for i in 0..r.len() {
        values[[i, i]] = 0.0;
    }
    DissimilarityMatrix {
        labels: r.labels.clone(),
        values,
        metric,
    }
}

/// One agglomeration step. Leaves are nodes `0..N`; merge `t` (0-based)
/// creates node `N + t`. `left < right` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
}

/// Agglomerates `d` bottom-up, always merging the active pair at minimal
/// linkage distance. Equal distances are broken by the smallest
/// (min node id, max node id) key.
pub fn agglomerate(d: &DissimilarityMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InsufficientLabels(n));
    }

    // slot-indexed working state; a merged cluster reuses the lower slot
    let mut dist = d.values.clone();
    let mut node = (0..n).collect::<Vec<_>>();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..n {
                if !active[b] {
                    continue;
                }
                let h = dist[[a, b]];
                let key = (node[a].min(node[b]), node[a].max(node[b]));
                let better = match best {
                    None => true,
                    Some((bh, bkey, _, _)) => h < bh || (h == bh && key < bkey),
                };
                if better {
                    best = Some((h, key, a, b));
                }
            }
        }
        let (height, (left, right), a, b) = best.expect("at least two active clusters");

        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let updated = match linkage {
                Linkage::Single => dist[[a, k]].min(dist[[b, k]]),
                Linkage::Complete => dist[[a, k]].max(dist[[b, k]]),
                Linkage::Ward => {
                    // a1*d_ak + a2*d_bk + a3*d_ab with a1 + a2 + a3 = 1, written
                    // relative to d_ak so equal inputs come back exactly
                    let total = na + nb + nk;
                    let d_ak = dist[[a, k]];
                    d_ak + (nb + nk) / total * (dist[[b, k]] - d_ak) + nk / total * (d_ak - height)
                }
            };
            dist[[a, k]] = updated;
            dist[[k, a]] = updated;
        }

        active[b] = false;
        size[a] += size[b];
        node[a] = n + step;
        merges.push(Merge {
            left,
            right,
            height,
            size: size[a],
        });
    }

    let dendro = Dendrogram {
        leaves: d.labels.clone(),
        merges,
        linkage,
    };
    if let Some(t) = dendro.first_inversion() {
        log::warn!(
            "{linkage} linkage produced a height inversion at merge {}; heights kept as computed",
            t + 1
        );
    }
    Ok(dendro)
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Index of the first merge whose height is below its predecessor's.
    pub fn first_inversion(&self) -> Option<usize> {
        self.merges
            .windows(2)
            .position(|w| w[1].height < w[0].height)
            .map(|i| i + 1)
    }

    pub fn is_monotone(&self) -> bool {
        self.first_inversion().is_none()
    }

    /// Leaf ids below `node`, ascending.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let n = self.n_leaves();
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let m = &self.merges[x - n];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    /// Maximal subtrees whose merges are all at or below `height`. Groups
    /// are ordered by their smallest leaf id; members ascend.
    pub fn cut_at(&self, height: f64) -> Vec<Vec<usize>> {
        let n = self.n_leaves();
        let mut intact = vec![true; n + self.merges.len()];
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (t, m) in self.merges.iter().enumerate() {
            let keep = m.height <= height && intact[m.left] && intact[m.right];
            intact[n + t] = keep;
            if keep {
                let a = find(&mut parent, self.representative(m.left));
                let b = find(&mut parent, self.representative(m.right));
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
        self.groups_from(&mut parent, find)
    }

    /// Partition after the first `merges` agglomeration steps.
    pub fn partition_after(&self, merges: usize) -> Vec<Vec<usize>> {
        let n = self.n_leaves();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in self.merges.iter().take(merges) {
            let a = find(&mut parent, self.representative(m.left));
            let b = find(&mut parent, self.representative(m.right));
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi] = lo;
        }
        self.groups_from(&mut parent, find)
    }

    fn representative(&self, node: usize) -> usize {
        let n = self.n_leaves();
        let mut x = node;
        while x >= n {
            x = self.merges[x - n].left;
        }
        x
    }

    fn groups_from(
        &self,
        parent: &mut [usize],
        find: fn(&mut [usize], usize) -> usize,
    ) -> Vec<Vec<usize>> {
        let n = self.n_leaves();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for leaf in 0..n {
            let root = find(parent, leaf);
            if slot[root] == usize::MAX {
                slot[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[root]].push(leaf);
        }
        groups
    }

    /// Merge table as CSV: `left,right,height,size`.
    pub fn write_merge_csv<W: Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["left", "right", "height", "size"])
            .map_err(ser)?;
        for m in &self.merges {
            w.write_record([
                m.left.to_string(),
                m.right.to_string(),
                format!("{:.12}", m.height),
                m.size.to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Graphviz rendering; internal nodes are labelled with their height.
    pub fn write_dot<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n_leaves();
        let io = |e: std::io::Error| Error::Serialize(e.to_string());
        writeln!(out, "digraph dendrogram {{").map_err(io)?;
        writeln!(out, "  node [shape=box];").map_err(io)?;
        for (i, label) in self.leaves.iter().enumerate() {
            writeln!(out, "  n{i} [label={:?}];", label).map_err(io)?;
        }
        for (t, m) in self.merges.iter().enumerate() {
            let id = n + t;
            writeln!(
                out,
                "  n{id} [shape=point, xlabel=\"{:.4}\"];\n  n{id} -> n{};\n  n{id} -> n{};",
                m.height, m.left, m.right
            )
            .map_err(io)?;
        }
        writeln!(out, "}}").map_err(io)
    }
}
