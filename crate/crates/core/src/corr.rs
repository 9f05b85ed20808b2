//! Label covariance and correlation over a multi-hot encoding, the linear
//! penalty `1 - |R|`, and a greedy row/column seriation that pulls strongly
//! correlated labels next to each other.

use std::io::Write;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::MultiHotMatrix;

/// Symmetric label × label correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Array2<f64>,
}

impl CorrelationMatrix {
    /// Wraps a precomputed matrix, checking shape, symmetry and range.
    pub fn new(labels: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = labels.len();
        if values.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: values.nrows(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[[i, j]];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 || v != values[[j, i]] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) = {v} breaks symmetry or [-1, 1] range"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reorders rows and columns: entry (p, q) of the result is entry
    /// (order[p], order[q]) of `self`.
    pub fn permuted(&self, order: &[usize]) -> CorrelationMatrix {
        let n = order.len();
        let values = Array2::from_shape_fn((n, n), |(p, q)| self.values[[order[p], order[q]]]);
        CorrelationMatrix {
            labels: order.iter().map(|&i| self.labels[i].clone()).collect(),
            values,
        }
    }

    /// Mean absolute off-diagonal correlation.
    pub fn mean_abs_off_diagonal(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += self.values[[i, j]].abs();
                }
            }
        }
        sum / (n * (n - 1)) as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_labeled_matrix(out, &self.labels, &self.values)
    }
}

/// Writes a square matrix with the labels as header row and first column.
pub fn write_labeled_matrix<W: Write>(
    out: W,
    labels: &[String],
    values: &Array2<f64>,
) -> Result<()> {
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(ser)?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(values.row(i).iter().map(|v| format!("{v:.6}")));
        w.write_record(&row).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

/// Population covariance (divides by the number of items). Each entry is
/// computed once for i <= j, in item order, and mirrored.
pub fn covariance(m: &MultiHotMatrix) -> Result<Array2<f64>> {
    let n_items = m.n_items();
    if n_items < 2 {
        return Err(Error::InsufficientData(n_items));
    }
    let n = m.n_labels();
    let count = n_items as f64;
    let centered: Vec<Vec<f64>> = m
        .cells
        .columns()
        .into_iter()
        .map(|col| {
            let mean = col.iter().map(|&v| f64::from(v)).sum::<f64>() / count;
            col.iter().map(|&v| f64::from(v) - mean).collect()
        })
        .collect();

    let mut cv = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let s: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let v = s / count;
            cv[[i, j]] = v;
            cv[[j, i]] = v;
        }
    }
    Ok(cv)
}

/// Pearson correlation of the label columns.
///
/// A zero-variance column gets 0 against every other label and 1 on its own
/// diagonal entry, so it survives into clustering as a singleton.
pub fn correlation(m: &MultiHotMatrix) -> Result<CorrelationMatrix> {
    let cv = covariance(m)?;
    let n = cv.nrows();
    let sigma: Vec<f64> = (0..n).map(|i| cv[[i, i]].max(0.0).sqrt()).collect();
    let mut r = Array2::zeros((n, n));
    for i in 0..n {
        r[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v = if sigma[i] > 0.0 && sigma[j] > 0.0 {
                (cv[[i, j]] / (sigma[i] * sigma[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    Ok(CorrelationMatrix {
        labels: m.labels.clone(),
        values: r,
    })
}

/// `1 - |R|`: strong correlations of either sign cost little, weak ones cost most.
pub fn penalty(r: &CorrelationMatrix) -> Array2<f64> {
    let mut p = r.values.mapv(|v| 1.0 - v.abs());
    for i in 0..r.len() {
        p[[i, i]] = 0.0;
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Permutation {
    pub order: Vec<usize>,
    pub objective: f64,
}

fn diagonal_weight(d: usize) -> f64 {
    1.0 / (1.0 + d as f64)
}

/// Diagonal mass of `r` viewed in `order`: the sum over all (p, q) of
/// |R[order[p], order[q]]| / (1 + |p - q|).
pub fn seriation_objective(r: &CorrelationMatrix, order: &[usize]) -> f64 {
    let n = order.len();
    let mut total = 0.0;
    for p in 0..n {
        for q in 0..n {
            total += r.values[[order[p], order[q]]].abs() * diagonal_weight(p.abs_diff(q));
        }
    }
    total
}

/// Best-improvement pairwise-swap hill climbing from the identity order.
/// Ties between equally good swaps go to the lexicographically first
/// position pair; a swap must gain more than 1e-12 to be taken.
pub fn seriate_greedy(r: &CorrelationMatrix) -> Permutation {
    let n = r.len();
    let abs = r.values.mapv(f64::abs);
    let mut order: Vec<usize> = (0..n).collect();

    // gain of swapping positions a and b; only rows/columns a and b move
    let swap_gain = |order: &[usize], a: usize, b: usize| -> f64 {
        let (la, lb) = (order[a], order[b]);
        let mut gain = 0.0;
        for (q, &lq) in order.iter().enumerate() {
            if q == a || q == b {
                continue;
            }
            let dw = diagonal_weight(a.abs_diff(q)) - diagonal_weight(b.abs_diff(q));
            gain += (abs[[lb, lq]] - abs[[la, lq]]) * dw;
        }
        2.0 * gain
    };

    let max_rounds = n.saturating_mul(n).saturating_mul(n).max(1);
    for _ in 0..max_rounds {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            for b in (a + 1)..n {
                let g = swap_gain(&order, a, b);
                if g > 1e-12 && best.is_none_or(|(bg, _, _)| g > bg) {
                    best = Some((g, a, b));
                }
            }
        }
        match best {
            Some((_, a, b)) => order.swap(a, b),
            None => break,
        }
    }

    let objective = seriation_objective(r, &order);
    Permutation { order, objective }
}
