use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ItemCatalog, LabelVocabulary};
use crate::stereotype::{project_item_with, Activation, StereotypeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Complex features as raw multi-hot label columns.
    Baseline,
    /// Complex features as one column per stereotype.
    Stereotype,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Baseline => "baseline",
            FeatureMode::Stereotype => "stereotype",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(FeatureMode::Baseline),
            "stereotype" | "stereotypes" => Ok(FeatureMode::Stereotype),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// Fixed-width feature vector per catalog item.
///
/// Layout: intercept, simple features, then the complex-feature block.
/// Numeric simple columns are z-scored over the catalog (blank cells become
/// 0); any other simple column is one-hot encoded over its sorted values.
#[derive(Debug, Clone)]
pub struct ItemFeatures {
    pub mode: FeatureMode,
    pub columns: Vec<String>,
    pub simple_width: usize,
    pub complex_width: usize,
    rows: HashMap<String, Vec<f64>>,
}

enum SimpleColumn {
    Numeric { mean: f64, std: f64 },
    Categorical(Vec<String>),
}

impl ItemFeatures {
    /// Builds item vectors. `vocabularies` is used in baseline mode and
    /// `stereotypes` in stereotype mode; both are given per complex feature.
    pub fn build(
        catalog: &ItemCatalog,
        mode: FeatureMode,
        vocabularies: &[LabelVocabulary],
        stereotypes: &[StereotypeSet],
        activation: Activation,
    ) -> Result<Self> {
        match mode {
            FeatureMode::Baseline if vocabularies.is_empty() => {
                return Err(Error::InvalidParameter(
                    "baseline mode needs vocabularies".into(),
                ))
            }
            FeatureMode::Stereotype if stereotypes.is_empty() => {
                return Err(Error::InvalidParameter(
                    "stereotype mode needs stereotype sets".into(),
                ))
            }
            _ => {}
        }

        let mut columns = vec!["intercept".to_string()];
        let simple: Vec<SimpleColumn> = (0..catalog.simple_features().len())
            .map(|c| simple_column(catalog, c))
            .collect();
        for (name, col) in catalog.simple_features().iter().zip(&simple) {
            match col {
                SimpleColumn::Numeric { .. } => columns.push(name.clone()),
                SimpleColumn::Categorical(values) => {
                    columns.extend(values.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        let simple_width = columns.len() - 1;

        let feature_ids: Vec<usize> = match mode {
            FeatureMode::Baseline => vocabularies
                .iter()
                .map(|v| catalog.feature_index(&v.feature))
                .collect::<Result<_>>()?,
            FeatureMode::Stereotype => stereotypes
                .iter()
                .map(|s| catalog.feature_index(&s.feature))
                .collect::<Result<_>>()?,
        };
        match mode {
            FeatureMode::Baseline => {
                for v in vocabularies {
                    columns.extend(v.labels.iter().map(|l| format!("{}:{l}", v.feature)));
                }
            }
            FeatureMode::Stereotype => {
                for s in stereotypes {
                    columns.extend((0..s.len()).map(|g| format!("{}:group{}", s.feature, g + 1)));
                }
            }
        }
        let complex_width = columns.len() - 1 - simple_width;

        let mut rows = HashMap::with_capacity(catalog.len());
        for item in catalog.items() {
            let mut row = Vec::with_capacity(columns.len());
            row.push(1.0);
            for (cell, col) in item.simple.iter().zip(&simple) {
                match col {
                    SimpleColumn::Numeric { mean, std } => {
                        let v = cell
                            .trim()
                            .parse::<f64>()
                            .map(|x| (x - mean) / std)
                            .unwrap_or(0.0);
                        row.push(v);
                    }
                    SimpleColumn::Categorical(values) => {
                        row.extend(values.iter().map(|v| f64::from(u8::from(v == cell.trim()))))
                    }
                }
            }
            match mode {
                FeatureMode::Baseline => {
                    for (v, &f) in vocabularies.iter().zip(&feature_ids) {
                        let mut block = vec![0.0; v.len()];
                        for label in &item.labels[f] {
                            if let Some(j) = v.index_of(label) {
                                block[j] = 1.0;
                            }
                        }
                        row.extend(block);
                    }
                }
                FeatureMode::Stereotype => {
                    for (s, &f) in stereotypes.iter().zip(&feature_ids) {
                        row.extend(project_item_with(&item.labels[f], s, activation));
                    }
                }
            }
            rows.insert(item.id.clone(), row);
        }

        Ok(ItemFeatures {
            mode,
            columns,
            simple_width,
            complex_width,
            rows,
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, item: &str) -> Option<&[f64]> {
        self.rows.get(item).map(Vec::as_slice)
    }
}

fn simple_column(catalog: &ItemCatalog, c: usize) -> SimpleColumn {
    let cells: Vec<&str> = catalog
        .items()
        .iter()
        .map(|it| it.simple[c].trim())
        .filter(|s| !s.is_empty())
        .collect();
    let numeric: Option<Vec<f64>> = cells.iter().map(|s| s.parse::<f64>().ok()).collect();
    match numeric {
        Some(values) if !values.is_empty() => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            SimpleColumn::Numeric {
                mean,
                std: if std > 0.0 { std } else { 1.0 },
            }
        }
        _ => SimpleColumn::Categorical(
            cells
                .into_iter()
                .map(str::to_string)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        ),
    }
}

/// Row-major design matrix with one row per usable rating record.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub width: usize,
    pub data: Vec<f64>,
    pub targets: Vec<f64>,
    /// Positions (in the input) of the records that made it into the matrix.
    pub kept: Vec<usize>,
    /// Records whose item is not in the catalog.
    pub skipped: usize,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// One design row per (item, target) pair; items missing from the feature
/// table are skipped and counted.
pub fn assemble_features<'a, I>(pairs: I, features: &ItemFeatures) -> DesignMatrix
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let width = features.width();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut kept = Vec::new();
    let mut skipped = 0;
    for (pos, (item, target)) in pairs.into_iter().enumerate() {
        match features.get(item) {
            Some(row) => {
                data.extend_from_slice(row);
                targets.push(target);
                kept.push(pos);
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} rating records reference items missing from the catalog");
    }
    DesignMatrix {
        width,
        data,
        targets,
        kept,
        skipped,
    }
}
