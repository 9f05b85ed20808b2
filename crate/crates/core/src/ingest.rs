//! Ratings and item-catalog loading, label vocabularies and multi-hot
//! encoding of complex categorical features.
//!
//! Labels are matched case-insensitively after trimming and keep the casing
//! under which they were first seen in the catalog.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_DELIMITER: char = '|';

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rating {
    pub user: String,
    pub item: String,
    pub rating: u8,
}

/// Per-user mean and population standard deviation of the raw ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct RatingsTable {
    records: Vec<Rating>,
    user_stats: BTreeMap<String, UserStats>,
}

impl RatingsTable {
    pub fn from_records(records: Vec<Rating>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| !(1..=5).contains(&r.rating)) {
            return Err(Error::InvalidParameter(format!(
                "rating {} for ({}, {}) outside 1..=5",
                bad.rating, bad.user, bad.item
            )));
        }
        let user_stats = compute_user_stats(&records);
        Ok(RatingsTable {
            records,
            user_stats,
        })
    }

    pub fn records(&self) -> &[Rating] {
        &self.records
    }

    pub fn user_stats(&self) -> &BTreeMap<String, UserStats> {
        &self.user_stats
    }

    pub fn stats(&self, user: &str) -> Option<UserStats> {
        self.user_stats.get(user).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the records back out in the same CSV layout `load_ratings` reads.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        w.write_record(["user_id", "item_id", "rating"])
            .map_err(ser)?;
        for r in &self.records {
            w.write_record([r.user.as_str(), r.item.as_str(), &r.rating.to_string()])
                .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Mean and population standard deviation per user, two-pass.
pub fn compute_user_stats(records: &[Rating]) -> BTreeMap<String, UserStats> {
    let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        grouped
            .entry(&r.user)
            .or_default()
            .push(f64::from(r.rating));
    }
    grouped
        .into_iter()
        .map(|(user, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (
                user.to_string(),
                UserStats {
                    mean,
                    std: var.sqrt(),
                    count: values.len(),
                },
            )
        })
        .collect()
}

pub fn load_ratings(path: impl AsRef<Path>) -> Result<RatingsTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let expected = ["user_id", "item_id", "rating"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(
            1,
            format!("expected header user_id,item_id,rating, got {:?}", headers),
        ));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, got {}", row.len()),
            ));
        }
        let value: i64 = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("rating '{}' is not an integer", &row[2])))?;
        if !(1..=5).contains(&value) {
            return Err(Error::RatingOutOfRange {
                path: path.to_path_buf(),
                line,
                value,
            });
        }
        if row[0].is_empty() || row[1].is_empty() {
            return Err(parse_err(line, "empty user_id or item_id".into()));
        }
        records.push(Rating {
            user: row[0].to_string(),
            item: row[1].to_string(),
            rating: value as u8,
        });
    }
    RatingsTable::from_records(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    /// One label list per complex feature, in catalog feature order.
    pub labels: Vec<Vec<String>>,
    /// One raw cell per simple feature, in catalog feature order.
    pub simple: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ItemCatalog {
    complex_features: Vec<String>,
    simple_features: Vec<String>,
    items: Vec<Item>,
    index: HashMap<String, usize>,
    // per complex feature: lowercase key -> first-seen casing
    canonical: Vec<HashMap<String, String>>,
}

fn label_key(label: &str) -> String {
    label.trim().to_lowercase()
}

impl ItemCatalog {
    pub fn new(complex_features: Vec<String>, simple_features: Vec<String>) -> Self {
        let canonical = vec![HashMap::new(); complex_features.len()];
        ItemCatalog {
            complex_features,
            simple_features,
            items: Vec::new(),
            index: HashMap::new(),
            canonical,
        }
    }

    /// Convenience constructor for a catalog with a single complex feature.
    pub fn single_feature<S: AsRef<str>>(feature: &str, items: &[(&str, Vec<S>)]) -> Result<Self> {
        let mut catalog = ItemCatalog::new(vec![feature.to_string()], Vec::new());
        for (id, labels) in items {
            let labels: Vec<&str> = labels.iter().map(|s| s.as_ref()).collect();
            catalog.push_item(id, vec![labels], Vec::new())?;
        }
        Ok(catalog)
    }

    /// Adds an item. Labels are trimmed, blank labels dropped, and duplicates
    /// (case-insensitive) collapsed.
    pub fn push_item<S: AsRef<str>>(
        &mut self,
        id: &str,
        complex_cells: Vec<Vec<S>>,
        simple_cells: Vec<String>,
    ) -> Result<()> {
        if complex_cells.len() != self.complex_features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.complex_features.len(),
                actual: complex_cells.len(),
            });
        }
        if simple_cells.len() != self.simple_features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.simple_features.len(),
                actual: simple_cells.len(),
            });
        }
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::MissingItemId);
        }
        if self.index.contains_key(id) {
            return Err(Error::InvalidParameter(format!("duplicate item id '{id}'")));
        }

        let mut labels = Vec::with_capacity(complex_cells.len());
        for (f, cell) in complex_cells.iter().enumerate() {
            let mut seen = Vec::<String>::new();
            let mut out = Vec::new();
            for raw in cell {
                let trimmed = raw.as_ref().trim();
                if trimmed.is_empty() {
                    continue;
                }
                let key = label_key(trimmed);
                if seen.contains(&key) {
                    continue;
                }
                let canon = self.canonical[f]
                    .entry(key.clone())
                    .or_insert_with(|| trimmed.to_string())
                    .clone();
                seen.push(key);
                out.push(canon);
            }
            labels.push(out);
        }

        self.index.insert(id.to_string(), self.items.len());
        self.items.push(Item {
            id: id.to_string(),
            labels,
            simple: simple_cells,
        });
        Ok(())
    }

    pub fn complex_features(&self) -> &[String] {
        &self.complex_features
    }

    pub fn simple_features(&self) -> &[String] {
        &self.simple_features
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn feature_index(&self, feature: &str) -> Result<usize> {
        self.complex_features
            .iter()
            .position(|f| f == feature)
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
    }

    pub fn labels_of<'a>(&'a self, item: &'a Item, feature: &str) -> Result<&'a [String]> {
        Ok(&item.labels[self.feature_index(feature)?])
    }
}

pub fn load_catalog(path: impl AsRef<Path>, complex_features: &[&str]) -> Result<ItemCatalog> {
    load_catalog_with(path, complex_features, DEFAULT_DELIMITER)
}

/// Loads a catalog from CSV, or from JSON when the extension is `.json`.
///
/// Every column other than `item_id` and the requested complex features is
/// kept as a simple feature.
pub fn load_catalog_with(
    path: impl AsRef<Path>,
    complex_features: &[&str],
    delimiter: char,
) -> Result<ItemCatalog> {
    let path = path.as_ref();
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    let (header, rows) = if is_json {
        read_json_table(path, delimiter)?
    } else {
        read_csv_table(path)?
    };

    let id_col = header
        .iter()
        .position(|h| h == "item_id")
        .ok_or(Error::MissingItemId)?;
    let mut complex_cols = Vec::with_capacity(complex_features.len());
    for f in complex_features {
        let col = header
            .iter()
            .position(|h| h == f)
            .ok_or_else(|| Error::UnknownFeature(f.to_string()))?;
        complex_cols.push(col);
    }
    let simple_cols: Vec<usize> = (0..header.len())
        .filter(|c| *c != id_col && !complex_cols.contains(c))
        .collect();

    let mut catalog = ItemCatalog::new(
        complex_features.iter().map(|s| s.to_string()).collect(),
        simple_cols.iter().map(|&c| header[c].clone()).collect(),
    );
    for (line, row) in rows {
        let id = row[id_col].trim();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "missing item_id".into(),
            });
        }
        let complex: Vec<Vec<&str>> = complex_cols
            .iter()
            .map(|&c| row[c].split(delimiter).collect())
            .collect();
        let simple = simple_cols
            .iter()
            .map(|&c| row[c].trim().to_string())
            .collect();
        catalog
            .push_item(id, complex, simple)
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
    }
    Ok(catalog)
}

type Table = (Vec<String>, Vec<(u64, Vec<String>)>);

fn read_csv_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for row in reader.records() {
        let row =
            row.map_err(|e| parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", header.len(), row.len()),
            ));
        }
        rows.push((line, row.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

/// JSON catalogs are an array of flat objects. Complex cells may be either
/// arrays of strings or delimiter-joined strings; arrays are re-joined so both
/// forms go through the same parsing.
fn read_json_table(path: &Path, delimiter: char) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
    let objects = value.as_array().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "expected a JSON array of objects".into(),
    })?;

    let mut header: Vec<String> = Vec::new();
    for obj in objects.iter().filter_map(|o| o.as_object()) {
        for key in obj.keys() {
            if !header.contains(key) {
                header.push(key.clone());
            }
        }
    }
    let mut rows = Vec::with_capacity(objects.len());
    for (i, obj) in objects.iter().enumerate() {
        let obj = obj.as_object().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: "array element is not an object".into(),
        })?;
        let row = header
            .iter()
            .map(|h| match obj.get(h) {
                None | Some(serde_json::Value::Null) => String::new(),
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Array(items)) => items
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(str::to_string)
                            .unwrap_or_else(|| v.to_string())
                    })
                    .collect::<Vec<_>>()
                    .join(&delimiter.to_string()),
                Some(other) => other.to_string(),
            })
            .collect();
        rows.push((i as u64 + 1, row));
    }
    Ok((header, rows))
}

/// Retained labels of one complex feature, ordered by (count desc, label asc).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelVocabulary {
    pub feature: String,
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    pub min_count: usize,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

impl LabelVocabulary {
    /// Builds a vocabulary from explicit (label, count) pairs. The ordering
    /// invariant is re-established here.
    pub fn from_counts(feature: &str, counts: Vec<(String, usize)>, min_count: usize) -> Self {
        let mut counts = counts;
        counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let lookup = counts
            .iter()
            .enumerate()
            .map(|(i, (l, _))| (label_key(l), i))
            .collect();
        let (labels, counts) = counts.into_iter().unzip();
        LabelVocabulary {
            feature: feature.to_string(),
            labels,
            counts,
            min_count,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.lookup.get(&label_key(label)).copied()
    }
}

pub fn build_vocabulary(
    catalog: &ItemCatalog,
    feature: &str,
    min_count: usize,
) -> Result<LabelVocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidParameter("min_count must be >= 1".into()));
    }
    let f = catalog.feature_index(feature)?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for item in catalog.items() {
        for label in &item.labels[f] {
            *counts.entry(label.as_str()).or_default() += 1;
        }
    }
    let retained: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(l, c)| (l.to_string(), c))
        .collect();
    if retained.is_empty() {
        return Err(Error::NoLabels {
            feature: feature.to_string(),
            min_count,
        });
    }
    Ok(LabelVocabulary::from_counts(feature, retained, min_count))
}

/// Items × labels binary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHotMatrix {
    pub item_ids: Vec<String>,
    pub labels: Vec<String>,
    pub cells: Array2<u8>,
}

impl MultiHotMatrix {
    /// Builds a matrix from 0/1 rows; item ids and labels are synthesized.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let labels = (0..n_cols).map(|j| format!("L{j}")).collect();
        Self::from_rows_labeled(rows, labels)
    }

    pub fn from_rows_labeled(rows: &[Vec<u8>], labels: Vec<String>) -> Result<Self> {
        let n_cols = labels.len();
        let mut cells = Array2::zeros((rows.len(), n_cols));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::InvalidParameter(format!(
                        "cell ({i},{j}) = {v} is not binary"
                    )));
                }
                cells[[i, j]] = v;
            }
        }
        Ok(MultiHotMatrix {
            item_ids: (0..rows.len()).map(|i| format!("item{i}")).collect(),
            labels,
            cells,
        })
    }

    pub fn n_items(&self) -> usize {
        self.cells.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.cells.ncols()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        self.cells
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|&v| v as usize).sum())
            .collect()
    }

    /// Rows as true/false attribute vectors, the k-modes view of the data.
    pub fn bool_rows(&self) -> Vec<Vec<bool>> {
        self.cells
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| v == 1).collect())
            .collect()
    }
}

pub fn encode_multi_hot(catalog: &ItemCatalog, vocab: &LabelVocabulary) -> Result<MultiHotMatrix> {
    if vocab.is_empty() {
        return Err(Error::NoLabels {
            feature: vocab.feature.clone(),
            min_count: vocab.min_count,
        });
    }
    let f = catalog.feature_index(&vocab.feature)?;
    let mut cells = Array2::zeros((catalog.len(), vocab.len()));
    for (i, item) in catalog.items().iter().enumerate() {
        for label in &item.labels[f] {
            if let Some(j) = vocab.index_of(label) {
                cells[[i, j]] = 1;
            }
        }
    }
    Ok(MultiHotMatrix {
        item_ids: catalog.items().iter().map(|it| it.id.clone()).collect(),
        labels: vocab.labels.clone(),
        cells,
    })
}
