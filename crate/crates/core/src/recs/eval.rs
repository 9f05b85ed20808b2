use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::Rating;

use super::features::{assemble_features, FeatureMode, ItemFeatures};
use super::linear::Regressor;
use super::normalize::{denormalize_and_clamp, global_stats, normalize_records};
use super::split::{make_split, ExperimentSplit, SplitKind};

/// Root mean squared error and mean absolute error.
pub fn rmse_mae(predicted: &[f64], actual: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::DegenerateSplit("empty test set".into()));
    }
    let n = actual.len() as f64;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (p, a) in predicted.iter().zip(actual) {
        let e = p - a;
        sq += e * e;
        abs += e.abs();
    }
    Ok(((sq / n).sqrt(), abs / n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub rmse: f64,
    pub mae: f64,
    pub wall_seconds: f64,
    pub train_records: usize,
    pub test_records: usize,
    pub skipped: usize,
    /// Lowest and highest clamped prediction.
    pub prediction_range: (f64, f64),
}

/// Trains on the split's training records and scores its test records.
///
/// Normalization statistics come from the training records only; test users
/// without them are denormalized with the global training mean and spread.
/// Predictions are capped/floored to 1..=5 before the metrics. The wall time
/// covers design assembly, fitting and prediction.
pub fn evaluate<R: Regressor>(
    records: &[Rating],
    split: &ExperimentSplit,
    features: &ItemFeatures,
    learner: &mut R,
) -> Result<FoldResult> {
    let start = Instant::now();

    let train: Vec<Rating> = split.train.iter().map(|&i| records[i].clone()).collect();
    let normalized = normalize_records(&train);
    let design = assemble_features(
        normalized
            .records
            .iter()
            .map(|r| (r.item.as_str(), r.score)),
        features,
    );
    if design.rows() == 0 {
        return Err(Error::DegenerateSplit(
            "no training record has catalog features".into(),
        ));
    }
    learner.fit(&design)?;

    let fallback = global_stats(&train);
    let test: Vec<&Rating> = split.test.iter().map(|&i| &records[i]).collect();
    let test_design = assemble_features(test.iter().map(|r| (r.item.as_str(), 0.0)), features);
    let mut predicted = Vec::with_capacity(test_design.rows());
    let mut actual = Vec::with_capacity(test_design.rows());
    for (row, &pos) in test_design.kept.iter().enumerate() {
        let r = test[pos];
        let score = learner.predict(test_design.row(row));
        predicted.push(denormalize_and_clamp(
            score,
            &r.user,
            &normalized.stats,
            &fallback,
        ));
        actual.push(f64::from(r.rating));
    }
    let (rmse, mae) = rmse_mae(&predicted, &actual)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let range = predicted
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    Ok(FoldResult {
        fold: split.fold,
        rmse,
        mae,
        wall_seconds,
        train_records: design.rows(),
        test_records: predicted.len(),
        skipped: design.skipped + test_design.skipped,
        prediction_range: range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub learner: String,
    pub split: SplitKind,
    pub mode: FeatureMode,
    pub feature_width: usize,
    pub complex_width: usize,
    /// Means over folds.
    pub rmse: f64,
    pub mae: f64,
    pub wall_seconds: f64,
    pub folds: Vec<FoldResult>,
}

/// Runs every fold of a `folds`-way split sequentially, fitting a fresh
/// clone of `learner` each time, and averages the fold metrics.
pub fn cross_validate<R: Regressor + Clone>(
    records: &[Rating],
    features: &ItemFeatures,
    kind: SplitKind,
    folds: usize,
    seed: u64,
    learner: &R,
) -> Result<ModelReport> {
    if folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    let mut results = Vec::with_capacity(folds);
    for fold in 0..folds {
        let split = make_split(records, kind, folds, fold, seed)?;
        let mut model = learner.clone();
        results.push(evaluate(records, &split, features, &mut model)?);
    }
    let n = folds as f64;
    let mean = |f: fn(&FoldResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    Ok(ModelReport {
        learner: learner.name().to_string(),
        split: kind,
        mode: features.mode,
        feature_width: features.width(),
        complex_width: features.complex_width,
        rmse: mean(|r| r.rmse),
        mae: mean(|r| r.mae),
        wall_seconds: mean(|r| r.wall_seconds),
        folds: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub seed: u64,
    pub folds: usize,
    pub reports: Vec<ModelReport>,
}

impl EvalReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// One row per (learner, split, mode), shaped like a results table.
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "learner",
            "split",
            "mode",
            "complex_width",
            "rmse",
            "mae",
            "wall_seconds",
        ])
        .map_err(ser)?;
        for r in &self.reports {
            w.write_record([
                r.learner.clone(),
                r.split.to_string(),
                r.mode.to_string(),
                r.complex_width.to_string(),
                format!("{:.4}", r.rmse),
                format!("{:.4}", r.mae),
                format!("{:.4}", r.wall_seconds),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialize(e.to_string()))
    }
}
