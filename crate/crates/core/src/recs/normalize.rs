use std::collections::BTreeMap;

use serde::Serialize;

use crate::ingest::{compute_user_stats, Rating, RatingsTable, UserStats};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedRecord {
    pub user: String,
    pub item: String,
    pub rating: u8,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct NormalizedRatings {
    pub records: Vec<NormalizedRecord>,
    pub stats: BTreeMap<String, UserStats>,
}

fn standard_score(rating: f64, stats: &UserStats) -> f64 {
    if stats.std > 0.0 {
        (rating - stats.mean) / stats.std
    } else {
        0.0
    }
}

/// Per-user standard scores. Users with zero spread score 0 everywhere.
pub fn normalize(table: &RatingsTable) -> NormalizedRatings {
    normalize_with(table.records(), table.user_stats().clone())
}

/// Normalizes a subset of records using statistics computed from that
/// subset only.
pub fn normalize_records(records: &[Rating]) -> NormalizedRatings {
    normalize_with(records, compute_user_stats(records))
}

fn normalize_with(records: &[Rating], stats: BTreeMap<String, UserStats>) -> NormalizedRatings {
    let records = records
        .iter()
        .map(|r| NormalizedRecord {
            user: r.user.clone(),
            item: r.item.clone(),
            rating: r.rating,
            score: standard_score(f64::from(r.rating), &stats[&r.user]),
        })
        .collect();
    NormalizedRatings { records, stats }
}

/// Mean and population standard deviation over all records, the fallback
/// for users without statistics.
pub fn global_stats(records: &[Rating]) -> UserStats {
    let n = records.len().max(1) as f64;
    let mean = records.iter().map(|r| f64::from(r.rating)).sum::<f64>() / n;
    let var = records
        .iter()
        .map(|r| (f64::from(r.rating) - mean).powi(2))
        .sum::<f64>()
        / n;
    UserStats {
        mean,
        std: var.sqrt(),
        count: records.len(),
    }
}

pub fn denormalize(score: f64, stats: &UserStats) -> f64 {
    stats.mean + stats.std * score
}

pub fn clamp_rating(r: f64) -> f64 {
    r.clamp(1.0, 5.0)
}

/// Maps a predicted standard score back to the rating scale for `user`,
/// falling back to `fallback` statistics for users never seen in training.
pub fn denormalize_and_clamp(
    score: f64,
    user: &str,
    stats: &BTreeMap<String, UserStats>,
    fallback: &UserStats,
) -> f64 {
    let s = stats.get(user).unwrap_or(fallback);
    clamp_rating(denormalize(score, s))
}
