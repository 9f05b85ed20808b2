//! Stereotype generation for complex (multi-choice) categorical features.
//!
//! The pipeline runs bottom-up:
//!
//! * [`ingest`] loads ratings and an item catalog, filters label vocabularies
//!   and produces multi-hot encodings.
//! * [`corr`] computes the label correlation matrix and an exploratory
//!   greedy seriation of it.
//! * [`hac`] turns correlations into dissimilarities and agglomerates labels
//!   under single, complete or Ward linkage.
//! * [`stereotype`] tracks the dendrogram iteration ratio, picks the cut and
//!   emits the label groups.
//! * [`kmodes`] is the categorical clustering baseline.
//! * [`recs`] is the cold-start rating prediction harness used to compare
//!   raw labels against stereotypes.
//! * [`config`] holds the declarative pipeline configuration used by the CLI.

pub mod cli;
pub mod config;
pub mod corr;
pub mod error;
pub mod hac;
pub mod ingest;
pub mod kmodes;
pub mod recs;
pub mod stereotype;

pub use error::{Error, Result};
