//! Cold-start rating prediction harness.
//!
//! Ratings are turned into per-user standard scores, a learner is fit on
//! item features against those scores, and predictions are mapped back to
//! the 1..=5 scale (capped and floored) before RMSE and MAE are measured.
//! Users (new-user split) or items (new-item split) are held out entirely.

mod eval;
mod features;
mod linear;
mod normalize;
mod split;

pub use eval::{cross_validate, evaluate, rmse_mae, EvalReport, FoldResult, ModelReport};
pub use features::{assemble_features, DesignMatrix, FeatureMode, ItemFeatures};
pub use linear::{LinearRegression, Regressor, DEFAULT_RIDGE};
pub use normalize::{
    clamp_rating, denormalize, denormalize_and_clamp, global_stats, normalize, normalize_records,
    NormalizedRatings, NormalizedRecord,
};
pub use split::{make_split, ExperimentSplit, SplitKind};
