//! Evaluation toolkit for volumetric vessel segmentations.
//!
//! Masks and label volumes live on a regular grid ([`Dims`], [`Spacing`]).
//! [`challenge::evaluate_case`] computes every metric for a prediction and
//! its reference; [`challenge::rank_task1`] and [`challenge::rank_task2`]
//! turn per-team aggregates into leaderboards.

pub mod challenge;
pub mod error;
pub mod io;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod postprocess;
pub mod skeleton;
pub mod volume;

pub use challenge::{
    aggregate, aggregate_with, dilation_sweep, evaluate_case, evaluate_multiclass, rank_task1,
    rank_task2, Aggregate, ClassAggregates, Deviation, EvalConfig, Leaderboard, MetricReport,
    MulticlassReport,
};
pub use error::{Error, Result};
pub use metrics::{ClDiceBreakdown, ClDiceMode, GeometricConfig, MaskPair, NsdConfig};
pub use morphology::{Connectivity, DistanceMetric};
pub use skeleton::{skeletonize, Skeleton};
pub use volume::{BinaryMask, BoolOp, Dims, Grid, LabelVolume, Spacing, VesselClass};
