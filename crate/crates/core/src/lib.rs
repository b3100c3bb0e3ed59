//! Weakly-supervised best-view selection for multi-view instructional video.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`pseudolabel`] scores every view's predicted captions against the
//!    view-agnostic ground-truth narration and aggregates the top-ranked
//!    views across captioners into a best-view pseudo-label set.
//! 2. [`posegeom`] turns camera extrinsics into discretized relative-pose
//!    labels for every ordered view pair.
//! 3. [`selector`] trains a small view classifier with a min-over-labels
//!    cross-entropy plus an auxiliary relative-pose loss.
//! 4. [`evalharness`] scores any selection policy with caption metrics and
//!    runs paired significance tests.
//!
//! [`synthgen`] builds synthetic corpora with a planted best view so the
//! whole loop can be checked end to end.

pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod posegeom;
pub mod pseudolabel;
pub mod selector;
pub mod synthgen;
pub mod textmetrics;

pub use error::{Error, Result};
