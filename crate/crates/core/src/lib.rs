//! Evaluation of perivascular-space segmentations.
//!
//! Read and write NIfTI-1 volumes, preprocess them, label connected
//! components, and score an algorithm's masks against manual masks at voxel
//! and cluster level across cross-validation schedules.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod nifti;
pub mod report;
pub mod schedules;
pub mod synth;
pub mod volume;
pub mod volume_ops;

pub use error::{Error, Result};
pub use volume::{Mask, Spacing, Volume};
