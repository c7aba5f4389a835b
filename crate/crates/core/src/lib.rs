//! Repetition counting and segmentation of skeleton exercise recordings.
//!
//! The pipeline runs skeleton sequences through feature extraction and a
//! recurrent sequence model, then decodes the per-frame output into
//! repetition segments:
//!
//! * [`skeleton`]: sequences, annotations, normalization and file I/O.
//! * [`features`]: raw coordinates, joint angles and standardization.
//! * [`labels`]: binary and density targets from annotations.
//! * [`neural`]: the LSTM model, loss, training and gradient checking.
//! * [`decode`]: per-frame output to segments and counts.
//! * [`metrics`]: counting and segmentation scores.
//! * [`harness`]: datasets, folds, experiments and synthetic data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decode;
pub mod error;
pub mod features;
pub mod harness;
pub mod labels;
pub mod metrics;
pub mod neural;
pub mod skeleton;

pub use error::{Error, ErrorClass, Result};
