//! Recovery of the temporal order of handwritten script from static images,
//! beta-elliptic stroke modeling of the recovered trajectory, and
//! graph-matching recognition of words and postal fields.
//!
//! The pipeline runs in stages:
//!
//! 1. [`imaging`] — binarization, denoising, skeletonization, connected
//!    components, diacritic suppression.
//! 2. [`envelope`] — envelope layout: border/stamp suppression, address
//!    location, line/word segmentation, postal-code vs city-name
//!    discrimination.
//! 3. [`skeleton_graph`] — characteristic points and typed segments of a
//!    word skeleton.
//! 4. [`recovery`] — temporal ordering of the segments, curvature-aware
//!    resampling and velocity estimation.
//! 5. [`beta_elliptic`] — stroke segmentation, beta velocity profile and
//!    elliptic arc fitting, reconstruction.
//! 6. [`matcher`] — trajectory-graph distance and template classification.
//! 7. [`synth`] — deterministic ground-truth generator (words, rasters,
//!    envelopes) used to validate every stage.

pub mod align;
pub mod batch;
pub mod beta_elliptic;
pub mod config;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod matcher;
pub mod pipeline;
pub mod recovery;
pub mod skeleton_graph;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
