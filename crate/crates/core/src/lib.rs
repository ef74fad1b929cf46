//! Speech emotion recognition pipeline: audio decoding, frame features,
//! augmentation, a from-scratch 1D CNN, classical speaker diarization and
//! classification metrics.

// `!(x > 0.0)` style guards deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod dsp;
pub mod rng;
pub mod augment;
pub mod dataset;
pub mod nn;
pub mod diarize;
pub mod metrics;
