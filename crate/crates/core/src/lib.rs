//! Steering-angle prediction with a sine phase-shift output encoding.
//!
//! An angle is encoded as the phase of a sine wave sampled across the output
//! neurons of a tanh classification layer and recovered by a least-squares
//! phase fit. The crate bundles the codec, sensor-log preprocessing, a
//! synthetic driving-scenario generator, a small double-precision LSTM stack,
//! and a harness comparing the sine head against regression and softmax-bin
//! heads.

pub mod codec;
pub mod dataset;
pub mod harness;
pub mod kv;
pub mod metrics;
pub mod neural;
pub mod seed;
pub mod signal;

pub use codec::{CodecConfig, SteeringAngle};
