//! Streaming inference engine for LACE/NoLACE-style adaptive-DSP speech
//! codec enhancement.
//!
//! The engine works on 16 kHz mono audio in the pre-emphasized domain, in
//! causal 20 ms blocks of four 5 ms subframes. A feature encoder turns the
//! per-subframe conditioning features into latent vectors; those drive
//! adaptive comb filters, adaptive convolutions and (for NoLACE) adaptive
//! temporal shaping on the signal path.

pub mod cli;
pub mod codec_sim;
pub mod config;
pub mod ddsp;
pub mod encoder;
pub mod error;
pub mod flops;
pub mod graph;
pub mod nn;
pub mod weights;

pub use config::{ModelConfig, Variant};
pub use encoder::{FeatureFrame, LatentChain};
pub use error::{Error, Result};
pub use graph::{Model, StreamState};
pub use weights::ModelWeights;
