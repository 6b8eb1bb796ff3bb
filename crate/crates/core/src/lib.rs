//! Pointwise convolution through fixed conventional transforms.
//!
//! A learnable 1×1 convolution mixes `N` input channels into `M` output
//! channels with an `M × N` weight matrix. This crate replaces that matrix
//! with the unnormalized Walsh-Hadamard or DCT-II basis and evaluates it with
//! butterfly algorithms, so the layer carries no learnable parameters and, for
//! the Hadamard case, performs no multiplications at all.
//!
//! The crate is organised as:
//!
//! - [`transforms`]: exact and fast DWHT / DCT over channel vectors, channel
//!   pad/truncate semantics, and analytic operation counts.
//! - [`tensor`]: the NCHW [`Tensor4`](tensor::Tensor4) activation carrier.
//! - [`nn`]: a small layer zoo with forward/backward passes, gradient checking
//!   and a checkpoint container.
//! - [`arch`]: declarative ShuffleNet-V2 / MobileNet-V1 builders, block
//!   variants and substitution schemes.
//! - [`cost`]: static parameter and FLOP accounting.
//! - [`train`]: momentum SGD training loop, datasets and histogram probes.
//! - [`bench`]: wall-clock timing of pointwise evaluations next to their
//!   analytic operation counts.
//! - [`verify`]: the self-check matrix behind `ctpc verify`.
//! - [`cli`]: the `ctpc` command line.

pub mod arch;
pub mod bench;
pub mod cli;
pub mod cost;
pub mod error;
pub mod nn;
pub mod tensor;
pub mod train;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::Tensor4;
