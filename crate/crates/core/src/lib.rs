//! Randomized feature maps for the ReLU neural tangent kernel (NTK) and its
//! convolutional counterpart with global average pooling (CNTK).
//!
//! The crate has three layers:
//!
//! * sketching primitives ([`sketch`], [`polysketch`]),
//! * exact kernel oracles ([`relu_ntk`], [`cntk_oracle`]) and polynomial
//!   surrogates ([`poly_approx`]),
//! * the feature maps ([`ntk_sketch`], [`cntk_sketch`]) and a ridge
//!   regression harness that consumes them ([`features`]).

pub mod cntk_oracle;
pub mod cntk_sketch;
pub mod error;
pub mod features;
pub mod ntk_sketch;
pub mod poly_approx;
pub mod polysketch;
pub mod relu_ntk;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};
