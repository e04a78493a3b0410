//! Shallow networks with fixed, localized hidden layers: data loading,
//! hidden-layer construction, unsupervised encoders, rate-based readout
//! training and a spiking (LIF) counterpart.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checkpoint;
pub mod connectivity;
pub mod datasets;
pub mod encoder;
pub mod harness;
pub mod error;
pub mod linalg;
pub mod ratenet;
pub mod record;
pub mod spiking;
pub mod unsup;

pub use encoder::Encoder;
pub use error::{Error, Result};
