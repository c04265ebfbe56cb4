//! Joint part-of-speech tagger, lemmatizer and graph-based dependency parser.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the command line or binary model files lives in the `udparse`
//! companion crate.
//!
//! Pipeline overview:
//!
//! * [`conllu`] reads and writes treebanks.
//! * [`vocab`] maps strings to indices and holds word embeddings.
//! * [`autodiff`] is a small reverse-mode tape over dense matrices, with ADAM.
//! * [`layers`], [`encoder`], [`heads`] and [`parser`] build the network.
//! * [`model`] ties the network together; [`trainer`] optimizes it.
//! * [`eval`] scores predictions.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod config;
pub mod conllu;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gradsuite;
pub mod heads;
pub mod layers;
pub mod model;
pub mod parser;
pub mod rng;
pub mod tensor;
pub mod trainer;
pub mod vocab;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};
