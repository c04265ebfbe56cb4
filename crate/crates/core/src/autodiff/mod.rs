//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] borrows a [`ParamStore`], records every operation of one
//! forward pass and propagates gradients back in a single reverse sweep.
//! Parameter gradients are then accumulated into a [`Gradients`] buffer and
//! applied by [`Adam`].

mod adam;
mod gradcheck;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use params::{Gradients, ParamId, ParamStore, Regularized};
pub use tape::{op_names, probability_floor, Tape, Var};
