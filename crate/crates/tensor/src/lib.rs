//! Reverse-mode automatic differentiation over `f64` ndarrays.
//!
//! Every forward pass builds a fresh [`Tape`]; operations are methods on the
//! copyable [`Var`] handle and record a backward closure as they execute.
//! Calling [`Tape::backward`] on a scalar loss walks the tape in reverse and
//! returns a [`GradStore`] with one gradient array per reachable node.
//!
//! Model parameters live outside the tape in a flat [`ParamSet`]; a
//! [`ParamBinding`] maps parameter entries to tape leaves during a forward
//! pass and extracts a flat gradient vector afterwards. Everything is `f64`
//! and single-threaded per tape, so a fixed seed gives bit-identical runs on
//! a fixed platform.

mod gradcheck;
pub mod nn;
mod ops;
mod params;
mod tape;

pub use gradcheck::{gradient_check, gradient_l2_norm, loss_fn, LossFn};
pub use nn::{sinusoidal_encoding, PadMode};
pub use params::{Init, ParamBinding, ParamId, ParamSet, ParamSetBuilder};
pub use tape::{GradStore, Tape, Var};

pub use ndarray;
