//! Stochastic paths, the ergodic maps between Itô processes and the
//! Z-process, recurrence-based trading, irrational rotations and option
//! pricing built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ergodic;
pub mod error;
pub mod io;
pub mod numerics;
pub mod pricing;
pub mod rotation;
pub mod stochastic;
pub mod trading;

pub use error::{Error, Result};
pub use stochastic::{GbmParams, ItoParams, PathKind, SamplePath, TimeGrid, WienerPath};
