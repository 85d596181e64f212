//! Extended martingale optimal transport on the real line.
//!
//! Finitely supported measures, convex-order tools, a dense simplex LP
//! solver, lifted martingale couplings, the solvers built on them
//! (MOT, lifted MOT, convex weak MOT, American and VIX bounds, shadow
//! couplings) and the constructive approximation pipeline for perturbed
//! marginals.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod approximation;
pub mod convex_order;
pub mod couplings;
pub mod error;
pub mod lp;
pub mod measures;
pub mod solvers;

mod num;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, LiftedMeasure};
