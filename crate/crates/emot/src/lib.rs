//! File formats, fixtures, the perturbation harness and report emission on
//! top of `emot-core`.

pub mod fixtures;
pub mod io;
pub mod report;
pub mod stability;
