//! Numerical construction of topological conjugacies between multimodal
//! interval maps, and diagnostics for the regularity of those conjugacies.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugacy;
pub mod interval;
pub mod jet;
pub mod map_core;
pub mod orbit;
pub mod regularity;
pub mod report;
pub mod renormalization;
pub mod rng;
pub mod stats;

pub use interval::Interval;
pub use map_core::{MapError, MapFamilyConfig, MultimodalMap, Precision};
