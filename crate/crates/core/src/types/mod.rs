//! Foundational value types shared by every module.

mod label;
mod mass;
mod stream;

pub use label::{child_key, mix64, Lineage, NodeLabel, TreeMark, ROOT_KEY};
pub use mass::{neumaier_sum, MassError, MassPartition, MASS_TOLERANCE};
pub use stream::RngStream;
