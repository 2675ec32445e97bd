//! Run configuration and the expression grammar used for data fields.

pub mod expr;
pub mod run;

pub use expr::Expression;
pub use run::{Anchors, Mode, Problem, RunConfig};
