//! The iterative construction of an almost maximal directional derivative.

mod algorithm;
mod comparison;
mod spec;

pub use algorithm::{run, step, verify_trajectory, Context, IterationState, MaximizerConfig, Trajectory, TrajectoryReport};
pub use comparison::{comparison_le, ComparisonOutcome, Pair};
pub use spec::{FieldSpec, MaximizeSpec};
