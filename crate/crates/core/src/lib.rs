//! First-order calculus on the Heisenberg group `H^n`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod curves;
pub mod error;
pub mod group;
pub mod harness;
pub mod maximizer;
pub mod metric;
pub mod sampling;
pub mod uds;

pub use curves::{gamma_y, lift_planar, modify_line, HorizontalPath, ModifyLineParams, ParametrizedCurve};
pub use error::{Error, Result};
pub use group::{dilate, group_mul, koranyi_dist, vector_at, HLinearMap, HorizontalVector, Point};
pub use metric::{cc_bounds, cc_lower, cc_upper, DistanceBounds};
