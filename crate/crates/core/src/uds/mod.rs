//! Truncated model of the universal differentiability set: rational
//! horizontal lines and nested tube covers.

pub mod cover;
pub mod rational;

pub use cover::{BoxRegion, CoverManifest, MeasureEstimate, NCover, DEFAULT_CLIP, DEFAULT_DEPTH, DEFAULT_HEIGHT};
pub use rational::{enumerate_lines, gamma_y_lines, modify_line_lines, rationalize_direction, RationalLine, RationalPoint};
