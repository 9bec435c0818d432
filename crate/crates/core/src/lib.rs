//! Procedural retouching engine.
//!
//! Thirty-three single-parameter adjustment operations over 16-bit RGB
//! buffers, grouped into three stages (lighting, global color, per-band
//! color), plus the plan format that drives them, image-quality metrics, and
//! the puzzle dataset generators built on top.

pub mod codec;
pub mod color;
pub mod corpus;
pub mod image;
pub mod metrics;
pub mod ops;
pub mod plan;
pub mod puzzles;
pub mod stats;

pub use crate::image::{ColorSpace, ImageBuffer, ImageError, WorkingImage};
pub use crate::ops::{Adjustment, Band, OpDescriptor, OpError, OpId, Stage};
pub use crate::plan::{Plan, PlanError, ReasoningTriplet, StagePlan};
