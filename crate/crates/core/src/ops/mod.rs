//! The 33 single-parameter adjustment operations.
//!
//! Every operation takes an integer master value in `[-100, 100]`, is the
//! identity at 0, and is undone by negating the value as long as no sample is
//! driven into the `[0,1]` clip rails.
//!
//! Working spaces: exposure, global saturation, temperature, tint and the band
//! operations run on linear light; contrast, blacks, whites, shadows and
//! highlights run on gamma-encoded values.

mod bands;
mod global;
mod registry;
mod tone;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageBuffer, ImageError, WorkingImage};

pub use bands::{band_weight, band_weights};
pub use registry::{
    list_ops, ops_in_text, render_op_docs, Band, BandChannel, Invertibility, OpDescriptor, OpId, Stage, OP_COUNT,
};

pub const MIN_VALUE: i32 = -100;
pub const MAX_VALUE: i32 = 100;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("value {value} for {op} is outside [-100, 100]")]
    ValueOutOfRange { op: String, value: i64 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// One operation with its quantized master value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAdjustment")]
pub struct Adjustment {
    pub op: OpId,
    value: i32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdjustment {
    op: OpId,
    value: i64,
}

impl TryFrom<RawAdjustment> for Adjustment {
    type Error = OpError;

    fn try_from(raw: RawAdjustment) -> Result<Self, Self::Error> {
        Adjustment::new(raw.op, raw.value)
    }
}

impl Adjustment {
    pub fn new(op: OpId, value: i64) -> Result<Self, OpError> {
        if !(MIN_VALUE as i64..=MAX_VALUE as i64).contains(&value) {
            return Err(OpError::ValueOutOfRange {
                op: op.name(),
                value,
            });
        }
        Ok(Self {
            op,
            value: value as i32,
        })
    }

    pub fn value(&self) -> i32 {
        self.value
    }

    pub fn stage(&self) -> Stage {
        self.op.stage()
    }

    /// The same operation with the value negated.
    pub fn invert(&self) -> Adjustment {
        Adjustment {
            op: self.op,
            value: -self.value,
        }
    }

    /// Sort key for canonical execution order.
    fn canonical_key(&self) -> (Stage, usize, i32) {
        (self.op.stage(), self.op.registry_index(), self.value)
    }
}

impl std::fmt::Display for Adjustment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{:+}", self.op, self.value)
    }
}

pub fn invert(adj: &Adjustment) -> Adjustment {
    adj.invert()
}

/// Per-pixel kernel over encoded values. May return values outside `[0,1]`;
/// the caller clamps.
fn kernel(adj: Adjustment) -> Box<dyn Fn([f64; 3]) -> [f64; 3] + Sync> {
    let v = adj.value as f64;
    match adj.op {
        OpId::Exposure => Box::new(global::exposure(v)),
        OpId::Contrast => Box::new(tone::contrast(v)),
        OpId::Blacks => Box::new(tone::blacks(v)),
        OpId::Whites => Box::new(tone::whites(v)),
        OpId::Shadows => Box::new(tone::shadows(v)),
        OpId::Highlights => Box::new(tone::highlights(v)),
        OpId::Saturation => Box::new(global::saturation(v)),
        OpId::Temperature => Box::new(global::temperature(v)),
        OpId::Tint => Box::new(global::tint(v)),
        OpId::Band(channel, band) => Box::new(bands::kernel(channel, band, v)),
    }
}

/// Applies one adjustment in place on a working image.
pub fn apply_working(img: &mut WorkingImage, adj: Adjustment) {
    if adj.value == 0 {
        return;
    }
    img.map_pixels(kernel(adj));
}

/// Applies one adjustment in place, returning a per-pixel flag for pixels
/// that had a channel clamped.
pub fn apply_working_tracked(img: &mut WorkingImage, adj: Adjustment) -> Vec<bool> {
    if adj.value == 0 {
        return vec![false; img.samples().len() / 3];
    }
    img.map_pixels_tracked(kernel(adj))
}

/// Applies one adjustment to an encoded-sRGB buffer.
pub fn apply(img: &ImageBuffer, adj: Adjustment) -> Result<ImageBuffer, OpError> {
    let mut work = WorkingImage::from_buffer(img)?;
    if adj.value == 0 {
        return Ok(img.clone());
    }
    apply_working(&mut work, adj);
    Ok(work.to_buffer())
}

/// Sorts adjustments into execution order: by stage, then registry index,
/// then value. Stable, so the result only depends on the multiset.
pub fn canonical_order(adjs: &[Adjustment]) -> Vec<Adjustment> {
    let mut sorted = adjs.to_vec();
    sorted.sort_by_key(Adjustment::canonical_key);
    sorted
}

/// Applies a list of adjustments in canonical order, quantizing once at the
/// end.
pub fn apply_sequence(img: &ImageBuffer, adjs: &[Adjustment]) -> Result<ImageBuffer, OpError> {
    let mut work = WorkingImage::from_buffer(img)?;
    if adjs.iter().all(|a| a.value == 0) {
        return Ok(img.clone());
    }
    for adj in canonical_order(adjs) {
        apply_working(&mut work, adj);
    }
    Ok(work.to_buffer())
}
