//! Round-trip check of every operation: apply, then apply the negated value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use retouch_core::metrics::psnr_masked;
use retouch_core::ops::{apply, apply_working_tracked, Adjustment, Invertibility, OpId};
use retouch_core::{ImageBuffer, WorkingImage};
use serde::Serialize;

use crate::error::CliError;

pub const EXACT_FLOOR_DB: f64 = 50.0;
pub const APPROXIMATE_FLOOR_DB: f64 = 35.0;
pub const MIN_MAGNITUDE: i64 = 15;
pub const MAX_MAGNITUDE: i64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrip {
    pub op: OpId,
    pub value: i32,
    pub image: usize,
    /// Pixels that hit a clip rail on the forward pass; they are left out of
    /// the PSNR.
    pub clipped_pixels: usize,
    /// PSNR over the unclipped pixels; `None` when every pixel clipped.
    pub psnr_db: Option<f64>,
    pub floor_db: f64,
    pub passed: bool,
}

impl RoundTrip {
    pub fn exempt(&self) -> bool {
        self.psnr_db.is_none()
    }
}

pub fn floor_for(op: OpId) -> f64 {
    match op.invertibility() {
        Invertibility::Exact => EXACT_FLOOR_DB,
        Invertibility::Approximate => APPROXIMATE_FLOOR_DB,
    }
}

/// `count` values per operation with magnitudes in [15, 50] and random sign.
pub fn draw_values(seed: u64, count: usize) -> Vec<Adjustment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &op in OpId::all() {
        for _ in 0..count {
            let m = rng.random_range(MIN_MAGNITUDE..=MAX_MAGNITUDE);
            let v = if rng.random_bool(0.5) { m } else { -m };
            out.push(Adjustment::new(op, v).expect("in range"));
        }
    }
    out
}

pub fn round_trip(img: &ImageBuffer, image: usize, adj: Adjustment) -> Result<RoundTrip, CliError> {
    let mut work = WorkingImage::from_buffer(img)?;
    let clipped = apply_working_tracked(&mut work, adj);
    let forward = work.to_buffer();
    let back = apply(&forward, adj.invert())?;
    let keep: Vec<bool> = clipped.iter().map(|c| !c).collect();
    let psnr_db = psnr_masked(&back, img, &keep)?;
    let floor_db = floor_for(adj.op);
    Ok(RoundTrip {
        op: adj.op,
        value: adj.value(),
        image,
        clipped_pixels: clipped.iter().filter(|c| **c).count(),
        psnr_db,
        floor_db,
        passed: psnr_db.is_none_or(|p| p >= floor_db),
    })
}

/// Every adjustment on every image.
pub fn verify(images: &[ImageBuffer], adjustments: &[Adjustment]) -> Result<Vec<RoundTrip>, CliError> {
    let cases: Vec<(usize, Adjustment)> = (0..images.len())
        .flat_map(|i| adjustments.iter().map(move |a| (i, *a)))
        .collect();
    cases.par_iter().map(|&(i, a)| round_trip(&images[i], i, a)).collect()
}
