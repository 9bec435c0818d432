//! Distribution statistics consumed by the histogram-intersection metric.
//!
//! Three per-pixel statistics are binned into [`HIST_BINS`] normalized bins:
//!
//! * luminance: Rec. 709 luma of the linearized pixel;
//! * saturation: HSV saturation of the encoded pixel;
//! * contrast: Michelson contrast `(max - min) / (max + min + eps)` of the
//!   luminance over the pixel's 3x3 neighbourhood (clipped at the border).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{hsv_saturation, luma, srgb_to_linear};
use crate::image::{ImageBuffer, MAX_SAMPLE};

pub const HIST_BINS: usize = 64;
pub const CONTRAST_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram(pub Vec<f64>);

impl Histogram {
    fn from_values(values: &[f64]) -> Self {
        let mut counts = vec![0u64; HIST_BINS];
        for &v in values {
            counts[bin_of(v)] += 1;
        }
        let n = values.len().max(1) as f64;
        Histogram(counts.into_iter().map(|c| c as f64 / n).collect())
    }

    pub fn bins(&self) -> &[f64] {
        &self.0
    }

    /// `Σ min(a_i, b_i)`, in `[0,1]`.
    pub fn intersection(&self, other: &Histogram) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.min(*b)).sum()
    }
}

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelStats {
    pub mean_luminance: f64,
    pub mean_saturation: f64,
    pub luminance: Histogram,
    pub saturation: Histogram,
    pub contrast: Histogram,
}

/// Per-pixel linear luminance, row-major.
pub fn luminance_map(img: &ImageBuffer) -> Vec<f64> {
    let lut = linear_lut();
    img.data()
        .par_chunks_exact(3)
        .map(|p| luma([lut[p[0] as usize], lut[p[1] as usize], lut[p[2] as usize]]))
        .collect()
}

fn linear_lut() -> Vec<f64> {
    (0..=u16::MAX).map(|s| srgb_to_linear(s as f64 / MAX_SAMPLE)).collect()
}

/// Computes the statistics of an encoded-sRGB buffer. Linear buffers are
/// converted first.
pub fn compute_stats(img: &ImageBuffer) -> PixelStats {
    let encoded;
    let img = if img.space() == crate::ColorSpace::LinearRgb {
        encoded = img.clone().into_encoded();
        &encoded
    } else {
        img
    };
    let lum = luminance_map(img);
    let sat: Vec<f64> = img
        .data()
        .par_chunks_exact(3)
        .map(|p| {
            hsv_saturation([
                p[0] as f64 / MAX_SAMPLE,
                p[1] as f64 / MAX_SAMPLE,
                p[2] as f64 / MAX_SAMPLE,
            ])
        })
        .collect();
    let contrast = local_contrast(&lum, img.width() as usize, img.height() as usize);
    let n = lum.len() as f64;
    PixelStats {
        mean_luminance: lum.iter().sum::<f64>() / n,
        mean_saturation: sat.iter().sum::<f64>() / n,
        luminance: Histogram::from_values(&lum),
        saturation: Histogram::from_values(&sat),
        contrast: Histogram::from_values(&contrast),
    }
}

/// 3x3 Michelson contrast of a luminance map.
pub fn local_contrast(lum: &[f64], width: usize, height: usize) -> Vec<f64> {
    (0..height)
        .into_par_iter()
        .flat_map_iter(|y| {
            let y0 = y.saturating_sub(1);
            let y1 = (y + 1).min(height - 1);
            (0..width).map(move |x| {
                let x0 = x.saturating_sub(1);
                let x1 = (x + 1).min(width - 1);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for yy in y0..=y1 {
                    for &v in &lum[yy * width + x0..=yy * width + x1] {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (hi - lo) / (hi + lo + CONTRAST_EPS)
            })
        })
        .collect()
}
