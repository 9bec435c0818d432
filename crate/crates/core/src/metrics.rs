//! Image-quality and distribution-match metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::luma;
use crate::image::{ImageBuffer, MAX_SAMPLE};
use crate::stats::compute_stats;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

/// Ceiling for images that differ in at least one sample, so a score of
/// exactly [`PSNR_CAP`] always means identical.
pub const PSNR_DISTINCT_CEILING: f64 = 98.99;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("images must be at least {SSIM_WINDOW} pixels on each side for SSIM, got {0}x{1}")]
    TooSmall(u32, u32),
}

fn check_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<(), MetricError> {
    if a.same_dimensions(b) {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()))
    }
}

/// `10·log10(MAX² / MSE)` over all samples; [`PSNR_CAP`] for identical
/// images, at most [`PSNR_DISTINCT_CEILING`] otherwise.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let se: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(psnr_from_mse(se / a.data().len() as f64))
}

/// PSNR restricted to the pixels where `mask` is true. `None` when the mask
/// selects nothing.
pub fn psnr_masked(a: &ImageBuffer, b: &ImageBuffer, mask: &[bool]) -> Result<Option<f64>, MetricError> {
    check_dims(a, b)?;
    let mut se = 0.0;
    let mut n = 0usize;
    for ((pa, pb), &keep) in a.data().chunks_exact(3).zip(b.data().chunks_exact(3)).zip(mask) {
        if keep {
            for c in 0..3 {
                let d = pa[c] as f64 - pb[c] as f64;
                se += d * d;
            }
            n += 3;
        }
    }
    Ok((n > 0).then(|| psnr_from_mse(se / n as f64)))
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (MAX_SAMPLE * MAX_SAMPLE / mse).log10()).min(PSNR_DISTINCT_CEILING)
    }
}

fn luma_plane(img: &ImageBuffer) -> Vec<f64> {
    img.pixels()
        .map(|p| luma(p.map(|s| s as f64 / MAX_SAMPLE)))
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *w = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|w| w / sum)
}

/// Valid-mode separable Gaussian filter; output is `(w-10) x (h-10)`.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|j| k[j] * horiz[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity on Rec. 709 luma of the encoded values, with an
/// 11x11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03 and unit range.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall(a.width(), a.height()));
    }
    let x = luma_plane(a);
    let y = luma_plane(b);
    let k = gaussian_kernel();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let [mu_x, mu_y, e_xx, e_yy, e_xy] =
        [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, w, h, &k));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Histogram intersections on the `[0, 100]` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistScores {
    pub contrast: f64,
    pub luminance: f64,
    pub saturation: f64,
    pub mean: f64,
}

impl HistScores {
    fn new(contrast: f64, luminance: f64, saturation: f64) -> Self {
        HistScores {
            contrast,
            luminance,
            saturation,
            mean: (contrast + luminance + saturation) / 3.0,
        }
    }

    /// Component-wise average of several score sets.
    pub fn average(scores: &[HistScores]) -> HistScores {
        let n = scores.len().max(1) as f64;
        HistScores::new(
            scores.iter().map(|s| s.contrast).sum::<f64>() / n,
            scores.iter().map(|s| s.luminance).sum::<f64>() / n,
            scores.iter().map(|s| s.saturation).sum::<f64>() / n,
        )
    }
}

/// Intersection of the contrast, luminance and saturation histograms. The
/// images may have different sizes.
pub fn hist_intersection(a: &ImageBuffer, b: &ImageBuffer) -> HistScores {
    let sa = compute_stats(a);
    let sb = compute_stats(b);
    HistScores::new(
        100.0 * sa.contrast.intersection(&sb.contrast),
        100.0 * sa.luminance.intersection(&sb.luminance),
        100.0 * sa.saturation.intersection(&sb.saturation),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub hist: HistScores,
}

impl MetricReport {
    pub fn compute(pred: &ImageBuffer, target: &ImageBuffer) -> Result<Self, MetricError> {
        Ok(MetricReport {
            psnr_db: psnr(pred, target)?,
            ssim: ssim(pred, target)?,
            hist: hist_intersection(pred, target),
        })
    }

    /// Best PSNR and SSIM over several targets; histogram scores averaged
    /// over all of them.
    pub fn best_of(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let hists: Vec<HistScores> = reports.iter().map(|r| r.hist).collect();
        Some(MetricReport {
            psnr_db: reports.iter().map(|r| r.psnr_db).fold(f64::MIN, f64::max),
            ssim: reports.iter().map(|r| r.ssim).fold(f64::MIN, f64::max),
            hist: HistScores::average(&hists),
        })
    }
}
