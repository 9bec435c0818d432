//! 16-bit RGB raster and the floating-point working copy the operations use.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{linear_to_srgb, srgb_to_linear};

pub const MAX_SAMPLE: f64 = 65535.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorSpace {
    EncodedSrgb,
    LinearRgb,
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorSpace::EncodedSrgb => f.write_str("encoded sRGB"),
            ColorSpace::LinearRgb => f.write_str("linear RGB"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid dimensions {width}x{height} for {samples} samples")]
    InvalidDimensions {
        width: u32,
        height: u32,
        samples: usize,
    },
    #[error("corrupt image stream: {0}")]
    CorruptStream(String),
    #[error("unsupported image layout: {0}")]
    UnsupportedLayout(String),
    #[error("expected a {expected} buffer, got {found}")]
    WrongSpace {
        expected: ColorSpace,
        found: ColorSpace,
    },
    #[error("image encoding failed: {0}")]
    Encode(String),
}

/// Interleaved RGB, 16 bits per sample, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u16>,
    space: ColorSpace,
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("space", &self.space)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(
        width: u32,
        height: u32,
        data: Vec<u16>,
        space: ColorSpace,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width as usize * height as usize * 3 {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                samples: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            space,
        })
    }

    /// Uniform encoded-sRGB image.
    pub fn filled(width: u32, height: u32, rgb: [u16; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Encoded-sRGB image built pixel by pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u16; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
            space: ColorSpace::EncodedSrgb,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u16; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u16; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn same_dimensions(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Applies the sRGB transfer function to every sample.
    pub fn to_linear(&self) -> Result<ImageBuffer, ImageError> {
        self.expect_space(ColorSpace::EncodedSrgb)?;
        Ok(self.map_samples(ColorSpace::LinearRgb, srgb_to_linear))
    }

    /// Inverse of [`ImageBuffer::to_linear`].
    pub fn to_encoded(&self) -> Result<ImageBuffer, ImageError> {
        self.expect_space(ColorSpace::LinearRgb)?;
        Ok(self.map_samples(ColorSpace::EncodedSrgb, linear_to_srgb))
    }

    /// The buffer in encoded sRGB, converting if needed.
    pub fn into_encoded(self) -> ImageBuffer {
        match self.space {
            ColorSpace::EncodedSrgb => self,
            ColorSpace::LinearRgb => self.map_samples(ColorSpace::EncodedSrgb, linear_to_srgb),
        }
    }

    pub(crate) fn expect_space(&self, expected: ColorSpace) -> Result<(), ImageError> {
        if self.space == expected {
            Ok(())
        } else {
            Err(ImageError::WrongSpace {
                expected,
                found: self.space,
            })
        }
    }

    fn map_samples(&self, space: ColorSpace, f: impl Fn(f64) -> f64 + Sync) -> ImageBuffer {
        let lut: Vec<u16> = (0..=u16::MAX)
            .into_par_iter()
            .map(|s| quantize(f(s as f64 / MAX_SAMPLE)))
            .collect();
        let data = self.data.par_iter().map(|&s| lut[s as usize]).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            data,
            space,
        }
    }
}

/// Rounds a `[0,1]` value to the nearest 16-bit sample, clamping outside.
#[inline]
pub fn quantize(v: f64) -> u16 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * MAX_SAMPLE).round() as u16
}

/// Floating-point copy of an encoded-sRGB buffer, samples in `[0,1]`.
///
/// Operations chain on this type so a sequence quantizes only once, when it
/// is converted back with [`WorkingImage::to_buffer`].
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl WorkingImage {
    pub fn from_buffer(img: &ImageBuffer) -> Result<Self, ImageError> {
        img.expect_space(ColorSpace::EncodedSrgb)?;
        let data = img
            .data
            .par_iter()
            .map(|&s| (s as f64 / MAX_SAMPLE) as f32)
            .collect();
        Ok(Self {
            width: img.width,
            height: img.height,
            data,
        })
    }

    pub fn to_buffer(&self) -> ImageBuffer {
        let data = self.data.par_iter().map(|&v| quantize(v as f64)).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            data,
            space: ColorSpace::EncodedSrgb,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[f32] {
        &self.data
    }

    /// Runs `f` over every pixel in parallel. `f` sees and returns encoded
    /// values; returned values are clamped to `[0,1]`.
    pub fn map_pixels(&mut self, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) {
        self.data.par_chunks_exact_mut(3).for_each(|px| {
            store_clamped(px, f([px[0] as f64, px[1] as f64, px[2] as f64]));
        });
    }

    /// Like [`WorkingImage::map_pixels`], also reporting which pixels had a
    /// channel driven outside `[0,1]` before clamping.
    pub fn map_pixels_tracked(&mut self, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Vec<bool> {
        self.data
            .par_chunks_exact_mut(3)
            .map(|px| store_clamped(px, f([px[0] as f64, px[1] as f64, px[2] as f64])))
            .collect()
    }
}

const CLIP_TOLERANCE: f64 = 1e-6;

/// Writes `out` into `px`, clamped; true when any channel needed clamping.
#[inline]
fn store_clamped(px: &mut [f32], out: [f64; 3]) -> bool {
    let mut clipped = false;
    for c in 0..3 {
        let v = out[c];
        if v.is_nan() || v < -CLIP_TOLERANCE || v > 1.0 + CLIP_TOLERANCE {
            clipped = true;
        }
        px[c] = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) as f32 };
    }
    clipped
}
