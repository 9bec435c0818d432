//! PNG / TIFF codec boundary.

use std::io::Cursor;

use ::image::{DynamicImage, ImageFormat, Rgb};
use serde::{Deserialize, Serialize};

use crate::image::{ColorSpace, ImageBuffer, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodeFormat {
    Png16,
    Tiff16,
}

impl EncodeFormat {
    pub fn extension(self) -> &'static str {
        match self {
            EncodeFormat::Png16 => "png",
            EncodeFormat::Tiff16 => "tiff",
        }
    }

    /// Picks the format from a file extension (`png`, `tif`, `tiff`).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "png" => Some(EncodeFormat::Png16),
            "tif" | "tiff" => Some(EncodeFormat::Tiff16),
            _ => None,
        }
    }
}

/// Decodes a PNG or TIFF stream into an encoded-sRGB buffer.
///
/// 8-bit samples are widened by 257, gray is replicated to RGB and alpha is
/// dropped.
pub fn decode(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let format = ::image::guess_format(bytes)
        .map_err(|e| ImageError::CorruptStream(format!("unrecognised stream: {e}")))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Tiff) {
        return Err(ImageError::UnsupportedLayout(format!("{format:?} streams are not accepted")));
    }
    let dynamic = ::image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        ::image::ImageError::Unsupported(u) => ImageError::UnsupportedLayout(u.to_string()),
        other => ImageError::CorruptStream(other.to_string()),
    })?;
    let (width, height) = (dynamic.width(), dynamic.height());
    let widen = |v: u8| v as u16 * 257;
    let data: Vec<u16> = match dynamic {
        DynamicImage::ImageLuma8(img) => img.into_raw().into_iter().flat_map(|v| [widen(v); 3]).collect(),
        DynamicImage::ImageLumaA8(img) => {
            img.into_raw().chunks_exact(2).flat_map(|p| [widen(p[0]); 3]).collect()
        }
        DynamicImage::ImageRgb8(img) => img.into_raw().into_iter().map(widen).collect(),
        DynamicImage::ImageRgba8(img) => img
            .into_raw()
            .chunks_exact(4)
            .flat_map(|p| [widen(p[0]), widen(p[1]), widen(p[2])])
            .collect(),
        DynamicImage::ImageLuma16(img) => img.into_raw().into_iter().flat_map(|v| [v; 3]).collect(),
        DynamicImage::ImageLumaA16(img) => {
            img.into_raw().chunks_exact(2).flat_map(|p| [p[0]; 3]).collect()
        }
        DynamicImage::ImageRgb16(img) => img.into_raw(),
        DynamicImage::ImageRgba16(img) => img
            .into_raw()
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        other => {
            return Err(ImageError::UnsupportedLayout(format!(
                "sample layout {:?}",
                other.color()
            )))
        }
    };
    ImageBuffer::new(width, height, data, ColorSpace::EncodedSrgb)
}

/// Encodes losslessly at 16 bits per sample. Linear buffers are converted to
/// encoded sRGB first.
pub fn encode(img: &ImageBuffer, format: EncodeFormat) -> Result<Vec<u8>, ImageError> {
    let encoded;
    let img = if img.space() == ColorSpace::LinearRgb {
        encoded = img.to_encoded()?;
        &encoded
    } else {
        img
    };
    let raster: ::image::ImageBuffer<Rgb<u16>, Vec<u16>> =
        ::image::ImageBuffer::from_raw(img.width(), img.height(), img.data().to_vec())
            .expect("buffer length checked at construction");
    let mut out = Cursor::new(Vec::new());
    let image_format = match format {
        EncodeFormat::Png16 => ImageFormat::Png,
        EncodeFormat::Tiff16 => ImageFormat::Tiff,
    };
    raster
        .write_to(&mut out, image_format)
        .map_err(|e| ImageError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// 8-bit PNG preview, downscaled so the long side is at most `max_side`.
/// Used for images sent to external services; execution always uses the
/// full-resolution buffer.
pub fn encode_preview(img: &ImageBuffer, max_side: u32) -> Result<Vec<u8>, ImageError> {
    let img = img.clone().into_encoded();
    let raster: ::image::ImageBuffer<Rgb<u16>, Vec<u16>> =
        ::image::ImageBuffer::from_raw(img.width(), img.height(), img.into_data())
            .expect("buffer length checked at construction");
    let long = raster.width().max(raster.height());
    let dynamic = DynamicImage::ImageRgb16(raster);
    let scaled = if long > max_side.max(1) {
        let scale = max_side.max(1) as f64 / long as f64;
        let w = ((dynamic.width() as f64 * scale).round() as u32).max(1);
        let h = ((dynamic.height() as f64 * scale).round() as u32).max(1);
        dynamic.resize_exact(w, h, ::image::imageops::FilterType::Triangle)
    } else {
        dynamic
    };
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageRgb8(scaled.to_rgb8())
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn read_file(path: &std::path::Path) -> Result<ImageBuffer, CodecIoError> {
    let bytes = std::fs::read(path).map_err(|e| CodecIoError::Io(path.display().to_string(), e))?;
    Ok(decode(&bytes)?)
}

/// Writes `img`, choosing the format from the path's extension (PNG when
/// unknown).
pub fn write_file(path: &std::path::Path, img: &ImageBuffer) -> Result<(), CodecIoError> {
    let format = path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(EncodeFormat::from_extension)
        .unwrap_or(EncodeFormat::Png16);
    let bytes = encode(img, format)?;
    std::fs::write(path, bytes).map_err(|e| CodecIoError::Io(path.display().to_string(), e))
}

#[derive(Debug, thiserror::Error)]
pub enum CodecIoError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use ::image::{GrayImage, Luma, RgbImage};

    #[test]
    fn preview_is_downscaled_8_bit() {
        let img = ImageBuffer::filled(2048, 512, [65535, 0, 0]);
        let png = encode_preview(&img, 1024).unwrap();
        let decoded = ::image::load_from_memory(&png).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (1024, 256));
        assert_eq!(decoded.color(), ::image::ColorType::Rgb8);
        let small = ImageBuffer::filled(10, 20, [0; 3]);
        let decoded = ::image::load_from_memory(&encode_preview(&small, 1024).unwrap()).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (10, 20));
    }

    fn png8(img: &RgbImage) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn widens_8_bit_white() {
        let img = RgbImage::from_pixel(2, 2, Rgb([255, 255, 255]));
        let buf = decode(&png8(&img)).unwrap();
        assert_eq!((buf.width(), buf.height()), (2, 2));
        assert!(buf.data().iter().all(|&s| s == 65535));
        assert_eq!(buf.space(), ColorSpace::EncodedSrgb);
    }

    #[test]
    fn expands_gray_to_rgb() {
        let img = GrayImage::from_pixel(3, 1, Luma([10]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        let buf = decode(&out.into_inner()).unwrap();
        assert_eq!(buf.pixel(2, 0), [2570; 3]);
    }

    #[test]
    fn drops_alpha() {
        let img = ::image::RgbaImage::from_pixel(1, 1, ::image::Rgba([1, 2, 3, 4]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        assert_eq!(decode(&out.into_inner()).unwrap().pixel(0, 0), [257, 514, 771]);
    }

    #[test]
    fn tiff16_sample_passes_through() {
        let img = ImageBuffer::filled(3, 2, [32768, 1, 65535]);
        let bytes = encode(&img, EncodeFormat::Tiff16).unwrap();
        assert_eq!(&bytes[..2], b"II");
        let back = decode(&bytes).unwrap();
        assert_eq!(back.pixel(1, 1), [32768, 1, 65535]);
    }

    #[test]
    fn truncated_png_is_corrupt() {
        let img = RgbImage::from_fn(16, 16, |x, y| Rgb([x as u8 * 9, y as u8 * 7, 3]));
        let bytes = png8(&img);
        let err = decode(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, ImageError::CorruptStream(_)), "{err:?}");
        assert!(matches!(decode(b"not an image"), Err(ImageError::CorruptStream(_))));
    }

    #[test]
    fn degenerate_single_pixel_encodes() {
        let img = ImageBuffer::filled(1, 1, [0, 0, 0]);
        for format in [EncodeFormat::Png16, EncodeFormat::Tiff16] {
            let bytes = encode(&img, format).unwrap();
            assert_eq!(decode(&bytes).unwrap(), img);
        }
    }

    #[test]
    fn linear_buffers_are_encoded_before_writing() {
        let src = ImageBuffer::from_fn(8, 8, |x, y| [x as u16 * 8000, y as u16 * 8000, 30000]);
        let lin = src.to_linear().unwrap();
        let decoded = decode(&encode(&lin, EncodeFormat::Png16).unwrap()).unwrap();
        assert_eq!(decoded.space(), ColorSpace::EncodedSrgb);
        assert_eq!(decoded, lin.to_encoded().unwrap());
    }
}
