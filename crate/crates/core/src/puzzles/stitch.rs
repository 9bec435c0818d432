use ::image::imageops::{self, FilterType};
use ::image::{ImageBuffer as RasterBuffer, Rgb};
use thiserror::Error;

use crate::image::{ColorSpace, ImageBuffer};

pub const TILE_HEIGHT: u32 = 512;
pub const SEPARATOR_WIDTH: u32 = 4;
pub const MIN_TILES: usize = 2;
pub const MAX_TILES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StitchError {
    #[error("stitching needs {MIN_TILES} to {MAX_TILES} images, got {0}")]
    TileCount(usize),
    #[error("tile height must be positive")]
    ZeroHeight,
}

fn scale_to_height(img: &ImageBuffer, height: u32) -> RasterBuffer<Rgb<u16>, Vec<u16>> {
    let width = ((img.width() as f64 * height as f64 / img.height() as f64).round() as u32).max(1);
    let raster = RasterBuffer::<Rgb<u16>, _>::from_raw(img.width(), img.height(), img.data().to_vec())
        .expect("buffer length matches dimensions");
    if (width, height) == (img.width(), img.height()) {
        raster
    } else {
        imageops::resize(&raster, width, height, FilterType::Triangle)
    }
}

/// Scales each image to `tile_height` and lays them out left to right with
/// white separators.
pub fn stitch(images: &[&ImageBuffer], tile_height: u32) -> Result<ImageBuffer, StitchError> {
    if !(MIN_TILES..=MAX_TILES).contains(&images.len()) {
        return Err(StitchError::TileCount(images.len()));
    }
    if tile_height == 0 {
        return Err(StitchError::ZeroHeight);
    }
    let tiles: Vec<_> = images
        .iter()
        .map(|img| scale_to_height(&(*img).clone().into_encoded(), tile_height))
        .collect();
    let width: u32 = tiles.iter().map(|t| t.width()).sum::<u32>() + SEPARATOR_WIDTH * (tiles.len() as u32 - 1);
    let mut canvas = RasterBuffer::from_pixel(width, tile_height, Rgb([u16::MAX; 3]));
    let mut x = 0i64;
    for tile in &tiles {
        imageops::replace(&mut canvas, tile, x, 0);
        x += (tile.width() + SEPARATOR_WIDTH) as i64;
    }
    Ok(ImageBuffer::new(width, tile_height, canvas.into_raw(), ColorSpace::EncodedSrgb)
        .expect("canvas dimensions are valid"))
}
