//! Atomic writes and image listing.

use std::fs;
use std::path::{Path, PathBuf};

use retouch_core::codec::{self, EncodeFormat};
use retouch_core::ImageBuffer;

use crate::error::CliError;

/// Writes via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Encodes by extension (16-bit PNG when unknown) and writes atomically.
pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<(), CliError> {
    let format = path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(EncodeFormat::from_extension)
        .unwrap_or(EncodeFormat::Png16);
    write_atomic(path, &codec::encode(img, format)?)
}

pub fn read_image(path: &Path) -> Result<ImageBuffer, CliError> {
    Ok(codec::read_file(path)?)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Image files (png, tif, tiff) directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "tif" | "tiff")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}
