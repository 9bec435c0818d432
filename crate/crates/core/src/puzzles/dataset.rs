//! On-disk dataset layout:
//!
//! ```text
//! <dir>/dataset.jsonl   one PuzzleRecord per line
//! <dir>/images/*.png    16-bit PNG tiles and stitched strips
//! <dir>/manifest.json   generator version, policy, seed, count
//! ```

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExpertImage, GeneratedPuzzle, Generator, PerturbationPolicy, PuzzleError, PuzzleKind, PuzzleRecord};
use crate::codec::{self, CodecIoError};
use crate::image::ImageBuffer;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const IMAGES_DIR: &str = "images";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no space left on the dataset sink: {0}")]
    SinkFull(String),
    #[error("cannot serialize record: {0}")]
    SerializationError(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{file} line {line}: {reason}")]
    Invalid { file: String, line: usize, reason: String },
    #[error(transparent)]
    Puzzle(#[from] PuzzleError),
}

fn io_error(path: &Path, e: io::Error) -> DatasetError {
    if e.kind() == io::ErrorKind::StorageFull {
        DatasetError::SinkFull(path.display().to_string())
    } else {
        DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        }
    }
}

fn codec_error(e: CodecIoError) -> DatasetError {
    match e {
        CodecIoError::Io(path, source) => io_error(Path::new(&path), source),
        CodecIoError::Image(e) => DatasetError::SerializationError(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub generator_version: String,
    pub kind: PuzzleKind,
    pub policy: PerturbationPolicy,
    pub global_seed: u64,
    pub tile_height: u32,
    pub count: usize,
    pub experts: Vec<String>,
}

/// Streams records into a dataset directory.
pub struct DatasetWriter {
    dir: PathBuf,
    out: BufWriter<File>,
    count: usize,
}

impl DatasetWriter {
    pub fn create(dir: &Path) -> Result<Self, DatasetError> {
        let images = dir.join(IMAGES_DIR);
        fs::create_dir_all(&images).map_err(|e| io_error(&images, e))?;
        let path = dir.join(DATASET_FILE);
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            out: BufWriter::new(file),
            count: 0,
        })
    }

    /// Writes the record's images, then its line. Every referenced image must
    /// be supplied or already present in the directory.
    pub fn write(&mut self, puzzle: &GeneratedPuzzle) -> Result<(), DatasetError> {
        let record = &puzzle.record;
        for r in &record.image_refs {
            if !puzzle.images.contains_key(r) && !self.dir.join(r).is_file() {
                return Err(DatasetError::SerializationError(format!(
                    "record {} references missing image {r}",
                    record.record_id
                )));
            }
        }
        for (r, img) in &puzzle.images {
            codec::write_file(&self.dir.join(r), img).map_err(codec_error)?;
        }
        let line = serde_json::to_string(record).map_err(|e| DatasetError::SerializationError(e.to_string()))?;
        let path = self.dir.join(DATASET_FILE);
        writeln!(self.out, "{line}").map_err(|e| io_error(&path, e))?;
        self.count += 1;
        Ok(())
    }

    /// Flushes, writes the manifest and validates the result by reading it
    /// back. Returns the record count.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<usize, DatasetError> {
        let path = self.dir.join(DATASET_FILE);
        self.out.flush().map_err(|e| io_error(&path, e))?;
        manifest.count = self.count;
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| DatasetError::SerializationError(e.to_string()))?;
        let mpath = self.dir.join(MANIFEST_FILE);
        fs::write(&mpath, text + "\n").map_err(|e| io_error(&mpath, e))?;
        let back = read_dataset(&self.dir)?;
        if back.len() != self.count {
            return Err(DatasetError::Invalid {
                file: path.display().to_string(),
                line: back.len(),
                reason: format!("expected {} records on readback", self.count),
            });
        }
        Ok(self.count)
    }
}

/// Writes every record and the manifest; returns the count.
pub fn write_dataset(
    dir: &Path,
    puzzles: impl IntoIterator<Item = GeneratedPuzzle>,
    manifest: Manifest,
) -> Result<usize, DatasetError> {
    let mut w = DatasetWriter::create(dir)?;
    for p in puzzles {
        w.write(&p)?;
    }
    w.finish(manifest)
}

/// Generates `count` records in parallel chunks and streams them to `dir`.
/// Output is identical for any worker count.
pub fn generate_dataset(
    generator: &Generator,
    kind: PuzzleKind,
    experts: &[ExpertImage],
    count: usize,
    global_seed: u64,
    dir: &Path,
) -> Result<usize, DatasetError> {
    const CHUNK: usize = 16;
    let mut w = DatasetWriter::create(dir)?;
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let batch: Vec<GeneratedPuzzle> = (start..end)
            .into_par_iter()
            .map(|i| generator.record(kind, experts, global_seed, i as u64))
            .collect::<Result<_, _>>()?;
        for p in &batch {
            w.write(p)?;
        }
        start = end;
    }
    w.finish(Manifest {
        generator_version: super::GENERATOR_VERSION.to_string(),
        kind,
        policy: generator.policy.clone(),
        global_seed,
        tile_height: generator.tile_height,
        count,
        experts: experts.iter().map(|e| e.name.clone()).collect(),
    })
}

/// Reads and validates every record: schema, answer-key structure, and the
/// presence of referenced images.
pub fn read_dataset(dir: &Path) -> Result<Vec<PuzzleRecord>, DatasetError> {
    let path = dir.join(DATASET_FILE);
    let file = File::open(&path).map_err(|e| io_error(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(&path, e))?;
        let invalid = |reason: String| DatasetError::Invalid {
            file: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let record: PuzzleRecord = serde_json::from_str(&line).map_err(|e| invalid(e.to_string()))?;
        record.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(missing) = record.image_refs.iter().find(|r| !dir.join(r).is_file()) {
            return Err(invalid(format!("missing image {missing}")));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Invalid {
        file: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Replaces the record file atomically, e.g. after attaching reasoning.
pub fn rewrite_records(dir: &Path, records: &[PuzzleRecord]) -> Result<(), DatasetError> {
    let path = dir.join(DATASET_FILE);
    let tmp = dir.join(format!("{DATASET_FILE}.tmp"));
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).map_err(|e| DatasetError::SerializationError(e.to_string()))?);
        text.push('\n');
    }
    fs::write(&tmp, text).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io_error(&path, e))
}

/// Loads an image referenced by a record in `dir`.
pub fn load_image(dir: &Path, reference: &str) -> Result<ImageBuffer, PuzzleError> {
    codec::read_file(&dir.join(reference)).map_err(|_| PuzzleError::MissingImage(reference.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::expert_image;

    fn experts() -> Vec<ExpertImage> {
        (0..3)
            .map(|i| ExpertImage {
                name: format!("e{i}.png"),
                image: expert_image(i, 40, 30),
            })
            .collect()
    }

    fn generator() -> Generator {
        Generator {
            tile_height: 30,
            ..Generator::default()
        }
    }

    #[test]
    fn empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let n = generate_dataset(&generator(), PuzzleKind::A, &experts(), 0, 1, dir.path()).unwrap();
        assert_eq!(n, 0);
        assert_eq!(fs::read_to_string(dir.path().join(DATASET_FILE)).unwrap(), "");
        assert_eq!(read_manifest(dir.path()).unwrap().count, 0);
    }

    #[test]
    fn written_records_read_back_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let n = generate_dataset(&generator(), PuzzleKind::C, &experts(), 12, 7, dir.path()).unwrap();
        assert_eq!(n, 12);
        let records = read_dataset(dir.path()).unwrap();
        assert_eq!(records.len(), 12);
        for r in &records {
            let report = super::super::replay(r, |x| load_image(dir.path(), x)).unwrap();
            assert!(report.passed);
        }
    }

    #[test]
    fn missing_image_is_a_serialization_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = generator().record(PuzzleKind::A, &experts(), 3, 0).unwrap();
        let first = p.record.image_refs[0].clone();
        p.images.remove(&first);
        let mut w = DatasetWriter::create(dir.path()).unwrap();
        assert!(matches!(w.write(&p), Err(DatasetError::SerializationError(_))));
    }

    #[test]
    fn corrupted_line_is_rejected_on_readback() {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&generator(), PuzzleKind::A, &experts(), 2, 3, dir.path()).unwrap();
        let path = dir.path().join(DATASET_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("\"kind\":\"A\"", "\"kind\":\"B\"");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::Invalid { line: 1, .. })));
    }
}
