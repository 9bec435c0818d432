//! Thin command wrappers over the core and oracle crates.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use retouch_core::corpus::expert_image;
use retouch_core::ops::{apply_sequence, list_ops, Stage};
use retouch_core::plan::parse_plan;
use retouch_core::puzzles::dataset::{generate_dataset, load_image, read_dataset, rewrite_records};
use retouch_core::puzzles::{replay, ExpertImage, Generator, PuzzleKind};
use retouch_oracle::tasks::Oracle;
use serde::Serialize;

use crate::error::CliError;
use crate::files::{list_images, read_image, read_text, stem, write_image};

/// Applies a plan document to an image.
pub fn apply_plan(input: &Path, plan: &Path, output: &Path) -> Result<(), CliError> {
    let plan = parse_plan(&read_text(plan)?)?;
    let img = read_image(input)?;
    write_image(output, &apply_sequence(&img, &plan.adjustments())?)
}

/// Where expert images come from.
#[derive(Debug, Clone)]
pub enum ExpertSource {
    Dir(PathBuf),
    /// The first `n` images of the built-in procedural corpus.
    Synthetic { count: usize, width: u32, height: u32 },
}

pub fn load_experts(source: &ExpertSource) -> Result<Vec<ExpertImage>, CliError> {
    let experts: Vec<ExpertImage> = match source {
        ExpertSource::Dir(dir) => list_images(dir)?
            .par_iter()
            .map(|p| {
                Ok(ExpertImage {
                    name: stem(p),
                    image: read_image(p)?,
                })
            })
            .collect::<Result<_, CliError>>()?,
        ExpertSource::Synthetic { count, width, height } => (0..*count as u64)
            .map(|i| ExpertImage {
                name: format!("synthetic{i:03}"),
                image: expert_image(i, *width, *height),
            })
            .collect(),
    };
    if experts.is_empty() {
        return Err(CliError::validation("NoExperts", "no expert images found"));
    }
    Ok(experts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenSummary {
    pub kind: PuzzleKind,
    pub records: usize,
    pub replay_passed: usize,
    pub min_replay_psnr_db: f64,
}

/// Generates a dataset, then reads it back and replays every answer key.
pub fn puzzle_gen(
    generator: &Generator,
    kind: PuzzleKind,
    experts: &[ExpertImage],
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<GenSummary, CliError> {
    generate_dataset(generator, kind, experts, count, seed, out)?;
    let records = read_dataset(out)?;
    let reports = records
        .par_iter()
        .map(|r| replay(r, |name| load_image(out, name)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GenSummary {
        kind,
        records: records.len(),
        replay_passed: reports.iter().filter(|r| r.passed).count(),
        min_replay_psnr_db: reports.iter().map(|r| r.psnr_db).fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReasonSummary {
    pub synthesized: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
}

/// Attaches reasoning to every record that lacks it (all records with
/// `force`). Successful records are saved even when others fail.
pub fn reason_synth(dataset: &Path, oracle: &Oracle, force: bool) -> Result<ReasonSummary, CliError> {
    let mut records = read_dataset(dataset)?;
    let todo: Vec<usize> = (0..records.len())
        .filter(|&i| force || records[i].reasoning.is_none())
        .collect();
    let results: Vec<(usize, Result<String, CliError>)> = todo
        .par_iter()
        .map(|&i| {
            let r = &records[i];
            let out = load_image(dataset, &r.composition.stitched)
                .map_err(CliError::from)
                .and_then(|strip| Ok(oracle.synthesize_reasoning(r, &strip)?.parsed));
            (i, out)
        })
        .collect();
    let mut summary = ReasonSummary {
        synthesized: 0,
        skipped: records.len() - todo.len(),
        failed: Vec::new(),
    };
    for (i, out) in results {
        match out {
            Ok(text) => {
                records[i].reasoning = Some(text);
                summary.synthesized += 1;
            }
            Err(e) => summary.failed.push((records[i].record_id.clone(), e.to_string())),
        }
    }
    rewrite_records(dataset, &records)?;
    Ok(summary)
}

/// Operation table, one line per operation.
pub fn render_ops(stage: Option<Stage>) -> String {
    let mut out = String::new();
    for d in list_ops(stage) {
        out.push_str(&format!(
            "{:<22} {} {:<15} {:<12} {}\n",
            d.op.name(),
            d.stage.number(),
            d.stage.label(),
            format!("{:?}", d.invertibility),
            d.doc
        ));
    }
    out
}
