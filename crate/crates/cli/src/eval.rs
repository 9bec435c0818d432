//! Metric evaluation of predicted images against one or more target sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use retouch_core::metrics::{HistScores, MetricReport};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::files::{list_images, read_image, stem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// One target set; every prediction is scored against its namesake.
    Single,
    /// Several target sets: best PSNR and SSIM over the targets, histogram
    /// scores averaged over all of them.
    BestOf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub name: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub reduction: Reduction,
    pub targets: Vec<PathBuf>,
    pub count: usize,
    pub mean: MetricReport,
    pub pairs: Vec<PairScore>,
}

fn by_name(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    Ok(list_images(dir)?.into_iter().map(|p| (stem(&p), p)).collect())
}

/// Scores every image in `pred` against the same-named image in each target
/// directory. Name sets must match exactly.
pub fn evaluate(pred: &Path, targets: &[PathBuf], reduction: Reduction) -> Result<EvalReport, CliError> {
    match (reduction, targets.len()) {
        (_, 0) => return Err(CliError::validation("Usage", "at least one target directory is required")),
        (Reduction::Single, n) if n > 1 => {
            return Err(CliError::validation("Usage", "single reduction takes exactly one target directory"))
        }
        _ => {}
    }
    let preds = by_name(pred)?;
    let target_sets: Vec<BTreeMap<String, PathBuf>> = targets.iter().map(|t| by_name(t)).collect::<Result<_, _>>()?;

    let mut unmatched = Vec::new();
    for (dir, set) in targets.iter().zip(&target_sets) {
        for name in preds.keys().filter(|n| !set.contains_key(*n)) {
            unmatched.push(format!("{name} (missing from {})", dir.display()));
        }
        for name in set.keys().filter(|n| !preds.contains_key(*n)) {
            unmatched.push(format!("{name} (missing from {})", pred.display()));
        }
    }
    if !unmatched.is_empty() {
        return Err(CliError::validation(
            "UnmatchedFiles",
            format!("file sets differ; unmatched names:\n  {}", unmatched.join("\n  ")),
        ));
    }
    if preds.is_empty() {
        return Err(CliError::validation("Usage", format!("no images in {}", pred.display())));
    }

    let pairs: Vec<PairScore> = preds
        .par_iter()
        .map(|(name, path)| {
            let p = read_image(path)?;
            let reports = target_sets
                .iter()
                .map(|set| Ok(MetricReport::compute(&p, &read_image(&set[name])?)?))
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(PairScore {
                name: name.clone(),
                report: MetricReport::best_of(&reports).expect("at least one target"),
            })
        })
        .collect::<Result<_, CliError>>()?;

    let n = pairs.len() as f64;
    let mean = MetricReport {
        psnr_db: pairs.iter().map(|p| p.report.psnr_db).sum::<f64>() / n,
        ssim: pairs.iter().map(|p| p.report.ssim).sum::<f64>() / n,
        hist: HistScores::average(&pairs.iter().map(|p| p.report.hist).collect::<Vec<_>>()),
    };
    Ok(EvalReport {
        reduction,
        targets: targets.to_vec(),
        count: pairs.len(),
        mean,
        pairs,
    })
}

/// Flat table, one row per image, for spreadsheet import.
pub fn write_csv(report: &EvalReport, out: impl std::io::Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "psnr_db", "ssim", "hist_contrast", "hist_luminance", "hist_saturation", "hist_mean"])?;
    let row = |name: &str, r: &MetricReport| {
        vec![
            name.to_string(),
            format!("{:.4}", r.psnr_db),
            format!("{:.6}", r.ssim),
            format!("{:.4}", r.hist.contrast),
            format!("{:.4}", r.hist.luminance),
            format!("{:.4}", r.hist.saturation),
            format!("{:.4}", r.hist.mean),
        ]
    };
    for p in &report.pairs {
        w.write_record(row(&p.name, &p.report))?;
    }
    w.write_record(row("MEAN", &report.mean))?;
    w.flush()?;
    Ok(())
}
