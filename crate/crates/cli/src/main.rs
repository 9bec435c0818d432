use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use retouch_cli::client::{ClientConfig, ClientKind};
use retouch_cli::commands::{self, ExpertSource};
use retouch_cli::eval::{self, Reduction};
use retouch_cli::files::{list_images, read_image, write_atomic};
use retouch_cli::invert;
use retouch_cli::pipeline::{self, Outcome, PipelineOptions};
use retouch_cli::CliError;
use retouch_core::puzzles::{Generator, PuzzleKind, TILE_HEIGHT};
use retouch_core::Stage;

#[derive(Parser)]
#[command(name = "retouch", version, about = "Procedural photo retouching, puzzle datasets and evaluation")]
struct Cli {
    /// Global seed for dataset generation and sampled checks.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Directory of cached service responses.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ClientArgs {
    /// Use the deterministic offline client (no-edit answers unless --stub-plan).
    #[arg(long)]
    stub: bool,
    /// Plan document the stub answers with; implies --stub.
    #[arg(long, value_name = "PLAN")]
    stub_plan: Option<PathBuf>,
    /// Answer only from the response cache.
    #[arg(long, conflicts_with_all = ["stub", "stub_plan"])]
    offline: bool,
    /// Use the live endpoint (the default for new runs).
    #[arg(long, conflicts_with_all = ["stub", "stub_plan", "offline"])]
    live: bool,
    /// Bound on concurrent requests to the live endpoint.
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
}

impl ClientArgs {
    /// The configuration the flags ask for, if any flag was given.
    fn explicit(&self, cache_dir: &Option<PathBuf>) -> Option<ClientConfig> {
        let kind = if self.offline {
            ClientKind::Replay
        } else if self.stub || self.stub_plan.is_some() {
            ClientKind::Stub
        } else if self.live {
            ClientKind::Http
        } else {
            return None;
        };
        Some(ClientConfig {
            kind,
            stub_plan: self.stub_plan.clone(),
            cache_dir: cache_dir.clone(),
            max_in_flight: self.max_in_flight,
        })
    }

    fn config(&self, cache_dir: &Option<PathBuf>) -> ClientConfig {
        self.explicit(cache_dir).unwrap_or(ClientConfig {
            kind: ClientKind::Http,
            stub_plan: None,
            cache_dir: cache_dir.clone(),
            max_in_flight: self.max_in_flight,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply a plan document to an image.
    Apply {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Plan and execute the three stages on an image.
    Pipeline {
        #[arg(long, required_unless_present = "resume")]
        input: Option<PathBuf>,
        /// Run directory holding state, plans and intermediate images.
        #[arg(long)]
        run_dir: PathBuf,
        /// Final image (default: <run-dir>/output.png).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Style tag, e.g. "vibrant and punchy colors".
        #[arg(long)]
        style: Option<String>,
        /// Stop after persisting each stage plan; continue with --resume.
        #[arg(long)]
        pause: bool,
        /// Continue a paused or interrupted run.
        #[arg(long, conflicts_with_all = ["input", "style", "output"])]
        resume: bool,
        #[command(flatten)]
        client: ClientArgs,
    },
    /// Generate a puzzle dataset.
    PuzzleGen {
        #[arg(long)]
        kind: PuzzleKind,
        /// Directory of expert-edited images.
        #[arg(long, required_unless_present = "synthetic")]
        experts: Option<PathBuf>,
        /// Use this many images of the built-in procedural corpus instead.
        #[arg(long, conflicts_with = "experts")]
        synthetic: Option<usize>,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TILE_HEIGHT)]
        tile_height: u32,
    },
    /// Attach synthesized reasoning to the records of a dataset.
    ReasonSynth {
        /// Dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Regenerate reasoning that is already present.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        client: ClientArgs,
    },
    /// Score predictions against target images.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Target directory; repeat for best-of reduction.
        #[arg(long = "target", required = true)]
        targets: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Reduction::Single)]
        reduction: Reduction,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write a CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Round-trip every operation and report the PSNR.
    VerifyInvert {
        /// Directory of test images (default: procedural corpus).
        #[arg(long)]
        images: Option<PathBuf>,
        /// Number of procedural images when --images is not given.
        #[arg(long, default_value_t = 10)]
        synthetic: usize,
        /// Random values per operation.
        #[arg(long, default_value_t = 5)]
        values: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// List the operation library.
    ListOps {
        #[arg(long)]
        stage: Option<u8>,
        #[arg(long)]
        json: bool,
    },
}

fn parse_stage(n: Option<u8>) -> Result<Option<Stage>, CliError> {
    n.map(|n| Stage::from_number(n).ok_or_else(|| CliError::validation("Usage", format!("stage must be 1, 2 or 3, got {n}"))))
        .transpose()
}

fn to_json(value: &impl serde::Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn report_outcome(outcome: Outcome, run_dir: &std::path::Path) {
    match outcome {
        Outcome::Paused { stage, plan_file } => {
            println!("stage {stage} planned: {}", plan_file.display());
            println!(
                "edit the plan if needed, then continue with `retouch pipeline --resume --run-dir {}`",
                run_dir.display()
            );
        }
        Outcome::Finished { output } => println!("wrote {}", output.display()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Apply { input, plan, output } => {
            commands::apply_plan(&input, &plan, &output)?;
            println!("wrote {}", output.display());
        }
        Command::Pipeline {
            input,
            run_dir,
            output,
            style,
            pause,
            resume,
            client,
        } => {
            let outcome = if resume {
                pipeline::resume_pipeline(&run_dir, client.explicit(&cli.cache_dir))?
            } else {
                pipeline::run_pipeline(PipelineOptions {
                    input: input.expect("required unless resuming"),
                    run_dir: run_dir.clone(),
                    output,
                    style_tag: style,
                    pause,
                    client: client.config(&cli.cache_dir),
                })?
            };
            report_outcome(outcome, &run_dir);
        }
        Command::PuzzleGen {
            kind,
            experts,
            synthetic,
            count,
            out,
            tile_height,
        } => {
            let source = match (experts, synthetic) {
                (Some(dir), _) => ExpertSource::Dir(dir),
                (None, Some(n)) => ExpertSource::Synthetic {
                    count: n,
                    width: 384,
                    height: 256,
                },
                (None, None) => unreachable!("clap requires one of them"),
            };
            let experts = commands::load_experts(&source)?;
            let generator = Generator {
                tile_height,
                ..Generator::default()
            };
            let summary = commands::puzzle_gen(&generator, kind, &experts, count, cli.seed, &out)?;
            print!("{}", to_json(&summary)?);
            if summary.replay_passed != summary.records {
                return Err(CliError::validation(
                    "ReplayFailed",
                    format!("{} of {} records failed replay", summary.records - summary.replay_passed, summary.records),
                ));
            }
        }
        Command::ReasonSynth { dataset, force, client } => {
            let oracle = client.config(&cli.cache_dir).build()?;
            let summary = commands::reason_synth(&dataset, &oracle, force)?;
            print!("{}", to_json(&summary)?);
            if !summary.failed.is_empty() {
                return Err(CliError::new(
                    retouch_cli::ErrorClass::Service,
                    "SchemaViolation",
                    format!("{} records have no reasoning yet", summary.failed.len()),
                )
                .with_hint("re-run the same command to retry only the missing records"));
            }
        }
        Command::Eval {
            pred,
            targets,
            reduction,
            report,
            csv,
        } => {
            let r = eval::evaluate(&pred, &targets, reduction)?;
            let json = to_json(&r)?;
            match report {
                Some(path) => write_atomic(&path, json.as_bytes())?,
                None => print!("{json}"),
            }
            if let Some(path) = csv {
                let mut buf = Vec::new();
                eval::write_csv(&r, &mut buf).map_err(|e| CliError::validation("Csv", e.to_string()))?;
                write_atomic(&path, &buf)?;
            }
            eprintln!(
                "{} images: PSNR {:.2} dB, SSIM {:.4}, histogram {:.2}",
                r.count, r.mean.psnr_db, r.mean.ssim, r.mean.hist.mean
            );
        }
        Command::VerifyInvert {
            images,
            synthetic,
            values,
            report,
        } => {
            let imgs = match images {
                Some(dir) => list_images(&dir)?.iter().map(|p| read_image(p)).collect::<Result<Vec<_>, _>>()?,
                None => retouch_core::corpus::corpus(synthetic, 256, 192),
            };
            let cases = invert::verify(&imgs, &invert::draw_values(cli.seed, values))?;
            let failed: Vec<_> = cases.iter().filter(|c| !c.passed).collect();
            let exempt = cases.iter().filter(|c| c.exempt()).count();
            let clipped = cases.iter().filter(|c| c.clipped_pixels > 0).count();
            let min = cases.iter().filter_map(|c| c.psnr_db).fold(f64::INFINITY, f64::min);
            if let Some(path) = report {
                write_atomic(&path, to_json(&cases)?.as_bytes())?;
            }
            println!(
                "{} round trips: {} passed, {} failed, {} with clipped pixels excluded, {} fully exempt; min PSNR {:.2} dB",
                cases.len(),
                cases.len() - failed.len(),
                failed.len(),
                clipped,
                exempt,
                min
            );
            for c in &failed {
                println!(
                    "  FAIL {} {:+} on image {}: {:.2} dB < {} dB",
                    c.op,
                    c.value,
                    c.image,
                    c.psnr_db.unwrap_or(f64::NAN),
                    c.floor_db
                );
            }
            if !failed.is_empty() {
                return Err(CliError::validation("InvertibilityFailed", format!("{} round trips below floor", failed.len())));
            }
        }
        Command::ListOps { stage, json } => {
            let stage = parse_stage(stage)?;
            if json {
                print!("{}", to_json(&retouch_core::ops::list_ops(stage))?);
            } else {
                print!("{}", commands::render_ops(stage));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            log::warn!("cannot configure worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind, e.message);
            if let Some(hint) = &e.hint {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
