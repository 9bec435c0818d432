//! The staged retouching loop with file-based override between stages.
//!
//! Run directory layout:
//!
//! ```text
//! state.json           PipelineState
//! events.jsonl         append-only event log
//! input.png            the source, 16-bit
//! plan_stage{n}.json   plan document for stage n, written before it runs
//! stage{n}.png         output of stage n, input of stage n+1
//! plan.json            all executed stages, once finished
//! cache/               service responses, unless --cache-dir points elsewhere
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use retouch_core::ops::apply_sequence;
use retouch_core::plan::{parse_plan, serialize_plan};
use retouch_core::{Plan, Stage, StagePlan};
use retouch_oracle::tasks::Oracle;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::client::ClientConfig;
use crate::error::{CliError, ErrorClass};
use crate::files::{read_image, read_text, write_atomic, write_image};

pub const STATE_FILE: &str = "state.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const INPUT_IMAGE: &str = "input.png";
pub const PLAN_FILE: &str = "plan.json";
pub const OUTPUT_IMAGE: &str = "output.png";
pub const CACHE_DIR: &str = "cache";

pub fn plan_file(stage: u8) -> String {
    format!("plan_stage{stage}.json")
}

pub fn stage_image(stage: u8) -> String {
    format!("stage{stage}.png")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineState {
    /// File name of the original input.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_tag: Option<String>,
    /// Expanded description of the style tag, fetched once per run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_text: Option<String>,
    pub client: ClientConfig,
    pub pause: bool,
    /// Number of stages executed so far (0..=3).
    pub stage_index: u8,
    /// Stage whose plan is persisted but not yet executed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<u8>,
    /// Image the next stage starts from, relative to the run directory.
    pub current_image: String,
    /// Plan documents of the executed stages.
    pub plans: Vec<String>,
    pub output: PathBuf,
    pub finished: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub input: PathBuf,
    pub run_dir: PathBuf,
    pub output: Option<PathBuf>,
    pub style_tag: Option<String>,
    pub pause: bool,
    pub client: ClientConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Waiting for the user to confirm (and possibly edit) this plan file.
    Paused { stage: u8, plan_file: PathBuf },
    Finished { output: PathBuf },
}

pub struct Run {
    dir: PathBuf,
    state: PipelineState,
}

impl Run {
    /// Sets up a fresh run directory. Fails if it already holds a run.
    pub fn start(opts: PipelineOptions) -> Result<Self, CliError> {
        let dir = opts.run_dir;
        if dir.join(STATE_FILE).exists() {
            return Err(CliError::validation(
                "RunExists",
                format!("{} already holds a pipeline run", dir.display()),
            )
            .with_hint(format!("resume it with `retouch pipeline --resume --run-dir {}`", dir.display())));
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let input = read_image(&opts.input)?;
        write_image(&dir.join(INPUT_IMAGE), &input)?;
        let mut client = opts.client;
        if client.cache_dir.is_none() {
            client.cache_dir = Some(dir.join(CACHE_DIR));
        }
        let state = PipelineState {
            source: opts
                .input
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or(INPUT_IMAGE)
                .to_string(),
            style_tag: opts.style_tag,
            style_text: None,
            client,
            pause: opts.pause,
            stage_index: 0,
            pending: None,
            current_image: INPUT_IMAGE.to_string(),
            plans: Vec::new(),
            output: opts.output.unwrap_or_else(|| dir.join(OUTPUT_IMAGE)),
            finished: false,
        };
        let run = Run { dir, state };
        run.save()?;
        run.log(json!({"event": "started", "source": run.state.source}))?;
        Ok(run)
    }

    /// Reopens a run. `client` replaces the stored service configuration.
    pub fn open(dir: &Path, client: Option<ClientConfig>) -> Result<Self, CliError> {
        let path = dir.join(STATE_FILE);
        let mut state: PipelineState = serde_json::from_str(&read_text(&path)?)?;
        if let Some(mut c) = client {
            if c.cache_dir.is_none() {
                c.cache_dir = state.client.cache_dir.clone();
            }
            state.client = c;
        }
        Ok(Run {
            dir: dir.to_path_buf(),
            state,
        })
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn save(&self) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&self.state)?;
        text.push('\n');
        write_atomic(&self.dir.join(STATE_FILE), text.as_bytes())
    }

    fn log(&self, event: serde_json::Value) -> Result<(), CliError> {
        let path = self.dir.join(EVENTS_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        writeln!(f, "{event}").map_err(|e| CliError::io(&path, e))
    }

    fn resume_hint(&self) -> String {
        format!(
            "state is saved; resume with `retouch pipeline --resume --run-dir {}`",
            self.dir.display()
        )
    }

    /// Advances until the run finishes or pauses for confirmation.
    pub fn drive(&mut self) -> Result<Outcome, CliError> {
        if self.state.finished {
            return Ok(Outcome::Finished {
                output: self.state.output.clone(),
            });
        }
        let oracle = self.state.client.build()?;
        self.step_all(&oracle).map_err(|e| {
            if e.class == ErrorClass::Service && e.hint.is_none() {
                let hint = self.resume_hint();
                e.with_hint(hint)
            } else {
                e
            }
        })
    }

    fn style(&mut self, oracle: &Oracle) -> Result<Option<String>, CliError> {
        let Some(tag) = self.state.style_tag.clone() else {
            return Ok(None);
        };
        if self.state.style_text.is_none() {
            let text = oracle.characterize_style(&tag)?.parsed;
            self.log(json!({"event": "style_characterized", "style_tag": tag}))?;
            self.state.style_text = Some(text);
            self.save()?;
        }
        Ok(Some(format!(
            "Requested style: \"{tag}\". {}",
            self.state.style_text.as_deref().unwrap_or_default()
        )))
    }

    fn step_all(&mut self, oracle: &Oracle) -> Result<Outcome, CliError> {
        let style = self.style(oracle)?;
        while self.state.stage_index < 3 {
            let n = self.state.stage_index + 1;
            let stage = Stage::from_number(n).expect("stage numbers 1..=3");
            let current = read_image(&self.dir.join(&self.state.current_image))?;
            let plan_path = self.dir.join(plan_file(n));

            let stage_plan = if self.state.pending == Some(n) {
                let plan = self.load_stage_plan(&plan_path, stage, oracle, &current)?;
                self.log(json!({"event": "plan_confirmed", "stage": n}))?;
                plan
            } else {
                let planned = oracle.plan_stage(&current, stage, style.as_deref())?;
                let resolved = oracle.resolve_values(&planned.parsed, &current)?;
                for f in &resolved.flags {
                    log::warn!("stage {n}: {} value {} clamped to {}", f.op, f.requested, f.applied);
                }
                self.write_plan(&plan_path, &[resolved.plan.clone()])?;
                self.log(json!({
                    "event": "stage_planned",
                    "stage": n,
                    "plan": plan_file(n),
                    "no_edit": resolved.plan.is_no_edit(),
                    "clamped": resolved.flags,
                }))?;
                if self.state.pause {
                    self.state.pending = Some(n);
                    self.save()?;
                    return Ok(Outcome::Paused {
                        stage: n,
                        plan_file: plan_path,
                    });
                }
                resolved.plan
            };

            let edited = apply_sequence(&current, &stage_plan.adjustments)?;
            let image = stage_image(n);
            write_image(&self.dir.join(&image), &edited)?;
            self.state.stage_index = n;
            self.state.pending = None;
            self.state.current_image = image.clone();
            self.state.plans.push(plan_file(n));
            self.save()?;
            self.log(json!({"event": "stage_executed", "stage": n, "image": image}))?;
        }
        self.finish()
    }

    /// Reads a persisted (possibly hand-edited) stage plan. Triplets left
    /// without values are resolved again.
    fn load_stage_plan(
        &self,
        path: &Path,
        stage: Stage,
        oracle: &Oracle,
        current: &retouch_core::ImageBuffer,
    ) -> Result<StagePlan, CliError> {
        let plan = parse_plan(&read_text(path)?)
            .map_err(|e| CliError::from(e).with_hint(format!("fix {} and resume", path.display())))?;
        let mut stages = plan.stages.into_iter();
        let (Some(sp), None) = (stages.next(), stages.next()) else {
            return Err(CliError::validation(
                "SchemaError",
                format!("{} must hold exactly one stage", path.display()),
            ));
        };
        if sp.stage != stage {
            return Err(CliError::validation(
                "StageMismatch",
                format!("{} holds stage {}, expected {}", path.display(), sp.stage.number(), stage.number()),
            ));
        }
        if sp.needs_values() {
            let resolved = oracle.resolve_values(&sp, current)?.plan;
            self.write_plan(path, &[resolved.clone()])?;
            return Ok(resolved);
        }
        Ok(sp)
    }

    fn write_plan(&self, path: &Path, stages: &[StagePlan]) -> Result<(), CliError> {
        let plan = Plan {
            source: self.state.source.clone(),
            style_tag: self.state.style_tag.clone(),
            stages: stages.to_vec(),
        };
        plan.validate()?;
        write_atomic(path, serialize_plan(&plan).as_bytes())
    }

    fn finish(&mut self) -> Result<Outcome, CliError> {
        let mut stages = Vec::new();
        for name in &self.state.plans {
            stages.extend(parse_plan(&read_text(&self.dir.join(name))?)?.stages);
        }
        self.write_plan(&self.dir.join(PLAN_FILE), &stages)?;
        let final_image = read_image(&self.dir.join(&self.state.current_image))?;
        write_image(&self.state.output, &final_image)?;
        self.state.finished = true;
        self.save()?;
        self.log(json!({"event": "finished", "output": self.state.output}))?;
        Ok(Outcome::Finished {
            output: self.state.output.clone(),
        })
    }
}

/// Starts a run and drives it to completion or the first pause.
pub fn run_pipeline(opts: PipelineOptions) -> Result<Outcome, CliError> {
    Run::start(opts)?.drive()
}

/// Continues a paused or interrupted run.
pub fn resume_pipeline(dir: &Path, client: Option<ClientConfig>) -> Result<Outcome, CliError> {
    Run::open(dir, client)?.drive()
}
