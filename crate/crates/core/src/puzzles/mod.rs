//! Puzzle dataset generators.
//!
//! * Puzzle A: an expert image and one edited copy; the answer is the
//!   operation and value.
//! * Puzzle B: the expert image and four variants of one operation in shuffled
//!   order; the answer is the order by value, the position of the expert
//!   image, and the correction for one designated variant.
//! * Puzzle C: an expert image degraded by up to four operations of one stage;
//!   the answer is the inverse plan, or a no-edit flag.
//!
//! Every record carries its own seed, derived from the global seed and the
//! record index, so records can be generated in any order or in parallel.

pub mod dataset;
pub mod stitch;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageBuffer;
use crate::metrics::{psnr, MetricError, PSNR_CAP};
use crate::ops::{apply, apply_sequence, canonical_order, Adjustment, OpError, OpId, Stage, OP_COUNT};

pub use stitch::{stitch, StitchError, TILE_HEIGHT};

pub const GENERATOR_VERSION: &str = "1";

/// Attempts per record before giving up with [`PuzzleError::DegenerateSample`].
pub const MAX_ATTEMPTS: usize = 10;

/// An edit is degenerate when it stays within 0.5 dB of the identical-image cap.
pub const DEGENERATE_PSNR: f64 = PSNR_CAP - 0.5;

/// Replay floors for the answer keys.
pub const B_REPLAY_FLOOR_DB: f64 = 35.0;
pub const C_REPLAY_FLOOR_DB: f64 = 30.0;

#[derive(Debug, Error)]
pub enum PuzzleError {
    #[error("no non-degenerate puzzle {kind} sample for {op} after {attempts} attempts")]
    DegenerateSample { kind: PuzzleKind, op: String, attempts: usize },
    #[error("invalid perturbation policy: {0}")]
    InvalidPolicy(String),
    #[error("no expert images supplied")]
    NoExperts,
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stitch(#[from] StitchError),
    #[error("image `{0}` is not available")]
    MissingImage(String),
    #[error("record {record}: {reason}")]
    InvalidRecord { record: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PuzzleKind {
    A,
    B,
    C,
}

impl PuzzleKind {
    pub const ALL: [PuzzleKind; 3] = [PuzzleKind::A, PuzzleKind::B, PuzzleKind::C];
}

impl fmt::Display for PuzzleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PuzzleKind::A => "A",
            PuzzleKind::B => "B",
            PuzzleKind::C => "C",
        })
    }
}

impl FromStr for PuzzleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(PuzzleKind::A),
            "B" => Ok(PuzzleKind::B),
            "C" => Ok(PuzzleKind::C),
            other => Err(format!("unknown puzzle kind `{other}` (expected A, B or C)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationPolicy {
    pub min_magnitude: i32,
    pub grid_step: i32,
    /// Inclusive range of operations perturbed per Puzzle C record.
    pub stage_op_count: (usize, usize),
    pub no_edit_fraction: f64,
}

impl Default for PerturbationPolicy {
    fn default() -> Self {
        Self {
            min_magnitude: 15,
            grid_step: 5,
            stage_op_count: (1, 4),
            no_edit_fraction: 0.1,
        }
    }
}

impl PerturbationPolicy {
    pub fn validate(&self) -> Result<(), PuzzleError> {
        let bad = |msg: &str| Err(PuzzleError::InvalidPolicy(msg.to_string()));
        if self.min_magnitude < 5 || self.min_magnitude > 100 {
            return bad("min_magnitude must lie in [5, 100]");
        }
        if self.grid_step < 1 {
            return bad("grid_step must be positive");
        }
        let (lo, hi) = self.stage_op_count;
        if lo < 1 || lo > hi {
            return bad("stage_op_count must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.no_edit_fraction) {
            return bad("no_edit_fraction must lie in [0, 1]");
        }
        // B needs two values of each sign
        if self.value_grid().iter().filter(|&&v| v > 0).count() < 2 {
            return bad("value grid too sparse");
        }
        Ok(())
    }

    /// Allowed perturbation values: grid multiples in `[-100, 100]` with
    /// magnitude at least `min_magnitude`.
    pub fn value_grid(&self) -> Vec<i32> {
        (-100..=100)
            .filter(|v| v % self.grid_step.max(1) == 0 && v.abs() >= self.min_magnitude)
            .collect()
    }
}

/// Per-record seed: word `index` of the ChaCha8 stream keyed by the global
/// seed. Independent of generation order.
pub fn record_seed(global_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(global_seed);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileRole {
    Source,
    Edited,
    Expert,
    Variant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tile {
    pub image: String,
    pub role: TileRole,
}

/// Stitched strip and its tiles, left to right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Composition {
    pub stitched: String,
    pub tiles: Vec<Tile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "puzzle", deny_unknown_fields)]
pub enum GroundTruth {
    A {
        adjustment: Adjustment,
    },
    B {
        op: OpId,
        /// Implicit value of each tile, left to right; the expert tile is 0.
        values: Vec<i32>,
        /// Tile positions sorted from lowest to highest value.
        order: Vec<usize>,
        optimal_index: usize,
        designated_index: usize,
        correction: Adjustment,
    },
    C {
        stage: Stage,
        no_edit: bool,
        perturbation: Vec<Adjustment>,
        plan: Vec<Adjustment>,
    },
}

impl GroundTruth {
    pub fn kind(&self) -> PuzzleKind {
        match self {
            GroundTruth::A { .. } => PuzzleKind::A,
            GroundTruth::B { .. } => PuzzleKind::B,
            GroundTruth::C { .. } => PuzzleKind::C,
        }
    }

    /// Operations the answer key involves.
    pub fn ops(&self) -> Vec<OpId> {
        match self {
            GroundTruth::A { adjustment } => vec![adjustment.op],
            GroundTruth::B { op, .. } => vec![*op],
            GroundTruth::C { plan, .. } => plan.iter().map(|a| a.op).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuzzleRecord {
    pub kind: PuzzleKind,
    pub record_id: String,
    pub seed: u64,
    pub source: String,
    pub image_refs: Vec<String>,
    pub composition: Composition,
    pub ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

impl PuzzleRecord {
    /// Image the model sees at training time for this record.
    pub fn input_image(&self) -> &str {
        match self.kind {
            PuzzleKind::C => &self.composition.tiles[0].image,
            _ => &self.composition.stitched,
        }
    }

    /// Structural checks on the answer key and references.
    pub fn validate(&self) -> Result<(), PuzzleError> {
        let fail = |reason: String| {
            Err(PuzzleError::InvalidRecord {
                record: self.record_id.clone(),
                reason,
            })
        };
        if self.record_id.is_empty() {
            return fail("empty record_id".into());
        }
        if self.kind != self.ground_truth.kind() {
            return fail("kind does not match ground truth".into());
        }
        let tiles = &self.composition.tiles;
        for t in tiles {
            if !self.image_refs.contains(&t.image) {
                return fail(format!("tile {} missing from image_refs", t.image));
            }
        }
        if !self.image_refs.contains(&self.composition.stitched) {
            return fail("stitched image missing from image_refs".into());
        }
        let roles: Vec<TileRole> = tiles.iter().map(|t| t.role).collect();
        match &self.ground_truth {
            GroundTruth::A { adjustment } => {
                if roles != [TileRole::Source, TileRole::Edited] {
                    return fail("puzzle A tiles must be [source, edited]".into());
                }
                if adjustment.value() == 0 {
                    return fail("zero adjustment".into());
                }
            }
            GroundTruth::B {
                op,
                values,
                order,
                optimal_index,
                designated_index,
                correction,
            } => {
                if values.len() != 5 || tiles.len() != 5 {
                    return fail("puzzle B needs five tiles".into());
                }
                let mut sorted = values.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != 5 {
                    return fail("values not pairwise distinct".into());
                }
                let mut expected: Vec<usize> = (0..5).collect();
                expected.sort_by_key(|&i| values[i]);
                if *order != expected {
                    return fail("order does not sort the values".into());
                }
                if values.get(*optimal_index) != Some(&0) || tiles[*optimal_index].role != TileRole::Expert {
                    return fail("optimal tile must be the expert image with value 0".into());
                }
                if *designated_index >= 5 || *designated_index == *optimal_index {
                    return fail("designated tile must be a variant".into());
                }
                if correction.op != *op || correction.value() != -values[*designated_index] {
                    return fail("correction must negate the designated variant".into());
                }
            }
            GroundTruth::C {
                stage,
                no_edit,
                perturbation,
                plan,
            } => {
                if roles != [TileRole::Source, TileRole::Expert] {
                    return fail("puzzle C tiles must be [source, expert]".into());
                }
                if *no_edit != plan.is_empty() || plan.len() != perturbation.len() {
                    return fail("no_edit must hold exactly when the plan is empty".into());
                }
                if plan.iter().any(|a| a.stage() != *stage) {
                    return fail("plan operation outside the record's stage".into());
                }
                let negated: Vec<Adjustment> = perturbation.iter().map(Adjustment::invert).collect();
                if canonical_order(&negated) != *plan {
                    return fail("plan must be the negated perturbation in canonical order".into());
                }
            }
        }
        Ok(())
    }
}

/// An expert-edited image and the name it is referenced by.
#[derive(Debug, Clone)]
pub struct ExpertImage {
    pub name: String,
    pub image: ImageBuffer,
}

/// A record plus the images it references, keyed by reference.
#[derive(Debug, Clone)]
pub struct GeneratedPuzzle {
    pub record: PuzzleRecord,
    pub images: BTreeMap<String, ImageBuffer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplayReport {
    pub psnr_db: f64,
    pub exact: bool,
    pub passed: bool,
}

/// Mechanically replays a record's answer key. `load` resolves image
/// references.
pub fn replay(
    record: &PuzzleRecord,
    mut load: impl FnMut(&str) -> Result<ImageBuffer, PuzzleError>,
) -> Result<ReplayReport, PuzzleError> {
    record.validate()?;
    let tile = |i: usize| record.composition.tiles[i].image.as_str();
    let (reconstructed, target, floor) = match &record.ground_truth {
        GroundTruth::A { adjustment } => {
            let edited = apply(&load(tile(0))?, *adjustment)?;
            (edited, load(tile(1))?, f64::INFINITY)
        }
        GroundTruth::B {
            optimal_index,
            designated_index,
            correction,
            ..
        } => {
            let corrected = apply(&load(tile(*designated_index))?, *correction)?;
            (corrected, load(tile(*optimal_index))?, B_REPLAY_FLOOR_DB)
        }
        GroundTruth::C { no_edit, plan, .. } => {
            let source = load(tile(0))?;
            let expert = load(tile(1))?;
            if *no_edit {
                let exact = source == expert;
                return Ok(ReplayReport {
                    psnr_db: psnr(&source, &expert)?,
                    exact,
                    passed: exact,
                });
            }
            (apply_sequence(&source, plan)?, expert, C_REPLAY_FLOOR_DB)
        }
    };
    let exact = reconstructed == target;
    let psnr_db = psnr(&reconstructed, &target)?;
    Ok(ReplayReport {
        psnr_db,
        exact,
        passed: exact || psnr_db >= floor,
    })
}

impl GeneratedPuzzle {
    pub fn replay(&self) -> Result<ReplayReport, PuzzleError> {
        replay(&self.record, |r| {
            self.images.get(r).cloned().ok_or_else(|| PuzzleError::MissingImage(r.to_string()))
        })
    }
}

/// Puzzle generator for a fixed policy and tile height.
#[derive(Debug, Clone)]
pub struct Generator {
    pub policy: PerturbationPolicy,
    pub tile_height: u32,
}

impl Default for Generator {
    fn default() -> Self {
        Self {
            policy: PerturbationPolicy::default(),
            tile_height: TILE_HEIGHT,
        }
    }
}

fn image_ref(record_id: &str, name: &str) -> String {
    format!("images/{record_id}_{name}.png")
}

struct Builder {
    record_id: String,
    images: BTreeMap<String, ImageBuffer>,
    refs: Vec<String>,
    tiles: Vec<Tile>,
}

impl Builder {
    fn new(record_id: &str) -> Self {
        Builder {
            record_id: record_id.to_string(),
            images: BTreeMap::new(),
            refs: Vec::new(),
            tiles: Vec::new(),
        }
    }

    fn tile(&mut self, name: &str, role: TileRole, img: ImageBuffer) {
        let r = image_ref(&self.record_id, name);
        self.refs.push(r.clone());
        self.tiles.push(Tile { image: r.clone(), role });
        self.images.insert(r, img);
    }

    fn finish(
        mut self,
        kind: PuzzleKind,
        seed: u64,
        source: &str,
        tile_height: u32,
        ground_truth: GroundTruth,
    ) -> Result<GeneratedPuzzle, PuzzleError> {
        let strip = {
            let imgs: Vec<&ImageBuffer> = self.tiles.iter().map(|t| &self.images[&t.image]).collect();
            stitch(&imgs, tile_height)?
        };
        let stitched = image_ref(&self.record_id, "stitched");
        self.refs.push(stitched.clone());
        self.images.insert(stitched.clone(), strip);
        Ok(GeneratedPuzzle {
            record: PuzzleRecord {
                kind,
                record_id: self.record_id,
                seed,
                source: source.to_string(),
                image_refs: self.refs,
                composition: Composition {
                    stitched,
                    tiles: self.tiles,
                },
                ground_truth,
                reasoning: None,
            },
            images: self.images,
        })
    }
}

fn is_degenerate(a: &ImageBuffer, b: &ImageBuffer) -> Result<bool, PuzzleError> {
    Ok(psnr(a, b)? >= DEGENERATE_PSNR)
}

impl Generator {
    pub fn new(policy: PerturbationPolicy) -> Result<Self, PuzzleError> {
        policy.validate()?;
        Ok(Self {
            policy,
            tile_height: TILE_HEIGHT,
        })
    }

    /// Record `index` of a dataset: expert images are used round robin and
    /// the record seed comes from [`record_seed`].
    pub fn record(
        &self,
        kind: PuzzleKind,
        experts: &[ExpertImage],
        global_seed: u64,
        index: u64,
    ) -> Result<GeneratedPuzzle, PuzzleError> {
        if experts.is_empty() {
            return Err(PuzzleError::NoExperts);
        }
        let expert = &experts[(index % experts.len() as u64) as usize];
        let seed = record_seed(global_seed, index);
        let id = format!("{}-{:06}", kind.to_string().to_lowercase(), index);
        match kind {
            PuzzleKind::A => self.puzzle_a(expert, seed, &id),
            PuzzleKind::B => self.puzzle_b(expert, seed, &id),
            PuzzleKind::C => self.puzzle_c(expert, seed, &id),
        }
    }

    /// Puzzle A: the expert image is the source; one random operation and
    /// value produce the edited image. The value is resampled on degenerate
    /// draws, the operation is kept.
    pub fn puzzle_a(&self, expert: &ExpertImage, seed: u64, record_id: &str) -> Result<GeneratedPuzzle, PuzzleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = self.policy.value_grid();
        let op = OpId::all()[rng.random_range(0..OP_COUNT)];
        for _ in 0..MAX_ATTEMPTS {
            let adj = Adjustment::new(op, *grid.choose(&mut rng).expect("grid not empty") as i64)?;
            let edited = apply(&expert.image, adj)?;
            if is_degenerate(&expert.image, &edited)? {
                continue;
            }
            let mut b = Builder::new(record_id);
            b.tile("source", TileRole::Source, expert.image.clone());
            b.tile("edited", TileRole::Edited, edited);
            return b.finish(PuzzleKind::A, seed, &expert.name, self.tile_height, GroundTruth::A { adjustment: adj });
        }
        Err(PuzzleError::DegenerateSample {
            kind: PuzzleKind::A,
            op: op.name(),
            attempts: MAX_ATTEMPTS,
        })
    }

    /// Puzzle B: four distinct values (both signs present) of one operation
    /// applied to the expert image, shuffled together with it. The designated
    /// variant is drawn among those whose correction replays above the floor.
    pub fn puzzle_b(&self, expert: &ExpertImage, seed: u64, record_id: &str) -> Result<GeneratedPuzzle, PuzzleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = self.policy.value_grid();
        let op = OpId::all()[rng.random_range(0..OP_COUNT)];
        'attempt: for _ in 0..MAX_ATTEMPTS {
            let values: Vec<i32> = loop {
                let v: Vec<i32> = grid.choose_multiple(&mut rng, 4).copied().collect();
                if v.iter().any(|&x| x < 0) && v.iter().any(|&x| x > 0) {
                    break v;
                }
            };
            let mut variants = Vec::with_capacity(4);
            let mut passing = Vec::new();
            for (i, &v) in values.iter().enumerate() {
                let adj = Adjustment::new(op, v as i64)?;
                let img = apply(&expert.image, adj)?;
                if is_degenerate(&expert.image, &img)? {
                    continue 'attempt;
                }
                let back = apply(&img, adj.invert())?;
                if back == expert.image || psnr(&back, &expert.image)? >= B_REPLAY_FLOOR_DB {
                    passing.push(i);
                }
                variants.push(img);
            }
            let Some(&designated) = passing.choose(&mut rng) else {
                continue;
            };
            // tile slot -> None for the expert, Some(i) for variant i
            let mut slots: Vec<Option<usize>> = std::iter::once(None).chain((0..4).map(Some)).collect();
            slots.shuffle(&mut rng);
            let tile_values: Vec<i32> = slots.iter().map(|s| s.map_or(0, |i| values[i])).collect();
            let mut order: Vec<usize> = (0..5).collect();
            order.sort_by_key(|&i| tile_values[i]);
            let optimal_index = slots.iter().position(Option::is_none).expect("expert slot");
            let designated_index = slots.iter().position(|s| *s == Some(designated)).expect("designated slot");

            let mut b = Builder::new(record_id);
            for (pos, slot) in slots.iter().enumerate() {
                match slot {
                    None => b.tile(&format!("tile{pos}"), TileRole::Expert, expert.image.clone()),
                    Some(i) => b.tile(&format!("tile{pos}"), TileRole::Variant, variants[*i].clone()),
                }
            }
            let gt = GroundTruth::B {
                op,
                values: tile_values,
                order,
                optimal_index,
                designated_index,
                correction: Adjustment::new(op, -(values[designated] as i64))?,
            };
            return b.finish(PuzzleKind::B, seed, &expert.name, self.tile_height, gt);
        }
        Err(PuzzleError::DegenerateSample {
            kind: PuzzleKind::B,
            op: op.name(),
            attempts: MAX_ATTEMPTS,
        })
    }

    /// Puzzle C: one stage, 1–4 distinct operations of it with pairwise
    /// distinct values, applied in canonical order. The answer key is the
    /// negated list in canonical order; samples whose key replays below the
    /// floor are redrawn.
    pub fn puzzle_c(&self, expert: &ExpertImage, seed: u64, record_id: &str) -> Result<GeneratedPuzzle, PuzzleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = self.policy.value_grid();
        let stage = Stage::ALL[rng.random_range(0..3)];
        let stage_ops: Vec<OpId> = OpId::all().iter().copied().filter(|o| o.stage() == stage).collect();
        let no_edit = rng.random_bool(self.policy.no_edit_fraction);
        let build = |source: ImageBuffer, perturbation: Vec<Adjustment>, plan: Vec<Adjustment>| {
            let mut b = Builder::new(record_id);
            b.tile("source", TileRole::Source, source);
            b.tile("expert", TileRole::Expert, expert.image.clone());
            let gt = GroundTruth::C {
                stage,
                no_edit: plan.is_empty(),
                perturbation,
                plan,
            };
            b.finish(PuzzleKind::C, seed, &expert.name, self.tile_height, gt)
        };
        if no_edit {
            return build(expert.image.clone(), Vec::new(), Vec::new());
        }
        let (lo, hi) = self.policy.stage_op_count;
        let hi = hi.min(stage_ops.len());
        for _ in 0..MAX_ATTEMPTS {
            let n = rng.random_range(lo.min(hi)..=hi);
            let ops: Vec<OpId> = stage_ops.choose_multiple(&mut rng, n).copied().collect();
            let values: Vec<i32> = grid.choose_multiple(&mut rng, n).copied().collect();
            let perturbation = canonical_order(
                &ops.iter()
                    .zip(&values)
                    .map(|(&op, &v)| Adjustment::new(op, v as i64))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            let source = apply_sequence(&expert.image, &perturbation)?;
            if is_degenerate(&expert.image, &source)? {
                continue;
            }
            let plan = canonical_order(&perturbation.iter().map(Adjustment::invert).collect::<Vec<_>>());
            let replayed = apply_sequence(&source, &plan)?;
            if replayed != expert.image && psnr(&replayed, &expert.image)? < C_REPLAY_FLOOR_DB {
                continue;
            }
            return build(source, perturbation, plan);
        }
        Err(PuzzleError::DegenerateSample {
            kind: PuzzleKind::C,
            op: stage.label().to_string(),
            attempts: MAX_ATTEMPTS,
        })
    }
}
