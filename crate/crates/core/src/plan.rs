//! Staged editing plans, their JSON wire format, and the degree legend.
//!
//! Wire format (UTF-8 JSON, keys in this order):
//!
//! ```json
//! {
//!   "source": "IMG_0042.tif",
//!   "style_tag": "balanced",
//!   "stages": [
//!     {
//!       "stage": 1,
//!       "triplets": [{"adjustment": "...", "issue": "...", "solution": "..."}],
//!       "adjustments": [{"op": "exposure", "value": 35}],
//!       "no_edit_reason": "..."
//!     }
//!   ]
//! }
//! ```
//!
//! `style_tag` and `no_edit_reason` are optional; every other key is required
//! and unknown keys are rejected.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ops::{ops_in_text, Adjustment, OpError, OpId, Stage, MAX_VALUE, MIN_VALUE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan schema error: {0}")]
    SchemaError(String),
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("value {value} for {op} is outside [-100, 100]")]
    ValueOutOfRange { op: String, value: String },
    #[error("{op} belongs to stage {expected}, not stage {found}")]
    StageMismatch { op: String, expected: u8, found: u8 },
    #[error("{op} appears more than once in stage {stage}")]
    DuplicateOp { op: String, stage: u8 },
    #[error("invalid reasoning triplet: {0}")]
    InvalidTriplet(String),
    #[error("unknown degree word `{0}`")]
    UnknownDegreeWord(String),
}

impl From<OpError> for PlanError {
    fn from(e: OpError) -> Self {
        match e {
            OpError::UnknownOp(name) => PlanError::UnknownOp(name),
            OpError::ValueOutOfRange { op, value } => PlanError::ValueOutOfRange {
                op,
                value: value.to_string(),
            },
            other => PlanError::SchemaError(other.to_string()),
        }
    }
}

/// `<Adjustment, Issue, Solution>` reasoning for one planned operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasoningTriplet {
    pub adjustment: String,
    pub issue: String,
    pub solution: String,
}

impl ReasoningTriplet {
    pub fn new(adjustment: impl Into<String>, issue: impl Into<String>, solution: impl Into<String>) -> Self {
        Self {
            adjustment: adjustment.into(),
            issue: issue.into(),
            solution: solution.into(),
        }
    }

    /// The single operation the adjustment text names.
    pub fn op(&self) -> Result<OpId, PlanError> {
        let ops = ops_in_text(&self.adjustment);
        match ops.as_slice() {
            [op] => Ok(*op),
            [] => Err(PlanError::InvalidTriplet(format!(
                "`{}` names no known operation",
                self.adjustment
            ))),
            many => Err(PlanError::InvalidTriplet(format!(
                "`{}` names {} operations",
                self.adjustment,
                many.len()
            ))),
        }
    }

    fn validate(&self) -> Result<OpId, PlanError> {
        for (field, text) in [("adjustment", &self.adjustment), ("issue", &self.issue), ("solution", &self.solution)] {
            if text.trim().is_empty() {
                return Err(PlanError::InvalidTriplet(format!("empty {field}")));
            }
        }
        self.op()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StagePlan {
    pub stage: Stage,
    pub triplets: Vec<ReasoningTriplet>,
    pub adjustments: Vec<Adjustment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_edit_reason: Option<String>,
}

impl StagePlan {
    pub fn no_edit(stage: Stage, reason: impl Into<String>) -> Self {
        StagePlan {
            stage,
            triplets: Vec::new(),
            adjustments: Vec::new(),
            no_edit_reason: Some(reason.into()),
        }
    }

    pub fn from_adjustments(stage: Stage, adjustments: Vec<Adjustment>) -> Result<Self, PlanError> {
        let plan = StagePlan {
            stage,
            triplets: Vec::new(),
            adjustments,
            no_edit_reason: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_triplets(stage: Stage, triplets: Vec<ReasoningTriplet>) -> Result<Self, PlanError> {
        let plan = StagePlan {
            stage,
            triplets,
            adjustments: Vec::new(),
            no_edit_reason: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn is_no_edit(&self) -> bool {
        self.no_edit_reason.is_some()
    }

    /// True when the triplets still need numeric values.
    pub fn needs_values(&self) -> bool {
        !self.triplets.is_empty() && self.adjustments.is_empty()
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let stage = self.stage.number();
        if let Some(reason) = &self.no_edit_reason {
            if reason.trim().is_empty() {
                return Err(PlanError::SchemaError(format!("stage {stage}: empty no_edit_reason")));
            }
            if !self.triplets.is_empty() || !self.adjustments.is_empty() {
                return Err(PlanError::SchemaError(format!(
                    "stage {stage}: no_edit_reason excludes triplets and adjustments"
                )));
            }
            return Ok(());
        }
        if self.triplets.is_empty() && self.adjustments.is_empty() {
            return Err(PlanError::SchemaError(format!(
                "stage {stage}: needs triplets, adjustments or a no_edit_reason"
            )));
        }
        let mut triplet_ops = Vec::new();
        for t in &self.triplets {
            let op = t.validate()?;
            check_membership(op, self.stage, &triplet_ops)?;
            triplet_ops.push(op);
        }
        let mut adj_ops = Vec::new();
        for a in &self.adjustments {
            check_membership(a.op, self.stage, &adj_ops)?;
            adj_ops.push(a.op);
        }
        if !triplet_ops.is_empty() && !adj_ops.is_empty() {
            let t: HashSet<_> = triplet_ops.iter().collect();
            let a: HashSet<_> = adj_ops.iter().collect();
            if t != a {
                return Err(PlanError::SchemaError(format!(
                    "stage {stage}: adjustments do not match the operations named by the triplets"
                )));
            }
        }
        Ok(())
    }
}

fn check_membership(op: OpId, stage: Stage, seen: &[OpId]) -> Result<(), PlanError> {
    if op.stage() != stage {
        return Err(PlanError::StageMismatch {
            op: op.name(),
            expected: op.stage().number(),
            found: stage.number(),
        });
    }
    if seen.contains(&op) {
        return Err(PlanError::DuplicateOp {
            op: op.name(),
            stage: stage.number(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Plan {
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style_tag: Option<String>,
    pub stages: Vec<StagePlan>,
}

impl Plan {
    pub fn new(source: impl Into<String>) -> Self {
        Plan {
            source: source.into(),
            style_tag: None,
            stages: Vec::new(),
        }
    }

    pub fn stage(&self, stage: Stage) -> Option<&StagePlan> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// Inserts or replaces the plan for one stage, keeping stage order.
    pub fn set_stage(&mut self, plan: StagePlan) {
        self.stages.retain(|s| s.stage != plan.stage);
        self.stages.push(plan);
        self.stages.sort_by_key(|s| s.stage);
    }

    /// All resolved adjustments, stage by stage.
    pub fn adjustments(&self) -> Vec<Adjustment> {
        self.stages.iter().flat_map(|s| s.adjustments.iter().copied()).collect()
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let mut last = 0u8;
        for s in &self.stages {
            if s.stage.number() <= last {
                return Err(PlanError::SchemaError(
                    "stage numbers must be strictly increasing".into(),
                ));
            }
            last = s.stage.number();
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    source: String,
    style_tag: Option<String>,
    stages: Vec<RawStage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    stage: i64,
    triplets: Vec<ReasoningTriplet>,
    adjustments: Vec<RawAdjustment>,
    no_edit_reason: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdjustment {
    op: String,
    value: serde_json::Number,
}

/// Rounds a JSON number to an integer value in range.
pub fn coerce_value(op: &str, n: &serde_json::Number) -> Result<i64, PlanError> {
    let out_of_range = || PlanError::ValueOutOfRange {
        op: op.to_string(),
        value: n.to_string(),
    };
    let v = match n.as_i64() {
        Some(i) => i,
        None => {
            let f = n.as_f64().ok_or_else(out_of_range)?;
            if !f.is_finite() || f.abs() > 1e6 {
                return Err(out_of_range());
            }
            f.round() as i64
        }
    };
    if (MIN_VALUE as i64..=MAX_VALUE as i64).contains(&v) {
        Ok(v)
    } else {
        Err(out_of_range())
    }
}

/// Parses and validates a plan document.
pub fn parse_plan(document: &str) -> Result<Plan, PlanError> {
    let raw: RawPlan = serde_json::from_str(document).map_err(|e| PlanError::SchemaError(e.to_string()))?;
    let mut stages = Vec::with_capacity(raw.stages.len());
    for rs in raw.stages {
        let stage = u8::try_from(rs.stage)
            .ok()
            .and_then(Stage::from_number)
            .ok_or_else(|| PlanError::SchemaError(format!("invalid stage number {}", rs.stage)))?;
        let mut adjustments = Vec::with_capacity(rs.adjustments.len());
        for ra in rs.adjustments {
            let op: OpId = ra.op.parse()?;
            let value = coerce_value(&ra.op, &ra.value)?;
            adjustments.push(Adjustment::new(op, value)?);
        }
        stages.push(StagePlan {
            stage,
            triplets: rs.triplets,
            adjustments,
            no_edit_reason: rs.no_edit_reason,
        });
    }
    let plan = Plan {
        source: raw.source,
        style_tag: raw.style_tag,
        stages,
    };
    plan.validate()?;
    Ok(plan)
}

/// Serializes a plan in canonical key order, pretty-printed with a trailing
/// newline.
pub fn serialize_plan(plan: &Plan) -> String {
    let mut s = serde_json::to_string_pretty(plan).expect("plan serialization is infallible");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(v: i64) -> Sign {
        if v < 0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    fn apply(self, v: i64) -> i64 {
        match self {
            Sign::Positive => v,
            Sign::Negative => -v,
        }
    }
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: i64,
    pub hi: i64,
}

impl ValueRange {
    /// Midpoint, truncated toward zero.
    pub fn midpoint(&self) -> i64 {
        (self.lo + self.hi) / 2
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn clamp(&self, v: i64) -> i64 {
        v.clamp(self.lo, self.hi)
    }
}

impl fmt::Display for ValueRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub word: String,
    /// Magnitude range, positive side.
    pub range: ValueRange,
}

/// Maps qualitative degree words to value ranges. Negative adjustments use
/// the mirrored range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Legend {
    pub entries: Vec<LegendEntry>,
}

impl Default for Legend {
    fn default() -> Self {
        let e = |word: &str, lo, hi| LegendEntry {
            word: word.into(),
            range: ValueRange { lo, hi },
        };
        Legend {
            entries: vec![
                e("slight", 5, 20),
                e("moderate", 21, 45),
                e("significant", 46, 74),
                e("strong", 75, 100),
            ],
        }
    }
}

impl Legend {
    pub fn resolve(&self, word: &str, sign: Sign) -> Result<ValueRange, PlanError> {
        let w = word.trim().to_ascii_lowercase();
        let entry = self
            .entries
            .iter()
            .find(|e| e.word == w)
            .ok_or_else(|| PlanError::UnknownDegreeWord(word.to_string()))?;
        let (a, b) = (sign.apply(entry.range.lo), sign.apply(entry.range.hi));
        Ok(ValueRange {
            lo: a.min(b),
            hi: a.max(b),
        })
    }

    /// The degree word whose range holds `|value|`.
    pub fn word_for(&self, value: i64) -> Option<&str> {
        let m = value.abs();
        self.entries
            .iter()
            .find(|e| e.range.contains(m))
            .map(|e| e.word.as_str())
    }

    /// Finds a degree word (or its adverb form, e.g. "slightly") in text.
    pub fn find_degree(&self, text: &str) -> Option<&str> {
        let lower = text.to_ascii_lowercase();
        lower
            .split(|c: char| !c.is_ascii_alphabetic())
            .find_map(|tok| self.entries.iter().find(|e| !tok.is_empty() && tok.starts_with(&e.word)))
            .map(|e| e.word.as_str())
    }

    /// Human-readable table embedded in prompts.
    pub fn render(&self) -> String {
        let mut out = String::from("Degree legend (use the matching range; negative adjustments mirror it):\n");
        for e in &self.entries {
            out.push_str(&format!("- {}: {} to {} (or -{} to -{})\n", e.word, e.range.lo, e.range.hi, e.range.hi, e.range.lo));
        }
        out
    }
}

const INCREASE_WORDS: &[&str] = &[
    "increase", "increasing", "raise", "boost", "brighten", "lift", "warm", "warmer", "more",
    "add", "enhance", "intensify", "strengthen", "up", "higher", "positive", "deepen_color",
];
const DECREASE_WORDS: &[&str] = &[
    "decrease", "decreasing", "reduce", "lower", "darken", "cool", "cooler", "less", "mute",
    "desaturate", "down", "negative", "recover", "pull", "soften", "tone",
];

/// Direction implied by the first increase/decrease word in text.
pub fn find_direction(text: &str) -> Option<Sign> {
    let lower = text.to_ascii_lowercase();
    lower
        .split(|c: char| !c.is_ascii_alphabetic())
        .find_map(|tok| {
            if INCREASE_WORDS.contains(&tok) {
                Some(Sign::Positive)
            } else if DECREASE_WORDS.contains(&tok) {
                Some(Sign::Negative)
            } else {
                None
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_parses() {
        let doc = r#"{"source":"a.png","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"exposure","value":35}]}]}"#;
        let plan = parse_plan(doc).unwrap();
        assert_eq!(plan.stages.len(), 1);
        assert_eq!(plan.adjustments(), vec![Adjustment::new(OpId::Exposure, 35).unwrap()]);
    }

    #[test]
    fn stage_mismatch() {
        let doc = r#"{"source":"a","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"temperature","value":10}]}]}"#;
        assert!(matches!(parse_plan(doc), Err(PlanError::StageMismatch { expected: 2, found: 1, .. })));
    }

    #[test]
    fn value_out_of_range() {
        let doc = r#"{"source":"a","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"exposure","value":150}]}]}"#;
        assert!(matches!(parse_plan(doc), Err(PlanError::ValueOutOfRange { .. })));
    }

    #[test]
    fn duplicate_and_unknown() {
        let dup = r#"{"source":"a","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"exposure","value":1},{"op":"exposure","value":2}]}]}"#;
        assert!(matches!(parse_plan(dup), Err(PlanError::DuplicateOp { .. })));
        let unknown = r#"{"source":"a","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"clarity","value":1}]}]}"#;
        assert!(matches!(parse_plan(unknown), Err(PlanError::UnknownOp(_))));
    }

    #[test]
    fn values_are_coerced_to_integers() {
        let doc = r#"{"source":"a","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"exposure","value":35.0}]}]}"#;
        assert_eq!(parse_plan(doc).unwrap().adjustments()[0].value(), 35);
        let doc = r#"{"source":"a","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"exposure","value":-12.6}]}]}"#;
        assert_eq!(parse_plan(doc).unwrap().adjustments()[0].value(), -13);
    }

    #[test]
    fn unknown_fields_rejected() {
        let doc = r#"{"source":"a","stages":[],"extra":1}"#;
        assert!(matches!(parse_plan(doc), Err(PlanError::SchemaError(_))));
    }

    #[test]
    fn no_edit_round_trip_and_style_tag() {
        let mut plan = Plan::new("img.png");
        plan.style_tag = Some("balanced".into());
        plan.set_stage(StagePlan::no_edit(Stage::Color, "white balance already neutral"));
        let text = serialize_plan(&plan);
        assert!(text.contains("\"no_edit_reason\""));
        assert!(text.contains("\"style_tag\": \"balanced\""));
        let back = parse_plan(&text).unwrap();
        assert_eq!(back, plan);
        assert_eq!(serialize_plan(&back), text);
    }

    #[test]
    fn no_edit_excludes_adjustments() {
        let doc = r#"{"source":"a","stages":[{"stage":2,"triplets":[],"adjustments":[{"op":"tint","value":5}],"no_edit_reason":"fine"}]}"#;
        assert!(matches!(parse_plan(doc), Err(PlanError::SchemaError(_))));
    }

    #[test]
    fn triplets_must_name_one_op_of_the_stage() {
        let t = ReasoningTriplet::new("Slightly increase red saturation", "lips look pale", "healthier skin tones");
        assert!(matches!(
            StagePlan::from_triplets(Stage::Lighting, vec![t.clone()]),
            Err(PlanError::StageMismatch { expected: 3, found: 1, .. })
        ));
        assert!(StagePlan::from_triplets(Stage::ColorSpecific, vec![t]).is_ok());
        let none = ReasoningTriplet::new("make it nicer", "dull", "better");
        assert!(matches!(
            StagePlan::from_triplets(Stage::Lighting, vec![none]),
            Err(PlanError::InvalidTriplet(_))
        ));
    }

    #[test]
    fn stages_strictly_increasing() {
        let doc = r#"{"source":"a","stages":[
            {"stage":2,"triplets":[],"adjustments":[],"no_edit_reason":"ok"},
            {"stage":1,"triplets":[],"adjustments":[],"no_edit_reason":"ok"}]}"#;
        assert!(matches!(parse_plan(doc), Err(PlanError::SchemaError(_))));
    }

    #[test]
    fn legend_resolution() {
        let legend = Legend::default();
        let slight = legend.resolve("slight", Sign::Positive).unwrap();
        assert_eq!(slight, ValueRange { lo: 5, hi: 20 });
        assert_eq!(slight.midpoint(), 12);
        let strong = legend.resolve("strong", Sign::Negative).unwrap();
        assert_eq!(strong, ValueRange { lo: -100, hi: -75 });
        assert_eq!(strong.midpoint(), -87);
        assert!(matches!(
            legend.resolve("enormous", Sign::Positive),
            Err(PlanError::UnknownDegreeWord(_))
        ));
    }

    #[test]
    fn legend_covers_and_is_disjoint() {
        let legend = Legend::default();
        for m in 5..=100 {
            let hits = legend.entries.iter().filter(|e| e.range.contains(m)).count();
            assert_eq!(hits, 1, "{m}");
        }
        for e in &legend.entries {
            let p = legend.resolve(&e.word, Sign::Positive).unwrap();
            let n = legend.resolve(&e.word, Sign::Negative).unwrap();
            assert_eq!((p.lo, p.hi), (-n.hi, -n.lo));
        }
    }

    #[test]
    fn degree_and_direction_from_text() {
        let legend = Legend::default();
        assert_eq!(legend.find_degree("slightly increase exposure"), Some("slight"));
        assert_eq!(find_direction("slightly increase exposure"), Some(Sign::Positive));
        assert_eq!(find_direction("Reduce highlights strongly"), Some(Sign::Negative));
        assert_eq!(legend.find_degree("Reduce highlights strongly"), Some("strong"));
        assert_eq!(legend.word_for(-60), Some("significant"));
        assert_eq!(legend.word_for(3), None);
    }
}
