//! Reasoning synthesis, stage planning and value resolution.

use std::collections::{BTreeMap, BTreeSet};

use retouch_core::ops::{list_ops, ops_in_text, render_op_docs, Adjustment, OpId, Stage};
use retouch_core::plan::{find_direction, Legend, Sign};
use retouch_core::puzzles::{GroundTruth, PuzzleKind, PuzzleRecord};
use retouch_core::{ImageBuffer, ReasoningTriplet, StagePlan};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::client::{
    CompletionClient, CompletionRequest, CompletionResult, ImageAttachment, OracleError, RetryPolicy, Usage,
};
use crate::templates::{TemplateId, GROUND_TRUTH_SLOT};

/// Style paragraph used when the user gave no style tag.
pub const NEUTRAL_STYLE: &str = "No style was requested; aim for a natural, balanced result.";

pub struct Oracle {
    client: Box<dyn CompletionClient>,
    retry: RetryPolicy,
    legend: Legend,
}

/// A value the service proposed outside [-100, 100], clamped before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueFlag {
    pub op: OpId,
    pub requested: i64,
    pub applied: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStage {
    pub plan: StagePlan,
    pub flags: Vec<ValueFlag>,
    pub usage: Usage,
}

impl Oracle {
    pub fn new(client: impl CompletionClient + 'static) -> Self {
        Self {
            client: Box::new(client),
            retry: RetryPolicy::default(),
            legend: Legend::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_legend(mut self, legend: Legend) -> Self {
        self.legend = legend;
        self
    }

    pub fn legend(&self) -> &Legend {
        &self.legend
    }

    /// Reasoning text for one puzzle record. `strip` is the stitched image the
    /// record refers to. The text must name exactly the operations in the
    /// answer key, and for puzzle A also the direction of the change.
    pub fn synthesize_reasoning(
        &self,
        record: &PuzzleRecord,
        strip: &ImageBuffer,
    ) -> Result<CompletionResult<String>, OracleError> {
        let gt = &record.ground_truth;
        let mut slots: BTreeMap<&str, String> = BTreeMap::new();
        slots.insert("legend", self.legend.render());
        slots.insert(GROUND_TRUTH_SLOT, self.answer_brief(gt));
        let template = match gt {
            GroundTruth::A { .. } => {
                slots.insert("op_docs", render_op_docs(&list_ops(None)));
                TemplateId::ReasonA
            }
            GroundTruth::B { op, designated_index, .. } => {
                slots.insert("op_docs", render_op_docs(&[op.descriptor()]));
                slots.insert("designated_position", (designated_index + 1).to_string());
                TemplateId::ReasonB
            }
            GroundTruth::C { stage, no_edit, .. } => {
                slots.insert("op_docs", render_op_docs(&list_ops(Some(*stage))));
                slots.insert("stage", stage.number().to_string());
                slots.insert("stage_label", stage.label().to_string());
                if *no_edit {
                    TemplateId::NoEditJustify
                } else {
                    TemplateId::ReasonC
                }
            }
        };
        let prompt = template.template().render(&slots)?;
        let request = CompletionRequest::new(template, prompt)
            .with_image(ImageAttachment::from_image(record.input_image(), strip)?)
            .with_meta("record", record.record_id.clone());
        self.retry
            .run(self.client.as_ref(), &request, |text| check_reasoning(text, gt).map(|()| text.trim().to_string()))
    }

    /// Answer key as shown to the service: only what the reasoning should
    /// explain, with 1-based tile positions.
    fn answer_brief(&self, gt: &GroundTruth) -> String {
        let adj = |a: &Adjustment| {
            json!({
                "op": a.op.name(),
                "value": a.value(),
                "degree": self.legend.word_for(a.value() as i64).unwrap_or("slight"),
                "direction": if a.value() < 0 { "decrease" } else { "increase" },
            })
        };
        let v = match gt {
            GroundTruth::A { adjustment } => json!({ "adjustment": adj(adjustment) }),
            GroundTruth::B {
                op,
                values,
                order,
                optimal_index,
                designated_index,
                correction,
            } => json!({
                "op": op.name(),
                "values_by_position": values,
                "positions_low_to_high": order.iter().map(|i| i + 1).collect::<Vec<_>>(),
                "original_position": optimal_index + 1,
                "designated_position": designated_index + 1,
                "correction": adj(correction),
            }),
            GroundTruth::C { stage, no_edit, plan, .. } => json!({
                "stage": stage.number(),
                "no_edit": no_edit,
                "plan": plan.iter().map(adj).collect::<Vec<_>>(),
            }),
        };
        serde_json::to_string_pretty(&v).expect("json values serialize")
    }

    /// Asks for the triplets of one stage. `style` is a paragraph describing
    /// the requested look (see [`Oracle::characterize_style`]).
    pub fn plan_stage(
        &self,
        image: &ImageBuffer,
        stage: Stage,
        style: Option<&str>,
    ) -> Result<CompletionResult<StagePlan>, OracleError> {
        let mut slots: BTreeMap<&str, String> = BTreeMap::new();
        slots.insert("stage", stage.number().to_string());
        slots.insert("stage_label", stage.label().to_string());
        slots.insert("style", style.unwrap_or(NEUTRAL_STYLE).to_string());
        slots.insert("op_docs", render_op_docs(&list_ops(Some(stage))));
        slots.insert("legend", self.legend.render());
        let prompt = TemplateId::PlanStage.template().render(&slots)?;
        let request = CompletionRequest::new(TemplateId::PlanStage, prompt)
            .with_image(ImageAttachment::from_image("input", image)?)
            .with_meta("stage", stage.number().to_string());
        self.retry.run(self.client.as_ref(), &request, |text| {
            let reply: PlanReply = parse_json_reply(text)?;
            match (reply.triplets, reply.no_edit_reason) {
                (Some(t), None) => Ok(StagePlan::from_triplets(stage, t)?),
                (None, Some(reason)) if !reason.trim().is_empty() => Ok(StagePlan::no_edit(stage, reason)),
                _ => Err(schema("expected exactly one of `triplets` or a non-empty `no_edit_reason`", text)),
            }
        })
    }

    /// Fills in the values of a planned stage. Values come from the service
    /// when it gives a number; otherwise from a degree word, in the reply or
    /// in the triplet itself, resolved to the legend midpoint.
    pub fn resolve_values(&self, plan: &StagePlan, image: &ImageBuffer) -> Result<ResolvedStage, OracleError> {
        if plan.is_no_edit() || !plan.needs_values() {
            return Ok(ResolvedStage {
                plan: plan.clone(),
                flags: Vec::new(),
                usage: Usage::default(),
            });
        }
        let stage = plan.stage;
        let mut slots: BTreeMap<&str, String> = BTreeMap::new();
        slots.insert("stage", stage.number().to_string());
        slots.insert("stage_label", stage.label().to_string());
        slots.insert("legend", self.legend.render());
        slots.insert(
            "plan",
            serde_json::to_string_pretty(&json!({ "triplets": plan.triplets })).expect("json values serialize"),
        );
        let prompt = TemplateId::ResolveValues.template().render(&slots)?;
        let request = CompletionRequest::new(TemplateId::ResolveValues, prompt)
            .with_image(ImageAttachment::from_image("input", image)?)
            .with_meta("stage", stage.number().to_string());
        let (proposed, usage) = match self.retry.run(self.client.as_ref(), &request, |text| parse_values_reply(text)) {
            Ok(r) => (r.parsed, r.usage),
            Err(OracleError::SchemaViolation { reason, .. }) => {
                log::warn!("stage {stage}: unusable value reply ({reason}); using triplet degree words");
                (BTreeMap::new(), Usage::default())
            }
            Err(e) => return Err(e),
        };

        let mut adjustments = Vec::with_capacity(plan.triplets.len());
        let mut flags = Vec::new();
        for t in &plan.triplets {
            let op = t.op()?;
            let requested = self.value_for(t, proposed.get(&op))?;
            let applied = requested.clamp(retouch_core::ops::MIN_VALUE as i64, retouch_core::ops::MAX_VALUE as i64);
            if applied != requested {
                log::warn!("stage {stage}: {op} value {requested} clamped to {applied}");
                flags.push(ValueFlag { op, requested, applied });
            }
            adjustments.push(Adjustment::new(op, applied).map_err(retouch_core::PlanError::from)?);
        }
        let mut resolved = plan.clone();
        resolved.adjustments = adjustments;
        resolved.validate()?;
        Ok(ResolvedStage {
            plan: resolved,
            flags,
            usage,
        })
    }

    fn value_for(&self, triplet: &ReasoningTriplet, proposed: Option<&Value>) -> Result<i64, OracleError> {
        let direction = find_direction(&triplet.adjustment);
        match proposed {
            Some(Value::Number(n)) => {
                if let Some(v) = n.as_f64() {
                    return Ok(v.round() as i64);
                }
            }
            Some(Value::String(s)) => {
                if let Ok(v) = s.trim().parse::<f64>() {
                    return Ok(v.round() as i64);
                }
                if let Some(word) = self.legend.find_degree(s) {
                    let sign = find_direction(s).or(direction).or(if s.trim_start().starts_with('-') {
                        Some(Sign::Negative)
                    } else {
                        None
                    });
                    if let Some(sign) = sign {
                        return Ok(self.legend.resolve(word, sign)?.midpoint());
                    }
                }
            }
            _ => {}
        }
        match (self.legend.find_degree(&triplet.adjustment), direction) {
            (Some(word), Some(sign)) => Ok(self.legend.resolve(word, sign)?.midpoint()),
            _ => Err(OracleError::UnresolvableTriplet(triplet.adjustment.clone())),
        }
    }

    /// A short description of the look a style tag asks for.
    pub fn characterize_style(&self, style_tag: &str) -> Result<CompletionResult<String>, OracleError> {
        let mut slots: BTreeMap<&str, String> = BTreeMap::new();
        slots.insert("style_tag", style_tag.to_string());
        let prompt = TemplateId::StyleCharacterize.template().render(&slots)?;
        let request = CompletionRequest::new(TemplateId::StyleCharacterize, prompt).with_meta("style_tag", style_tag);
        self.retry.run(self.client.as_ref(), &request, |text| {
            let t = text.trim();
            if t.is_empty() {
                Err(schema("empty style description", text))
            } else {
                Ok(t.to_string())
            }
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanReply {
    triplets: Option<Vec<ReasoningTriplet>>,
    no_edit_reason: Option<String>,
}

fn schema(reason: impl Into<String>, raw: &str) -> OracleError {
    OracleError::SchemaViolation {
        reason: reason.into(),
        raw: raw.to_string(),
    }
}

/// Parses the outermost `{...}` of a reply, tolerating prose or code fences
/// around it.
fn parse_json_reply<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, OracleError> {
    let (Some(start), Some(end)) = (text.find('{'), text.rfind('}')) else {
        return Err(schema("no JSON object in reply", text));
    };
    if end < start {
        return Err(schema("no JSON object in reply", text));
    }
    serde_json::from_str(&text[start..=end]).map_err(|e| schema(e.to_string(), text))
}

fn parse_values_reply(text: &str) -> Result<BTreeMap<OpId, Value>, OracleError> {
    let v: Value = parse_json_reply(text)?;
    let entries = v
        .get("adjustments")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("missing `adjustments` array", text))?;
    let mut out = BTreeMap::new();
    for e in entries {
        let op = e
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| schema("adjustment without `op`", text))?;
        let op: OpId = op.parse().map_err(|_| schema(format!("unknown operation `{op}`"), text))?;
        let value = e.get("value").cloned().ok_or_else(|| schema(format!("`{op}` has no value"), text))?;
        out.insert(op, value);
    }
    Ok(out)
}

/// Accepts reasoning text only if it agrees with the answer key.
pub fn check_reasoning(text: &str, gt: &GroundTruth) -> Result<(), OracleError> {
    if text.trim().is_empty() {
        return Err(schema("empty reasoning", text));
    }
    let named: BTreeSet<OpId> = ops_in_text(text).into_iter().collect();
    let expected: BTreeSet<OpId> = gt.ops().into_iter().collect();

    if let GroundTruth::C { stage, no_edit: true, .. } = gt {
        // A no-edit justification may discuss the stage's operations but
        // nothing outside it.
        if let Some(op) = named.iter().find(|op| op.stage() != *stage) {
            return Err(schema(format!("no-edit reasoning mentions {op} from another stage"), text));
        }
        return Ok(());
    }
    if let Some(op) = expected.difference(&named).next() {
        return Err(schema(format!("reasoning does not mention {op}"), text));
    }
    if let Some(op) = named.difference(&expected).next() {
        return Err(schema(format!("reasoning mentions {op}, which is not in the answer key"), text));
    }
    if let GroundTruth::A { adjustment } = gt {
        let want = Sign::of(adjustment.value() as i64);
        let agrees = text
            .split(['\n', '.', ';'])
            .filter(|s| ops_in_text(s).contains(&adjustment.op))
            .any(|s| find_direction(s) == Some(want));
        if !agrees {
            return Err(schema(
                format!("reasoning does not state that {} was {}", adjustment.op, match want {
                    Sign::Positive => "increased",
                    Sign::Negative => "decreased",
                }),
                text,
            ));
        }
    }
    Ok(())
}

/// Puzzle kinds whose records use reasoning synthesis.
pub fn template_for(kind: PuzzleKind, no_edit: bool) -> TemplateId {
    match (kind, no_edit) {
        (PuzzleKind::A, _) => TemplateId::ReasonA,
        (PuzzleKind::B, _) => TemplateId::ReasonB,
        (PuzzleKind::C, false) => TemplateId::ReasonC,
        (PuzzleKind::C, true) => TemplateId::NoEditJustify,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::StubClient;
    use retouch_core::ops::{Band, BandChannel};

    fn adj(op: OpId, v: i64) -> Adjustment {
        Adjustment::new(op, v).unwrap()
    }

    fn oracle(answers: &[Adjustment]) -> Oracle {
        Oracle::new(StubClient::with_answers(answers)).with_retry(RetryPolicy::immediate())
    }

    #[test]
    fn gate_requires_exact_op_set_and_direction() {
        let gt = GroundTruth::A {
            adjustment: adj(OpId::Exposure, -30),
        };
        assert!(check_reasoning("A moderate decrease of exposure darkened the frame.", &gt).is_ok());
        assert!(check_reasoning("A moderate increase of exposure.", &gt).is_err());
        assert!(check_reasoning("Exposure went down and contrast dropped.", &gt).is_err());
        assert!(check_reasoning("The picture got darker.", &gt).is_err());
    }

    #[test]
    fn no_edit_gate_allows_stage_ops_only() {
        let gt = GroundTruth::C {
            stage: Stage::Lighting,
            no_edit: true,
            perturbation: vec![],
            plan: vec![],
        };
        assert!(check_reasoning("Exposure and contrast are already balanced.", &gt).is_ok());
        assert!(check_reasoning("The temperature is fine.", &gt).is_err());
    }

    #[test]
    fn plan_then_resolve_recovers_answer_key() {
        let img = ImageBuffer::filled(8, 8, [30000; 3]);
        let key = [adj(OpId::Exposure, 35), adj(OpId::Shadows, -12)];
        let o = oracle(&key);
        let plan = o.plan_stage(&img, Stage::Lighting, None).unwrap().parsed;
        assert_eq!(plan.triplets.len(), 2);
        assert!(plan.needs_values());
        let resolved = o.resolve_values(&plan, &img).unwrap();
        let mut got = resolved.plan.adjustments.clone();
        got.sort_by_key(|a| a.op);
        let mut want = key.to_vec();
        want.sort_by_key(|a| a.op);
        assert_eq!(got, want);
        let color = o.plan_stage(&img, Stage::Color, None).unwrap().parsed;
        assert!(color.is_no_edit());
    }

    struct Fixed(&'static str);

    impl CompletionClient for Fixed {
        fn complete(&self, _: &CompletionRequest) -> Result<crate::RawCompletion, OracleError> {
            Ok(crate::RawCompletion {
                text: self.0.to_string(),
                usage: Usage::default(),
            })
        }
    }

    fn plan_of(triplets: &[&str], stage: Stage) -> StagePlan {
        StagePlan::from_triplets(
            stage,
            triplets.iter().map(|t| ReasoningTriplet::new(*t, "issue", "solution")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn degree_word_resolves_to_midpoint() {
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let o = Oracle::new(Fixed(r#"{"adjustments":[{"op":"exposure","value":"slight"}]}"#))
            .with_retry(RetryPolicy::immediate());
        let r = o.resolve_values(&plan_of(&["slightly increase exposure"], Stage::Lighting), &img).unwrap();
        assert_eq!(r.plan.adjustments, vec![adj(OpId::Exposure, 12)]);
        let r = o.resolve_values(&plan_of(&["slightly reduce exposure"], Stage::Lighting), &img).unwrap();
        assert_eq!(r.plan.adjustments, vec![adj(OpId::Exposure, -12)]);
    }

    #[test]
    fn out_of_range_values_are_clamped_and_flagged() {
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let o = Oracle::new(Fixed(r#"```json
{"adjustments":[{"op":"saturation_blue","value":140.4}]}
```"#))
        .with_retry(RetryPolicy::immediate());
        let r = o.resolve_values(&plan_of(&["strong increase saturation_blue"], Stage::ColorSpecific), &img).unwrap();
        let op = OpId::Band(BandChannel::Saturation, Band::Blue);
        assert_eq!(r.plan.adjustments, vec![adj(op, 100)]);
        assert_eq!(
            r.flags,
            vec![ValueFlag {
                op,
                requested: 140,
                applied: 100
            }]
        );
    }

    #[test]
    fn garbage_reply_falls_back_to_triplet_text_or_fails() {
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let o = Oracle::new(Fixed("I cannot decide.")).with_retry(RetryPolicy::immediate());
        let r = o.resolve_values(&plan_of(&["moderate decrease contrast"], Stage::Lighting), &img).unwrap();
        assert_eq!(r.plan.adjustments, vec![adj(OpId::Contrast, -33)]);
        assert!(matches!(
            o.resolve_values(&plan_of(&["adjust contrast"], Stage::Lighting), &img),
            Err(OracleError::UnresolvableTriplet(_))
        ));
    }

    #[test]
    fn plan_reply_schema_errors_surface() {
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let o = Oracle::new(Fixed(r#"{"triplets":[{"adjustment":"slight increase temperature","issue":"i","solution":"s"}]}"#))
            .with_retry(RetryPolicy::immediate());
        assert!(matches!(
            o.plan_stage(&img, Stage::Lighting, None),
            Err(OracleError::Plan(retouch_core::PlanError::StageMismatch { .. }))
        ));
        let o = Oracle::new(Fixed(r#"{"triplets":[], "extra": 1}"#)).with_retry(RetryPolicy::immediate());
        assert!(matches!(
            o.plan_stage(&img, Stage::Lighting, None),
            Err(OracleError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn unchanged_plans_skip_the_service() {
        struct Never;
        impl CompletionClient for Never {
            fn complete(&self, _: &CompletionRequest) -> Result<crate::RawCompletion, OracleError> {
                panic!("no call expected")
            }
        }
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let o = Oracle::new(Never);
        let p = StagePlan::no_edit(Stage::Color, "fine");
        assert_eq!(o.resolve_values(&p, &img).unwrap().plan, p);
    }
}
