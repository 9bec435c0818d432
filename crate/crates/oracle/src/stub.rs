//! Deterministic client for offline runs.
//!
//! Synthesis prompts are answered by restating the `<ground_truth>` block they
//! carry. Planning prompts are answered from an answer key of adjustments;
//! stages without entries get a no-edit reply.

use std::collections::BTreeMap;

use retouch_core::ops::{Adjustment, OpId, Stage};
use retouch_core::plan::Legend;
use serde_json::{json, Value};

use crate::client::{CompletionClient, CompletionRequest, OracleError, RawCompletion, Usage};
use crate::templates::TemplateId;

#[derive(Debug, Clone, Default)]
pub struct StubClient {
    answers: BTreeMap<Stage, Vec<Adjustment>>,
    legend: Legend,
}

impl StubClient {
    /// Answers "no edit" at every stage.
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers planning requests with these adjustments, grouped by stage.
    pub fn with_answers(adjustments: &[Adjustment]) -> Self {
        let mut answers: BTreeMap<Stage, Vec<Adjustment>> = BTreeMap::new();
        for a in retouch_core::ops::canonical_order(adjustments) {
            if a.value() != 0 {
                answers.entry(a.stage()).or_default().push(a);
            }
        }
        Self {
            answers,
            legend: Legend::default(),
        }
    }

    fn phrase(&self, adj: &Adjustment) -> String {
        let degree = self.legend.word_for(adj.value() as i64).unwrap_or("slight");
        let direction = if adj.value() < 0 { "decrease" } else { "increase" };
        format!("{degree} {direction} {}", adj.op)
    }

    fn stage_of(request: &CompletionRequest) -> Result<Stage, OracleError> {
        request
            .metadata
            .get("stage")
            .and_then(|s| s.parse::<u8>().ok())
            .and_then(Stage::from_number)
            .ok_or_else(|| OracleError::InvalidRequest("stub needs the stage in request metadata".into()))
    }

    fn plan_reply(&self, stage: Stage) -> Value {
        match self.answers.get(&stage) {
            Some(adjs) => json!({
                "triplets": adjs.iter().map(|a| json!({
                    "adjustment": self.phrase(a),
                    "issue": format!("the image departs from the target at the {} stage", stage.label()),
                    "solution": "moves the image back toward the target",
                })).collect::<Vec<_>>()
            }),
            None => json!({
                "no_edit_reason": format!("The {} stage already matches the target; no change is needed.", stage.label())
            }),
        }
    }

    fn resolve_reply(&self, stage: Stage) -> Value {
        let adjs = self.answers.get(&stage).map(Vec::as_slice).unwrap_or(&[]);
        json!({
            "adjustments": adjs.iter().map(|a| json!({"op": a.op.name(), "value": a.value()})).collect::<Vec<_>>()
        })
    }

    /// Restates the answer key: one sentence per operation found in it.
    fn reasoning_reply(&self, prompt: &str) -> Result<String, OracleError> {
        let block = prompt
            .split_once("<ground_truth>")
            .and_then(|(_, rest)| rest.split_once("</ground_truth>"))
            .map(|(b, _)| b.trim())
            .ok_or_else(|| OracleError::InvalidRequest("prompt has no ground_truth block".into()))?;
        let value: Value = serde_json::from_str(block).map_err(|e| OracleError::InvalidRequest(e.to_string()))?;
        let mut found: Vec<(OpId, Option<i64>)> = Vec::new();
        collect_ops(&value, &mut found);
        if found.is_empty() {
            return Ok("The image already looks finished at this stage, so no further edits are required.".into());
        }
        let lines: Vec<String> = found
            .iter()
            .map(|(op, v)| match v {
                Some(v) => {
                    let adj = Adjustment::new(*op, *v).expect("answer key values are in range");
                    format!(
                        "Adjustment: {} ({v:+}) | Issue: the difference between the positions is explained by this change | Solution: applying it reproduces the target",
                        self.phrase(&adj)
                    )
                }
                None => format!("Adjustment: {op} | Issue: the positions differ only in this operation | Solution: ordering by its value"),
            })
            .collect();
        Ok(lines.join("\n"))
    }
}

/// Every `{"op": <id>, "value": <n>?}` object in `v`, first mention wins.
fn collect_ops(v: &Value, out: &mut Vec<(OpId, Option<i64>)>) {
    match v {
        Value::Object(map) => {
            if let Some(op) = map.get("op").and_then(Value::as_str).and_then(|s| s.parse::<OpId>().ok()) {
                let value = map.get("value").and_then(Value::as_i64);
                match out.iter_mut().find(|(o, _)| *o == op) {
                    Some(slot) if slot.1.is_none() => slot.1 = value,
                    Some(_) => {}
                    None => out.push((op, value)),
                }
            }
            for child in map.values() {
                collect_ops(child, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|i| collect_ops(i, out)),
        _ => {}
    }
}

impl CompletionClient for StubClient {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError> {
        let text = match request.template {
            TemplateId::PlanStage => self.plan_reply(Self::stage_of(request)?).to_string(),
            TemplateId::ResolveValues => self.resolve_reply(Self::stage_of(request)?).to_string(),
            TemplateId::StyleCharacterize => format!(
                "Style \"{}\": keep tones and colors close to the source; no specific characteristics are assumed offline.",
                request.metadata.get("style_tag").map(String::as_str).unwrap_or("")
            ),
            TemplateId::ReasonA | TemplateId::ReasonB | TemplateId::ReasonC | TemplateId::NoEditJustify => {
                self.reasoning_reply(&request.prompt_text)?
            }
        };
        Ok(RawCompletion {
            usage: Usage {
                input_tokens: request.prompt_text.split_whitespace().count() as u64,
                output_tokens: text.split_whitespace().count() as u64,
            },
            text,
        })
    }
}
