//! Prompt templates with `{{slot}}` placeholders.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::client::OracleError;

/// Slot reserved for answer keys; only synthesis templates may use it.
pub const GROUND_TRUTH_SLOT: &str = "ground_truth";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TemplateId {
    ReasonA,
    ReasonB,
    ReasonC,
    PlanStage,
    ResolveValues,
    NoEditJustify,
    StyleCharacterize,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::ReasonA,
        TemplateId::ReasonB,
        TemplateId::ReasonC,
        TemplateId::PlanStage,
        TemplateId::ResolveValues,
        TemplateId::NoEditJustify,
        TemplateId::StyleCharacterize,
    ];

    /// Templates used when editing a user's image.
    pub fn is_inference(self) -> bool {
        matches!(
            self,
            TemplateId::PlanStage | TemplateId::ResolveValues | TemplateId::StyleCharacterize
        )
    }

    pub fn template(self) -> Template {
        Template {
            id: self,
            body: body(self),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateId::ReasonA => "reasonA",
            TemplateId::ReasonB => "reasonB",
            TemplateId::ReasonC => "reasonC",
            TemplateId::PlanStage => "planStage",
            TemplateId::ResolveValues => "resolveValues",
            TemplateId::NoEditJustify => "noEditJustify",
            TemplateId::StyleCharacterize => "styleCharacterize",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub id: TemplateId,
    pub body: &'static str,
}

impl Template {
    /// Slot names referenced by the body, in order of first use.
    pub fn slots(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut rest = self.body;
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else { break };
            let name = &after[..end];
            if !out.contains(&name) {
                out.push(name);
            }
            rest = &after[end + 2..];
        }
        out
    }

    /// Fills every slot. Fails on a missing slot, and on any ground truth
    /// passed to an inference template.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, OracleError> {
        if self.id.is_inference() && values.contains_key(GROUND_TRUTH_SLOT) {
            return Err(OracleError::GroundTruthLeak(self.id));
        }
        let mut out = self.body.to_string();
        for slot in self.slots() {
            let value = values.get(slot).ok_or_else(|| OracleError::MissingSlot {
                template: self.id,
                slot: slot.to_string(),
            })?;
            out = out.replace(&format!("{{{{{slot}}}}}"), value);
        }
        Ok(out)
    }
}

fn body(id: TemplateId) -> &'static str {
    match id {
        TemplateId::ReasonA => REASON_A,
        TemplateId::ReasonB => REASON_B,
        TemplateId::ReasonC => REASON_C,
        TemplateId::PlanStage => PLAN_STAGE,
        TemplateId::ResolveValues => RESOLVE_VALUES,
        TemplateId::NoEditJustify => NO_EDIT_JUSTIFY,
        TemplateId::StyleCharacterize => STYLE_CHARACTERIZE,
    }
}

const REASON_A: &str = "\
The attached strip shows two versions of one photograph, separated by a thin white line. \
Position 1 (left) is the source. Position 2 (right) is the source after exactly one adjustment \
from this library:

{{op_docs}}
{{legend}}
The adjustment that produced position 2 is:
<ground_truth>
{{ground_truth}}
</ground_truth>

Explain, citing visible differences between the two positions, which operation was applied, \
whether it was an increase or a decrease, and its degree word from the legend. \
Refer to the operation by its identifier and do not mention any other operation.
";

const REASON_B: &str = "\
The attached strip shows five versions of one photograph, positions 1 to 5 from left to right, \
separated by thin white lines. One of them is the original; the other four were produced by the \
same operation at different values. The operation is described here:

{{op_docs}}
{{legend}}
The answer key is:
<ground_truth>
{{ground_truth}}
</ground_truth>

Explain, from visible evidence, why the positions are ordered this way from the lowest to the \
highest value, why the original is the best-looking version, and what correction brings position \
{{designated_position}} back to it. Refer to the operation by its identifier and do not mention \
any other operation.
";

const REASON_C: &str = "\
The attached strip shows two versions of one photograph separated by a thin white line. \
Position 1 (left) is a degraded copy; position 2 (right) is the expert-finished target. \
The degradation touched stage {{stage}} ({{stage_label}}) only. Available operations:

{{op_docs}}
{{legend}}
The plan that restores the target is:
<ground_truth>
{{ground_truth}}
</ground_truth>

Write one <Adjustment, Issue, Solution> triplet per operation of the plan, one per line, as \
`Adjustment: ... | Issue: ... | Solution: ...`. The adjustment names the operation identifier, \
a degree word from the legend and the direction; the issue cites what is visibly wrong in \
position 1; the solution states the improvement. Only write about the operations in the plan, \
and do not name any other operation.
";

const NO_EDIT_JUSTIFY: &str = "\
The attached strip shows the same expert-finished photograph twice. It is being reviewed at \
stage {{stage}} ({{stage_label}}), where these operations are available:

{{op_docs}}
The answer key says no edit is needed at this stage:
<ground_truth>
{{ground_truth}}
</ground_truth>

Explain in two or three sentences, from visible evidence, why no further edits are required at \
this stage. Do not recommend any operation.
";

const PLAN_STAGE: &str = "\
You are retouching the attached photograph in three stages: 1 lighting, 2 global color, \
3 color-specific. This is stage {{stage}} ({{stage_label}}).
{{style}}
Operations available at this stage:

{{op_docs}}
{{legend}}
Decide which of these operations would improve the photograph. For each one write a triplet: \
\"adjustment\" names exactly one operation identifier with a degree word and a direction \
(for example \"slight increase exposure\"), \"issue\" cites the visual evidence, and \"solution\" \
states the expected improvement. Use each operation at most once. If the photograph needs no \
change at this stage, explain why instead.

Respond with JSON only, either
{\"triplets\": [{\"adjustment\": \"...\", \"issue\": \"...\", \"solution\": \"...\"}]}
or
{\"no_edit_reason\": \"...\"}
";

const RESOLVE_VALUES: &str = "\
Stage {{stage}} ({{stage_label}}) plan for the attached photograph:

{{plan}}
{{legend}}
For every triplet choose an integer value in [-100, 100] that agrees with its degree word and \
direction, using the photograph to pick a point inside the legend range.

Respond with JSON only, one entry per triplet in the same order:
{\"adjustments\": [{\"op\": \"<operation identifier>\", \"value\": <integer>}]}
";

const STYLE_CHARACTERIZE: &str = "\
A user wants photographs retouched in the style \"{{style_tag}}\". Describe in two or three \
sentences the tonal and color characteristics of this style (brightness, contrast, saturation, \
warmth, dominant hues) so that a retoucher can apply it. Respond with plain text.
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference_templates_never_reference_ground_truth() {
        for id in TemplateId::ALL {
            let t = id.template();
            let uses = t.slots().contains(&GROUND_TRUTH_SLOT) || t.body.contains("<ground_truth>");
            assert_eq!(uses, !id.is_inference(), "{id}");
        }
    }

    #[test]
    fn render_fills_slots_and_reports_missing_ones() {
        let t = TemplateId::StyleCharacterize.template();
        assert_eq!(t.slots(), vec!["style_tag"]);
        let mut values = BTreeMap::new();
        assert!(matches!(t.render(&values), Err(OracleError::MissingSlot { .. })));
        values.insert("style_tag", "nostalgic retro vibe".to_string());
        let out = t.render(&values).unwrap();
        assert!(out.contains("\"nostalgic retro vibe\""));
        assert!(!out.contains("{{"));
    }

    #[test]
    fn ground_truth_is_refused_at_inference() {
        let mut values = BTreeMap::new();
        values.insert("style_tag", "x".to_string());
        values.insert(GROUND_TRUTH_SLOT, "{}".to_string());
        assert!(matches!(
            TemplateId::StyleCharacterize.template().render(&values),
            Err(OracleError::GroundTruthLeak(_))
        ));
    }
}
