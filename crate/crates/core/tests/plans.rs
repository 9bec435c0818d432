use proptest::prelude::*;
use retouch_core::ops::{Adjustment, OpId, Stage};
use retouch_core::plan::{parse_plan, serialize_plan, Plan, PlanError, ReasoningTriplet, StagePlan};

fn stage_plan(stage: Stage) -> impl Strategy<Value = StagePlan> {
    let ops: Vec<OpId> = OpId::all().iter().copied().filter(|o| o.stage() == stage).collect();
    let n = ops.len();
    prop_oneof![
        "[a-z ]{1,30}".prop_filter("non-blank", |s| !s.trim().is_empty()).prop_map(move |r| StagePlan::no_edit(stage, r)),
        (
            proptest::sample::subsequence(ops, 1..=n.min(4)),
            proptest::collection::vec(-100i64..=100, 4),
            any::<bool>(),
        )
            .prop_map(move |(ops, values, with_triplets)| {
                let adjustments: Vec<Adjustment> =
                    ops.iter().zip(&values).map(|(&o, &v)| Adjustment::new(o, v).unwrap()).collect();
                let triplets = if with_triplets {
                    ops.iter()
                        .map(|o| ReasoningTriplet::new(format!("moderate {} change", o.name()), "the image needs it", "better balance"))
                        .collect()
                } else {
                    Vec::new()
                };
                StagePlan {
                    stage,
                    triplets,
                    adjustments,
                    no_edit_reason: None,
                }
            }),
    ]
}

fn plan() -> impl Strategy<Value = Plan> {
    (
        "[A-Za-z0-9_./-]{1,24}",
        proptest::option::of("[a-z ]{1,20}"),
        proptest::sample::subsequence(Stage::ALL.to_vec(), 0..=3),
    )
        .prop_flat_map(|(source, style_tag, stages)| {
            let stage_plans: Vec<_> = stages.into_iter().map(stage_plan).collect();
            stage_plans.prop_map(move |stages| Plan {
                source: source.clone(),
                style_tag: style_tag.clone(),
                stages,
            })
        })
}

fn remove_nth_key(v: &mut serde_json::Value, n: &mut usize) -> Option<String> {
    match v {
        serde_json::Value::Object(map) => {
            let keys: Vec<String> = map.keys().cloned().collect();
            for k in keys {
                if *n == 0 {
                    map.remove(&k);
                    return Some(k);
                }
                *n -= 1;
                if let Some(found) = remove_nth_key(map.get_mut(&k).unwrap(), n) {
                    return Some(found);
                }
            }
            None
        }
        serde_json::Value::Array(items) => items.iter_mut().find_map(|i| remove_nth_key(i, n)),
        _ => None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialize_parse_is_byte_stable(p in plan()) {
        let text = serialize_plan(&p);
        let back = parse_plan(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(serialize_plan(&back), text);
    }

    #[test]
    fn deleting_a_required_key_is_a_typed_error(p in plan(), pick in 0usize..64) {
        let mut doc: serde_json::Value = serde_json::from_str(&serialize_plan(&p)).unwrap();
        let mut n = pick;
        if let Some(key) = remove_nth_key(&mut doc, &mut n) {
            let result = parse_plan(&doc.to_string());
            if key == "style_tag" {
                prop_assert!(result.is_ok());
            } else {
                prop_assert!(result.is_err(), "deleting {} was accepted", key);
            }
        }
    }

    #[test]
    fn arbitrary_text_never_panics(s in ".{0,200}") {
        let _ = parse_plan(&s);
    }
}

#[test]
fn style_tag_and_no_edit_reason_survive() {
    let mut p = Plan::new("portrait.tif");
    p.style_tag = Some("balanced".into());
    p.set_stage(StagePlan::no_edit(Stage::Lighting, "exposure is already good"));
    let text = serialize_plan(&p);
    assert!(text.contains("no_edit_reason"));
    assert_eq!(parse_plan(&text).unwrap().style_tag.as_deref(), Some("balanced"));
}

#[test]
fn stage_three_triplet_in_stage_one() {
    let doc = r#"{"source":"a","stages":[{"stage":1,"triplets":[
        {"adjustment":"slightly raise hue_green","issue":"foliage","solution":"fresher"}],"adjustments":[]}]}"#;
    assert!(matches!(parse_plan(doc), Err(PlanError::StageMismatch { .. })));
}

#[test]
fn key_order_is_canonical() {
    let doc = r#"{"stages":[{"adjustments":[{"value":10,"op":"tint"}],"triplets":[],"stage":2}],"source":"x"}"#;
    let text = serialize_plan(&parse_plan(doc).unwrap());
    let source = text.find("\"source\"").unwrap();
    let stages = text.find("\"stages\"").unwrap();
    assert!(source < stages);
    assert!(text.find("\"op\"").unwrap() < text.find("\"value\"").unwrap());
}
