use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use retouch_cli::files::{read_image, write_image};
use retouch_cli::pipeline::{plan_file, stage_image, CACHE_DIR, PLAN_FILE};
use retouch_core::corpus::{expert_image, test_image};
use retouch_core::ops::{apply_sequence, Adjustment, OpId};
use retouch_core::plan::{parse_plan, serialize_plan};
use retouch_core::puzzles::dataset::read_dataset;
use retouch_core::{Plan, Stage, StagePlan};
use retouch_oracle::tasks::Oracle;
use retouch_oracle::{OracleError, ReplayClient, RetryPolicy};

fn retouch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retouch"))
        .args(args)
        .env_remove("ORACLE_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn input_image(dir: &Path) -> PathBuf {
    let path = dir.join("photo.png");
    write_image(&path, &test_image()).unwrap();
    path
}

fn write_plan(path: &Path, stages: Vec<StagePlan>) {
    let plan = Plan {
        source: "photo.png".into(),
        style_tag: None,
        stages,
    };
    fs::write(path, serialize_plan(&plan)).unwrap();
}

#[test]
fn apply_zero_plan_is_identity_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let input = input_image(tmp.path());
    let plan = tmp.path().join("plan.json");
    let zeros = [OpId::Exposure, OpId::Contrast].map(|op| Adjustment::new(op, 0).unwrap()).to_vec();
    write_plan(&plan, vec![StagePlan::from_adjustments(Stage::Lighting, zeros).unwrap()]);
    let out = tmp.path().join("out.png");
    ok(&retouch(&["apply", "--input", p(&input), "--plan", p(&plan), "--output", p(&out)]));
    assert_eq!(read_image(&out).unwrap(), test_image());

    let real = vec![Adjustment::new(OpId::Exposure, 25).unwrap()];
    write_plan(&plan, vec![StagePlan::from_adjustments(Stage::Lighting, real).unwrap()]);
    let out2 = tmp.path().join("out2.png");
    ok(&retouch(&["apply", "--input", p(&input), "--plan", p(&plan), "--output", p(&out)]));
    ok(&retouch(&["apply", "--input", p(&input), "--plan", p(&plan), "--output", p(&out2)]));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn apply_unknown_op_exits_with_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = input_image(tmp.path());
    let plan = tmp.path().join("plan.json");
    fs::write(
        &plan,
        r#"{"source":"x","stages":[{"stage":1,"triplets":[],"adjustments":[{"op":"sharpen","value":10}]}]}"#,
    )
    .unwrap();
    let out = retouch(&["apply", "--input", p(&input), "--plan", p(&plan), "--output", p(&tmp.path().join("o.png"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnknownOp"));

    let missing = retouch(&["apply", "--input", "/nonexistent.png", "--plan", p(&plan), "--output", "o.png"]);
    assert_eq!(missing.status.code(), Some(2), "plan errors are reported before reading the image");
    fs::write(&plan, r#"{"source":"x","stages":[]}"#).unwrap();
    let missing = retouch(&["apply", "--input", "/nonexistent.png", "--plan", p(&plan), "--output", "o.png"]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn stub_pipeline_without_edits_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let input = input_image(tmp.path());
    let run = tmp.path().join("run");
    let out = tmp.path().join("final.png");
    ok(&retouch(&["pipeline", "--input", p(&input), "--run-dir", p(&run), "--output", p(&out), "--stub"]));
    assert_eq!(read_image(&out).unwrap(), test_image());
    let plan = parse_plan(&fs::read_to_string(run.join(PLAN_FILE)).unwrap()).unwrap();
    assert!(plan.stages.iter().all(StagePlan::is_no_edit));
}

#[test]
fn edited_plan_during_pause_drives_the_next_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let input = input_image(tmp.path());
    let run = tmp.path().join("run");
    let stdout = ok(&retouch(&["pipeline", "--input", p(&input), "--run-dir", p(&run), "--pause", "--stub"]));
    assert!(stdout.contains("--resume"));
    assert!(!run.join(stage_image(1)).exists());

    // the user overrides the stage-1 no-edit plan
    let override_adj = vec![Adjustment::new(OpId::Exposure, -30).unwrap(), Adjustment::new(OpId::Contrast, 20).unwrap()];
    write_plan(
        &run.join(plan_file(1)),
        vec![StagePlan::from_adjustments(Stage::Lighting, override_adj.clone()).unwrap()],
    );
    ok(&retouch(&["pipeline", "--resume", "--run-dir", p(&run)]));
    let stage1 = read_image(&run.join(stage_image(1))).unwrap();
    assert_eq!(stage1, apply_sequence(&test_image(), &override_adj).unwrap());

    // stage 2 was planned on the overridden image, not on the input
    let replay = Oracle::new(ReplayClient::new(run.join(CACHE_DIR))).with_retry(RetryPolicy::immediate());
    assert!(replay.plan_stage(&stage1, Stage::Color, None).is_ok());
    assert!(matches!(
        replay.plan_stage(&test_image(), Stage::Color, None),
        Err(OracleError::CacheMiss(_))
    ));

    ok(&retouch(&["pipeline", "--resume", "--run-dir", p(&run)]));
    ok(&retouch(&["pipeline", "--resume", "--run-dir", p(&run)]));
    let plan = parse_plan(&fs::read_to_string(run.join(PLAN_FILE)).unwrap()).unwrap();
    assert_eq!(plan.adjustments(), override_adj);
    assert_eq!(read_image(&run.join("output.png")).unwrap(), stage1);
}

#[test]
fn invalid_plan_edit_is_reported_and_resumable() {
    let tmp = tempfile::tempdir().unwrap();
    let input = input_image(tmp.path());
    let run = tmp.path().join("run");
    ok(&retouch(&["pipeline", "--input", p(&input), "--run-dir", p(&run), "--pause", "--stub"]));
    let bad = vec![Adjustment::new(OpId::Tint, 10).unwrap()];
    write_plan(&run.join(plan_file(1)), vec![StagePlan::from_adjustments(Stage::Color, bad).unwrap()]);
    let out = retouch(&["pipeline", "--resume", "--run-dir", p(&run)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("StageMismatch"));
    write_plan(&run.join(plan_file(1)), vec![StagePlan::no_edit(Stage::Lighting, "fine as is")]);
    ok(&retouch(&["pipeline", "--resume", "--run-dir", p(&run)]));
}

#[test]
fn unreachable_service_exits_3_with_resume_hint() {
    let tmp = tempfile::tempdir().unwrap();
    let input = input_image(tmp.path());
    let run = tmp.path().join("run");
    let out = retouch(&["pipeline", "--input", p(&input), "--run-dir", p(&run)]);
    assert_eq!(out.status.code(), Some(3));
    let out = Command::new(env!("CARGO_BIN_EXE_retouch"))
        .args(["pipeline", "--resume", "--run-dir", p(&run), "--live"])
        .env("ORACLE_ENDPOINT", "http://127.0.0.1:9/unreachable")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ServiceUnavailable") && err.contains("--resume"), "{err}");
    // the same run completes once a client is available
    ok(&retouch(&["pipeline", "--resume", "--run-dir", p(&run), "--stub"]));
}

#[test]
fn eval_identical_and_mismatched_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, target) = (tmp.path().join("pred"), tmp.path().join("target"));
    for i in 0..3 {
        let img = expert_image(i, 48, 32);
        write_image(&pred.join(format!("img{i}.png")), &img).unwrap();
        write_image(&target.join(format!("img{i}.png")), &img).unwrap();
    }
    let csv = tmp.path().join("scores.csv");
    let stdout = ok(&retouch(&["eval", "--pred", p(&pred), "--target", p(&target), "--csv", p(&csv)]));
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    for pair in report["pairs"].as_array().unwrap() {
        assert_eq!(pair["psnr_db"], 99.0);
        assert!((pair["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-6);
        assert!((pair["hist"]["mean"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    }
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);

    let second = tmp.path().join("second");
    write_image(&second.join("img0.png"), &expert_image(0, 48, 32)).unwrap();
    write_image(&second.join("extra.png"), &expert_image(9, 48, 32)).unwrap();
    let out = retouch(&["eval", "--pred", p(&pred), "--target", p(&second)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["img1", "img2", "extra"] {
        assert!(err.contains(name), "{err}");
    }

    let best = ok(&retouch(&[
        "eval", "--pred", p(&pred), "--target", p(&target), "--target", p(&target), "--reduction", "best-of",
    ]));
    assert!(best.contains("\"best-of\""));
}

#[test]
fn puzzle_gen_then_reason_synth_with_stub() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let stdout = ok(&retouch(&[
        "--seed", "3", "puzzle-gen", "--kind", "C", "--synthetic", "3", "--count", "6", "--out", p(&ds), "--tile-height", "64",
    ]));
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["replay_passed"], 6);
    let out = ok(&retouch(&["reason-synth", "--dataset", p(&ds), "--stub"]));
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["synthesized"], 6);
    let records = read_dataset(&ds).unwrap();
    assert!(records.iter().all(|r| r.reasoning.is_some()));
    let again: serde_json::Value = serde_json::from_str(&ok(&retouch(&["reason-synth", "--dataset", p(&ds), "--stub"]))).unwrap();
    assert_eq!(again["skipped"], 6);
}

#[test]
fn list_ops_and_verify_invert() {
    let all: serde_json::Value = serde_json::from_str(&ok(&retouch(&["list-ops", "--json"]))).unwrap();
    assert_eq!(all.as_array().unwrap().len(), 33);
    assert_eq!(ok(&retouch(&["list-ops", "--stage", "3"])).lines().count(), 24);
    let out = ok(&retouch(&["verify-invert", "--synthetic", "1", "--values", "1"]));
    assert!(out.contains("33 round trips: 33 passed"), "{out}");
}
