use std::collections::HashMap;
use std::fs;

use retouch_core::corpus::corpus;
use retouch_core::puzzles::dataset::{generate_dataset, load_image, read_dataset, DATASET_FILE};
use retouch_core::puzzles::{replay, ExpertImage, Generator, GroundTruth, PuzzleKind};

fn experts(n: usize) -> Vec<ExpertImage> {
    corpus(n, 64, 48)
        .into_iter()
        .enumerate()
        .map(|(i, image)| ExpertImage {
            name: format!("expert_{i:02}.png"),
            image,
        })
        .collect()
}

fn generator() -> Generator {
    Generator {
        tile_height: 48,
        ..Generator::default()
    }
}

#[test]
fn output_is_independent_of_worker_count() {
    let experts = experts(4);
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_dataset(&generator(), PuzzleKind::B, &experts, 20, 42, dir.path()).unwrap());
        let lines = fs::read_to_string(dir.path().join(DATASET_FILE)).unwrap();
        let mut images = Vec::new();
        for entry in fs::read_dir(dir.path().join("images")).unwrap() {
            let entry = entry.unwrap();
            images.push((entry.file_name(), fs::read(entry.path()).unwrap()));
        }
        images.sort();
        (lines, images)
    };
    assert_eq!(run(1), run(6));
}

#[test]
fn every_record_replays_its_answer_key() {
    let experts = experts(5);
    for kind in PuzzleKind::ALL {
        let dir = tempfile::tempdir().unwrap();
        let n = generate_dataset(&generator(), kind, &experts, 25, 3, dir.path()).unwrap();
        let records = read_dataset(dir.path()).unwrap();
        assert_eq!(records.len(), n);
        for r in &records {
            let report = replay(r, |x| load_image(dir.path(), x)).unwrap();
            assert!(report.passed, "{}: {:?}", r.record_id, report);
            if kind == PuzzleKind::A {
                assert!(report.exact);
            }
        }
    }
}

#[test]
fn puzzle_a_ops_are_roughly_uniform() {
    let experts = experts(3);
    let g = generator();
    let n = 330usize;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for i in 0..n as u64 {
        // skip stitching cost by calling the generator directly
        let p = g.record(PuzzleKind::A, &experts, 99, i).unwrap();
        if let GroundTruth::A { adjustment } = p.record.ground_truth {
            *counts.entry(adjustment.op.name()).or_default() += 1;
        }
    }
    assert_eq!(counts.len(), 33);
    let p = 1.0 / 33.0;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for (op, c) in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma + 1.0, "{op}: {c}");
    }
}
