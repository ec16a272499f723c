//! Byte-level checks of the text formats against external references and
//! committed golden outputs. Set `MOTSKIT_BLESS=1` to rewrite the goldens.

use std::path::PathBuf;

use motskit::config::{TrackerConfig, CLASS_IGNORE};
use motskit::io;
use motskit::mask::BinaryMask;
use motskit::metrics::{evaluate, EvalInput, EvalMode};
use motskit::rle::Rle;
use motskit::synth::{corpus, generate_scene, run_scene};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn check_golden(name: &str, text: &str) {
    let path = fixture(name);
    if std::env::var_os("MOTSKIT_BLESS").is_some() {
        std::fs::write(&path, text).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == text, "{name} differs from the golden file");
}

#[test]
fn compressed_rle_matches_reference_encoder() {
    let text = std::fs::read_to_string(fixture("coco_rle.txt")).unwrap();
    let mut n = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split(' ').collect();
        let (h, w): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let decoded = Rle::from_compressed(f[3], w, h).unwrap().decode().unwrap();
        if let Some(area) = f[2].strip_prefix("area:") {
            assert_eq!(decoded.area(), area.parse::<u64>().unwrap());
        } else {
            let bits: Vec<bool> = f[2].bytes().map(|b| b == b'1').collect();
            let mask = BinaryMask::from_row_major(w, h, &bits).unwrap();
            assert_eq!(decoded, mask, "{line}");
        }
        assert_eq!(Rle::encode(&decoded).to_compressed(), f[3]);
        n += 1;
    }
    assert_eq!(n, 62);
}

#[test]
fn devkit_style_ground_truth_parses() {
    let recs = io::read_mots(fixture("devkit_gt.txt")).unwrap();
    assert_eq!(recs.len(), 12);
    let areas: Vec<u64> = recs.iter().filter(|r| r.frame == 0).map(|r| r.rle.area()).collect();
    assert_eq!(areas, vec![16000, 5000, 3757, 4000]);
    assert!(recs.iter().any(|r| r.obj_id == 10000 && r.class_id == CLASS_IGNORE));
    assert_eq!(io::format_mots(&recs), std::fs::read_to_string(fixture("devkit_gt.txt")).unwrap());

    let gt = io::mots_eval_objects(&recs, 3).unwrap();
    let input = EvalInput {
        mode: EvalMode::Mask,
        gt: gt.clone(),
        pred: gt,
    };
    let report = evaluate(&input, None);
    assert_eq!(report.classes.len(), 2);
    for c in &report.classes {
        assert!((c.hota - 1.0).abs() < 1e-12);
    }
}

#[test]
fn writer_goldens_on_a_corpus_scene() {
    let spec = corpus::crossing_pair();
    let gt = generate_scene(&spec).unwrap();
    let run = run_scene(&spec, &gt, &TrackerConfig::default()).unwrap().into_result().unwrap();
    let mots = io::write_mots_results(&run.trajectories).unwrap();
    let mot = io::write_mot_results(&run.trajectories).unwrap();
    check_golden("golden/crossing_pair.mots.txt", &mots);
    check_golden("golden/crossing_pair.mot.txt", &mot);
    check_golden("golden/crossing_pair.gt.txt", &io::write_gt_mots(&gt).unwrap());

    assert_eq!(io::parse_mots(&mots, "mots").unwrap(), io::mots_records(&run.trajectories).unwrap());
    assert_eq!(io::parse_mot(&mot, "mot").unwrap(), io::mot_records(&run.trajectories).unwrap());
    for line in mot.lines() {
        assert_eq!(line.split(' ').count(), 18);
    }
}

#[test]
fn perfect_world_writer_skips_hidden_frames() {
    for spec in corpus::perfect_world_corpus() {
        let gt = generate_scene(&spec).unwrap();
        let run = run_scene(&spec, &gt, &TrackerConfig::default()).unwrap().into_result().unwrap();
        let visible: usize = gt.frames.iter().map(|f| f.objects.len()).sum();
        let mot = io::write_mot_results(&run.trajectories).unwrap();
        assert_eq!(mot.lines().count(), visible, "{}", spec.name);
        assert_eq!(io::write_mots_results(&run.trajectories).unwrap(), io::write_gt_mots(&gt).unwrap());
    }
}
