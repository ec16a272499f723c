use std::path::Path;
use std::process::{Command, Output};

use motskit::io;
use motskit::synth::SceneSpec;

fn motskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motskit")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn synth_track_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).display().to_string();

    let out = motskit(&["--out-dir", &d("corpus"), "synth", "--scenes", "crossing_pair"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let spec = SceneSpec::load(dir.path().join("corpus/crossing_pair.json")).unwrap();
    assert_eq!(spec.seed, 7);
    io::read_mots(dir.path().join("corpus/crossing_pair.gt.txt")).unwrap();
    io::read_detections(dir.path().join("corpus/crossing_pair.det.txt")).unwrap();

    // same scene twice, once by name and once from the written files
    let a = motskit(&["--out-dir", &d("a"), "track", "--scene", "crossing_pair"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = motskit(&[
        "--out-dir",
        &d("b"),
        "track",
        "--scene",
        &d("corpus/crossing_pair.json"),
        "--detections",
        &d("corpus/crossing_pair.det.txt"),
    ]);
    assert_eq!(code(&b), 0);
    for f in ["results_mots.txt", "results_mot.txt"] {
        assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)));
    }
    io::read_mots(dir.path().join("a/results_mots.txt")).unwrap();
    io::read_mot(dir.path().join("a/results_mot.txt")).unwrap();
    let stats: serde_json::Value = serde_json::from_str(&read(&dir.path().join("a/run_stats.json"))).unwrap();
    assert_eq!(stats["frames"], 100);
    assert!(stats["peak_memory_entries"].as_u64().unwrap() > 0);

    let e = motskit(&[
        "--out-dir",
        &d("eval"),
        "eval",
        "--gt",
        &d("corpus/crossing_pair.gt.txt"),
        "--results",
        &d("a/results_mots.txt"),
    ]);
    assert_eq!(code(&e), 0);
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("eval/metrics.json"))).unwrap();
    assert_eq!(report["classes"][0]["hota"], 1.0);
    assert!(String::from_utf8_lossy(&e.stdout).contains("car"));
}

#[test]
fn seed_flag_changes_noise_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let out = motskit(&["--seed", seed, "--out-dir", p.to_str().unwrap(), "track", "--scene", "fp_storm"]);
        assert_eq!(code(&out), 0);
        read(&p.join("results_mots.txt"))
    };
    assert_eq!(run("x", "3"), run("y", "3"));
    assert_ne!(run("x", "3"), run("z", "4"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).display().to_string();

    // usage
    assert_eq!(code(&motskit(&[])), 1);
    assert_eq!(code(&motskit(&["frobnicate"])), 1);
    assert_eq!(code(&motskit(&["track", "--segmenter", "adapter"])), 1);
    assert_eq!(code(&motskit(&["track"])), 1);
    assert_eq!(code(&motskit(&["--help"])), 0);

    // invalid configuration
    std::fs::write(p("bad.json"), r#"{"tau_l": 0.7, "tau_h": 0.7}"#).unwrap();
    let out = motskit(&["--config", &p("bad.json"), "track", "--scene", "crossing_pair"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau_l"));

    // data
    std::fs::create_dir(p("empty")).unwrap();
    assert_eq!(code(&motskit(&["ablate", "--scene-corpus", &p("empty")])), 2);
    std::fs::write(p("dets.txt"), "0 1 0.9 0 0 10 10\n0 1 x 0 0 10 10\n").unwrap();
    let out = motskit(&["--out-dir", &p("o"), "track", "--scene", "crossing_pair", "--detections", &p("dets.txt")]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
    assert_eq!(code(&motskit(&["eval", "--gt", &p("missing.txt"), "--results", &p("missing.txt")])), 2);
}

#[test]
fn ablate_and_sweep_on_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let out = motskit(&["--out-dir", corpus.to_str().unwrap(), "synth", "--perfect", "--scenes", "perfect_static"]);
    assert_eq!(code(&out), 0);

    let o = dir.path().join("abl");
    let out = motskit(&["--out-dir", o.to_str().unwrap(), "ablate", "--scene-corpus", corpus.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    let variants: Vec<&str> = table.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(variants, vec!["none", "TQA", "TQA+OAF", "OAF"]);
    assert!(read(&o.join("ablation.csv")).lines().count() > 1);
    serde_json::from_str::<serde_json::Value>(&read(&o.join("ablation.json"))).unwrap();

    let o = dir.path().join("sweep");
    let out = motskit(&[
        "--out-dir",
        o.to_str().unwrap(),
        "sweep-window",
        "--scene-corpus",
        corpus.to_str().unwrap(),
        "--windows",
        "2,4,0",
    ]);
    assert_eq!(code(&out), 0);
    let csv = read(&o.join("sweep.csv"));
    let mem: Vec<u64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(mem.len(), 3);
    assert!(mem[0] <= mem[1] && mem[1] <= mem[2]);
}
