//! Protocol conformance: a scripted adapter must be indistinguishable from
//! the synthetic models it was recorded from.

use std::io::Cursor;
use std::process::Command;

use serde_json::json;

use motskit::adapter::{AdapterClient, AdapterProcess, SharedAdapter};
use motskit::config::TrackerConfig;
use motskit::io;
use motskit::pipeline::{run_sequence, RunOutput};
use motskit::synth::{corpus, generate_scene, run_scene, SceneSpec, SynthDetector, SynthSegmenter};
use motskit::{BBox, Detection, Detector, Error, MaskObservation, Result, Rle, Segmenter, TrackId};

/// Wraps the synthetic models and writes down what a server would answer.
struct Recorder<'a> {
    seg: SynthSegmenter<'a>,
    det: SynthDetector<'a>,
    lines: Vec<String>,
}

fn obs_json(o: &MaskObservation) -> serde_json::Value {
    json!({"track_id": o.track_id, "rle": Rle::encode(&o.mask).to_compressed(), "score": o.score})
}

impl Recorder<'_> {
    fn ok(&mut self) {
        self.lines.push(json!({"ok": true}).to_string());
    }
}

impl Segmenter for Recorder<'_> {
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        let o = self.seg.add_prompt(frame, bbox, track_id)?;
        self.lines.push(json!({"ok": true, "observations": [obs_json(&o)]}).to_string());
        Ok(o)
    }
    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
        let obs = self.seg.propagate(frame)?;
        let list: Vec<_> = obs.iter().map(obs_json).collect();
        self.lines.push(json!({"ok": true, "observations": list}).to_string());
        Ok(obs)
    }
    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        self.seg.drop_track(track_id)?;
        self.ok();
        Ok(())
    }
    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        self.seg.set_memory_window(t_w)?;
        self.ok();
        Ok(())
    }
}

impl Detector for Recorder<'_> {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        let dets = self.det.detect(frame)?;
        let list: Vec<_> = dets
            .iter()
            .map(|d| json!({"class_id": d.class_id, "score": d.score, "bbox": [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2]}))
            .collect();
        self.lines.push(json!({"ok": true, "detections": list}).to_string());
        Ok(dets)
    }
}

/// Reference run plus the server script that reproduces it.
fn record(spec: &SceneSpec, cfg: &TrackerConfig) -> (RunOutput, Vec<String>) {
    let gt = generate_scene(spec).unwrap();
    let rec = Recorder {
        seg: SynthSegmenter::new(&gt),
        det: SynthDetector::new(&gt, spec.noise.clone(), spec.seed),
        lines: vec![json!({"ok": true, "v": 1, "width": gt.width, "height": gt.height}).to_string()],
    };
    let shared = SharedAdapter::new(rec);
    let (mut d, mut s) = (shared.clone(), shared.clone());
    let out = run_sequence(gt.width, gt.height, gt.frames.len(), &mut d, &mut s, cfg).unwrap();
    drop((d, s));
    let lines = shared.try_unwrap().ok().unwrap().lines;
    (out.into_result().unwrap(), lines)
}

fn replay(spec: &SceneSpec, script: &[String], cfg: &TrackerConfig) -> Result<RunOutput> {
    let text = script.join("\n") + "\n";
    let client = AdapterClient::connect(Cursor::new(text.into_bytes()), Vec::new(), spec.width, spec.height, spec.n_frames)?;
    let shared = SharedAdapter::new(client);
    let (mut d, mut s) = (shared.clone(), shared.clone());
    run_sequence(spec.width, spec.height, spec.n_frames, &mut d, &mut s, cfg)?.into_result()
}

#[test]
fn replayed_script_reproduces_synthetic_run() {
    let spec = corpus::crossing_pair();
    let cfg = TrackerConfig::default();
    let (reference, script) = record(&spec, &cfg);
    let gt = generate_scene(&spec).unwrap();
    let direct = run_scene(&spec, &gt, &cfg).unwrap();
    assert_eq!(reference.trajectories, direct.trajectories);

    let replayed = replay(&spec, &script, &cfg).unwrap();
    assert_eq!(
        io::write_mots_results(&replayed.trajectories).unwrap(),
        io::write_mots_results(&reference.trajectories).unwrap()
    );
    assert_eq!(replayed.trajectories, reference.trajectories);
}

#[test]
fn replay_errors_surface() {
    let spec = corpus::crossing_pair();
    let cfg = TrackerConfig::default();
    let (_, script) = record(&spec, &cfg);

    // an exhausted script is a closed stream
    let short = &script[..script.len() / 2];
    assert!(matches!(replay(&spec, short, &cfg), Err(Error::Protocol(_))));

    // a server-side error answer
    let mut failing = script.clone();
    failing[5] = json!({"ok": false, "error": "frame out of order"}).to_string();
    assert!(matches!(replay(&spec, &failing, &cfg), Err(Error::Segmenter { .. })));

    // a mask for the wrong frame size
    let mut wrong = script.clone();
    let i = wrong.iter().position(|l| l.contains("\"rle\"")).unwrap();
    wrong[i] = json!({"ok": true, "observations": [{"track_id": 1, "rle": "04", "score": 1.0}]}).to_string();
    assert!(matches!(replay(&spec, &wrong, &cfg), Err(Error::RleDimensionMismatch { .. })));

    // a line that is not JSON
    let mut garbage = script.clone();
    garbage[3] = "{\"ok\": tru".into();
    assert!(matches!(replay(&spec, &garbage, &cfg), Err(Error::Protocol(_))));

    // version negotiation
    let mut v2 = script;
    v2[0] = json!({"ok": true, "v": 2, "width": spec.width, "height": spec.height}).to_string();
    assert!(matches!(replay(&spec, &v2, &cfg), Err(Error::Protocol(_))));
}

#[cfg(unix)]
fn replay_server(dir: &std::path::Path, script: &[String]) -> (String, String) {
    let sh = dir.join("replay.sh");
    std::fs::write(
        &sh,
        "while IFS= read -r _req; do IFS= read -r reply <&3 || exit 2; printf '%s\\n' \"$reply\"; done 3<\"$1\"\n",
    )
    .unwrap();
    let lines = dir.join("script.jsonl");
    let mut text = script.join("\n");
    text.push_str("\n{\"ok\":true}\n");
    std::fs::write(&lines, text).unwrap();
    (sh.display().to_string(), lines.display().to_string())
}

#[cfg(unix)]
#[test]
fn subprocess_adapter_round_trip() {
    let spec = corpus::enter_exit();
    let cfg = TrackerConfig::default();
    let (reference, script) = record(&spec, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let (sh, lines) = replay_server(dir.path(), &script);

    let mut cmd = Command::new("sh");
    cmd.arg(&sh).arg(&lines);
    let proc = AdapterProcess::spawn(cmd, spec.width, spec.height, spec.n_frames).unwrap();
    let shared = SharedAdapter::new(proc);
    let (mut d, mut s) = (shared.clone(), shared.clone());
    let out = run_sequence(spec.width, spec.height, spec.n_frames, &mut d, &mut s, &cfg).unwrap();
    drop((d, s));
    assert!(out.aborted.is_none());
    assert_eq!(out.trajectories, reference.trajectories);
    let status = shared.try_unwrap().ok().unwrap().finish().unwrap();
    assert!(status.success());

    // the same server behind the command line tool
    let out_dir = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_motskit"))
        .args(["--out-dir", out_dir.to_str().unwrap(), "track", "--segmenter", "adapter"])
        .args(["--adapter", &format!("sh {sh} {lines}")])
        .args(["--width", &spec.width.to_string(), "--height", &spec.height.to_string()])
        .args(["--frames", &spec.n_frames.to_string()])
        .status()
        .unwrap();
    assert!(status.success());
    let written = std::fs::read_to_string(out_dir.join("results_mots.txt")).unwrap();
    assert_eq!(written, io::write_mots_results(&reference.trajectories).unwrap());
}
