//! Offline detections from a text file drive the tracker; results come out
//! as KITTI MOTS and MOT lines.
//!
//! cargo run --example detection_file_pipeline [-- detections.txt]

use motskit::config::TrackerConfig;
use motskit::io;
use motskit::pipeline::run_sequence;
use motskit::segmenter::Detector;
use motskit::synth::{corpus::enter_exit, generate_scene, SynthDetector, SynthSegmenter};

fn main() -> motskit::Result<()> {
    let spec = enter_exit();
    let gt = generate_scene(&spec)?;

    let dets = match std::env::args().nth(1) {
        Some(path) => io::read_detections(path)?,
        None => {
            // write the synthetic detector's output to a file and read it back
            let mut det = SynthDetector::new(&gt, spec.noise.clone(), spec.seed);
            let mut all = std::collections::BTreeMap::new();
            for f in 0..gt.frames.len() {
                all.insert(f, det.detect(f)?);
            }
            let path = std::env::temp_dir().join("motskit_enter_exit.det.txt");
            std::fs::write(&path, io::write_detections(&all)).map_err(|e| motskit::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            println!("detections written to {}", path.display());
            io::read_detections(&path)?
        }
    };
    let n_dets: usize = dets.values().map(Vec::len).sum();
    println!("{n_dets} detections over {} frames", dets.len());

    let mut detector = dets;
    let mut segmenter = SynthSegmenter::new(&gt);
    let run = run_sequence(
        gt.width,
        gt.height,
        gt.frames.len(),
        &mut detector,
        &mut segmenter,
        &TrackerConfig::default(),
    )?
    .into_result()?;

    let mots = io::write_mots_results(&run.trajectories)?;
    let mot = io::write_mot_results(&run.trajectories)?;
    println!("\nMOTS, first lines:");
    mots.lines().take(4).for_each(|l| println!("  {l}"));
    println!("MOT, first lines:");
    mot.lines().take(4).for_each(|l| println!("  {l}"));
    println!("\n{} MOTS lines, {} MOT lines", mots.lines().count(), mot.lines().count());

    // every output parses with its own reader
    assert_eq!(io::parse_mots(&mots, "mots")?, io::mots_records(&run.trajectories)?);
    assert_eq!(io::parse_mot(&mot, "mot")?.len(), mot.lines().count());
    Ok(())
}
