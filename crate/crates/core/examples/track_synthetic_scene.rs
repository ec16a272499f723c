//! Track one scene of the standard corpus and score it.
//!
//! cargo run --example track_synthetic_scene -- long_occlusion

use motskit::config::TrackerConfig;
use motskit::experiments::evaluate_scene;
use motskit::metrics::alpha_table;
use motskit::synth::standard_corpus;

fn main() -> motskit::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "crossing_pair".into());
    let Some(spec) = standard_corpus().into_iter().find(|s| s.name == name) else {
        let names: Vec<_> = standard_corpus().into_iter().map(|s| s.name).collect();
        eprintln!("unknown scene {name:?}; one of {}", names.join(", "));
        std::process::exit(1);
    };

    let (report, run) = evaluate_scene(&spec, &TrackerConfig::default())?;
    println!(
        "{}: {}x{}, {} frames, {} objects",
        spec.name,
        spec.width,
        spec.height,
        spec.n_frames,
        spec.objects.len()
    );
    println!(
        "{} tracks created, {} emitted trajectories, peak memory {} entries ({} bytes)\n",
        run.stats.tracks_created,
        run.trajectories.len(),
        run.stats.peak_memory_entries,
        run.stats.peak_memory_bytes
    );
    for t in &run.trajectories {
        let (first, last) = (t.entries[0].frame, t.entries.last().unwrap().frame);
        println!("  track {:>3} class {} frames {first}..={last} ({} masks)", t.id, t.class_id, t.entries.len());
    }
    println!("\n{report}");
    if let Some(c) = report.classes.first() {
        println!("{}", alpha_table(c));
    }
    Ok(())
}
