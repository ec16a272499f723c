//! Retained segmenter memory and accuracy per memory window on long
//! single-object scenes, then on the standard corpus.

use motskit::config::TrackerConfig;
use motskit::experiments::sweep_window;
use motskit::synth::{single_object_scene, standard_corpus};

fn main() -> motskit::Result<()> {
    let cfg = TrackerConfig::default();

    println!("single object, 200 frames");
    let r = sweep_window(&[single_object_scene(200)], &cfg, &[1, 4, 8, 16, 64, 200, 0])?;
    print!("{}", r.table());

    println!("\nstandard corpus");
    let r = sweep_window(&standard_corpus(), &cfg, &[3, 6, 9, 16, 30, 0])?;
    print!("{}", r.table());
    Ok(())
}
