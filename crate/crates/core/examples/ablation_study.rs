use motskit::config::TrackerConfig;
use motskit::experiments::ablate;
use motskit::synth::standard_corpus;

fn main() -> motskit::error::Result<()> {
    let report = ablate(&standard_corpus(), &TrackerConfig::default())?;
    print!("{}", report.table());
    for row in &report.rows {
        println!("\n{}", row.variant);
        for s in &row.scenes {
            println!(
                "  {:<16} {:<3} HOTA {:6.2} DetA {:6.2} AssA {:6.2} IDs {}",
                s.scene,
                s.class_id,
                s.hota * 100.0,
                s.deta * 100.0,
                s.assa * 100.0,
                s.idsw
            );
        }
    }
    Ok(())
}
