//! Builds a preset scenario, synthesises its channel trace and writes it to
//! disk.
//!
//! cargo run --release --example synthesize_trace -- [preset] [seed] [out.sctr]

use std::path::PathBuf;

use spatcon::synth::{make_scenario, synthesize, Preset};
use spatcon::traceio::write_trace;
use spatcon::EvalConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("los_radial").parse()?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("example.sctr"));

    let scenario = make_scenario(preset, seed)?;
    let (near, far) = scenario.bs_range_extent();
    println!("preset {preset}, seed {seed}");
    println!("  BS height {:.1} m, boresight {:.1} deg", scenario.bs.position.z, scenario.bs.boresight_azimuth.to_degrees());
    println!("  track {:.0} m at {} m/s, BS range {near:.1}..{far:.1} m", scenario.track.length(), scenario.track.speed());
    println!("  LoS {}, {} scatterers in total", scenario.los_present, scenario.scatterers.len());
    for d in [0.0, 10.0, 20.0, 30.0] {
        let paths = scenario.paths_at(d)?;
        let power: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        println!("  at {d:>4.1} m: {:>3} paths, total power {:.3e}", paths.len(), power);
    }

    let cfg = EvalConfig::default();
    let trace = synthesize(&scenario, &cfg)?;
    write_trace(&trace, &out)?;
    println!(
        "wrote {} : {} STTS x {} subcarriers x {} antennas",
        out.display(),
        trace.header.stts_count,
        trace.header.eval.n_subcarriers,
        trace.header.n_r
    );
    println!("scenario hash {}", trace.header.meta["scenario.hash"]);
    Ok(())
}
