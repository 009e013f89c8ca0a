//! Full per-track pipeline: synthesise, segment, estimate, compare against
//! the first window, and write the curve as CSV.
//!
//! cargo run --release --example similarity_curve -- [preset] [seed]

use spatcon::evalpipe::evaluate_trace;
use spatcon::synth::{make_scenario, synthesize, Preset};
use spatcon::traceio::{provenance_header, truth_key, write_curves};
use spatcon::{EvalConfig, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("los_tangential").parse()?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let trace = synthesize(&make_scenario(preset, seed)?, &EvalConfig::default())?;
    let id = format!("{preset}-{seed}");
    let curve = evaluate_trace(&trace, &id, None)?;

    for d in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 39.0] {
        if let Some(v) = curve.value_at(d) {
            let bar = "#".repeat((v * 50.0).round() as usize);
            println!("{d:>5.1} m  {v:.4}  {bar}");
        }
    }

    let path = std::env::temp_dir().join(format!("{id}.csv"));
    let mut header = provenance_header(&RunConfig::default().digest());
    header.insert(truth_key(&id), preset.to_string());
    write_curves(std::fs::File::create(&path)?, &[curve], &header)?;
    println!("wrote {}", path.display());
    Ok(())
}
