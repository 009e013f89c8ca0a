//! Evaluates a few seeds per preset, groups curves by assigned class and
//! writes min/max envelopes with two representative curves per class.
//!
//! cargo run --release --example class_envelopes -- [seeds]

use std::collections::BTreeMap;

use spatcon::classify::{classify_curve, ClassThresholds, TrackClass};
use spatcon::evalpipe::{class_envelope, evaluate_trace, SimilarityCurve};
use spatcon::synth::{make_scenario, synthesize, Preset};
use spatcon::traceio::{provenance_header, write_envelopes};
use spatcon::{EvalConfig, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let cfg = EvalConfig::default();
    let th = ClassThresholds::default();
    let mut by_class: BTreeMap<TrackClass, Vec<SimilarityCurve>> = BTreeMap::new();
    for preset in Preset::ALL {
        for seed in 0..seeds {
            let curve = evaluate_trace(&synthesize(&make_scenario(preset, seed)?, &cfg)?, &format!("{preset}-{seed}"), None)?;
            let class = classify_curve(&curve, &th)?.class;
            by_class.entry(class).or_default().push(curve);
        }
    }
    let mut envelopes = Vec::new();
    for (class, curves) in &by_class {
        let env = class_envelope(class.name(), curves, None)?;
        let mid = env.distances.len() / 2;
        println!(
            "{:<15} {} members, band at {:.1} m: [{:.3}, {:.3}], reps {} / {}",
            class.name(),
            env.member_count,
            env.distances[mid],
            env.min[mid],
            env.max[mid],
            env.representative_ids[0],
            env.representative_ids[1]
        );
        envelopes.push(env);
    }
    let path = std::env::temp_dir().join("envelopes.csv");
    write_envelopes(std::fs::File::create(&path)?, &envelopes, &provenance_header(&RunConfig::default().digest()))?;
    println!("wrote {}", path.display());
    Ok(())
}
