//! Synthesises several seeds of every preset, evaluates and classifies
//! them, and prints the confusion table.
//!
//! cargo run --release --example preset_survey -- [seeds] [n_columns] [preset]

use std::time::Instant;

use spatcon::array::ArrayConfig;
use spatcon::classify::{classification_report, classify_curve, ClassThresholds, LabeledCurve};
use spatcon::synth::{make_scenario_with, synthesize, Preset, ScenarioParams};
use spatcon::{evaluate_trace, ElementPattern, EvalConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let cols: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(16);
    let only: Option<Preset> = args.next().map(|s| s.parse()).transpose()?;
    let cfg = EvalConfig::default();
    let array = ArrayConfig::for_carrier(cfg.carrier_frequency, cols, 4, 2);
    let th = ClassThresholds::default();
    let mut labels = Vec::new();
    let start = Instant::now();
    for preset in Preset::ALL.into_iter().filter(|p| only.map_or(true, |o| o == *p)) {
        for seed in 0..seeds {
            let sc = make_scenario_with(preset, seed, &ScenarioParams::default(), &array, &ElementPattern::default())?;
            let trace = synthesize(&sc, &cfg)?;
            let id = format!("{preset}-{seed}");
            let curve = evaluate_trace(&trace, &id, None)?;
            let label = classify_curve(&curve, &th)?;
            let v = |d: f64| curve.value_at(d).unwrap_or(f64::NAN);
            println!(
                "{id:<22} {:<15} d(2)={:.3} d(10)={:.3} d(20)={:.3} end={:.3}",
                label.class.name(),
                v(2.0),
                v(10.0),
                v(20.0),
                curve.samples.last().unwrap().value
            );
            labels.push(LabeledCurve { track_id: id, label: label.class, truth: Some(preset) });
        }
    }
    println!("\n{}", classification_report(&labels).to_text());
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
