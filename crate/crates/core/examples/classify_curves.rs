//! Rule-based labelling with full rule traces, on synthetic curve shapes
//! and on one synthesised track.

use spatcon::classify::{classify_curve, ClassThresholds};
use spatcon::evalpipe::{evaluate_trace, CurveSample, SimilarityCurve};
use spatcon::synth::{make_scenario, synthesize, Preset};
use spatcon::EvalConfig;

fn shaped(id: &str, f: impl Fn(f64) -> f64) -> SimilarityCurve {
    SimilarityCurve {
        track_id: id.into(),
        samples: (0..120)
            .map(|k| {
                let d = 0.33 * k as f64;
                CurveSample { distance: d, value: if k == 0 { 1.0 } else { f(d) } }
            })
            .collect(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let th = ClassThresholds::default();
    let mut curves = vec![
        shaped("flat", |_| 0.92),
        shaped("slow_decay", |d| 1.0 - 0.012 * d),
        shaped("linear_to_0.1", |d| 1.0 - 0.9 * d / 39.27),
        shaped("early_drop", |d| if d < 1.0 { 0.7 } else { 0.15 }),
        shaped("rising", |d| 0.3 + 0.015 * d),
    ];
    let trace = synthesize(&make_scenario(Preset::FarAway, 2)?, &EvalConfig::default())?;
    curves.push(evaluate_trace(&trace, "far_away-2", None)?);

    for c in &curves {
        let label = classify_curve(c, &th)?;
        println!("{:<14} -> {}", c.track_id, label.class);
        for rule in &label.trace {
            for p in &rule.predicates {
                println!("    {:<15} {:<16} {:<5} {}", rule.rule.name(), p.name, p.passed, p.detail);
            }
        }
    }
    Ok(())
}
