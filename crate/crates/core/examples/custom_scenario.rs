//! Assembles a scenario by hand (no preset): a short track past a base
//! station with two permanent scatterers and one that appears midway.

use num_complex::Complex64;
use spatcon::array::{ArrayConfig, ElementPattern};
use spatcon::evalpipe::evaluate_trace;
use spatcon::geometry::{BsConfig, Position3D, Track};
use spatcon::synth::{synthesize, Scatterer, Scenario};
use spatcon::EvalConfig;

fn scatterer(x: f64, y: f64, birth: f64, death: f64) -> Scatterer {
    Scatterer {
        position: Position3D::new(x, y, 4.0),
        amplitude: Complex64::new(1.0, 0.0),
        birth_distance: birth,
        death_distance: death,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = EvalConfig { lttl_count: 30, ..Default::default() };
    let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.0)?;
    let track = Track::new(Position3D::new(15.0, -5.0, 1.5), [0.0, 1.0], 10.0, 0.5)?;
    let scatterers = vec![
        scatterer(25.0, 10.0, f64::NEG_INFINITY, f64::INFINITY),
        scatterer(10.0, -20.0, f64::NEG_INFINITY, f64::INFINITY),
        scatterer(5.0, 15.0, 5.0, f64::INFINITY),
    ];
    let array = ArrayConfig::for_carrier(cfg.carrier_frequency, 8, 2, 2);
    let scenario = Scenario::new(None, 0, bs, array, ElementPattern::default(), track, true, 10.0, scatterers)?;

    let trace = synthesize(&scenario, &cfg)?;
    let curve = evaluate_trace(&trace, "custom", None)?;
    println!("distance_m  similarity  active_scatterers");
    for s in curve.samples.iter().step_by(3) {
        println!("{:>10.2}  {:>10.4}  {}", s.distance, s.value, scenario.active_scatterers(s.distance).len());
    }
    Ok(())
}
