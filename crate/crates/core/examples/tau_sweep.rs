//! How the number of averaged STTS per window changes the curve of one
//! track. The trace is synthesised once with the largest tau; smaller
//! values use the first STTS of each window.

use spatcon::evalpipe::evaluate_trace;
use spatcon::synth::{make_scenario, synthesize, Preset};
use spatcon::EvalConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taus = [1usize, 2, 5, 10];
    let cfg = EvalConfig { tau: 10, lttl_count: 61, ..Default::default() };
    for preset in [Preset::LosTangential, Preset::NlosUncorrelated] {
        let trace = synthesize(&make_scenario(preset, 4)?, &cfg)?;
        println!("{preset}");
        for tau in taus {
            let c = evaluate_trace(&trace, "sweep", Some(tau))?;
            let at = |d: f64| c.value_at(d).unwrap_or(f64::NAN);
            println!("  tau {tau:>2}: d(1 m) {:.4}  d(5 m) {:.4}  d(19.8 m) {:.4}", at(1.0), at(5.0), at(19.8));
        }
    }
    Ok(())
}
