//! Windowed covariance estimation on a small array: compares the sample
//! estimate with the analytic expectation and shows how the error shrinks
//! as more subcarriers are averaged.

use spatcon::array::ArrayConfig;
use spatcon::covar::{estimate, expected_covariance, segment};
use spatcon::metric::cmd_similarity;
use spatcon::synth::{make_scenario_with, synthesize, Preset, ScenarioParams};
use spatcon::{ElementPattern, EvalConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let array = ArrayConfig::for_carrier(EvalConfig::DEFAULT_CARRIER, 4, 2, 2);
    let scenario =
        make_scenario_with(Preset::NlosUncorrelated, 5, &ScenarioParams::default(), &array, &ElementPattern::default())?;
    let expected = expected_covariance(&scenario, 0.0)?;
    println!("n_r = {}, expected trace {:.4e}", expected.dim(), expected.trace());

    println!("{:>6} {:>12} {:>10} {:>6}", "N", "rel_error", "cmd", "rank");
    for n in [1, 4, 16, 64, 256] {
        let cfg = EvalConfig { n_subcarriers: n, lttl_count: 2, ..Default::default() };
        let trace = synthesize(&scenario, &cfg)?;
        let windows = segment(&trace)?;
        let r = estimate(&windows[0]);
        let diff: f64 = r
            .as_slice()
            .iter()
            .zip(expected.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        println!(
            "{n:>6} {:>12.4} {:>10.4} {:>6}",
            diff / expected.frobenius_norm(),
            cmd_similarity(&r, &expected)?.value(),
            r.numerical_rank(1e-9)
        );
    }
    let eig = expected.eigenvalues();
    let top: Vec<String> = eig.iter().rev().take(3).map(|e| format!("{e:.3e}")).collect();
    println!("largest expected eigenvalues: {}", top.join(" "));
    Ok(())
}
