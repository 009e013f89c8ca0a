//! File formats: TOML run configuration, binary trace and covariance dump.

use spatcon::evalpipe::trace_covariances;
use spatcon::synth::{make_scenario_with, synthesize, Preset};
use spatcon::traceio::{parse_config, read_covariances, read_trace, write_covariances, write_trace, CovarianceDump};

const CONFIG: &str = r#"
[scenario]
k_factor_db = 6.0
snr_db = 25.0

[array]
n_columns = 8
n_rows = 2

[eval]
lttl_count = 8
n_subcarriers = 16
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parsed = parse_config(CONFIG, true)?;
    let cfg = parsed.config;
    println!("config digest {}", cfg.digest());
    println!("array: {} elements, radius {:.4} m", cfg.array.n_elements(), cfg.array.radius);

    let scenario = make_scenario_with(Preset::LosRadial, 9, &cfg.scenario, &cfg.array, &cfg.pattern)?;
    let trace = synthesize(&scenario, &cfg.eval)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("t.sctr");
    write_trace(&trace, &path)?;
    let back = read_trace(&path)?;
    println!("trace {} bytes, round trip identical: {}", std::fs::metadata(&path)?.len(), back == trace);

    let covs = trace_covariances(&back, None)?;
    let dump = CovarianceDump { anchor_distances: back.header.anchor_distances.clone(), matrices: covs, meta: back.header.meta.clone() };
    let cpath = dir.path().join("t.scov");
    write_covariances(&dump, &cpath)?;
    println!("covariance dump round trip identical: {}", read_covariances(&cpath)? == dump);

    let mut bytes = std::fs::read(&path)?;
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&path, &bytes)?;
    println!("truncated file: {}", read_trace(&path).unwrap_err());
    Ok(())
}
