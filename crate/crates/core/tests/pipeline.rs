use num_complex::Complex64;
use spatcon::array::{ArrayConfig, ElementPattern};
use spatcon::classify::{classify_curve, ClassThresholds};
use spatcon::covar::{estimate, expected_covariance, oracle_covariance, segment, segment_with_tau, CovarError};
use spatcon::evalpipe::{class_envelope, evaluate_trace, extremal_representatives};
use spatcon::geometry::{BsConfig, Position3D, Track};
use spatcon::synth::{make_scenario_with, synthesize, Preset, Scatterer, Scenario, ScenarioParams};
use spatcon::traceio::{read_covariances, write_covariances, CovarianceDump};
use spatcon::EvalConfig;

fn array(cols: usize, rows: usize, pols: usize) -> ArrayConfig {
    ArrayConfig::for_carrier(EvalConfig::DEFAULT_CARRIER, cols, rows, pols)
}

fn preset(p: Preset, seed: u64, arr: &ArrayConfig) -> Scenario {
    make_scenario_with(p, seed, &ScenarioParams::default(), arr, &ElementPattern::default()).unwrap()
}

fn permanent(x: f64, y: f64, z: f64) -> Scatterer {
    Scatterer {
        position: Position3D::new(x, y, z),
        amplitude: Complex64::new(1.0, 0.0),
        birth_distance: f64::NEG_INFINITY,
        death_distance: f64::INFINITY,
    }
}

/// LoS plus one scatterer; the two paths carry equal power at the track
/// midpoint (0.5 m).
fn two_path(arr: ArrayConfig) -> Scenario {
    let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.3).unwrap();
    let track = Track::new(Position3D::new(12.0, -3.0, 1.5), [0.0, 1.0], 1.0, 0.5).unwrap();
    Scenario::new(None, 0, bs, arr, ElementPattern::default(), track, true, 1.0, vec![permanent(20.0, 14.0, 8.0)])
        .unwrap()
}

#[test]
fn default_segmentation() {
    let sc = preset(Preset::LosTangential, 1, &array(1, 1, 1));
    let cfg = EvalConfig::default();
    let trace = synthesize(&sc, &cfg).unwrap();
    let windows = segment(&trace).unwrap();
    assert_eq!(windows.len(), 120);
    for (k, w) in windows.iter().enumerate() {
        assert_eq!(w.index, k);
        assert_eq!(w.tau, 10);
        assert_eq!(w.data.len(), 10 * 100);
        assert!((w.anchor_distance - 0.33 * k as f64).abs() < 1e-9);
    }
    // windows tile the trace without overlap
    let base = trace.data.as_ptr() as usize;
    let starts: Vec<usize> = windows.iter().map(|w| (w.data.as_ptr() as usize - base) / 8).collect();
    assert!(starts.windows(2).all(|s| s[1] - s[0] == 10 * 100));

    let curve = evaluate_trace(&trace, "t", None).unwrap();
    assert_eq!(curve.len(), 120);
    assert!((curve.span() - 39.27).abs() < 1e-9);
    assert!(matches!(segment_with_tau(&trace, 11), Err(CovarError::MalformedTrace(_))));
}

#[test]
fn one_window_covers_whole_trace() {
    let sc = preset(Preset::FarAway, 2, &array(2, 1, 1));
    let tau = (0.66f64 / 1.08e-3).floor() as usize;
    let cfg = EvalConfig { tau, lttl_count: 1, n_subcarriers: 2, ..Default::default() };
    let trace = synthesize(&sc, &cfg).unwrap();
    let windows = segment(&trace).unwrap();
    assert_eq!(windows.len(), 1);
    assert_eq!(windows[0].data.len(), trace.data.len());
}

#[test]
fn malformed_header_is_reported() {
    let sc = preset(Preset::FarAway, 2, &array(1, 1, 1));
    let mut trace = synthesize(&sc, &EvalConfig { lttl_count: 3, n_subcarriers: 1, ..Default::default() }).unwrap();
    trace.header.anchor_distances.pop();
    assert!(matches!(segment(&trace), Err(CovarError::MalformedTrace(_))));
}

#[test]
fn oracle_for_single_los_path_is_deterministic() {
    let arr = array(4, 1, 2);
    let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.0).unwrap();
    let track = Track::new(Position3D::new(10.0, 2.0, 1.5), [1.0, 0.0], 4.0, 0.5).unwrap();
    let sc = Scenario::new(None, 0, bs, arr, ElementPattern::default(), track, true, 1.0, vec![]).unwrap();
    let path = sc.paths_at(1.0).unwrap()[0];
    let h: Vec<Complex64> = sc.manifold().unwrap().steering(path.azimuth, path.elevation).iter().map(|a| path.gain * a).collect();
    for draws in [1, 7, 100] {
        let r = oracle_covariance(&sc, 1.0, draws, 5).unwrap();
        for i in 0..h.len() {
            for j in 0..h.len() {
                let want = h[i] * h[j].conj();
                assert!((r.get(i, j) - want).norm() <= 1e-12 * want.norm().max(1e-20));
            }
        }
    }
}

#[test]
fn oracle_cross_terms_vanish_for_two_random_phase_paths() {
    let sc = two_path(array(4, 1, 1));
    let paths = sc.paths_at(0.5).unwrap();
    assert_eq!(paths.len(), 2);
    let (p0, p1) = (paths[0].gain.norm_sqr(), paths[1].gain.norm_sqr());
    assert!((p0 - p1).abs() < 1e-9 * p0, "paths should carry equal power: {p0} vs {p1}");

    // analytic limit, built from the paths directly
    let manifold = sc.manifold().unwrap();
    let n = manifold.len();
    let mut limit = vec![Complex64::new(0.0, 0.0); n * n];
    let mut power = 0.0;
    for p in &paths {
        let ga: Vec<Complex64> = manifold.steering(p.azimuth, p.elevation).iter().map(|a| p.gain * a).collect();
        power += ga.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for i in 0..n {
            for j in 0..n {
                limit[i * n + j] += ga[i] * ga[j].conj();
            }
        }
    }
    let mc = oracle_covariance(&sc, 0.5, 100_000, 9).unwrap();
    let norm: f64 = limit.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut off_err = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off_err += (mc.get(i, j) - limit[i * n + j]).norm_sqr();
            }
        }
    }
    assert!(off_err.sqrt() <= 0.01 * norm, "off-diagonal error {} vs norm {norm}", off_err.sqrt());
    assert!((mc.trace() - power).abs() <= 0.01 * power);
    let analytic = expected_covariance(&sc, 0.5).unwrap();
    assert!((analytic.trace() - power).abs() <= 1e-12 * power);
}

#[test]
fn curves_and_labels_ignore_amplitude_scaling() {
    let arr = array(8, 2, 2);
    let th = ClassThresholds::default();
    for p in Preset::ALL {
        let trace = synthesize(&preset(p, 3, &arr), &EvalConfig { n_subcarriers: 10, ..Default::default() }).unwrap();
        let base = evaluate_trace(&trace, "a", None).unwrap();
        for a in [1e-3f32, 37.0] {
            let scaled = evaluate_trace(&trace.scaled(a), "a", None).unwrap();
            for (x, y) in base.samples.iter().zip(&scaled.samples) {
                assert!((x.value - y.value).abs() < 1e-6, "{p}: {} vs {}", x.value, y.value);
            }
            assert_eq!(classify_curve(&base, &th).unwrap().class, classify_curve(&scaled, &th).unwrap().class);
        }
    }
}

#[test]
fn envelope_contains_its_representatives() {
    let arr = array(4, 2, 2);
    let cfg = EvalConfig { lttl_count: 40, n_subcarriers: 8, ..Default::default() };
    let curves: Vec<_> = (0..4)
        .map(|seed| evaluate_trace(&synthesize(&preset(Preset::LosTangential, seed, &arr), &cfg).unwrap(), &format!("s{seed}"), None).unwrap())
        .collect();
    let env = class_envelope("los_tangential", &curves, None).unwrap();
    assert_eq!(env.representatives, extremal_representatives(&curves));
    for k in 0..env.distances.len() {
        assert!(env.min[k] <= env.max[k]);
        for rep in &env.representative_values {
            assert!(env.min[k] <= rep[k] && rep[k] <= env.max[k]);
        }
    }
    let areas: Vec<f64> = curves.iter().map(|c| c.area()).collect();
    assert!(areas.iter().all(|&a| a <= areas[env.representatives[0]] && a >= areas[env.representatives[1]]));
}

#[test]
fn covariance_dump_round_trip() {
    let sc = preset(Preset::NlosUncorrelated, 4, &array(2, 2, 2));
    let trace = synthesize(&sc, &EvalConfig { lttl_count: 5, n_subcarriers: 3, ..Default::default() }).unwrap();
    let matrices: Vec<_> = segment(&trace).unwrap().iter().map(estimate).collect();
    let dump = CovarianceDump { anchor_distances: trace.header.anchor_distances.clone(), matrices, meta: trace.header.meta.clone() };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.scov");
    write_covariances(&dump, &path).unwrap();
    assert_eq!(read_covariances(&path).unwrap(), dump);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(read_covariances(&path).is_err());
}
