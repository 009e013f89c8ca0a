use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spatcon::classify::{classification_report, classify_curve, ClassifyError, LabeledCurve, TrackClass};
use spatcon::covar::CovarError;
use spatcon::evalpipe::{class_envelope, evaluate_trace, trace_covariances, truncate_to_shortest, SimilarityCurve};
use spatcon::synth::{make_scenario_with, synthesize, ChannelTrace, Preset, SynthError};
use spatcon::traceio::{
    self, provenance_header, read_curves, read_trace, truth_key, write_covariances, write_curves, write_envelopes,
    write_report_rows, write_trace, CovarianceDump, ReportRow, TraceIoError,
};
use spatcon::{Error, RunConfig};

type AnyResult<T> = Result<T, Error>;

/// Spatial-consistency simulator and evaluator for massive-SIMO channels.
#[derive(Parser)]
#[command(name = "spatcon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reject unknown configuration keys instead of warning.
    #[arg(long)]
    strict: bool,
}

#[derive(clap::Args, Clone)]
struct ThresholdArgs {
    /// TOML file with classification thresholds (overrides `[classify]`).
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a channel trace for one preset and seed.
    Synth {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        lttl_count: Option<usize>,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        n_subcarriers: Option<usize>,
        /// Add white noise at this SNR (dB).
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate covariances of a trace and write its similarity curve.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        /// Average only the first TAU STTS of each LTTS.
        #[arg(long)]
        tau: Option<usize>,
        /// Defaults to the trace file stem.
        #[arg(long)]
        track_id: Option<String>,
        #[arg(long)]
        out_curve: PathBuf,
        #[arg(long)]
        out_cov: Option<PathBuf>,
    },
    /// Label curves and write a per-track report.
    Classify {
        #[arg(long, num_args = 1.., required = true)]
        curves: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        th: ThresholdArgs,
        #[arg(long)]
        out_report: PathBuf,
    },
    /// Classify curves and write per-class min/max envelopes.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        curves: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        th: ThresholdArgs,
        #[arg(long)]
        out_envelopes: PathBuf,
        #[arg(long)]
        out_summary: Option<PathBuf>,
    },
    /// Repeat the evaluation over several values of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..))]
        values: Vec<u32>,
        #[arg(long, requires = "seed", conflicts_with = "trace")]
        preset: Option<Preset>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, required_unless_present = "preset")]
        trace: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Tau,
    NSubcarriers,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::NSubcarriers => "n_subcarriers",
        }
    }
}

fn load(cfg: &ConfigArgs) -> AnyResult<RunConfig> {
    let Some(path) = &cfg.config else {
        return Ok(RunConfig::default());
    };
    let parsed = traceio::load_config(path, cfg.strict)?;
    for k in &parsed.ignored_keys {
        eprintln!("warning: ignoring unknown config key '{k}'");
    }
    Ok(parsed.config)
}

fn load_with_thresholds(cfg: &ConfigArgs, th: &ThresholdArgs) -> AnyResult<RunConfig> {
    let mut config = load(cfg)?;
    if let Some(path) = &th.thresholds {
        let text = std::fs::read_to_string(path).map_err(TraceIoError::from)?;
        let (thresholds, ignored) = traceio::parse_thresholds(&text, cfg.strict)?;
        for k in ignored {
            eprintln!("warning: ignoring unknown threshold key '{k}'");
        }
        config.classify = thresholds;
    }
    Ok(config)
}

fn print_effective(config: &RunConfig) {
    println!("# effective configuration (digest {})", config.digest());
    for line in config.to_toml().lines() {
        println!("#   {line}");
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "track".into(), |s| s.to_string_lossy().into_owned())
}

fn run_synth(config: &RunConfig, preset: Preset, seed: u64) -> AnyResult<ChannelTrace> {
    config.validate()?;
    let scenario = make_scenario_with(preset, seed, &config.scenario, &config.array, &config.pattern)?;
    let mut trace = synthesize(&scenario, &config.eval)?;
    trace.header.meta.insert("config.digest".into(), config.digest());
    Ok(trace)
}

fn curve_header(trace: &ChannelTrace, track_id: &str) -> BTreeMap<String, String> {
    let meta = &trace.header.meta;
    let digest = meta.get("config.digest").cloned().unwrap_or_else(|| "unknown".into());
    let mut h = provenance_header(&digest);
    if let Some(p) = meta.get("scenario.preset").filter(|p| p.parse::<Preset>().is_ok()) {
        h.insert(truth_key(track_id), p.clone());
    }
    h
}

/// Curves from several files plus the truth labels found in their headers.
fn gather_curves(paths: &[PathBuf]) -> AnyResult<Vec<(SimilarityCurve, Option<Preset>)>> {
    let mut out = Vec::new();
    for path in paths {
        let (header, curves) = read_curves(path)?;
        for c in curves {
            let truth = header
                .get(&truth_key(&c.track_id))
                .map(|s| s.parse::<Preset>())
                .transpose()
                .map_err(|e| TraceIoError::Csv(format!("{}: {e}", path.display())))?;
            out.push((c, truth));
        }
    }
    Ok(out)
}

fn classify_all(
    curves: &[(SimilarityCurve, Option<Preset>)],
    config: &RunConfig,
) -> AnyResult<(Vec<ReportRow>, Vec<LabeledCurve>)> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, truth) in curves {
        let label = classify_curve(c, &config.classify)?;
        rows.push(ReportRow {
            track_id: c.track_id.clone(),
            class: label.class,
            truth: *truth,
            rule_trace: label.trace_summary(),
        });
        labels.push(LabeledCurve { track_id: c.track_id.clone(), label: label.class, truth: *truth });
    }
    Ok((rows, labels))
}

fn run(cli: Cli) -> AnyResult<()> {
    match cli.command {
        Command::Synth { preset, seed, cfg, lttl_count, tau, n_subcarriers, snr_db, out } => {
            let mut config = load(&cfg)?;
            if let Some(v) = lttl_count {
                config.eval.lttl_count = v;
            }
            if let Some(v) = tau {
                config.eval.tau = v;
            }
            if let Some(v) = n_subcarriers {
                config.eval.n_subcarriers = v;
            }
            if snr_db.is_some() {
                config.scenario.snr_db = snr_db;
            }
            print_effective(&config);
            let trace = run_synth(&config, preset, seed)?;
            write_trace(&trace, &out)?;
            let h = &trace.header;
            println!(
                "wrote {} ({} STTS x {} subcarriers x {} antennas, scenario {})",
                out.display(),
                h.stts_count,
                h.eval.n_subcarriers,
                h.n_r,
                h.meta.get("scenario.hash").map_or("?", |s| &s[..12])
            );
        }
        Command::Eval { trace, tau, track_id, out_curve, out_cov } => {
            let t = read_trace(&trace)?;
            let id = track_id.unwrap_or_else(|| stem(&trace));
            println!(
                "# effective evaluation: tau = {} of {}, n_subcarriers = {}, lttl_count = {}",
                tau.unwrap_or(t.header.eval.tau),
                t.header.eval.tau,
                t.header.eval.n_subcarriers,
                t.header.eval.lttl_count
            );
            let covs = trace_covariances(&t, tau)?;
            let curve = spatcon::evalpipe::similarity_curve(&id, &covs, &t.header.anchor_distances)?;
            write_curves(create(&out_curve)?, std::slice::from_ref(&curve), &curve_header(&t, &id))?;
            if let Some(path) = out_cov {
                let mut meta = t.header.meta.clone();
                meta.insert("track_id".into(), id.clone());
                let dump = CovarianceDump { anchor_distances: t.header.anchor_distances.clone(), matrices: covs, meta };
                write_covariances(&dump, &path)?;
            }
            println!("wrote {} ({} LTTS, final similarity {:.4})", out_curve.display(), curve.len(), curve.samples.last().unwrap().value);
        }
        Command::Classify { curves, cfg, th, out_report } => {
            let config = load_with_thresholds(&cfg, &th)?;
            print_effective(&config);
            let all = gather_curves(&curves)?;
            let (rows, labels) = classify_all(&all, &config)?;
            write_report_rows(create(&out_report)?, &rows, &provenance_header(&config.digest()))?;
            for r in &rows {
                println!("{} -> {}  ({})", r.track_id, r.class, r.rule_trace);
            }
            print!("{}", classification_report(&labels).to_text());
        }
        Command::Report { curves, cfg, th, out_envelopes, out_summary } => {
            let config = load_with_thresholds(&cfg, &th)?;
            print_effective(&config);
            let all = gather_curves(&curves)?;
            let (_, labels) = classify_all(&all, &config)?;
            let mut envelopes = Vec::new();
            for class in TrackClass::ALL {
                let members: Vec<SimilarityCurve> = all
                    .iter()
                    .zip(&labels)
                    .filter(|(_, l)| l.label == class)
                    .map(|((c, _), _)| c.clone())
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let lens: Vec<usize> = members.iter().map(SimilarityCurve::len).collect();
                if lens.iter().any(|&l| l != lens[0]) {
                    eprintln!("warning: {class} curves have different lengths, truncating to the shortest");
                }
                envelopes.push(class_envelope(class.name(), &truncate_to_shortest(&members), None)?);
            }
            write_envelopes(create(&out_envelopes)?, &envelopes, &provenance_header(&config.digest()))?;
            let mut summary = format!("# tool = {}\n# config_digest = {}\n", spatcon::tool_version(), config.digest());
            summary.push_str(&classification_report(&labels).to_text());
            summary.push_str("\n[envelopes]\n");
            for e in &envelopes {
                summary.push_str(&format!(
                    "{} = {{ members = {}, rep1 = \"{}\", rep2 = \"{}\" }}\n",
                    e.label, e.member_count, e.representative_ids[0], e.representative_ids[1]
                ));
            }
            print!("{summary}");
            if let Some(path) = out_summary {
                std::fs::write(path, &summary).map_err(TraceIoError::from)?;
            }
        }
        Command::Sweep { param, values, preset, seed, trace, cfg, out } => {
            let mut config = load(&cfg)?;
            let values: Vec<usize> = values.into_iter().map(|v| v as usize).collect();
            let max = *values.iter().max().expect("clap requires at least one value");
            let base = match (&trace, preset) {
                (Some(path), _) => read_trace(path)?,
                (None, Some(p)) => {
                    match param {
                        SweepParam::Tau => config.eval.tau = max,
                        SweepParam::NSubcarriers => config.eval.n_subcarriers = max,
                    }
                    print_effective(&config);
                    run_synth(&config, p, seed.expect("clap enforces --seed"))?
                }
                (None, None) => unreachable!("clap enforces --preset or --trace"),
            };
            let mut curves = Vec::new();
            println!("{:<18} {:>8} {:>8} {:>8}  class", "setting", "d(2m)", "d(20m)", "final");
            for &v in &values {
                let id = format!("{}={v}", param.name());
                let curve = match param {
                    SweepParam::Tau => evaluate_trace(&base, &id, Some(v))?,
                    SweepParam::NSubcarriers => evaluate_trace(&base.center_subcarriers(v)?, &id, None)?,
                };
                let class = classify_curve(&curve, &config.classify).map_or_else(|e| e.to_string(), |l| l.class.to_string());
                let at = |d: f64| curve.value_at(d).map_or_else(|| "n/a".into(), |x| format!("{x:.4}"));
                println!(
                    "{id:<18} {:>8} {:>8} {:>8.4}  {class}",
                    at(2.0),
                    at(20.0),
                    curve.samples.last().unwrap().value
                );
                curves.push(curve);
            }
            let mut header = curve_header(&base, "");
            header.remove(&truth_key(""));
            header.insert("sweep.param".into(), param.name().into());
            write_curves(create(&out)?, &curves, &header)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<File, TraceIoError> {
    Ok(File::create(path)?)
}

/// Failure category and exit code. Usage errors exit with 2 from clap.
fn category(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Io(TraceIoError::ParseError { .. } | TraceIoError::UnknownKey(_) | TraceIoError::InvalidConfig(_))
        | Error::Classify(ClassifyError::InvalidThresholds(_))
        | Error::Synth(SynthError::Config(_))
        | Error::Covar(CovarError::InvalidConfig(_)) => ("config", 3),
        Error::Io(_) => ("input", 4),
        _ => ("computation", 5),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SPATCON_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (what, code) = category(&e);
            eprintln!("error ({what}): {e}");
            ExitCode::from(code)
        }
    }
}
