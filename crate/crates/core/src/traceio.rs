//! On-disk formats: binary traces and covariance dumps, TOML run
//! configuration, and the CSV tables consumed by plotting scripts.
//!
//! # Binary container
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      4 bytes   "SCTR" (trace) or "SCOV" (covariance dump)
//! version    u32       1
//! body       format specific, see `write_trace` / `write_covariances`
//! ```
//!
//! String maps are stored as `u32 count` followed by `count` pairs of
//! length-prefixed (`u32`) UTF-8 strings.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::array::{ArrayConfig, ElementPattern};
use crate::classify::{ClassThresholds, TrackClass};
use crate::covar::{CovarianceMatrix, EvalConfig};
use crate::evalpipe::{ClassEnvelope, CurveSample, SimilarityCurve};
use crate::synth::{ChannelTrace, Preset, ScenarioParams, TraceHeader};

pub const TRACE_MAGIC: [u8; 4] = *b"SCTR";
pub const COV_MAGIC: [u8; 4] = *b"SCOV";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("BadMagic: found {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("UnsupportedVersion: format version {0}")]
    UnsupportedVersion(u32),
    #[error("TruncatedPayload: {0}")]
    TruncatedPayload(String),
    #[error("HeaderInconsistent: {0}")]
    HeaderInconsistent(String),
    #[error("ParseError at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("UnknownKey: {}", .0.join(", "))]
    UnknownKey(Vec<String>),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("CsvError: {0}")]
    Csv(String),
}

impl From<csv::Error> for TraceIoError {
    fn from(e: csv::Error) -> Self {
        TraceIoError::Csv(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// binary primitives

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], TraceIoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            TraceIoError::TruncatedPayload(format!(
                "need {n} bytes for {what} at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, TraceIoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, TraceIoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, TraceIoError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn usize32(&mut self, what: &str) -> Result<usize, TraceIoError> {
        self.u32(what).map(|v| v as usize)
    }

    fn string(&mut self, what: &str) -> Result<String, TraceIoError> {
        let n = self.usize32(what)?;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| TraceIoError::HeaderInconsistent(format!("{what} is not UTF-8")))
    }

    fn meta(&mut self) -> Result<BTreeMap<String, String>, TraceIoError> {
        let n = self.usize32("metadata count")?;
        let mut m = BTreeMap::new();
        for _ in 0..n {
            let k = self.string("metadata key")?;
            let v = self.string("metadata value")?;
            m.insert(k, v);
        }
        Ok(m)
    }

    fn preamble(&mut self, expected: [u8; 4]) -> Result<(), TraceIoError> {
        let found: [u8; 4] = self
            .take(4, "magic")
            .map_err(|_| TraceIoError::BadMagic { found: [0; 4], expected })?
            .try_into()
            .unwrap();
        if found != expected {
            return Err(TraceIoError::BadMagic { found, expected });
        }
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(TraceIoError::UnsupportedVersion(v));
        }
        Ok(())
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("value fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_meta(out: &mut Vec<u8>, meta: &BTreeMap<String, String>) {
    put_u32(out, meta.len());
    for (k, v) in meta {
        put_str(out, k);
        put_str(out, v);
    }
}

// ---------------------------------------------------------------------------
// traces

/// Serialises a trace:
///
/// ```text
/// u32 n_r, u32 n_subcarriers, u32 tau, u32 lttl_count, u64 stts_count
/// f64 stts_interval, f64 lttl_interval, f64 carrier_frequency, f64 subcarrier_spacing
/// u32 anchor count, f64 anchors...
/// metadata map
/// u64 coefficient count, then (f32 re, f32 im) per coefficient, t-major
/// ```
pub fn write_trace_to<W: Write>(trace: &ChannelTrace, w: W) -> Result<(), TraceIoError> {
    let h = &trace.header;
    let mut head = Vec::with_capacity(256);
    head.extend_from_slice(&TRACE_MAGIC);
    head.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut head, h.n_r);
    put_u32(&mut head, h.eval.n_subcarriers);
    put_u32(&mut head, h.eval.tau);
    put_u32(&mut head, h.eval.lttl_count);
    head.extend_from_slice(&(h.stts_count as u64).to_le_bytes());
    for v in [h.eval.stts_interval, h.eval.lttl_interval, h.eval.carrier_frequency, h.eval.subcarrier_spacing] {
        head.extend_from_slice(&v.to_le_bytes());
    }
    put_u32(&mut head, h.anchor_distances.len());
    for a in &h.anchor_distances {
        head.extend_from_slice(&a.to_le_bytes());
    }
    put_meta(&mut head, &h.meta);
    head.extend_from_slice(&(trace.data.len() as u64).to_le_bytes());

    let mut w = BufWriter::new(w);
    w.write_all(&head)?;
    let mut chunk = Vec::with_capacity(8 * 4096);
    for block in trace.data.chunks(4096) {
        chunk.clear();
        for z in block {
            chunk.extend_from_slice(&z.re.to_le_bytes());
            chunk.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&chunk)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &ChannelTrace, path: &Path) -> Result<(), TraceIoError> {
    write_trace_to(trace, fs::File::create(path)?)
}

pub fn decode_trace(buf: &[u8]) -> Result<ChannelTrace, TraceIoError> {
    let mut r = Reader { buf, pos: 0 };
    r.preamble(TRACE_MAGIC)?;
    let n_r = r.usize32("n_r")?;
    let n_subcarriers = r.usize32("n_subcarriers")?;
    let tau = r.usize32("tau")?;
    let lttl_count = r.usize32("lttl_count")?;
    let stts_count = usize::try_from(r.u64("stts_count")?)
        .map_err(|_| TraceIoError::HeaderInconsistent("stts_count overflows".into()))?;
    let eval = EvalConfig {
        tau,
        n_subcarriers,
        stts_interval: r.f64("stts_interval")?,
        lttl_interval: r.f64("lttl_interval")?,
        lttl_count,
        carrier_frequency: r.f64("carrier_frequency")?,
        subcarrier_spacing: r.f64("subcarrier_spacing")?,
    };
    eval.validate().map_err(|e| TraceIoError::HeaderInconsistent(e.to_string()))?;
    let n_anchor = r.usize32("anchor count")?;
    if n_anchor != lttl_count {
        return Err(TraceIoError::HeaderInconsistent(format!(
            "{n_anchor} anchors for {lttl_count} LTTS"
        )));
    }
    let anchor_distances = (0..n_anchor).map(|_| r.f64("anchor")).collect::<Result<Vec<_>, _>>()?;
    let meta = r.meta()?;
    let count = r.u64("coefficient count")?;
    let expected = (stts_count as u128) * (n_subcarriers as u128) * (n_r as u128);
    if count as u128 != expected {
        return Err(TraceIoError::HeaderInconsistent(format!(
            "{count} coefficients, dimensions imply {expected}"
        )));
    }
    if n_r == 0 || stts_count < lttl_count * tau {
        return Err(TraceIoError::HeaderInconsistent(format!(
            "n_r {n_r}, stts_count {stts_count} < lttl_count x tau = {}",
            lttl_count * tau
        )));
    }
    let count = count as usize;
    if r.remaining() != count * 8 {
        return Err(TraceIoError::TruncatedPayload(format!(
            "payload holds {} bytes, header announces {}",
            r.remaining(),
            count * 8
        )));
    }
    let payload = r.take(count * 8, "payload")?;
    let data: Vec<Complex32> = payload
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect();
    let header = TraceHeader { n_r, stts_count, eval, anchor_distances, meta };
    ChannelTrace::new(header, data).map_err(|e| TraceIoError::HeaderInconsistent(e.to_string()))
}

pub fn read_trace(path: &Path) -> Result<ChannelTrace, TraceIoError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_trace(&buf)
}

// ---------------------------------------------------------------------------
// covariance dumps

/// Covariances of one track with their anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceDump {
    pub anchor_distances: Vec<f64>,
    pub matrices: Vec<CovarianceMatrix>,
    pub meta: BTreeMap<String, String>,
}

/// ```text
/// u32 n, u32 count, metadata map
/// per matrix: f64 anchor, u64 sample_count, n*n (f64 re, f64 im) row-major
/// ```
pub fn write_covariances(dump: &CovarianceDump, path: &Path) -> Result<(), TraceIoError> {
    if dump.anchor_distances.len() != dump.matrices.len() {
        return Err(TraceIoError::HeaderInconsistent("anchor and matrix counts differ".into()));
    }
    let n = dump.matrices.first().map_or(0, |m| m.dim());
    if dump.matrices.iter().any(|m| m.dim() != n) {
        return Err(TraceIoError::HeaderInconsistent("matrices of different sizes".into()));
    }
    let mut out = Vec::with_capacity(64 + dump.matrices.len() * (16 + 16 * n * n));
    out.extend_from_slice(&COV_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, n);
    put_u32(&mut out, dump.matrices.len());
    put_meta(&mut out, &dump.meta);
    for (a, m) in dump.anchor_distances.iter().zip(&dump.matrices) {
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&(m.sample_count() as u64).to_le_bytes());
        for z in m.as_slice() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_covariances(path: &Path) -> Result<CovarianceDump, TraceIoError> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    r.preamble(COV_MAGIC)?;
    let n = r.usize32("n")?;
    let count = r.usize32("count")?;
    let meta = r.meta()?;
    let need = count as u128 * (16 + 16 * (n as u128) * (n as u128));
    if r.remaining() as u128 != need {
        return Err(TraceIoError::TruncatedPayload(format!(
            "payload holds {} bytes, header announces {need}",
            r.remaining()
        )));
    }
    let mut anchor_distances = Vec::with_capacity(count);
    let mut matrices = Vec::with_capacity(count);
    for _ in 0..count {
        anchor_distances.push(r.f64("anchor")?);
        let samples = r.u64("sample count")? as usize;
        let raw = r.take(16 * n * n, "matrix")?;
        let data = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let m = CovarianceMatrix::from_row_major(n, data, samples)
            .map_err(|e| TraceIoError::HeaderInconsistent(e.to_string()))?;
        matrices.push(m);
    }
    Ok(CovarianceDump { anchor_distances, matrices, meta })
}

// ---------------------------------------------------------------------------
// run configuration

/// Everything a run depends on besides preset and seed.
///
/// TOML sections: `[scenario]`, `[array]`, `[pattern]`, `[eval]`,
/// `[classify]`. Every key is optional. Unless `array.carrier_frequency`
/// is given, the array is laid out for `eval.carrier_frequency` and its
/// default radius and row spacing follow that carrier.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunConfig {
    pub scenario: ScenarioParams,
    pub array: ArrayConfig,
    pub pattern: ElementPattern,
    pub eval: EvalConfig,
    pub classify: ClassThresholds,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct RawArray {
    n_columns: Option<usize>,
    n_rows: Option<usize>,
    n_polarizations: Option<usize>,
    radius: Option<f64>,
    row_spacing: Option<f64>,
    carrier_frequency: Option<f64>,
    cross_pol_leakage_db: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct RawRunConfig {
    scenario: ScenarioParams,
    array: RawArray,
    pattern: ElementPattern,
    eval: EvalConfig,
    classify: ClassThresholds,
}

/// Result of parsing a config in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    /// Keys that were present but not recognised.
    pub ignored_keys: Vec<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses a run config. `strict` turns unrecognised keys into
/// [`TraceIoError::UnknownKey`].
pub fn parse_config(text: &str, strict: bool) -> Result<ParsedConfig, TraceIoError> {
    let de = toml::Deserializer::new(text);
    let mut ignored = Vec::new();
    let raw: RawRunConfig = serde_ignored::deserialize(de, |path| ignored.push(path.to_string())).map_err(
        |e: toml::de::Error| TraceIoError::ParseError {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        },
    )?;
    if strict && !ignored.is_empty() {
        return Err(TraceIoError::UnknownKey(ignored));
    }
    let a = raw.array;
    let carrier = a.carrier_frequency.unwrap_or(raw.eval.carrier_frequency);
    let mut array = ArrayConfig::for_carrier(
        carrier,
        a.n_columns.unwrap_or(16),
        a.n_rows.unwrap_or(4),
        a.n_polarizations.unwrap_or(2),
    );
    if let Some(v) = a.radius {
        array.radius = v;
    }
    if let Some(v) = a.row_spacing {
        array.row_spacing = v;
    }
    if let Some(v) = a.cross_pol_leakage_db {
        array.cross_pol_leakage_db = v;
    }
    let config = RunConfig {
        scenario: raw.scenario,
        array,
        pattern: raw.pattern,
        eval: raw.eval,
        classify: raw.classify,
    };
    config.validate()?;
    Ok(ParsedConfig { config, ignored_keys: ignored })
}

/// Parses a standalone thresholds file: the keys of the `[classify]`
/// section, either at top level or inside a `[classify]` table.
pub fn parse_thresholds(text: &str, strict: bool) -> Result<(ClassThresholds, Vec<String>), TraceIoError> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| TraceIoError::ParseError {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let table = match value.get("classify") {
        Some(toml::Value::Table(t)) if value.len() == 1 => t.clone(),
        _ => value,
    };
    let mut ignored = Vec::new();
    let th: ClassThresholds = serde_ignored::deserialize(toml::Value::Table(table), |p| ignored.push(p.to_string()))
        .map_err(|e: toml::de::Error| TraceIoError::ParseError { line: 0, message: e.message().to_string() })?;
    if strict && !ignored.is_empty() {
        return Err(TraceIoError::UnknownKey(ignored));
    }
    th.validate().map_err(|e| TraceIoError::InvalidConfig(e.to_string()))?;
    Ok((th, ignored))
}

pub fn load_config(path: &Path, strict: bool) -> Result<ParsedConfig, TraceIoError> {
    parse_config(&fs::read_to_string(path)?, strict)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TraceIoError> {
        let bad = |e: String| TraceIoError::InvalidConfig(e);
        self.scenario.validate().map_err(|e| bad(e.to_string()))?;
        self.array.validate().map_err(|e| bad(e.to_string()))?;
        self.pattern.validate().map_err(|e| bad(e.to_string()))?;
        self.eval.validate().map_err(|e| bad(e.to_string()))?;
        self.classify.validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

// ---------------------------------------------------------------------------
// CSV tables

/// `# key = value` lines at the top of a CSV file.
pub type CommentHeader = BTreeMap<String, String>;

/// Standard provenance header: tool version and config digest.
pub fn provenance_header(config_digest: &str) -> CommentHeader {
    let mut h = CommentHeader::new();
    h.insert("tool".into(), crate::tool_version());
    h.insert("config_digest".into(), config_digest.to_string());
    h
}

fn write_comments<W: Write>(w: &mut W, header: &CommentHeader) -> io::Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

fn split_comments(text: &str) -> (CommentHeader, String) {
    let mut header = CommentHeader::new();
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (header, body)
}

/// Key under which the generating preset of a track is recorded.
pub fn truth_key(track_id: &str) -> String {
    format!("truth.{track_id}")
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    track_id: String,
    lttl_index: usize,
    distance_m: f64,
    cmd_similarity: f64,
}

/// Columns `track_id,lttl_index,distance_m,cmd_similarity`, one row per
/// LTTS, curves one after another.
pub fn write_curves<W: Write>(mut w: W, curves: &[SimilarityCurve], header: &CommentHeader) -> Result<(), TraceIoError> {
    write_comments(&mut w, header)?;
    let mut cw = csv::Writer::from_writer(w);
    for c in curves {
        for (k, s) in c.samples.iter().enumerate() {
            cw.serialize(CurveRow {
                track_id: c.track_id.clone(),
                lttl_index: k,
                distance_m: s.distance,
                cmd_similarity: s.value,
            })?;
        }
    }
    cw.flush()?;
    Ok(())
}

pub fn read_curves_str(text: &str) -> Result<(CommentHeader, Vec<SimilarityCurve>), TraceIoError> {
    let (header, body) = split_comments(text);
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let mut curves: Vec<SimilarityCurve> = Vec::new();
    for row in rd.deserialize() {
        let row: CurveRow = row?;
        let start_new = curves.last().map_or(true, |c| c.track_id != row.track_id);
        if start_new {
            if curves.iter().any(|c| c.track_id == row.track_id) {
                return Err(TraceIoError::Csv(format!("rows of track '{}' are not contiguous", row.track_id)));
            }
            curves.push(SimilarityCurve { track_id: row.track_id.clone(), samples: Vec::new() });
        }
        let c = curves.last_mut().unwrap();
        if row.lttl_index != c.samples.len() {
            return Err(TraceIoError::Csv(format!(
                "track '{}': expected lttl_index {}, found {}",
                row.track_id,
                c.samples.len(),
                row.lttl_index
            )));
        }
        c.samples.push(CurveSample { distance: row.distance_m, value: row.cmd_similarity });
    }
    Ok((header, curves))
}

pub fn read_curves(path: &Path) -> Result<(CommentHeader, Vec<SimilarityCurve>), TraceIoError> {
    read_curves_str(&fs::read_to_string(path)?)
}

/// Columns `class,lttl_index,distance_m,min,max,rep1,rep2`.
pub fn write_envelopes<W: Write>(mut w: W, envelopes: &[ClassEnvelope], header: &CommentHeader) -> Result<(), TraceIoError> {
    let mut header = header.clone();
    for e in envelopes {
        header.insert(format!("envelope.{}.members", e.label), e.member_count.to_string());
        header.insert(format!("envelope.{}.rep1", e.label), e.representative_ids[0].clone());
        header.insert(format!("envelope.{}.rep2", e.label), e.representative_ids[1].clone());
    }
    write_comments(&mut w, &header)?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["class", "lttl_index", "distance_m", "min", "max", "rep1", "rep2"])?;
    for e in envelopes {
        for k in 0..e.distances.len() {
            cw.write_record([
                e.label.clone(),
                k.to_string(),
                e.distances[k].to_string(),
                e.min[k].to_string(),
                e.max[k].to_string(),
                e.representative_values[0][k].to_string(),
                e.representative_values[1][k].to_string(),
            ])?;
        }
    }
    cw.flush()?;
    Ok(())
}

/// One classified track in the report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub track_id: String,
    pub class: TrackClass,
    pub truth: Option<Preset>,
    pub rule_trace: String,
}

/// Columns `track_id,class,truth,rule_trace`; `truth` is empty when unknown.
pub fn write_report_rows<W: Write>(mut w: W, rows: &[ReportRow], header: &CommentHeader) -> Result<(), TraceIoError> {
    write_comments(&mut w, header)?;
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}

pub fn read_report_rows(path: &Path) -> Result<(CommentHeader, Vec<ReportRow>), TraceIoError> {
    let (header, body) = split_comments(&fs::read_to_string(path)?);
    let rows = csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()?;
    Ok((header, rows))
}
