//! Rule-based labelling of similarity curves.
//!
//! Rules are tried in a fixed order and the first one whose predicates all
//! hold wins:
//!
//! 1. `uncorrelated`: drops below `uncorrelated_level` within
//!    `uncorrelated_within_m` and stays low (median of the rest below it).
//! 2. `far_away`: small range and no trend.
//! 3. `los_radial`: still at least `radial_level` at `radial_at_m`, decreasing,
//!    and ending above `tangential_end_max`.
//! 4. `los_tangential`: steep decrease ending at or below `tangential_end_max`.
//! 5. `other`.
//!
//! Curves spanning less than `radial_at_m` skip the rules and are labelled
//! `other` directly; curves shorter than `uncorrelated_within_m` are
//! rejected.
//!
//! Every predicate of every rule tried is recorded in the label's trace.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalpipe::SimilarityCurve;
use crate::synth::Preset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("curve spans {span:.3} m, shorter than the {needed:.3} m early-drop window")]
    CurveTooShort { span: f64, needed: f64 },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("unknown class '{0}'")]
    UnknownClass(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassThresholds {
    pub uncorrelated_level: f64,
    /// "First few LTTS", metres (about 6 LTTS at 0.33 m).
    pub uncorrelated_within_m: f64,
    pub radial_level: f64,
    pub radial_at_m: f64,
    pub tangential_end_max: f64,
    pub flat_range_max: f64,
    /// Per metre.
    pub trend_slope_min: f64,
}

impl Default for ClassThresholds {
    fn default() -> Self {
        Self {
            uncorrelated_level: 0.4,
            uncorrelated_within_m: 2.0,
            radial_level: 0.5,
            radial_at_m: 20.0,
            tangential_end_max: 0.2,
            flat_range_max: 0.25,
            trend_slope_min: 0.005,
        }
    }
}

impl ClassThresholds {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        for (name, v) in [
            ("uncorrelated_level", self.uncorrelated_level),
            ("radial_level", self.radial_level),
            ("tangential_end_max", self.tangential_end_max),
            ("flat_range_max", self.flat_range_max),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ClassifyError::InvalidThresholds(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        for (name, v) in [
            ("uncorrelated_within_m", self.uncorrelated_within_m),
            ("radial_at_m", self.radial_at_m),
            ("trend_slope_min", self.trend_slope_min),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ClassifyError::InvalidThresholds(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackClass {
    Uncorrelated,
    FarAway,
    LosRadial,
    LosTangential,
    Other,
}

impl TrackClass {
    pub const ALL: [TrackClass; 5] = [
        TrackClass::LosRadial,
        TrackClass::LosTangential,
        TrackClass::FarAway,
        TrackClass::Uncorrelated,
        TrackClass::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrackClass::LosRadial => "los_radial",
            TrackClass::LosTangential => "los_tangential",
            TrackClass::FarAway => "far_away",
            TrackClass::Uncorrelated => "uncorrelated",
            TrackClass::Other => "other",
        }
    }

    /// Class a preset is meant to produce.
    pub fn expected_for(preset: Preset) -> TrackClass {
        match preset {
            Preset::LosRadial => TrackClass::LosRadial,
            Preset::LosTangential => TrackClass::LosTangential,
            Preset::FarAway => TrackClass::FarAway,
            Preset::NlosUncorrelated => TrackClass::Uncorrelated,
        }
    }
}

impl fmt::Display for TrackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrackClass {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrackClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ClassifyError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome {
    pub rule: TrackClass,
    pub predicates: Vec<Predicate>,
}

impl RuleOutcome {
    pub fn fired(&self) -> bool {
        self.predicates.iter().all(|p| p.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassLabel {
    pub class: TrackClass,
    /// Rules tried, in order; the last one fired (or all failed for `Other`).
    pub trace: Vec<RuleOutcome>,
}

impl ClassLabel {
    /// Compact one-line form: `rule[pred=+|-,...];...`.
    pub fn trace_summary(&self) -> String {
        self.trace
            .iter()
            .map(|r| {
                let preds: Vec<String> = r
                    .predicates
                    .iter()
                    .map(|p| format!("{}{}", p.name, if p.passed { "+" } else { "-" }))
                    .collect();
                format!("{}[{}]", r.rule, preds.join(" "))
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Summary statistics the rules look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFeatures {
    pub slope: f64,
    pub final_value: f64,
    pub range_excl_first: f64,
    pub min_early: Option<f64>,
    pub median_late: Option<f64>,
    pub value_at_radial: Option<f64>,
}

/// Ordinary least-squares slope of value over distance.
pub fn least_squares_slope(curve: &SimilarityCurve) -> f64 {
    let n = curve.len() as f64;
    if curve.len() < 2 {
        return 0.0;
    }
    let mx = curve.distances().sum::<f64>() / n;
    let my = curve.values().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in &curve.samples {
        sxy += (s.distance - mx) * (s.value - my);
        sxx += (s.distance - mx) * (s.distance - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

pub fn curve_features(curve: &SimilarityCurve, th: &ClassThresholds) -> CurveFeatures {
    let rest = curve.samples.get(1..).unwrap_or(&[]);
    let (lo, hi) = rest
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.value), hi.max(s.value)));
    let early: Vec<f64> = rest.iter().filter(|s| s.distance <= th.uncorrelated_within_m).map(|s| s.value).collect();
    let late: Vec<f64> = rest.iter().filter(|s| s.distance > th.uncorrelated_within_m).map(|s| s.value).collect();
    CurveFeatures {
        slope: least_squares_slope(curve),
        final_value: curve.samples.last().map_or(f64::NAN, |s| s.value),
        range_excl_first: if rest.is_empty() { 0.0 } else { hi - lo },
        min_early: early.into_iter().reduce(f64::min),
        median_late: median(late),
        value_at_radial: curve.value_at(th.radial_at_m),
    }
}

fn pred(name: &'static str, passed: bool, detail: String) -> Predicate {
    Predicate { name, passed, detail }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Labels one curve. Deterministic.
pub fn classify_curve(curve: &SimilarityCurve, th: &ClassThresholds) -> Result<ClassLabel, ClassifyError> {
    th.validate()?;
    let span = curve.span();
    if span < th.uncorrelated_within_m {
        return Err(ClassifyError::CurveTooShort { span, needed: th.uncorrelated_within_m });
    }
    if span < th.radial_at_m {
        return Ok(ClassLabel {
            class: TrackClass::Other,
            trace: vec![RuleOutcome {
                rule: TrackClass::Other,
                predicates: vec![pred(
                    "spans_radial_distance",
                    false,
                    format!("span {span:.2} m < {} m", th.radial_at_m),
                )],
            }],
        });
    }
    let f = curve_features(curve, th);
    let rules = [
        RuleOutcome {
            rule: TrackClass::Uncorrelated,
            predicates: vec![
                pred(
                    "early_drop",
                    f.min_early.is_some_and(|v| v < th.uncorrelated_level),
                    format!("min within {} m = {} vs {}", th.uncorrelated_within_m, opt(f.min_early), th.uncorrelated_level),
                ),
                pred(
                    "stays_low",
                    f.median_late.is_some_and(|v| v < th.uncorrelated_level),
                    format!("median beyond = {} vs {}", opt(f.median_late), th.uncorrelated_level),
                ),
            ],
        },
        RuleOutcome {
            rule: TrackClass::FarAway,
            predicates: vec![
                pred(
                    "flat_range",
                    f.range_excl_first <= th.flat_range_max,
                    format!("range = {:.4} vs {}", f.range_excl_first, th.flat_range_max),
                ),
                pred(
                    "no_trend",
                    f.slope.abs() < th.trend_slope_min,
                    format!("|slope| = {:.5}/m vs {}", f.slope.abs(), th.trend_slope_min),
                ),
            ],
        },
        RuleOutcome {
            rule: TrackClass::LosRadial,
            predicates: vec![
                pred(
                    "high_at_distance",
                    f.value_at_radial.is_some_and(|v| v >= th.radial_level),
                    format!("value at {} m = {} vs {}", th.radial_at_m, opt(f.value_at_radial), th.radial_level),
                ),
                pred("decreasing", f.slope < 0.0, format!("slope = {:.5}/m", f.slope)),
                pred(
                    "ends_high",
                    f.final_value > th.tangential_end_max,
                    format!("final = {:.4} vs {}", f.final_value, th.tangential_end_max),
                ),
            ],
        },
        RuleOutcome {
            rule: TrackClass::LosTangential,
            predicates: vec![
                pred(
                    "steep_decrease",
                    f.slope < -th.trend_slope_min,
                    format!("slope = {:.5}/m vs -{}", f.slope, th.trend_slope_min),
                ),
                pred(
                    "ends_low",
                    f.final_value <= th.tangential_end_max,
                    format!("final = {:.4} vs {}", f.final_value, th.tangential_end_max),
                ),
            ],
        },
    ];

    let mut trace = Vec::new();
    for rule in rules {
        let fired = rule.fired();
        let class = rule.rule;
        trace.push(rule);
        if fired {
            return Ok(ClassLabel { class, trace });
        }
    }
    Ok(ClassLabel { class: TrackClass::Other, trace })
}

/// One classified curve with its optional generating preset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCurve {
    pub track_id: String,
    pub label: TrackClass,
    pub truth: Option<Preset>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationReport {
    pub counts: BTreeMap<TrackClass, usize>,
    /// `(preset, label) -> count` over curves with known presets.
    pub confusion: BTreeMap<(Preset, TrackClass), usize>,
    pub total: usize,
}

impl ClassificationReport {
    pub fn with_truth(&self) -> usize {
        self.confusion.values().sum()
    }

    pub fn correct(&self) -> usize {
        self.confusion
            .iter()
            .filter(|((p, c), _)| TrackClass::expected_for(*p) == *c)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn off_diagonal(&self) -> usize {
        self.with_truth() - self.correct()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.with_truth();
        (n > 0).then(|| self.correct() as f64 / n as f64)
    }

    pub fn count(&self, class: TrackClass) -> usize {
        self.counts.get(&class).copied().unwrap_or(0)
    }

    pub fn confusion_count(&self, preset: Preset, class: TrackClass) -> usize {
        self.confusion.get(&(preset, class)).copied().unwrap_or(0)
    }

    /// Plain-text rendering: counts, confusion table and accuracy.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[counts]");
        for c in TrackClass::ALL {
            let _ = writeln!(s, "{} = {}", c, self.count(c));
        }
        let _ = writeln!(s, "total = {}", self.total);
        if self.with_truth() > 0 {
            let _ = writeln!(s, "\n[confusion]");
            let header: Vec<&str> = TrackClass::ALL.iter().map(|c| c.name()).collect();
            let _ = writeln!(s, "# preset \\ label: {}", header.join(" "));
            for p in Preset::ALL {
                let row: Vec<String> =
                    TrackClass::ALL.iter().map(|&c| self.confusion_count(p, c).to_string()).collect();
                let _ = writeln!(s, "{} = [{}]", p, row.join(", "));
            }
            let _ = writeln!(s, "\n[accuracy]");
            let _ = writeln!(s, "correct = {}", self.correct());
            let _ = writeln!(s, "with_truth = {}", self.with_truth());
            let _ = writeln!(s, "accuracy = {:.4}", self.accuracy().unwrap_or(0.0));
        }
        s
    }
}

pub fn classification_report(labels: &[LabeledCurve]) -> ClassificationReport {
    let mut r = ClassificationReport { total: labels.len(), ..Default::default() };
    for l in labels {
        *r.counts.entry(l.label).or_default() += 1;
        if let Some(p) = l.truth {
            *r.confusion.entry((p, l.label)).or_default() += 1;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalpipe::CurveSample;

    fn curve(f: impl Fn(f64) -> f64) -> SimilarityCurve {
        SimilarityCurve {
            track_id: "t".into(),
            samples: (0..120)
                .map(|k| {
                    let d = 0.33 * k as f64;
                    CurveSample { distance: d, value: if k == 0 { 1.0 } else { f(d) } }
                })
                .collect(),
        }
    }

    fn label(c: &SimilarityCurve) -> TrackClass {
        classify_curve(c, &ClassThresholds::default()).unwrap().class
    }

    #[test]
    fn flat_curve_is_far_away() {
        assert_eq!(label(&curve(|_| 0.9)), TrackClass::FarAway);
    }

    #[test]
    fn linear_decay_is_tangential() {
        let span = 0.33 * 119.0;
        assert_eq!(label(&curve(|d| 1.0 - 0.9 * d / span)), TrackClass::LosTangential);
    }

    #[test]
    fn slow_decay_is_radial() {
        assert_eq!(label(&curve(|d| 1.0 - 0.012 * d)), TrackClass::LosRadial);
    }

    #[test]
    fn fast_drop_is_uncorrelated() {
        assert_eq!(label(&curve(|d| if d < 1.0 { 0.6 } else { 0.2 })), TrackClass::Uncorrelated);
    }

    #[test]
    fn rising_curve_is_other() {
        assert_eq!(label(&curve(|d| 0.3 + 0.015 * d)), TrackClass::Other);
    }

    #[test]
    fn short_curve_rejected() {
        let mut c = curve(|_| 0.9);
        c.samples.truncate(3);
        assert!(matches!(
            classify_curve(&c, &ClassThresholds::default()),
            Err(ClassifyError::CurveTooShort { .. })
        ));
    }

    #[test]
    fn curve_shorter_than_radial_distance_is_other() {
        let mut c = curve(|d| if d < 1.0 { 0.6 } else { 0.1 });
        c.samples.truncate(40); // 12.9 m
        let l = classify_curve(&c, &ClassThresholds::default()).unwrap();
        assert_eq!(l.class, TrackClass::Other);
        assert_eq!(l.trace.len(), 1);
        assert_eq!(l.trace[0].predicates[0].name, "spans_radial_distance");
        let th = ClassThresholds { radial_at_m: 10.0, ..Default::default() };
        assert_eq!(classify_curve(&c, &th).unwrap().class, TrackClass::Uncorrelated);
    }

    #[test]
    fn trace_lists_every_tried_rule() {
        let l = classify_curve(&curve(|d| 1.0 - 0.012 * d), &ClassThresholds::default()).unwrap();
        let rules: Vec<TrackClass> = l.trace.iter().map(|r| r.rule).collect();
        assert_eq!(rules, vec![TrackClass::Uncorrelated, TrackClass::FarAway, TrackClass::LosRadial]);
        assert!(l.trace.last().unwrap().fired());
        assert!(l.trace[..2].iter().all(|r| !r.fired()));
        assert_eq!(l.trace.iter().map(|r| r.predicates.len()).sum::<usize>(), 2 + 2 + 3);
        assert!(l.trace_summary().starts_with("uncorrelated[early_drop-"));
    }

    #[test]
    fn raising_uncorrelated_level_only_moves_toward_uncorrelated() {
        let corpus: Vec<SimilarityCurve> = vec![
            curve(|_| 0.9),
            curve(|d| 1.0 - 0.012 * d),
            curve(|d| (1.0 - 0.03 * d).max(0.05)),
            curve(|d| 0.45 + 0.05 * (d * 2.0).sin()),
            curve(|d| if d < 1.0 { 0.6 } else { 0.35 }),
            curve(|d| 0.3 + 0.015 * d),
            curve(|d| 0.5 * (-d / 3.0).exp() + 0.1),
        ];
        let levels = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        for c in &corpus {
            let mut was_uncorrelated = false;
            let mut first: Option<TrackClass> = None;
            for &lvl in &levels {
                let th = ClassThresholds { uncorrelated_level: lvl, ..Default::default() };
                let l = classify_curve(c, &th).unwrap().class;
                if was_uncorrelated {
                    assert_eq!(l, TrackClass::Uncorrelated);
                }
                if l == TrackClass::Uncorrelated {
                    was_uncorrelated = true;
                } else if let Some(f) = first {
                    assert_eq!(l, f);
                }
                first.get_or_insert(l);
            }
        }
    }

    #[test]
    fn report_bookkeeping() {
        let empty = classification_report(&[]);
        assert_eq!(empty.total, 0);
        assert!(TrackClass::ALL.iter().all(|&c| empty.count(c) == 0));
        assert_eq!(empty.accuracy(), None);

        let labels: Vec<LabeledCurve> = Preset::ALL
            .iter()
            .flat_map(|&p| {
                (0..3).map(move |i| LabeledCurve {
                    track_id: format!("{p}-{i}"),
                    label: TrackClass::expected_for(p),
                    truth: Some(p),
                })
            })
            .collect();
        let r = classification_report(&labels);
        assert_eq!(r.counts.values().sum::<usize>(), 12);
        assert_eq!(r.accuracy(), Some(1.0));
        for p in Preset::ALL {
            for c in TrackClass::ALL {
                let expected = if c == TrackClass::expected_for(p) { 3 } else { 0 };
                assert_eq!(r.confusion_count(p, c), expected);
            }
        }
        assert!(r.to_text().contains("accuracy = 1.0000"));
    }

    #[test]
    fn class_names_round_trip() {
        for c in TrackClass::ALL {
            assert_eq!(c.name().parse::<TrackClass>().unwrap(), c);
        }
    }
}
