//! Similarity-over-distance curves anchored at the first LTTS, and per-class
//! min/max envelopes over several curves.

use rayon::prelude::*;
use thiserror::Error;

use crate::covar::{estimate, segment_with_tau, CovarError, CovarianceMatrix};
use crate::metric::{cmd_similarity, MetricError, Similarity};
use crate::synth::ChannelTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least two covariance matrices, got {0}")]
    TooFewWindows(usize),
    #[error("{covariances} covariances but {anchors} anchor distances")]
    Misaligned { covariances: usize, anchors: usize },
    #[error("anchor distances must be strictly increasing (LTTS {0})")]
    NonIncreasing(usize),
    #[error("LTTS {lttl_index}: {source}")]
    Metric {
        lttl_index: usize,
        #[source]
        source: MetricError,
    },
    #[error("curves have different sample counts ({0} vs {1})")]
    RaggedCurves(usize, usize),
    #[error("envelope needs at least one curve")]
    NoCurves,
    #[error("representative index {0} out of range")]
    BadRepresentative(usize),
    #[error(transparent)]
    Covar(#[from] CovarError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    /// Metres from the reference (first) LTTS.
    pub distance: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCurve {
    pub track_id: String,
    pub samples: Vec<CurveSample>,
}

impl SimilarityCurve {
    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.distance)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.value)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distance of the last sample.
    pub fn span(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.distance)
    }

    /// Linear interpolation at `distance`; `None` outside the curve.
    pub fn value_at(&self, distance: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || distance < s[0].distance || distance > self.span() {
            return None;
        }
        let k = s.partition_point(|p| p.distance <= distance);
        if k == s.len() {
            return Some(s[k - 1].value);
        }
        let (a, b) = (s[k - 1], s[k]);
        let w = (distance - a.distance) / (b.distance - a.distance);
        Some(a.value + w * (b.value - a.value))
    }

    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| 0.5 * (w[0].value + w[1].value) * (w[1].distance - w[0].distance))
            .sum()
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self { track_id: self.track_id.clone(), samples: self.samples[..len.min(self.len())].to_vec() }
    }
}

/// Curve with LTTS 0 as reference user: sample `k` is
/// `(anchor_k - anchor_0, d(R_0, R_k))`.
pub fn similarity_curve(
    track_id: &str,
    covariances: &[CovarianceMatrix],
    anchors: &[f64],
) -> Result<SimilarityCurve, EvalError> {
    if covariances.len() < 2 {
        return Err(EvalError::TooFewWindows(covariances.len()));
    }
    if covariances.len() != anchors.len() {
        return Err(EvalError::Misaligned { covariances: covariances.len(), anchors: anchors.len() });
    }
    if let Some(k) = (1..anchors.len()).find(|&k| !(anchors[k] > anchors[k - 1])) {
        return Err(EvalError::NonIncreasing(k));
    }
    let reference = &covariances[0];
    let samples = covariances
        .iter()
        .zip(anchors)
        .enumerate()
        .map(|(k, (r, &a))| {
            let v = cmd_similarity(reference, r)
                .map_err(|source| EvalError::Metric { lttl_index: k, source })?;
            Ok(CurveSample { distance: a - anchors[0], value: Similarity::value(v) })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(SimilarityCurve { track_id: track_id.to_string(), samples })
}

/// Window covariances of a trace, averaging the first `tau` STTS per LTTS
/// (the trace's own `tau` when `None`).
pub fn trace_covariances(trace: &ChannelTrace, tau: Option<usize>) -> Result<Vec<CovarianceMatrix>, EvalError> {
    let windows = segment_with_tau(trace, tau.unwrap_or(trace.header.eval.tau))?;
    Ok(windows.par_iter().map(estimate).collect())
}

/// Segment, estimate and compare: the whole per-track pipeline.
pub fn evaluate_trace(trace: &ChannelTrace, track_id: &str, tau: Option<usize>) -> Result<SimilarityCurve, EvalError> {
    let covs = trace_covariances(trace, tau)?;
    similarity_curve(track_id, &covs, &trace.header.anchor_distances)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEnvelope {
    pub label: String,
    pub distances: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Indices into the member curves.
    pub representatives: [usize; 2],
    pub representative_ids: [String; 2],
    pub representative_values: [Vec<f64>; 2],
    pub member_count: usize,
}

/// Indices of the members with the largest and the smallest area.
pub fn extremal_representatives(curves: &[SimilarityCurve]) -> [usize; 2] {
    let by_area = |pick_max: bool| {
        curves
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.area()))
            .reduce(|a, b| {
                let better = if pick_max { b.1 > a.1 } else { b.1 < a.1 };
                if better { b } else { a }
            })
            .map_or(0, |(i, _)| i)
    };
    [by_area(true), by_area(false)]
}

/// Pointwise min/max of equally long curves plus two representatives
/// (extremal area by default).
pub fn class_envelope(
    label: &str,
    curves: &[SimilarityCurve],
    representatives: Option<[usize; 2]>,
) -> Result<ClassEnvelope, EvalError> {
    let first = curves.first().ok_or(EvalError::NoCurves)?;
    let len = first.len();
    if let Some(c) = curves.iter().find(|c| c.len() != len) {
        return Err(EvalError::RaggedCurves(len, c.len()));
    }
    let reps = representatives.unwrap_or_else(|| extremal_representatives(curves));
    if let Some(&bad) = reps.iter().find(|&&i| i >= curves.len()) {
        return Err(EvalError::BadRepresentative(bad));
    }
    let mut min = vec![f64::INFINITY; len];
    let mut max = vec![f64::NEG_INFINITY; len];
    for c in curves {
        for (k, s) in c.samples.iter().enumerate() {
            min[k] = min[k].min(s.value);
            max[k] = max[k].max(s.value);
        }
    }
    Ok(ClassEnvelope {
        label: label.to_string(),
        distances: first.distances().collect(),
        min,
        max,
        representatives: reps,
        representative_ids: reps.map(|i| curves[i].track_id.clone()),
        representative_values: reps.map(|i| curves[i].values().collect()),
        member_count: curves.len(),
    })
}

/// Truncates every curve to the shortest member.
pub fn truncate_to_shortest(curves: &[SimilarityCurve]) -> Vec<SimilarityCurve> {
    let len = curves.iter().map(SimilarityCurve::len).min().unwrap_or(0);
    curves.iter().map(|c| c.truncated(len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn diag(values: &[f64]) -> CovarianceMatrix {
        let n = values.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = Complex64::new(*v, 0.0);
        }
        CovarianceMatrix::from_row_major(n, data, 1).unwrap()
    }

    fn curve(id: &str, values: &[f64]) -> SimilarityCurve {
        SimilarityCurve {
            track_id: id.into(),
            samples: values
                .iter()
                .enumerate()
                .map(|(k, &v)| CurveSample { distance: 0.33 * k as f64, value: v })
                .collect(),
        }
    }

    #[test]
    fn stationary_curve_is_flat() {
        let covs = vec![diag(&[2.0, 1.0]); 5];
        let anchors: Vec<f64> = (0..5).map(|k| 0.33 * k as f64).collect();
        let c = similarity_curve("t", &covs, &anchors).unwrap();
        assert_eq!(c.samples[0].distance, 0.0);
        assert!((c.samples[0].value - 1.0).abs() < 1e-12);
        assert!(c.values().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn curve_errors_carry_index() {
        let covs = vec![diag(&[1.0, 0.0]), diag(&[1.0, 1.0]), diag(&[0.0, 0.0])];
        let err = similarity_curve("t", &covs, &[0.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, EvalError::Metric { lttl_index: 2, source: MetricError::ZeroMatrix }));
        assert!(matches!(similarity_curve("t", &covs[..1], &[0.0]), Err(EvalError::TooFewWindows(1))));
        assert!(matches!(similarity_curve("t", &covs, &[0.0, 1.0]), Err(EvalError::Misaligned { .. })));
        assert!(matches!(similarity_curve("t", &covs, &[0.0, 1.0, 1.0]), Err(EvalError::NonIncreasing(2))));
    }

    #[test]
    fn interpolation() {
        let c = curve("a", &[1.0, 0.5, 0.0]);
        assert_eq!(c.value_at(0.0), Some(1.0));
        assert!((c.value_at(0.165).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(c.value_at(0.66), Some(0.0));
        assert_eq!(c.value_at(0.7), None);
    }

    #[test]
    fn singleton_envelope() {
        let c = curve("a", &[1.0, 0.8, 0.6]);
        let e = class_envelope("x", std::slice::from_ref(&c), None).unwrap();
        assert_eq!(e.min, e.max);
        assert_eq!(e.min, vec![1.0, 0.8, 0.6]);
        assert_eq!(e.representatives, [0, 0]);
    }

    #[test]
    fn ordered_pair_envelope() {
        let hi = curve("hi", &[1.0, 0.9, 0.8]);
        let lo = curve("lo", &[1.0, 0.5, 0.2]);
        let e = class_envelope("x", &[lo.clone(), hi.clone()], None).unwrap();
        assert_eq!(e.max, hi.values().collect::<Vec<_>>());
        assert_eq!(e.min, lo.values().collect::<Vec<_>>());
        assert_eq!(e.representative_ids, ["hi".to_string(), "lo".to_string()]);
        let e = class_envelope("x", &[lo, hi], Some([1, 1])).unwrap();
        assert_eq!(e.representatives, [1, 1]);
    }

    #[test]
    fn envelope_errors_and_truncation() {
        let a = curve("a", &[1.0, 0.9, 0.8]);
        let b = curve("b", &[1.0, 0.9]);
        assert!(matches!(class_envelope("x", &[a.clone(), b.clone()], None), Err(EvalError::RaggedCurves(3, 2))));
        assert!(matches!(class_envelope("x", &[], None), Err(EvalError::NoCurves)));
        assert!(matches!(class_envelope("x", &[a.clone()], Some([0, 3])), Err(EvalError::BadRepresentative(3))));
        let t = truncate_to_shortest(&[a, b]);
        assert!(t.iter().all(|c| c.len() == 2));
        assert!(class_envelope("x", &t, None).is_ok());
    }

    #[test]
    fn adding_curves_only_widens() {
        let curves: Vec<SimilarityCurve> = (0..6)
            .map(|i| {
                let vals: Vec<f64> = (0..8).map(|k| ((i * 7 + k * 3) % 10) as f64 / 10.0).collect();
                curve(&i.to_string(), &vals)
            })
            .collect();
        let mut prev = class_envelope("x", &curves[..1], None).unwrap();
        for n in 2..=curves.len() {
            let next = class_envelope("x", &curves[..n], None).unwrap();
            for k in 0..8 {
                assert!(next.min[k] <= prev.min[k] && next.max[k] >= prev.max[k]);
                for r in &next.representative_values {
                    assert!(next.min[k] <= r[k] && r[k] <= next.max[k]);
                }
            }
            prev = next;
        }
    }
}
