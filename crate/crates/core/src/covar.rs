//! LTTS segmentation and windowed covariance estimation.
//!
//! The estimator averages `H H^H` over the first `tau` STTS of an LTTS and
//! all `N` subcarriers, accumulating in `f64` regardless of storage width.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{ChannelTrace, Scenario, SynthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovarError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("bad covariance data: {0}")]
    BadMatrix(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Sampling and averaging parameters of the evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// STTS per covariance window.
    pub tau: usize,
    /// OFDM subcarriers averaged per STTS.
    pub n_subcarriers: usize,
    pub stts_interval: f64,
    pub lttl_interval: f64,
    pub lttl_count: usize,
    pub carrier_frequency: f64,
    pub subcarrier_spacing: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tau: 10,
            n_subcarriers: 100,
            stts_interval: 1.08e-3,
            lttl_interval: 0.66,
            lttl_count: 120,
            carrier_frequency: Self::DEFAULT_CARRIER,
            subcarrier_spacing: 180e3,
        }
    }
}

impl EvalConfig {
    pub const DEFAULT_CARRIER: f64 = 3.675e9;

    pub fn validate(&self) -> Result<(), CovarError> {
        let err = |m: String| Err(CovarError::InvalidConfig(m));
        if self.tau == 0 || self.n_subcarriers == 0 || self.lttl_count == 0 {
            return err("tau, n_subcarriers and lttl_count must be >= 1".into());
        }
        for (name, v) in [
            ("stts_interval", self.stts_interval),
            ("lttl_interval", self.lttl_interval),
            ("carrier_frequency", self.carrier_frequency),
            ("subcarrier_spacing", self.subcarrier_spacing),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("{name} = {v} must be finite and > 0"));
            }
        }
        let window = self.tau as f64 * self.stts_interval;
        if self.lttl_interval < window {
            return err(format!(
                "InvalidInterval: lttl_interval {} < tau x stts_interval = {window}",
                self.lttl_interval
            ));
        }
        Ok(())
    }

    /// Evaluated bandwidth `N x subcarrier_spacing`.
    pub fn bandwidth(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Subcarrier centre frequencies, symmetric around the carrier.
    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        let mid = 0.5 * (self.n_subcarriers as f64 - 1.0);
        (0..self.n_subcarriers)
            .map(|n| self.carrier_frequency + (n as f64 - mid) * self.subcarrier_spacing)
            .collect()
    }

    pub fn stts_count(&self) -> usize {
        self.lttl_count * self.tau
    }
}

/// Hermitian `n x n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n: usize,
    data: Vec<Complex64>,
    sample_count: usize,
}

impl CovarianceMatrix {
    pub fn from_row_major(n: usize, data: Vec<Complex64>, sample_count: usize) -> Result<Self, CovarError> {
        if data.len() != n * n {
            return Err(CovarError::BadMatrix(format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CovarError::BadMatrix("non-finite entry".into()));
        }
        Ok(Self { n, data, sample_count })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of snapshots averaged (`tau x N` for a window estimate).
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||R - R^H||_F / ||R||_F` (0 for the zero matrix).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.data[i * n + j] - self.data[j * n + i].conj()).norm_sqr();
            }
        }
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            acc.sqrt() / norm
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * a).collect(),
            sample_count: self.sample_count,
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_nalgebra()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Unit-norm eigenvector of the largest eigenvalue.
    pub fn dominant_eigenvector(&self) -> Vec<Complex64> {
        let eig = SymmetricEigen::new(self.to_nalgebra());
        let (k, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty matrix");
        eig.eigenvectors.column(k).iter().copied().collect()
    }

    /// Eigenvalues larger than `rel_tol x trace`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.trace().abs();
        self.eigenvalues().into_iter().filter(|&e| e > cut).count()
    }

    /// Hermitian and no eigenvalue below `-rel_tol x trace`.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        self.hermitian_defect() <= 1e-12
            && self.eigenvalues().first().map_or(true, |&e| e >= -rel_tol * self.trace().abs())
    }
}

/// Running sum of outer products `h h^H`; only the upper triangle is
/// accumulated and mirrored on [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    hr: Vec<f64>,
    hi: Vec<f64>,
    count: usize,
}

impl CovarianceAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
            hr: vec![0.0; n],
            hi: vec![0.0; n],
            count: 0,
        }
    }

    pub fn add(&mut self, snapshot: &[Complex32]) {
        assert_eq!(snapshot.len(), self.n);
        for (k, z) in snapshot.iter().enumerate() {
            self.hr[k] = z.re as f64;
            self.hi[k] = z.im as f64;
        }
        self.accumulate();
    }

    pub fn add_f64(&mut self, snapshot: &[Complex64]) {
        assert_eq!(snapshot.len(), self.n);
        for (k, z) in snapshot.iter().enumerate() {
            self.hr[k] = z.re;
            self.hi[k] = z.im;
        }
        self.accumulate();
    }

    fn accumulate(&mut self) {
        let n = self.n;
        for i in 0..n {
            let (a, b) = (self.hr[i], self.hi[i]);
            let row_re = &mut self.re[i * n + i..(i + 1) * n];
            let row_im = &mut self.im[i * n + i..(i + 1) * n];
            let (cr, ci) = (&self.hr[i..], &self.hi[i..]);
            // h_i conj(h_j) = (a + jb)(c - jd)
            for (((re, im), &c), &d) in row_re.iter_mut().zip(row_im.iter_mut()).zip(cr).zip(ci) {
                *re += a * c + b * d;
                *im += b * c - a * d;
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> CovarianceMatrix {
        let n = self.n;
        let inv = if self.count == 0 { 0.0 } else { 1.0 / self.count as f64 };
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(self.re[i * n + i] * inv, 0.0);
            for j in i + 1..n {
                let z = Complex64::new(self.re[i * n + j] * inv, self.im[i * n + j] * inv);
                data[i * n + j] = z;
                data[j * n + i] = z.conj();
            }
        }
        CovarianceMatrix { n, data, sample_count: self.count }
    }
}

/// Sample covariance of `data.len() / n_r` consecutive snapshots.
pub fn covariance_from_snapshots(n_r: usize, data: &[Complex32]) -> CovarianceMatrix {
    let mut acc = CovarianceAccumulator::new(n_r);
    for h in data.chunks_exact(n_r) {
        acc.add(h);
    }
    acc.finish()
}

/// The first `tau` STTS of one LTTS, all subcarriers.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub index: usize,
    pub anchor_distance: f64,
    pub tau: usize,
    pub n_subcarriers: usize,
    pub n_r: usize,
    /// `tau x n_subcarriers x n_r` coefficients, t-major.
    pub data: &'a [Complex32],
}

/// Splits a trace into one window per LTTS using the trace's own `tau`.
pub fn segment(trace: &ChannelTrace) -> Result<Vec<Window<'_>>, CovarError> {
    segment_with_tau(trace, trace.header.eval.tau)
}

/// Like [`segment`] but averages only the first `tau` of the stored STTS
/// per LTTS.
pub fn segment_with_tau(trace: &ChannelTrace, tau: usize) -> Result<Vec<Window<'_>>, CovarError> {
    let h = &trace.header;
    let stored_tau = h.eval.tau;
    let n_sub = h.eval.n_subcarriers;
    if tau == 0 || tau > stored_tau {
        return Err(CovarError::MalformedTrace(format!(
            "requested tau {tau} but trace stores {stored_tau} STTS per LTTS"
        )));
    }
    if h.stts_count != h.eval.lttl_count * stored_tau {
        return Err(CovarError::MalformedTrace(format!(
            "{} STTS for {} LTTS of {stored_tau}",
            h.stts_count, h.eval.lttl_count
        )));
    }
    if h.anchor_distances.len() != h.eval.lttl_count {
        return Err(CovarError::MalformedTrace(format!(
            "{} anchor distances for {} LTTS",
            h.anchor_distances.len(),
            h.eval.lttl_count
        )));
    }
    let stts_len = n_sub * h.n_r;
    if trace.data.len() != h.stts_count * stts_len {
        return Err(CovarError::MalformedTrace(format!(
            "payload holds {} coefficients, header implies {}",
            trace.data.len(),
            h.stts_count * stts_len
        )));
    }
    Ok((0..h.eval.lttl_count)
        .map(|k| {
            let start = k * stored_tau * stts_len;
            Window {
                index: k,
                anchor_distance: h.anchor_distances[k],
                tau,
                n_subcarriers: n_sub,
                n_r: h.n_r,
                data: &trace.data[start..start + tau * stts_len],
            }
        })
        .collect())
}

/// Windowed estimate `R = 1/(tau N) sum_t sum_n H_{t,n} H_{t,n}^H`.
pub fn estimate(window: &Window<'_>) -> CovarianceMatrix {
    covariance_from_snapshots(window.n_r, window.data)
}

/// Analytic expectation of `H H^H` at one track position when path phases
/// are independent and uniform: `sum_p |g_p|^2 a_p a_p^H`.
pub fn expected_covariance(scenario: &Scenario, distance: f64) -> Result<CovarianceMatrix, CovarError> {
    let manifold = scenario.manifold().map_err(SynthError::from)?;
    let paths = scenario.paths_at(distance)?;
    let n = manifold.len();
    let mut total = vec![Complex64::new(0.0, 0.0); n * n];
    for p in &paths {
        let a = manifold.steering(p.azimuth, p.elevation);
        let w = p.gain.norm_sqr();
        for i in 0..n {
            for j in 0..n {
                total[i * n + j] += w * a[i] * a[j].conj();
            }
        }
    }
    CovarianceMatrix::from_row_major(n, total, 1)
}

/// Empirical `E[H H^H]` at a fixed position: `n_draws` realisations with
/// every path phase redrawn uniformly.
pub fn oracle_covariance(
    scenario: &Scenario,
    distance: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CovarianceMatrix, CovarError> {
    if n_draws == 0 {
        return Err(CovarError::InvalidConfig("n_draws must be >= 1".into()));
    }
    let manifold = scenario.manifold().map_err(SynthError::from)?;
    let paths = scenario.paths_at(distance)?;
    let steering: Vec<Vec<Complex64>> =
        paths.iter().map(|p| manifold.steering(p.azimuth, p.elevation)).collect();
    let n = manifold.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = CovarianceAccumulator::new(n);
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..n_draws {
        h.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (p, a) in paths.iter().zip(&steering) {
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let c = p.gain * Complex64::from_polar(1.0, phase);
            for (z, ai) in h.iter_mut().zip(a) {
                *z += c * ai;
            }
        }
        acc.add_f64(&h);
    }
    Ok(acc.finish())
}
