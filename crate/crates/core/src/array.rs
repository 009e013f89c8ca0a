//! Uniform cylindrical array (UCA) layout, element pattern and steering vectors.
//!
//! Columns sit on a circle around the mast and point radially outward. Each
//! column holds `n_rows` stacked dual-polarised patches, so element `i` is
//! addressed as `(column * n_rows + row) * n_polarizations + pol`.
//!
//! All angles here are in the array frame: azimuth 0 is the array
//! boresight, which is also the direction of column 0.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Position3D};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid element pattern: {0}")]
    InvalidPattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    V,
    H,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    pub n_columns: usize,
    pub n_rows: usize,
    pub n_polarizations: usize,
    /// Metres. Defaults to a half-wavelength arc between adjacent columns.
    pub radius: f64,
    /// Metres. Defaults to half a wavelength.
    pub row_spacing: f64,
    pub carrier_frequency: f64,
    /// Cross-polar leakage of the H elements for a vertically polarised
    /// transmitter, in dB (amplitude, `20 log10`).
    pub cross_pol_leakage_db: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self::for_carrier(crate::covar::EvalConfig::DEFAULT_CARRIER, 16, 4, 2)
    }
}

impl ArrayConfig {
    pub fn for_carrier(
        carrier_frequency: f64,
        n_columns: usize,
        n_rows: usize,
        n_polarizations: usize,
    ) -> Self {
        let half_lambda = 0.5 * SPEED_OF_LIGHT / carrier_frequency;
        Self {
            n_columns,
            n_rows,
            n_polarizations,
            radius: n_columns as f64 * half_lambda / (2.0 * PI),
            row_spacing: half_lambda,
            carrier_frequency,
            cross_pol_leakage_db: -20.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Number of receive elements, `n_r`.
    pub fn n_elements(&self) -> usize {
        self.n_columns * self.n_rows * self.n_polarizations
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        let err = |m: String| Err(ArrayError::InvalidConfig(m));
        if self.n_columns == 0 || self.n_rows == 0 {
            return err("n_columns and n_rows must be >= 1".into());
        }
        if !(1..=2).contains(&self.n_polarizations) {
            return err(format!("n_polarizations {} must be 1 or 2", self.n_polarizations));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return err(format!("radius {} must be > 0", self.radius));
        }
        if !(self.row_spacing > 0.0 && self.row_spacing.is_finite()) {
            return err(format!("row_spacing {} must be > 0", self.row_spacing));
        }
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return err(format!("carrier_frequency {} must be > 0", self.carrier_frequency));
        }
        if !self.cross_pol_leakage_db.is_finite() || self.cross_pol_leakage_db > 0.0 {
            return err(format!(
                "cross_pol_leakage_db {} must be finite and <= 0",
                self.cross_pol_leakage_db
            ));
        }
        Ok(())
    }

    fn leakage_amplitude(&self) -> f64 {
        10f64.powf(self.cross_pol_leakage_db / 20.0)
    }
}

/// Separable cosine-power element pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElementPattern {
    pub hpbw_azimuth: f64,
    pub hpbw_elevation: f64,
    /// Power ratio below which the gain is clamped (back lobe floor).
    pub front_to_back_floor: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        Self {
            hpbw_azimuth: 65f64.to_radians(),
            hpbw_elevation: 65f64.to_radians(),
            front_to_back_floor: 1e-3,
        }
    }
}

impl ElementPattern {
    pub fn validate(&self) -> Result<(), ArrayError> {
        for (name, v) in [("hpbw_azimuth", self.hpbw_azimuth), ("hpbw_elevation", self.hpbw_elevation)] {
            if !(v > 0.0 && v < PI) {
                return Err(ArrayError::InvalidPattern(format!("{name} {v} must lie in (0, pi)")));
            }
        }
        if !(self.front_to_back_floor > 0.0 && self.front_to_back_floor < 1.0) {
            return Err(ArrayError::InvalidPattern(format!(
                "front_to_back_floor {} must lie in (0, 1)",
                self.front_to_back_floor
            )));
        }
        Ok(())
    }

    /// Exponent `q` with `cos(hpbw / 2)^q = 1/sqrt(2)`.
    pub fn cosine_exponent(hpbw: f64) -> f64 {
        -0.5 * 2f64.ln() / (0.5 * hpbw).cos().ln()
    }
}

fn cosine_power(delta: f64, q: f64) -> f64 {
    let c = wrap_angle(delta).cos();
    if c <= 0.0 {
        0.0
    } else {
        c.powf(q)
    }
}

/// Amplitude gain of one element for an arrival offset from its boresight.
pub fn element_gain(pattern: &ElementPattern, delta_az: f64, delta_el: f64) -> f64 {
    let qa = ElementPattern::cosine_exponent(pattern.hpbw_azimuth);
    let qe = ElementPattern::cosine_exponent(pattern.hpbw_elevation);
    gain_with_exponents(qa, qe, pattern.front_to_back_floor.sqrt(), delta_az, delta_el)
}

fn gain_with_exponents(qa: f64, qe: f64, floor: f64, delta_az: f64, delta_el: f64) -> f64 {
    (cosine_power(delta_az, qa) * cosine_power(delta_el, qe)).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub position: Position3D,
    pub boresight_azimuth: f64,
    pub polarization: Polarization,
}

/// Element positions relative to the array centre.
pub fn element_layout(cfg: &ArrayConfig) -> Result<Vec<Element>, ArrayError> {
    cfg.validate()?;
    let pols: &[Polarization] = if cfg.n_polarizations == 2 {
        &[Polarization::V, Polarization::H]
    } else {
        &[Polarization::V]
    };
    let row_center = 0.5 * (cfg.n_rows as f64 - 1.0);
    let mut out = Vec::with_capacity(cfg.n_elements());
    for m in 0..cfg.n_columns {
        let phi = 2.0 * PI * m as f64 / cfg.n_columns as f64;
        let (s, c) = phi.sin_cos();
        for r in 0..cfg.n_rows {
            let z = (r as f64 - row_center) * cfg.row_spacing;
            for &polarization in pols {
                out.push(Element {
                    position: Position3D::new(cfg.radius * c, cfg.radius * s, z),
                    boresight_azimuth: phi,
                    polarization,
                });
            }
        }
    }
    Ok(out)
}

/// Precomputed array response; evaluating many angles reuses the layout.
#[derive(Debug, Clone)]
pub struct ArrayManifold {
    elements: Vec<Element>,
    coupling: Vec<f64>,
    wavenumber: f64,
    q_az: f64,
    q_el: f64,
    floor: f64,
}

impl ArrayManifold {
    pub fn new(cfg: &ArrayConfig, pattern: &ElementPattern) -> Result<Self, ArrayError> {
        pattern.validate()?;
        let elements = element_layout(cfg)?;
        let leak = cfg.leakage_amplitude();
        let coupling = elements
            .iter()
            .map(|e| match e.polarization {
                Polarization::V => 1.0,
                Polarization::H => leak,
            })
            .collect();
        Ok(Self {
            elements,
            coupling,
            wavenumber: 2.0 * PI / cfg.wavelength(),
            q_az: ElementPattern::cosine_exponent(pattern.hpbw_azimuth),
            q_el: ElementPattern::cosine_exponent(pattern.hpbw_elevation),
            floor: pattern.front_to_back_floor.sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Real gain (pattern x polarisation coupling) of every element.
    pub fn gains(&self, azimuth: f64, elevation: f64) -> Vec<f64> {
        self.elements
            .iter()
            .zip(&self.coupling)
            .map(|(e, k)| {
                k * gain_with_exponents(
                    self.q_az,
                    self.q_el,
                    self.floor,
                    azimuth - e.boresight_azimuth,
                    elevation,
                )
            })
            .collect()
    }

    /// Writes the steering vector for an arrival from `(azimuth, elevation)`
    /// into `out`: `gain_i * exp(-j k <u, p_i>)` with `u` pointing at the source.
    pub fn steering_into(&self, azimuth: f64, elevation: f64, out: &mut [Complex64]) {
        assert_eq!(out.len(), self.elements.len());
        let (sa, ca) = azimuth.sin_cos();
        let (se, ce) = elevation.sin_cos();
        let u = [ce * ca, ce * sa, se];
        for ((o, e), k) in out.iter_mut().zip(&self.elements).zip(&self.coupling) {
            let g = k * gain_with_exponents(
                self.q_az,
                self.q_el,
                self.floor,
                azimuth - e.boresight_azimuth,
                elevation,
            );
            let p = &e.position;
            let phase = -self.wavenumber * (u[0] * p.x + u[1] * p.y + u[2] * p.z);
            *o = Complex64::from_polar(g, phase);
        }
    }

    pub fn steering(&self, azimuth: f64, elevation: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.elements.len()];
        self.steering_into(azimuth, elevation, &mut out);
        out
    }
}

/// Steering vector of length `n_r` for one arrival direction.
pub fn steering_vector(
    cfg: &ArrayConfig,
    pattern: &ElementPattern,
    azimuth: f64,
    elevation: f64,
) -> Result<Vec<Complex64>, ArrayError> {
    Ok(ArrayManifold::new(cfg, pattern)?.steering(azimuth, elevation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn default_layout() {
        let cfg = ArrayConfig::default();
        let layout = element_layout(&cfg).unwrap();
        assert_eq!(layout.len(), 128);
        assert_eq!(cfg.n_elements(), 128);

        let mut az: Vec<f64> = layout.iter().map(|e| e.boresight_azimuth).collect();
        az.dedup();
        assert_eq!(az.len(), 16);
        for (m, a) in az.iter().enumerate() {
            assert!((a.to_degrees() - 22.5 * m as f64).abs() < 1e-9);
        }
        let mut z: Vec<f64> = layout.iter().map(|e| e.position.z).collect();
        z.sort_by(f64::total_cmp);
        z.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(z.len(), 4);
        // V and H share a position
        assert_eq!(layout[0].position, layout[1].position);
        assert_eq!(layout[0].polarization, Polarization::V);
        assert_eq!(layout[1].polarization, Polarization::H);
    }

    #[test]
    fn single_element_layout() {
        let cfg = ArrayConfig::for_carrier(3.675e9, 1, 1, 1);
        let layout = element_layout(&cfg).unwrap();
        assert_eq!(layout.len(), 1);
        assert_eq!(layout[0].position, Position3D::new(cfg.radius, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = ArrayConfig::default();
        cfg.n_polarizations = 3;
        assert!(element_layout(&cfg).is_err());
        let mut cfg = ArrayConfig::default();
        cfg.radius = 0.0;
        assert!(cfg.validate().is_err());
        let p = ElementPattern { front_to_back_floor: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn gain_at_boresight_and_half_power() {
        let p = ElementPattern::default();
        assert!((element_gain(&p, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let half = element_gain(&p, deg(32.5), 0.0);
        assert!((half - 0.5f64.sqrt()).abs() < 1e-6 * 0.5f64.sqrt());
        let half = element_gain(&p, 0.0, deg(-32.5));
        assert!((half * half - 0.5).abs() < 1e-6 * 0.5);
    }

    #[test]
    fn cosine_exponent_matches_bisection() {
        // cos(32.5 deg)^q = sqrt(1/2), solved by bisection on q
        let target = 0.5f64.sqrt();
        let c = deg(32.5).cos();
        let (mut lo, mut hi) = (0.1f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if c.powf(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = ElementPattern::cosine_exponent(deg(65.0));
        assert!((q - lo).abs() < 1e-12);
        assert!((q - 2.034_789).abs() < 1e-6);
        // gain at 45 deg off boresight, value frozen from the bisection root
        let g45 = element_gain(&ElementPattern::default(), deg(45.0), 0.0);
        assert!((g45 - deg(45.0).cos().powf(lo)).abs() < 1e-12);
        assert!((g45 - 0.494_008).abs() < 1e-6);
    }

    #[test]
    fn gain_floor_behind_element() {
        let p = ElementPattern::default();
        let g = element_gain(&p, PI, 0.0);
        assert!((g - p.front_to_back_floor.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_element_phase() {
        let cfg = ArrayConfig::for_carrier(3.675e9, 1, 1, 1);
        let a = steering_vector(&cfg, &ElementPattern::default(), 0.0, 0.0).unwrap();
        let expected = -2.0 * PI * cfg.radius / cfg.wavelength();
        let d = wrap_angle(a[0].arg() - expected);
        assert!(d.abs() < 1e-12);
        assert!((a[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_pol_leakage() {
        let cfg = ArrayConfig::default();
        let a = steering_vector(&cfg, &ElementPattern::default(), 0.2, -0.1).unwrap();
        for pair in a.chunks(2) {
            let ratio = pair[1] / pair[0];
            assert!((ratio.norm() - 0.1).abs() < 1e-12);
            assert!(ratio.arg().abs() < 1e-12);
        }
    }

    #[test]
    fn phases_scale_with_frequency() {
        let mut cfg = ArrayConfig::default();
        let pattern = ElementPattern::default();
        let a = steering_vector(&cfg, &pattern, 0.7, -0.2).unwrap();
        cfg.carrier_frequency *= 2.0;
        let b = steering_vector(&cfg, &pattern, 0.7, -0.2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let d = wrap_angle(y.arg() - 2.0 * x.arg());
            assert!(d.abs() < 1e-9, "{d}");
        }
    }

    proptest! {
        #[test]
        fn rotation_permutes_columns(az in -PI..PI, el in -1.2f64..1.2) {
            let cfg = ArrayConfig::default();
            let m = ArrayManifold::new(&cfg, &ElementPattern::default()).unwrap();
            let block = cfg.n_rows * cfg.n_polarizations;
            let g0 = m.gains(az, el);
            let g1 = m.gains(az + 2.0 * PI / cfg.n_columns as f64, el);
            for i in 0..g0.len() {
                let j = (i + block) % g0.len();
                prop_assert!((g0[i] - g1[j]).abs() < 1e-12);
            }
        }

        #[test]
        fn steering_never_vanishes(az in -4.0f64..4.0, el in -1.57f64..1.57) {
            let a = steering_vector(&ArrayConfig::default(), &ElementPattern::default(), az, el).unwrap();
            let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            prop_assert!(norm > 0.0);
        }
    }
}
