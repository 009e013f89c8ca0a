//! Geometry-driven SIMO channel synthesis along a track.
//!
//! Every coefficient is a deterministic function of the transmitter position:
//!
//! ```text
//! H_{t,n} = sum_p g_p(x_t) a(az_p(x_t), el_p(x_t)) exp(-j 2 pi f_n delay_p(x_t))
//! ```
//!
//! with one LoS path (amplitude `~ 1/range`) and single-bounce scatterers
//! (amplitude `~ 1/path length`). Scatterers are only present while the
//! track distance lies in `[birth, death)`; their amplitude is fixed for
//! the whole lifetime, so births and deaths are hard jumps.
//!
//! All randomness is drawn in [`make_scenario`]; [`synthesize`] is pure.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::array::{ArrayConfig, ArrayError, ArrayManifold, ElementPattern};
use crate::covar::EvalConfig;
use crate::geometry::{
    direction_from, relative_geometry, sample_track, BsConfig, GeometryError, Position3D, Track,
};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no active propagation path at {distance:.4} m along the track")]
    NoActivePath { distance: f64 },
}

/// Generative presets, one per track class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    LosRadial,
    LosTangential,
    FarAway,
    NlosUncorrelated,
}

impl Preset {
    pub const ALL: [Preset; 4] =
        [Preset::LosRadial, Preset::LosTangential, Preset::FarAway, Preset::NlosUncorrelated];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LosRadial => "los_radial",
            Preset::LosTangential => "los_tangential",
            Preset::FarAway => "far_away",
            Preset::NlosUncorrelated => "nlos_uncorrelated",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SynthError::Config(format!("unknown preset '{s}'")))
    }
}

/// Single-bounce point scatterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Position3D,
    pub amplitude: Complex64,
    pub birth_distance: f64,
    pub death_distance: f64,
}

impl Scatterer {
    pub fn is_active(&self, distance: f64) -> bool {
        self.birth_distance <= distance && distance < self.death_distance
    }
}

/// Knobs of the preset generator. Defaults give the reference presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub track_length: f64,
    /// m/s; 1.8 km/h.
    pub speed: f64,
    pub tx_height: f64,
    /// Mast height; unset picks 3 m or 6 m from the seed.
    pub bs_height: Option<f64>,
    pub k_factor_db: f64,
    /// Permanent scatterers in the LoS presets.
    pub los_scatterers: usize,
    /// Expected number of simultaneously active scatterers (NLoS).
    pub nlos_density: f64,
    /// Mean scatterer lifetime in metres of travel (NLoS).
    pub nlos_mean_lifetime: f64,
    /// Relative half-width of the uniform lifetime distribution.
    pub nlos_lifetime_spread: f64,
    /// Horizontal annulus around the BS holding the scatterers, metres.
    pub scatterer_ring: [f64; 2],
    pub scatterer_max_height: f64,
    /// Optional receiver SNR in dB; `None` synthesises noiseless traces.
    pub snr_db: Option<f64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            track_length: 40.0,
            speed: 0.5,
            tx_height: 1.5,
            bs_height: None,
            k_factor_db: 10.0,
            los_scatterers: 12,
            nlos_density: 20.0,
            nlos_mean_lifetime: 2.0,
            nlos_lifetime_spread: 0.5,
            scatterer_ring: [5.0, 60.0],
            scatterer_max_height: 15.0,
            snr_db: None,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, v) in [
            ("track_length", self.track_length),
            ("speed", self.speed),
            ("nlos_density", self.nlos_density),
            ("nlos_mean_lifetime", self.nlos_mean_lifetime),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be > 0"));
            }
        }
        if !(0.0..1.0).contains(&self.nlos_lifetime_spread) {
            return bad(format!("nlos_lifetime_spread {} must lie in [0, 1)", self.nlos_lifetime_spread));
        }
        if !self.k_factor_db.is_finite() {
            return bad("k_factor_db must be finite".into());
        }
        let [r0, r1] = self.scatterer_ring;
        if !(r0 > 0.0 && r1 > r0) {
            return bad(format!("scatterer_ring [{r0}, {r1}] must satisfy 0 < min < max"));
        }
        if !(self.scatterer_max_height >= 0.0) {
            return bad("scatterer_max_height must be >= 0".into());
        }
        if let Some(h) = self.bs_height {
            if !(h > 0.0) {
                return bad(format!("bs_height {h} must be > 0"));
            }
        }
        Ok(())
    }
}

/// Complete generative description of one track.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub preset: Option<Preset>,
    pub seed: u64,
    pub bs: BsConfig,
    pub array: ArrayConfig,
    pub pattern: ElementPattern,
    pub track: Track,
    pub los_present: bool,
    /// LoS power over total scattered power at the track midpoint (linear).
    pub k_factor: f64,
    pub scatterers: Vec<Scatterer>,
    pub snr_db: Option<f64>,
    /// LoS amplitude at 1 m, derived from `k_factor`.
    los_amplitude: f64,
}

/// One propagation path seen from the BS at a given track position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl Scenario {
    /// Assembles a scenario and scales the LoS path to meet `k_factor` at
    /// the track midpoint.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        preset: Option<Preset>,
        seed: u64,
        bs: BsConfig,
        array: ArrayConfig,
        pattern: ElementPattern,
        track: Track,
        los_present: bool,
        k_factor: f64,
        scatterers: Vec<Scatterer>,
    ) -> Result<Self, SynthError> {
        array.validate()?;
        pattern.validate()?;
        for s in &scatterers {
            if !s.position.is_finite() || !(s.birth_distance < s.death_distance) {
                return Err(SynthError::InvalidScenario("scatterer lifetime must satisfy birth < death".into()));
            }
            if s.amplitude.norm() == 0.0 || !s.amplitude.re.is_finite() || !s.amplitude.im.is_finite() {
                return Err(SynthError::InvalidScenario("scatterer amplitude must be finite and non-zero".into()));
            }
        }
        if los_present && !(k_factor > 0.0 && k_factor.is_finite()) {
            return Err(SynthError::InvalidScenario(format!("k_factor {k_factor} must be > 0 with LoS")));
        }
        let mut scenario = Self {
            preset,
            seed,
            bs,
            array,
            pattern,
            track,
            los_present,
            k_factor,
            scatterers,
            snr_db: None,
            los_amplitude: 0.0,
        };
        if los_present {
            let mid = 0.5 * scenario.track.length();
            let r_mid = relative_geometry(&scenario.bs, &scenario.track.position_at(mid))?.range;
            let scattered: f64 = scenario
                .scattered_paths(mid)?
                .iter()
                .map(|p| p.gain.norm_sqr())
                .sum();
            scenario.los_amplitude =
                if scattered > 0.0 { (k_factor * scattered).sqrt() * r_mid } else { r_mid };
        } else if let Some(d) = scenario.uncovered_distance() {
            return Err(SynthError::NoActivePath { distance: d });
        }
        Ok(scenario)
    }

    pub fn with_snr_db(mut self, snr_db: Option<f64>) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn manifold(&self) -> Result<ArrayManifold, ArrayError> {
        ArrayManifold::new(&self.array, &self.pattern)
    }

    /// Scatterers alive at `distance` (`birth <= distance < death`).
    pub fn active_scatterers(&self, distance: f64) -> Vec<&Scatterer> {
        self.scatterers.iter().filter(|s| s.is_active(distance)).collect()
    }

    /// First track distance with no LoS and no live scatterer, if any.
    fn uncovered_distance(&self) -> Option<f64> {
        if self.los_present {
            return None;
        }
        let mut covered = 0.0;
        let mut intervals: Vec<(f64, f64)> =
            self.scatterers.iter().map(|s| (s.birth_distance, s.death_distance)).collect();
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (b, d) in intervals {
            if b > covered {
                return Some(covered);
            }
            covered = covered.max(d);
            if covered > self.track.length() {
                return None;
            }
        }
        Some(covered)
    }

    fn scattered_paths(&self, distance: f64) -> Result<Vec<PathComponent>, SynthError> {
        let tx = self.track.position_at(distance);
        self.scatterers
            .iter()
            .filter(|s| s.is_active(distance))
            .map(|s| {
                let inbound = direction_from(&self.bs.position, self.bs.boresight_azimuth, &s.position)?;
                let length = tx.distance(&s.position) + inbound.range;
                Ok(PathComponent {
                    gain: s.amplitude / length,
                    delay: length / SPEED_OF_LIGHT,
                    azimuth: inbound.azimuth,
                    elevation: inbound.elevation,
                })
            })
            .collect()
    }

    /// All paths at `distance` along the track, LoS first.
    pub fn paths_at(&self, distance: f64) -> Result<Vec<PathComponent>, SynthError> {
        let mut paths = Vec::with_capacity(self.scatterers.len() + 1);
        if self.los_present {
            let g = relative_geometry(&self.bs, &self.track.position_at(distance))?;
            paths.push(PathComponent {
                gain: Complex64::new(self.los_amplitude / g.range, 0.0),
                delay: g.range / SPEED_OF_LIGHT,
                azimuth: g.azimuth,
                elevation: g.elevation,
            });
        }
        paths.extend(self.scattered_paths(distance)?);
        if paths.is_empty() {
            return Err(SynthError::NoActivePath { distance });
        }
        Ok(paths)
    }

    /// Closest and farthest BS-to-transmitter range over the track.
    pub fn bs_range_extent(&self) -> (f64, f64) {
        let bs = self.bs.position;
        let a = self.track.start();
        let [hx, hy] = self.track.heading();
        let along = (bs.x - a.x) * hx + (bs.y - a.y) * hy;
        let closest = along.clamp(0.0, self.track.length());
        let min = bs.distance(&self.track.position_at(closest));
        let max = bs.distance(&a).max(bs.distance(&self.track.end()));
        (min, max)
    }

    /// Stable hash of every generative input.
    pub fn digest_hash(&self) -> String {
        let text = toml::to_string(self).expect("scenario serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Provenance summary written into trace headers.
    pub fn digest(&self) -> BTreeMap<String, String> {
        let (min_range, max_range) = self.bs_range_extent();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(format!("scenario.{k}"), v);
        };
        put("hash", self.digest_hash());
        put("preset", self.preset.map_or_else(|| "custom".to_string(), |p| p.to_string()));
        put("seed", self.seed.to_string());
        put("bs_x_m", self.bs.position.x.to_string());
        put("bs_y_m", self.bs.position.y.to_string());
        put("bs_height_m", self.bs.position.z.to_string());
        put("bs_boresight_rad", self.bs.boresight_azimuth.to_string());
        put("min_bs_range_m", min_range.to_string());
        put("max_bs_range_m", max_range.to_string());
        put("track_length_m", self.track.length().to_string());
        put("speed_mps", self.track.speed().to_string());
        put("tx_height_m", self.track.tx_height().to_string());
        put("los_present", self.los_present.to_string());
        put(
            "k_factor_db",
            if self.los_present { (10.0 * self.k_factor.log10()).to_string() } else { "none".into() },
        );
        put("scatterers", self.scatterers.len().to_string());
        put("snr_db", self.snr_db.map_or_else(|| "none".into(), |s| s.to_string()));
        put("array.n_columns", self.array.n_columns.to_string());
        put("array.n_rows", self.array.n_rows.to_string());
        put("array.n_polarizations", self.array.n_polarizations.to_string());
        put("array.radius_m", self.array.radius.to_string());
        put("array.row_spacing_m", self.array.row_spacing.to_string());
        put("array.cross_pol_leakage_db", self.array.cross_pol_leakage_db.to_string());
        put("pattern.hpbw_azimuth_rad", self.pattern.hpbw_azimuth.to_string());
        put("pattern.hpbw_elevation_rad", self.pattern.hpbw_elevation.to_string());
        put("pattern.front_to_back_floor", self.pattern.front_to_back_floor.to_string());
        m
    }
}

/// Active scatterers of a scenario at `distance`.
pub fn active_scatterers(scenario: &Scenario, distance: f64) -> Vec<Scatterer> {
    scenario.active_scatterers(distance).into_iter().cloned().collect()
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn scatterer_position(rng: &mut ChaCha8Rng, center: &Position3D, p: &ScenarioParams) -> Position3D {
    let [r0, r1] = p.scatterer_ring;
    // uniform over the annulus area
    let r = (r0 * r0 + rng.gen::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
    let phi = rng.gen_range(0.0..TAU);
    Position3D::new(
        center.x + r * phi.cos(),
        center.y + r * phi.sin(),
        rng.gen::<f64>() * p.scatterer_max_height,
    )
}

/// Birth/death process along the track: births arrive as a Poisson process
/// of rate `density / mean_lifetime` per metre, lifetimes are uniform on
/// `mean * [1 - spread, 1 + spread]`, and the population at distance 0 is
/// drawn from the stationary state.
fn renewal_scatterers(
    rng: &mut ChaCha8Rng,
    center: &Position3D,
    track_length: f64,
    p: &ScenarioParams,
) -> Vec<Scatterer> {
    let lo = p.nlos_mean_lifetime * (1.0 - p.nlos_lifetime_spread);
    let hi = p.nlos_mean_lifetime * (1.0 + p.nlos_lifetime_spread);
    let birth_rate = p.nlos_density / p.nlos_mean_lifetime;
    let mut out = Vec::new();

    // Stationary population: Poisson(density) members, each with a
    // length-biased lifetime and a uniform age.
    let initial = poisson(rng, p.nlos_density);
    for _ in 0..initial {
        let life = (lo * lo + rng.gen::<f64>() * (hi * hi - lo * lo)).sqrt();
        let age = rng.gen::<f64>() * life;
        out.push(Scatterer {
            position: scatterer_position(rng, center, p),
            amplitude: complex_gaussian(rng),
            birth_distance: -age,
            death_distance: life - age,
        });
    }

    let gap = Exp::new(birth_rate).expect("positive rate");
    let mut x = 0.0;
    loop {
        x += gap.sample(rng);
        if x > track_length {
            break;
        }
        let life = rng.gen_range(lo..=hi);
        out.push(Scatterer {
            position: scatterer_position(rng, center, p),
            amplitude: complex_gaussian(rng),
            birth_distance: x,
            death_distance: x + life,
        });
    }
    out
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    rand_distr::Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Builds one of the reference scenarios. Deterministic in `seed`.
pub fn make_scenario(preset: Preset, seed: u64) -> Result<Scenario, SynthError> {
    make_scenario_with(preset, seed, &ScenarioParams::default(), &ArrayConfig::default(), &ElementPattern::default())
}

/// [`make_scenario`] with explicit generator, array and pattern settings.
pub fn make_scenario_with(
    preset: Preset,
    seed: u64,
    params: &ScenarioParams,
    array: &ArrayConfig,
    pattern: &ElementPattern,
) -> Result<Scenario, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bs_height = match params.bs_height {
        Some(h) => h,
        None if rng.gen_bool(0.5) => BsConfig::HEIGHT_HIGH,
        None => BsConfig::HEIGHT_LOW,
    };
    let bs_pos = Position3D::new(0.0, 0.0, bs_height);
    let bs = BsConfig::new(bs_pos, rng.gen_range(-PI..PI))?;
    let length = params.track_length;
    let h_tx = params.tx_height;
    let drop = (bs_height - h_tx).abs();

    let (track, los) = match preset {
        Preset::LosRadial => {
            // Start offset grows with the mast/track height difference so the
            // elevation sweep over the track stays within the vertical beam.
            let lo = (2.8 * drop).clamp(5.0, 12.5);
            let hi = (lo + 2.5).min(15.0);
            let d0 = rng.gen_range(lo..=hi);
            let dir = rng.gen_range(-PI..PI);
            let start = Position3D::new(d0 * dir.cos(), d0 * dir.sin(), h_tx);
            (Track::with_heading_angle(start, dir, length, params.speed)?, true)
        }
        Preset::LosTangential => {
            let abeam = rng.gen_range(5.0..=15.0);
            let dir = rng.gen_range(-PI..PI);
            let side = if rng.gen_bool(0.5) { 0.5 * PI } else { -0.5 * PI };
            let heading = dir + side;
            let mid = Position3D::new(abeam * dir.cos(), abeam * dir.sin(), h_tx);
            let start = Position3D::new(
                mid.x - 0.5 * length * heading.cos(),
                mid.y - 0.5 * length * heading.sin(),
                h_tx,
            );
            (Track::with_heading_angle(start, heading, length, params.speed)?, true)
        }
        Preset::FarAway => {
            let range = rng.gen_range(150.0..=300.0);
            let dir = rng.gen_range(-PI..PI);
            let off_radial = rng.gen_range(-PI / 6.0..=PI / 6.0);
            let heading = dir + off_radial + if rng.gen_bool(0.5) { 0.0 } else { PI };
            let mid = Position3D::new(range * dir.cos(), range * dir.sin(), h_tx);
            let start = Position3D::new(
                mid.x - 0.5 * length * heading.cos(),
                mid.y - 0.5 * length * heading.sin(),
                h_tx,
            );
            (Track::with_heading_angle(start, heading, length, params.speed)?, true)
        }
        Preset::NlosUncorrelated => {
            let d0 = rng.gen_range(20.0..=60.0);
            let dir = rng.gen_range(-PI..PI);
            let start = Position3D::new(d0 * dir.cos(), d0 * dir.sin(), h_tx);
            (Track::with_heading_angle(start, rng.gen_range(-PI..PI), length, params.speed)?, false)
        }
    };

    let scatterers = if los {
        // Far-away scatterers surround the mobile, the others the BS.
        let center = match preset {
            Preset::FarAway => track.midpoint(),
            _ => bs_pos,
        };
        (0..params.los_scatterers)
            .map(|_| Scatterer {
                position: scatterer_position(&mut rng, &center, params),
                amplitude: complex_gaussian(&mut rng),
                birth_distance: f64::NEG_INFINITY,
                death_distance: f64::INFINITY,
            })
            .collect()
    } else {
        renewal_scatterers(&mut rng, &bs_pos, length, params)
    };

    let k_factor = 10f64.powf(params.k_factor_db / 10.0);
    Ok(Scenario::new(
        Some(preset),
        seed,
        bs,
        array.clone(),
        pattern.clone(),
        track,
        los,
        k_factor,
        scatterers,
    )?
    .with_snr_db(params.snr_db))
}

/// Header of a channel trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub n_r: usize,
    pub stts_count: usize,
    pub eval: EvalConfig,
    /// Track distance of each LTTS anchor, metres.
    pub anchor_distances: Vec<f64>,
    /// Provenance: scenario digest, units, tool version, config digest.
    pub meta: BTreeMap<String, String>,
}

/// Channel tensor `H[t][n][antenna]` stored as `f32` pairs, t-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub header: TraceHeader,
    pub data: Vec<Complex32>,
}

impl ChannelTrace {
    pub fn new(header: TraceHeader, data: Vec<Complex32>) -> Result<Self, SynthError> {
        let expected = header.stts_count * header.eval.n_subcarriers * header.n_r;
        if data.len() != expected {
            return Err(SynthError::InvalidScenario(format!(
                "trace holds {} coefficients, header implies {expected}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SynthError::InvalidScenario("non-finite coefficient".into()));
        }
        Ok(Self { header, data })
    }

    /// Coefficients of STTS `t`, subcarrier `n`.
    pub fn snapshot(&self, t: usize, n: usize) -> &[Complex32] {
        let n_r = self.header.n_r;
        let off = (t * self.header.eval.n_subcarriers + n) * n_r;
        &self.data[off..off + n_r]
    }

    pub fn scaled(&self, a: f32) -> Self {
        Self { header: self.header.clone(), data: self.data.iter().map(|z| z * a).collect() }
    }

    /// Keeps the `n` central subcarriers. The carrier recorded in the
    /// header moves by half a spacing when the parity of the count changes.
    pub fn center_subcarriers(&self, n: usize) -> Result<Self, SynthError> {
        let full = self.header.eval.n_subcarriers;
        if n == 0 || n > full {
            return Err(SynthError::Config(format!("cannot keep {n} of {full} subcarriers")));
        }
        let first = (full - n) / 2;
        let n_r = self.header.n_r;
        let mut data = Vec::with_capacity(self.header.stts_count * n * n_r);
        for stts in self.data.chunks_exact(full * n_r) {
            data.extend_from_slice(&stts[first * n_r..(first + n) * n_r]);
        }
        let mut header = self.header.clone();
        let old_mid = 0.5 * (full as f64 - 1.0);
        let new_mid = first as f64 + 0.5 * (n as f64 - 1.0);
        header.eval.carrier_frequency += (new_mid - old_mid) * header.eval.subcarrier_spacing;
        header.eval.n_subcarriers = n;
        Self::new(header, data)
    }
}

/// Noiseless coefficients at one track distance for every subcarrier:
/// `freqs.len() x n_r`, subcarrier-major.
pub fn snapshot_at(
    scenario: &Scenario,
    manifold: &ArrayManifold,
    distance: f64,
    freqs: &[f64],
) -> Result<Vec<Complex64>, SynthError> {
    let n_r = manifold.len();
    let mut out = vec![Complex64::new(0.0, 0.0); freqs.len() * n_r];
    let mut a = vec![Complex64::new(0.0, 0.0); n_r];
    for path in scenario.paths_at(distance)? {
        manifold.steering_into(path.azimuth, path.elevation, &mut a);
        for (row, &f) in out.chunks_exact_mut(n_r).zip(freqs) {
            let c = path.gain * Complex64::from_polar(1.0, -TAU * ((f * path.delay) % 1.0));
            for (h, ai) in row.iter_mut().zip(&a) {
                *h += c * ai;
            }
        }
    }
    Ok(out)
}

/// Synthesises the trace of `scenario` under the sampling plan of `cfg`.
pub fn synthesize(scenario: &Scenario, cfg: &EvalConfig) -> Result<ChannelTrace, SynthError> {
    cfg.validate().map_err(|e| SynthError::Config(e.to_string()))?;
    let rel = (scenario.array.carrier_frequency - cfg.carrier_frequency).abs() / cfg.carrier_frequency;
    if rel > 1e-9 {
        return Err(SynthError::Config(format!(
            "array carrier {} Hz differs from evaluation carrier {} Hz",
            scenario.array.carrier_frequency, cfg.carrier_frequency
        )));
    }
    let plan = sample_track(&scenario.track, cfg.stts_interval, cfg.lttl_interval, cfg.lttl_count, cfg.tau)?;
    let manifold = scenario.manifold()?;
    let n_r = manifold.len();
    let freqs = cfg.subcarrier_frequencies();
    let stts_len = freqs.len() * n_r;
    let distances: Vec<f64> = plan.distances().collect();

    let mut data = vec![Complex32::new(0.0, 0.0); distances.len() * stts_len];
    data.par_chunks_mut(stts_len)
        .zip(distances.par_iter())
        .try_for_each(|(chunk, &d)| -> Result<(), SynthError> {
            let snap = snapshot_at(scenario, &manifold, d, &freqs)?;
            for (o, z) in chunk.iter_mut().zip(&snap) {
                *o = Complex32::new(z.re as f32, z.im as f32);
            }
            Ok(())
        })?;

    if let Some(snr_db) = scenario.snr_db {
        add_noise(&mut data, stts_len, snr_db, scenario.seed);
    }

    let mut meta = scenario.digest();
    meta.insert("units.distance".into(), "m".into());
    meta.insert("units.time".into(), "s".into());
    meta.insert("units.frequency".into(), "Hz".into());
    meta.insert("convention.azimuth".into(), "counterclockwise from boresight, (-pi, pi]".into());
    meta.insert("convention.layout".into(), "t-major, then subcarrier, then antenna".into());
    meta.insert("tool".into(), crate::tool_version());

    let header = TraceHeader {
        n_r,
        stts_count: plan.stts_count(),
        eval: cfg.clone(),
        anchor_distances: plan.anchor_distances(),
        meta,
    };
    ChannelTrace::new(header, data)
}

/// White complex Gaussian noise at `snr_db` below the mean coefficient
/// power. STTS `t` draws from its own keyed stream, so the result does not
/// depend on evaluation order.
fn add_noise(data: &mut [Complex32], stts_len: usize, snr_db: f64, seed: u64) {
    let power: f64 = data.iter().map(|z| z.norm_sqr() as f64).sum::<f64>() / data.len().max(1) as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    data.par_chunks_mut(stts_len).enumerate().for_each(|(t, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_6500_0000);
        rng.set_stream(t as u64);
        for z in chunk.iter_mut() {
            let w = complex_gaussian(&mut rng) * sigma;
            *z += Complex32::new(w.re as f32, w.im as f32);
        }
    });
}
