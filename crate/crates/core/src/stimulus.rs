//! Pressure stimuli: response families of the grid cells, time-dependent
//! perturbation of channel elements, and simulated measurement series.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{impedance, AdmittanceSystem, ComplexZ, EdgeElement, MaterialParams};
use crate::error::{Result, SkinError};
use crate::geometry::{edges_under_cell, CellId, ElectrodePair, Network, Point2, Segment};

/// GREEN ignores channels shorter than this (hub links), mm.
pub const HUB_LINK_MM: f64 = 25.0;
/// GREEN ignores channels passing this close to an active electrode, mm.
pub const ELECTRODE_INFLUENCE_MM: f64 = 30.0;
/// A component is featureless below this fraction of the dominant one.
pub const NO_FEATURE_RATIO: f64 = 0.2;
/// Kernel weights below this are treated as no coupling.
pub const MIN_WEIGHT: f64 = 1e-3;
/// Lower bound on any scaled element parameter, relative to rest.
const MIN_FACTOR: f64 = 0.05;

/// Response family of a press, named after the colour code of the
/// correspondence map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Red,
    Blue,
    Gradient,
    Green,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Red, Family::Blue, Family::Gradient, Family::Green];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Red => "RED",
            Family::Blue => "BLUE",
            Family::Gradient => "GRADIENT",
            Family::Green => "GREEN",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = SkinError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SkinError::field("family", format!("unknown family '{s}'")))
    }
}

/// Geometric facts about an electrode pair that the cell rules need.
#[derive(Debug, Clone)]
pub struct PairGeometry {
    pub corridor: Segment,
    pub path_edges: Vec<usize>,
    electrode_points: [Point2; 2],
}

impl PairGeometry {
    pub fn new(network: &Network, pair: ElectrodePair) -> Self {
        let a = network.electrode_node(pair.first);
        let b = network.electrode_node(pair.second);
        let electrode_points = [network.nodes[a].position, network.nodes[b].position];
        Self {
            corridor: Segment::new(electrode_points[0], electrode_points[1]),
            path_edges: network.shortest_path(a, b).unwrap_or_default(),
            electrode_points,
        }
    }

    /// A channel piece can pump if its channel is not a hub link and the
    /// piece stays clear of both active electrodes.
    fn pumps(&self, network: &Network, edge: usize, piece: &Segment) -> bool {
        network.edge_length_mm(edge) >= HUB_LINK_MM
            && self
                .electrode_points
                .iter()
                .all(|p| piece.distance_to_point(p) >= ELECTRODE_INFLUENCE_MM)
    }

    pub fn classify(&self, network: &Network, cell: CellId) -> Family {
        let rect = cell.rectangle();
        if self.corridor.clip_to_rect(&rect).is_some() {
            return Family::Gradient;
        }
        let under = edges_under_cell(network, cell);
        if under.iter().any(|(e, _)| self.path_edges.contains(e)) {
            return Family::Red;
        }
        if under.iter().any(|(e, piece)| self.pumps(network, *e, piece)) {
            return Family::Green;
        }
        Family::Blue
    }
}

/// Response family a press on `cell` produces when measuring through `pair`.
///
/// Rules in priority order: GRADIENT on the straight corridor between the
/// electrodes, RED over the shortest conductive path, GREEN over any other
/// pumpable channel, BLUE otherwise.
pub fn classify_cell_family(network: &Network, pair: ElectrodePair, cell: CellId) -> Family {
    PairGeometry::new(network, pair).classify(network, cell)
}

/// Family of each of the 320 cells, in `CellId::all()` order.
pub fn family_map(network: &Network, pair: ElectrodePair) -> Vec<(CellId, Family)> {
    let geometry = PairGeometry::new(network, pair);
    CellId::all()
        .map(|c| (c, geometry.classify(network, c)))
        .collect()
}

/// A weight placed on one cell for a time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Press {
    pub cell: CellId,
    #[serde(rename = "mass_g")]
    pub mass_g: f64,
    pub t_on: f64,
    pub t_off: f64,
}

impl Press {
    pub fn new(cell: CellId, mass_g: f64, t_on: f64, t_off: f64) -> Result<Self> {
        let p = Self {
            cell,
            mass_g,
            t_on,
            t_off,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_g > 0.0 && self.mass_g.is_finite()) {
            return Err(SkinError::field("mass_g", format!("must be positive, got {}", self.mass_g)));
        }
        if !(self.t_on.is_finite() && self.t_off.is_finite() && self.t_on < self.t_off) {
            return Err(SkinError::field(
                "tOff",
                format!("need tOn < tOff, got {} and {}", self.t_on, self.t_off),
            ));
        }
        Ok(())
    }
}

/// Multiplicative sensitivities per 100 g and the press dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PerturbCoeffs {
    /// RED: resistance factor of channels under the press.
    pub path_resistance_factor: f64,
    /// GRADIENT: resistance factor of the squeezed channels.
    pub squeeze_resistance_factor: f64,
    /// GRADIENT: plane-capacitance factor of the squeezed channels.
    pub squeeze_capacitance_factor: f64,
    /// GREEN: inductance factor of pumped channels.
    pub pump_inductance_factor: f64,
    /// BLUE (and the reactive part of GRADIENT): inductance factor.
    pub inductance_factor: f64,
    /// Exponential rise and fall time constant of a press, s.
    pub time_constant_s: f64,
    /// Decay length of the family response beyond the cell, mm.
    pub spread_mm: f64,
    /// BLUE and GREEN: resistance factor of the locally compressed channels.
    pub footprint_resistance_factor: f64,
    /// RED: inductance factor of the locally compressed channels.
    pub footprint_inductance_factor: f64,
    /// Decay length of the local compression beyond the cell, mm.
    pub footprint_spread_mm: f64,
    /// Global scale on every sensitivity (skin hardness).
    pub hardness_scale: f64,
    /// Fraction of a press's effect that remains after release.
    pub residual_fraction: f64,
    /// Relative amplification of each press per 100 g of other presses held.
    pub coupling: f64,
}

impl Default for PerturbCoeffs {
    fn default() -> Self {
        Self {
            path_resistance_factor: 0.97,
            squeeze_resistance_factor: 1.05,
            squeeze_capacitance_factor: 1.10,
            pump_inductance_factor: 0.2,
            inductance_factor: 2.0,
            time_constant_s: 0.3,
            spread_mm: 60.0,
            footprint_resistance_factor: 1.05,
            footprint_inductance_factor: 1.12,
            footprint_spread_mm: 8.0,
            hardness_scale: 1.0,
            residual_fraction: 0.0,
            coupling: 0.0,
        }
    }
}

impl PerturbCoeffs {
    /// Coefficients under which presses change nothing.
    pub fn neutral() -> Self {
        Self {
            path_resistance_factor: 1.0,
            squeeze_resistance_factor: 1.0,
            squeeze_capacitance_factor: 1.0,
            pump_inductance_factor: 1.0,
            inductance_factor: 1.0,
            footprint_resistance_factor: 1.0,
            footprint_inductance_factor: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pathResistanceFactor", self.path_resistance_factor),
            ("squeezeResistanceFactor", self.squeeze_resistance_factor),
            ("squeezeCapacitanceFactor", self.squeeze_capacitance_factor),
            ("pumpInductanceFactor", self.pump_inductance_factor),
            ("inductanceFactor", self.inductance_factor),
            ("timeConstantS", self.time_constant_s),
            ("spreadMm", self.spread_mm),
            ("footprintResistanceFactor", self.footprint_resistance_factor),
            ("footprintInductanceFactor", self.footprint_inductance_factor),
            ("footprintSpreadMm", self.footprint_spread_mm),
            ("hardnessScale", self.hardness_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SkinError::field(name, format!("must be finite and positive, got {v}")));
            }
        }
        for (name, v) in [("residualFraction", self.residual_fraction), ("coupling", self.coupling)] {
            if !v.is_finite() {
                return Err(SkinError::field(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Fraction of full load reached by a press at time `t` (0 before the
    /// press, exponential approach to 1 while held, exponential decay after).
    pub fn activation(&self, press: &Press, t: f64) -> f64 {
        let tau = self.time_constant_s;
        if t < press.t_on {
            0.0
        } else if t < press.t_off {
            1.0 - (-(t - press.t_on) / tau).exp()
        } else {
            let at_release = 1.0 - (-(press.t_off - press.t_on) / tau).exp();
            at_release * (-(t - press.t_off) / tau).exp()
        }
    }

    /// Load level including the part that persists after release.
    fn level(&self, press: &Press, t: f64) -> f64 {
        let a = self.activation(press, t);
        if t < press.t_off || self.residual_fraction == 0.0 {
            return a;
        }
        let tau = self.time_constant_s;
        let at_release = 1.0 - (-(press.t_off - press.t_on) / tau).exp();
        a + self.residual_fraction * at_release * (1.0 - (-(t - press.t_off) / tau).exp())
    }
}

/// Distance from a press on `cell` to every channel, mm; zero where the
/// widened channel overlaps the cell.
pub fn press_gaps(network: &Network, cell: CellId) -> Vec<(usize, f64)> {
    (0..network.edges.len())
        .map(|e| (e, network.channel_gap_mm(e, cell)))
        .collect()
}

fn kernel(gap: f64, spread: f64) -> f64 {
    let w = (-gap / spread).exp();
    if w < MIN_WEIGHT {
        0.0
    } else {
        w
    }
}

/// A press prepared against a network: family and footprint resolved.
#[derive(Debug, Clone)]
pub struct ResolvedPress {
    pub press: Press,
    pub family: Family,
    pub gaps: Vec<(usize, f64)>,
}

impl ResolvedPress {
    pub fn new(network: &Network, geometry: &PairGeometry, press: Press) -> Self {
        Self {
            family: geometry.classify(network, press.cell),
            gaps: press_gaps(network, press.cell),
            press,
        }
    }
}

fn scaled(factor: f64, strength: f64) -> f64 {
    (1.0 + (factor - 1.0) * strength).max(MIN_FACTOR)
}

/// Applies every press to the rest elements at time `t`.
///
/// The strength of a press on one channel is activation × kernel weight ×
/// mass/100 g × hardness. The family response and the local compression
/// have their own kernel lengths. Simultaneous presses multiply.
pub fn perturb_resolved(
    rest: &[EdgeElement],
    presses: &[ResolvedPress],
    coeffs: &PerturbCoeffs,
    t: f64,
) -> Vec<EdgeElement> {
    let mut out = rest.to_vec();
    let loads: Vec<f64> = presses
        .iter()
        .map(|p| coeffs.activation(&p.press, t) * p.press.mass_g / 100.0)
        .collect();
    let total_load: f64 = loads.iter().sum();
    for (i, p) in presses.iter().enumerate() {
        let level = coeffs.level(&p.press, t);
        if level == 0.0 {
            continue;
        }
        let boost = 1.0 + coeffs.coupling * (total_load - loads[i]);
        let base = level * p.press.mass_g / 100.0 * coeffs.hardness_scale * boost;
        for &(e, gap) in &p.gaps {
            let k = base * kernel(gap, coeffs.spread_mm);
            let kf = base * kernel(gap, coeffs.footprint_spread_mm);
            let el = &mut out[e];
            match p.family {
                Family::Blue | Family::Green => {
                    el.resistance *= scaled(coeffs.footprint_resistance_factor, kf)
                }
                Family::Red => el.inductance *= scaled(coeffs.footprint_inductance_factor, kf),
                Family::Gradient => {}
            }
            if k == 0.0 {
                continue;
            }
            match p.family {
                Family::Red => el.resistance *= scaled(coeffs.path_resistance_factor, k),
                Family::Gradient => {
                    el.resistance *= scaled(coeffs.squeeze_resistance_factor, k);
                    el.capacitance *= scaled(coeffs.squeeze_capacitance_factor, k);
                    el.inductance *= scaled(coeffs.inductance_factor, k);
                }
                Family::Green => el.inductance *= scaled(coeffs.pump_inductance_factor, k),
                Family::Blue => el.inductance *= scaled(coeffs.inductance_factor, k),
            }
        }
    }
    out
}

/// Elements of `network` at time `t` under a single press.
pub fn perturb(
    elements: &[EdgeElement],
    network: &Network,
    pair: ElectrodePair,
    press: &Press,
    coeffs: &PerturbCoeffs,
    t: f64,
) -> Vec<EdgeElement> {
    let geometry = PairGeometry::new(network, pair);
    let resolved = ResolvedPress::new(network, &geometry, *press);
    perturb_resolved(elements, &[resolved], coeffs, t)
}

/// Measurement noise and baseline drift added to simulated samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NoiseSettings {
    /// Standard deviation of white noise on R and on X, Ω.
    pub noise_std_ohm: f64,
    /// Linear drift rate on R and on X, Ω/s.
    pub drift_ohm_per_s: f64,
    /// Random-walk drift intensity, Ω/√s.
    pub random_walk_ohm_per_sqrt_s: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            noise_std_ohm: 0.02,
            drift_ohm_per_s: 0.005,
            random_walk_ohm_per_sqrt_s: 0.0,
        }
    }
}

impl NoiseSettings {
    pub const QUIET: NoiseSettings = NoiseSettings {
        noise_std_ohm: 0.0,
        drift_ohm_per_s: 0.0,
        random_walk_ohm_per_sqrt_s: 0.0,
    };

    /// Default white noise without drift.
    pub fn white() -> Self {
        Self {
            drift_ohm_per_s: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noiseStdOhm", self.noise_std_ohm),
            ("randomWalkOhmPerSqrtS", self.random_walk_ohm_per_sqrt_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SkinError::field(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if !self.drift_ohm_per_s.is_finite() {
            return Err(SkinError::field("driftOhmPerS", "must be finite"));
        }
        Ok(())
    }
}

/// Timed press schedule plus probe and acquisition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub presses: Vec<Press>,
    pub probe_frequency_hz: f64,
    pub probe_amplitude_v: f64,
    pub sample_period_s: f64,
    pub duration_s: f64,
    pub electrode_pair: ElectrodePair,
    pub noise: NoiseSettings,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            presses: Vec::new(),
            probe_frequency_hz: 1000.0,
            probe_amplitude_v: 0.1,
            sample_period_s: 0.2,
            duration_s: 10.0,
            electrode_pair: ElectrodePair::BL_C,
            noise: NoiseSettings::QUIET,
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_s > 0.0 && self.sample_period_s.is_finite()) {
            return Err(SkinError::field("samplePeriodS", "must be positive"));
        }
        if !(20.0..=2e6).contains(&self.probe_frequency_hz) {
            return Err(SkinError::field(
                "probeFrequencyHz",
                format!("must lie in [20, 2e6] Hz, got {}", self.probe_frequency_hz),
            ));
        }
        if !(self.probe_amplitude_v > 0.0 && self.probe_amplitude_v.is_finite()) {
            return Err(SkinError::field("probeAmplitudeV", "must be positive"));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(SkinError::field("durationS", "must be non-negative"));
        }
        for (i, p) in self.presses.iter().enumerate() {
            p.validate().map_err(|e| match e {
                SkinError::InvalidField { field, message } => {
                    SkinError::field(format!("presses[{i}].{field}"), message)
                }
                other => other,
            })?;
        }
        self.noise.validate()
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s / self.sample_period_s + 1e-9).floor() as usize + 1
    }

    /// Scenario time of sample `i`.
    pub fn sample_time(&self, i: usize) -> f64 {
        i as f64 * self.sample_period_s
    }
}

/// Uniformly sampled impedance at a fixed probe frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeSeries {
    pub t0_s: f64,
    pub sample_period_s: f64,
    pub samples: Vec<ComplexZ>,
    pub probe_frequency_hz: f64,
    pub probe_amplitude_v: f64,
}

impl TimeSeries {
    pub fn new(t0_s: f64, sample_period_s: f64, samples: Vec<ComplexZ>) -> Self {
        Self {
            t0_s,
            sample_period_s,
            samples,
            probe_frequency_hz: 1000.0,
            probe_amplitude_v: 0.1,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0_s + i as f64 * self.sample_period_s
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn resistance(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.resistance).collect()
    }

    pub fn reactance(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.reactance).collect()
    }

    /// Copy with `offset` subtracted from every sample.
    pub fn minus(&self, offset: ComplexZ) -> TimeSeries {
        TimeSeries {
            samples: self.samples.iter().map(|&z| z - offset).collect(),
            ..self.clone()
        }
    }
}

/// Simulator for one network, material and coefficient set.
#[derive(Debug, Clone)]
pub struct SkinModel {
    pub network: Network,
    pub material: MaterialParams,
    pub coeffs: PerturbCoeffs,
    system: AdmittanceSystem,
}

impl SkinModel {
    pub fn new(network: Network, material: MaterialParams, coeffs: PerturbCoeffs) -> Result<Self> {
        coeffs.validate()?;
        let system = AdmittanceSystem::from_network(&network, &material)?;
        Ok(Self {
            network,
            material,
            coeffs,
            system,
        })
    }

    pub fn system(&self) -> &AdmittanceSystem {
        &self.system
    }

    pub fn with_coeffs(&self, coeffs: PerturbCoeffs) -> Result<Self> {
        coeffs.validate()?;
        Ok(Self {
            coeffs,
            ..self.clone()
        })
    }

    pub fn rest_impedance(&self, pair: ElectrodePair, freq_hz: f64) -> Result<ComplexZ> {
        impedance(&self.system, pair, freq_hz)
    }

    pub fn resolve(&self, pair: ElectrodePair, presses: &[Press]) -> Vec<ResolvedPress> {
        let geometry = PairGeometry::new(&self.network, pair);
        presses
            .iter()
            .map(|&p| ResolvedPress::new(&self.network, &geometry, p))
            .collect()
    }

    /// Noiseless impedance at time `t` under resolved presses.
    pub fn impedance_at(
        &self,
        pair: ElectrodePair,
        freq_hz: f64,
        presses: &[ResolvedPress],
        t: f64,
    ) -> Result<ComplexZ> {
        let elements = perturb_resolved(&self.system.elements, presses, &self.coeffs, t);
        impedance(&self.system.with_elements(elements), pair, freq_hz)
    }

    /// Change from rest of a single press held at full load.
    pub fn steady_signature(&self, pair: ElectrodePair, freq_hz: f64, cell: CellId, mass_g: f64) -> Result<ComplexZ> {
        let press = Press {
            cell,
            mass_g,
            t_on: f64::NEG_INFINITY,
            t_off: f64::INFINITY,
        };
        let resolved = self.resolve(pair, &[press]);
        let mut held = resolved[0].clone();
        held.press.t_on = 0.0;
        held.press.t_off = f64::INFINITY;
        let elements = {
            let mut coeffs = self.coeffs;
            coeffs.coupling = 0.0;
            perturb_full(&self.system.elements, &held, &coeffs)
        };
        let z = impedance(&self.system.with_elements(elements), pair, freq_hz)?;
        Ok(z - self.rest_impedance(pair, freq_hz)?)
    }

    /// Simulates `scenario`: noiseless samples are solved in parallel, then
    /// seeded drift and noise are added in sample order.
    pub fn simulate(&self, scenario: &Scenario) -> Result<TimeSeries> {
        scenario.validate()?;
        let pair = scenario.electrode_pair;
        let presses = self.resolve(pair, &scenario.presses);
        let n = scenario.sample_count();
        let clean: Vec<ComplexZ> = (0..n)
            .into_par_iter()
            .map(|i| {
                let t = scenario.sample_time(i);
                self.impedance_at(pair, scenario.probe_frequency_hz, &presses, t)
                    .map_err(|e| SkinError::AtTime {
                        t_s: t,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        let samples = add_noise(&clean, scenario);
        Ok(TimeSeries {
            t0_s: 0.0,
            sample_period_s: scenario.sample_period_s,
            samples,
            probe_frequency_hz: scenario.probe_frequency_hz,
            probe_amplitude_v: scenario.probe_amplitude_v,
        })
    }
}

fn perturb_full(rest: &[EdgeElement], press: &ResolvedPress, coeffs: &PerturbCoeffs) -> Vec<EdgeElement> {
    let mut coeffs = *coeffs;
    // Full load: the activation ramp is skipped.
    coeffs.time_constant_s = f64::MIN_POSITIVE;
    perturb_resolved(rest, std::slice::from_ref(press), &coeffs, 1.0)
}

fn add_noise(clean: &[ComplexZ], scenario: &Scenario) -> Vec<ComplexZ> {
    let mut source = NoiseSource::new(scenario.noise, scenario.seed, scenario.sample_period_s);
    clean
        .iter()
        .enumerate()
        .map(|(i, &z)| source.apply(scenario.sample_time(i), z))
        .collect()
}

/// Seeded drift and noise generator applied one sample at a time, in order.
/// Feeding it the samples of a scenario reproduces `SkinModel::simulate`.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    settings: NoiseSettings,
    rng: ChaCha8Rng,
    white: Normal<f64>,
    step: Normal<f64>,
    walk: (f64, f64),
    started: bool,
}

impl NoiseSource {
    /// `settings` must already be validated.
    pub fn new(settings: NoiseSettings, seed: u64, sample_period_s: f64) -> Self {
        Self {
            settings,
            rng: ChaCha8Rng::seed_from_u64(seed),
            white: Normal::new(0.0, settings.noise_std_ohm).expect("validated std"),
            step: Normal::new(0.0, settings.random_walk_ohm_per_sqrt_s * sample_period_s.sqrt())
                .expect("validated std"),
            walk: (0.0, 0.0),
            started: false,
        }
    }

    /// Noisy version of the next sample `z`, taken at time `t`.
    pub fn apply(&mut self, t: f64, z: ComplexZ) -> ComplexZ {
        if self.started {
            self.walk.0 += self.step.sample(&mut self.rng);
            self.walk.1 += self.step.sample(&mut self.rng);
        }
        self.started = true;
        let drift = self.settings.drift_ohm_per_s * t;
        ComplexZ::new(
            z.resistance + drift + self.walk.0 + self.white.sample(&mut self.rng),
            z.reactance + drift + self.walk.1 + self.white.sample(&mut self.rng),
        )
    }
}

pub fn simulate_scenario(
    network: &Network,
    material: &MaterialParams,
    coeffs: &PerturbCoeffs,
    scenario: &Scenario,
) -> Result<TimeSeries> {
    SkinModel::new(network.clone(), *material, *coeffs)?.simulate(scenario)
}

fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    (my - slope * mt, slope)
}

/// Removes a linear baseline fitted (separately for R and X) to the samples
/// inside the quiescent windows.
pub fn subtract_drift(series: &TimeSeries, quiescent_windows: &[(f64, f64)]) -> Result<TimeSeries> {
    let tol = 1e-9 * series.sample_period_s;
    let inside: Vec<usize> = (0..series.len())
        .filter(|&i| {
            let t = series.time(i);
            quiescent_windows
                .iter()
                .any(|&(a, b)| t >= a - tol && t <= b + tol)
        })
        .collect();
    if inside.len() < 2 {
        return Err(SkinError::InsufficientBaseline(format!(
            "{} quiescent samples, need at least 2",
            inside.len()
        )));
    }
    let r: Vec<(f64, f64)> = inside
        .iter()
        .map(|&i| (series.time(i), series.samples[i].resistance))
        .collect();
    let x: Vec<(f64, f64)> = inside
        .iter()
        .map(|&i| (series.time(i), series.samples[i].reactance))
        .collect();
    let (r0, r1) = linear_fit(&r);
    let (x0, x1) = linear_fit(&x);
    let samples = series
        .samples
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let t = series.time(i);
            ComplexZ::new(z.resistance - (r0 + r1 * t), z.reactance - (x0 + x1 * t))
        })
        .collect();
    Ok(TimeSeries {
        samples,
        ..series.clone()
    })
}
