//! Live sessions: a model snapshot, the presses acknowledged so far and an
//! append-only series advanced by a clock.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use lqskin_core::circuit::{ComplexZ, MaterialParams};
use lqskin_core::geometry::{CellId, ElectrodePair, Network};
use lqskin_core::stimulus::{NoiseSettings, NoiseSource, PerturbCoeffs, Press, SkinModel};
use lqskin_core::{Result, SkinError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Monotonic time source. Tests drive sessions with [`ManualClock`].
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

#[derive(Default, Clone)]
pub struct ManualClock(Arc<Mutex<Duration>>);

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.0.lock().unwrap()
    }
}

/// Settings accepted when a session is created; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct SessionConfig {
    pub seed: u64,
    pub electrode_pair: ElectrodePair,
    pub sample_period_s: f64,
    pub probe_frequency_hz: f64,
    pub noise: NoiseSettings,
    pub coeffs: PerturbCoeffs,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            electrode_pair: ElectrodePair::BL_C,
            sample_period_s: 0.2,
            probe_frequency_hz: 1000.0,
            noise: NoiseSettings::default(),
            coeffs: PerturbCoeffs::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_s.is_finite() && self.sample_period_s >= 0.01) {
            return Err(invalid("samplePeriodS", "must be at least 0.01 s"));
        }
        if !(self.probe_frequency_hz.is_finite() && self.probe_frequency_hz > 0.0) {
            return Err(invalid("probeFrequencyHz", "must be positive"));
        }
        self.noise.validate()?;
        self.coeffs.validate()
    }
}

fn invalid(field: &str, message: &str) -> SkinError {
    SkinError::InvalidField {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PressAction {
    Down,
    Up,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct PressAck {
    pub cell: CellId,
    #[serde(rename = "mass_g")]
    pub mass_g: f64,
    pub action: PressAction,
    /// Session time the press takes effect, quantized to the sample period.
    pub t_s: f64,
    /// Index of the first sample that can see the change.
    pub sample_index: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SamplePoint {
    pub index: usize,
    pub t_s: f64,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SeriesPage {
    pub since_sample: usize,
    /// Number of samples available; the next page starts here.
    pub head: usize,
    pub sample_period_s: f64,
    pub probe_frequency_hz: f64,
    pub electrode_pair: ElectrodePair,
    pub samples: Vec<SamplePoint>,
}

pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub model: Arc<SkinModel>,
    created: Duration,
    presses: Vec<Press>,
    samples: Vec<ComplexZ>,
    noise: NoiseSource,
}

impl Session {
    pub fn new(id: String, network: Network, config: SessionConfig, created: Duration) -> Result<Self> {
        config.validate()?;
        let model = SkinModel::new(network, MaterialParams::default(), config.coeffs)?;
        Ok(Self {
            id,
            noise: NoiseSource::new(config.noise, config.seed, config.sample_period_s),
            config,
            model: Arc::new(model),
            created,
            presses: Vec::new(),
            samples: Vec::new(),
        })
    }

    fn elapsed_s(&self, now: Duration) -> f64 {
        now.saturating_sub(self.created).as_secs_f64()
    }

    /// Index of the last sample whose time has been reached.
    fn current_index(&self, now: Duration) -> usize {
        // Small slack so a clock landing exactly on a sample boundary counts.
        ((self.elapsed_s(now) + 1e-9) / self.config.sample_period_s).floor() as usize
    }

    /// Appends every sample up to `now`.
    pub fn advance(&mut self, now: Duration) -> Result<()> {
        let head = self.current_index(now) + 1;
        if head <= self.samples.len() {
            return Ok(());
        }
        let pair = self.config.electrode_pair;
        let freq = self.config.probe_frequency_hz;
        let period = self.config.sample_period_s;
        let resolved = self.model.resolve(pair, &self.presses);
        let model = &self.model;
        let clean: Vec<ComplexZ> = (self.samples.len()..head)
            .into_par_iter()
            .map(|i| model.impedance_at(pair, freq, &resolved, i as f64 * period))
            .collect::<Result<_>>()?;
        let start = self.samples.len();
        for (k, z) in clean.into_iter().enumerate() {
            let t = (start + k) as f64 * period;
            self.samples.push(self.noise.apply(t, z));
        }
        Ok(())
    }

    /// Registers a press at the current quantized time. Samples up to that
    /// time are fixed first so the series stays append-only.
    pub fn press(&mut self, cell: CellId, mass_g: f64, action: PressAction, now: Duration) -> Result<PressAck> {
        if !(mass_g.is_finite() && mass_g > 0.0) {
            return Err(invalid("mass_g", "must be positive"));
        }
        self.advance(now)?;
        let index = self.current_index(now);
        let t = index as f64 * self.config.sample_period_s;
        let held = self.presses.iter_mut().find(|p| p.cell == cell && p.t_off.is_infinite());
        match (action, held) {
            (PressAction::Down, Some(_)) => return Err(invalid("cell", &format!("{cell} is already held"))),
            (PressAction::Down, None) => self.presses.push(Press {
                cell,
                mass_g,
                t_on: t,
                t_off: f64::INFINITY,
            }),
            (PressAction::Up, Some(p)) => p.t_off = t,
            (PressAction::Up, None) => return Err(invalid("cell", &format!("{cell} is not held"))),
        }
        Ok(PressAck {
            cell,
            mass_g,
            action,
            t_s: t,
            sample_index: index + 1,
        })
    }

    pub fn page(&mut self, since: usize, now: Duration) -> Result<SeriesPage> {
        self.advance(now)?;
        let period = self.config.sample_period_s;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .skip(since)
            .map(|(index, z)| SamplePoint {
                index,
                t_s: index as f64 * period,
                r_ohm: z.resistance,
                x_ohm: z.reactance,
            })
            .collect();
        Ok(SeriesPage {
            since_sample: since,
            head: self.samples.len(),
            sample_period_s: period,
            probe_frequency_hz: self.config.probe_frequency_hz,
            electrode_pair: self.config.electrode_pair,
            samples,
        })
    }

    pub fn held_cells(&self) -> Vec<CellId> {
        self.presses.iter().filter(|p| p.t_off.is_infinite()).map(|p| p.cell).collect()
    }
}

/// Concurrent session map. Each session sits behind its own lock so one
/// busy session does not block the others.
pub struct SessionStore {
    pub network: Network,
    pub clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: Mutex<u64>,
}

impl SessionStore {
    pub fn new(network: Network, clock: Arc<dyn Clock>) -> Self {
        Self {
            network,
            clock,
            sessions: RwLock::new(HashMap::new()),
            next_id: Mutex::new(1),
        }
    }

    pub fn now(&self) -> Duration {
        self.clock.now()
    }

    pub fn create(&self, config: SessionConfig) -> Result<String> {
        let id = {
            let mut next = self.next_id.lock().unwrap();
            let id = format!("s{:08x}", *next);
            *next += 1;
            id
        };
        let session = Session::new(id.clone(), self.network.clone(), config, self.now())?;
        self.sessions.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().unwrap().get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions.write().unwrap().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
