//! Event detection in drift-corrected impedance series, family
//! classification of event signatures, and inverse localization against a
//! table of forward signatures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::ComplexZ;
use crate::error::{Result, SkinError};
use crate::geometry::{CellId, ElectrodePair};
use crate::stimulus::{Family, PairGeometry, SkinModel, TimeSeries, NO_FEATURE_RATIO};

/// Default detection threshold on |ΔR| or |ΔX|, Ω.
pub const DEFAULT_THRESHOLD_OHM: f64 = 0.1;
/// Events closer than this are merged, s.
pub const DEFAULT_MIN_SEPARATION_S: f64 = 1.0;
/// Width of the centred moving average applied before detection, s.
pub const SMOOTHING_WINDOW_S: f64 = 1.0;
/// Load used for the forward signatures, g.
pub const REFERENCE_MASS_G: f64 = 100.0;

/// A detected excursion of the corrected series away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub t_start: f64,
    pub t_end: f64,
    pub t_peak: f64,
    pub delta_r: f64,
    pub delta_x: f64,
    pub width_s: f64,
}

impl Event {
    pub fn delta(&self) -> ComplexZ {
        ComplexZ::new(self.delta_r, self.delta_x)
    }
}

fn smoothing_samples(period: f64) -> usize {
    let n = (SMOOTHING_WINDOW_S / period).round().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Centred moving average; the window shrinks at the ends of the series.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut prefix = vec![0.0; values.len() + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Index of the value with the largest magnitude in `idx`.
fn signed_extremum(values: &[f64], idx: std::ops::Range<usize>) -> usize {
    idx.max_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
        .expect("non-empty range")
}

/// Finds excursions of a drift-corrected series.
///
/// The series is smoothed over about one second. A sample is active when
/// either smoothed component exceeds `threshold`; active runs separated by
/// less than `min_separation_s` are merged. Each event reports the signed
/// extrema of the smoothed R and X within its run.
pub fn detect_events(series: &TimeSeries, threshold: f64, min_separation_s: f64) -> Result<Vec<Event>> {
    if series.len() < 3 {
        return Err(SkinError::InsufficientData(format!(
            "{} samples, need at least 3",
            series.len()
        )));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(SkinError::field("threshold", "must be positive"));
    }
    if !(min_separation_s >= 0.0 && min_separation_s.is_finite()) {
        return Err(SkinError::field("minSeparation", "must be non-negative"));
    }
    let window = smoothing_samples(series.sample_period_s);
    let r = moving_average(&series.resistance(), window);
    let x = moving_average(&series.reactance(), window);
    let active: Vec<bool> = r
        .iter()
        .zip(&x)
        .map(|(a, b)| a.abs() > threshold || b.abs() > threshold)
        .collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < active.len() {
        if !active[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < active.len() && active[i] {
            i += 1;
        }
        let end = i - 1;
        match runs.last_mut() {
            Some(last) if series.time(start) - series.time(last.1) < min_separation_s => last.1 = end,
            _ => runs.push((start, end)),
        }
    }

    Ok(runs
        .into_iter()
        .map(|(start, end)| {
            let ir = signed_extremum(&r, start..end + 1);
            let ix = signed_extremum(&x, start..end + 1);
            let peak = if r[ir].abs() >= x[ix].abs() { ir } else { ix };
            Event {
                t_start: series.time(start),
                t_end: series.time(end),
                t_peak: series.time(peak),
                delta_r: r[ir],
                delta_x: x[ix],
                width_s: (end - start + 1) as f64 * series.sample_period_s,
            }
        })
        .collect())
}

/// Maps a signature to its family.
///
/// The dominant component is the larger in magnitude (reactance on ties);
/// the other is featureless below 20 % of it. GRADIENT needs both positive
/// and featured, RED a dominant negative ΔR, GREEN and BLUE a dominant ΔX
/// (negative, positive) with featureless ΔR.
pub fn classify_signature(delta_r: f64, delta_x: f64) -> Result<Family> {
    let unclassifiable = SkinError::UnclassifiableEvent { delta_r, delta_x };
    if !(delta_r.is_finite() && delta_x.is_finite()) {
        return Err(unclassifiable);
    }
    let dominant = delta_r.abs().max(delta_x.abs());
    if dominant == 0.0 {
        return Err(unclassifiable);
    }
    let featured = |v: f64| v.abs() >= NO_FEATURE_RATIO * dominant;
    let reactive = delta_x.abs() >= delta_r.abs();
    if delta_r > 0.0 && delta_x > 0.0 && featured(delta_r) && featured(delta_x) {
        Ok(Family::Gradient)
    } else if !reactive && delta_r < 0.0 {
        Ok(Family::Red)
    } else if reactive && !featured(delta_r) {
        Ok(if delta_x < 0.0 { Family::Green } else { Family::Blue })
    } else {
        Err(unclassifiable)
    }
}

pub fn classify_event(event: &Event) -> Result<Family> {
    classify_signature(event.delta_r, event.delta_x)
}

/// Forward signature of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellSignature {
    pub cell: CellId,
    pub family: Family,
    pub delta: ComplexZ,
}

/// Steady-state response of a reference press on every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SignatureTable {
    pub electrode_pair: ElectrodePair,
    pub probe_frequency_hz: f64,
    pub mass_g: f64,
    pub cells: Vec<CellSignature>,
}

impl SignatureTable {
    pub fn build(model: &SkinModel, pair: ElectrodePair, freq_hz: f64, mass_g: f64) -> Result<Self> {
        let geometry = PairGeometry::new(&model.network, pair);
        let all: Vec<CellId> = CellId::all().collect();
        let cells = all
            .par_iter()
            .map(|&cell| {
                Ok(CellSignature {
                    cell,
                    family: geometry.classify(&model.network, cell),
                    delta: model.steady_signature(pair, freq_hz, cell, mass_g)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            electrode_pair: pair,
            probe_frequency_hz: freq_hz,
            mass_g,
            cells,
        })
    }

    pub fn get(&self, cell: CellId) -> Option<&CellSignature> {
        self.cells.iter().find(|c| c.cell == cell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cell: CellId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalizationResult {
    pub family: Family,
    pub candidates: Vec<Candidate>,
}

impl LocalizationResult {
    pub fn top(&self, k: usize) -> &[Candidate] {
        &self.candidates[..k.min(self.candidates.len())]
    }

    pub fn rank_of(&self, cell: CellId) -> Option<usize> {
        self.candidates.iter().position(|c| c.cell == cell)
    }
}

/// Ranks the cells of the event's family by closeness of their forward
/// signature.
///
/// Score is 1 / (1 + |event − signature| / |event|), so an exact match
/// scores 1 and the ranking follows Euclidean distance in the (ΔR, ΔX)
/// plane. Ties keep cell order.
pub fn localize(event: &Event, table: &SignatureTable) -> Result<LocalizationResult> {
    let family = classify_event(event)?;
    let e = event.delta();
    let scale = e.modulus();
    let mut candidates: Vec<Candidate> = table
        .cells
        .iter()
        .filter(|c| c.family == family)
        .map(|c| Candidate {
            cell: c.cell,
            score: 1.0 / (1.0 + (e - c.delta).modulus() / scale),
        })
        .collect();
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.cell.cmp(&b.cell)));
    Ok(LocalizationResult { family, candidates })
}
