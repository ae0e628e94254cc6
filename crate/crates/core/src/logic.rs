//! Two-cell multi-touch protocol, threshold Boolean readout and calibration
//! of perturbation coefficients to target output levels.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SkinError};
use crate::geometry::{CellId, ElectrodePair};
use crate::stimulus::{NoiseSettings, PerturbCoeffs, Press, Scenario, SkinModel, TimeSeries};

/// Fraction of each phase, at its end, treated as steady.
pub const STEADY_FRACTION: f64 = 0.6;
/// Forward evaluations allowed to `calibrate` by default.
pub const DEFAULT_BUDGET: usize = 5000;

/// Differential reactance for each input combination, Ω. `O_xy` has x for
/// cell A and y for cell B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateOutputs {
    #[serde(rename = "O00")]
    pub o00: f64,
    #[serde(rename = "O01")]
    pub o01: f64,
    #[serde(rename = "O10")]
    pub o10: f64,
    #[serde(rename = "O11")]
    pub o11: f64,
    /// Standard deviations in the same order.
    #[serde(default)]
    pub uncertainties: [f64; 4],
}

impl GateOutputs {
    pub fn new(o00: f64, o01: f64, o10: f64, o11: f64) -> Self {
        Self {
            o00,
            o01,
            o10,
            o11,
            uncertainties: [0.0; 4],
        }
    }

    /// Levels published for the two-cell experiment.
    pub fn reference_levels() -> Self {
        Self::new(-1.03, 5.79, 0.13, 8.03)
    }

    /// Levels in (00, 01, 10, 11) order.
    pub fn levels(&self) -> [f64; 4] {
        [self.o00, self.o01, self.o10, self.o11]
    }

    pub fn max_abs_difference(&self, other: &GateOutputs) -> f64 {
        self.levels()
            .iter()
            .zip(other.levels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// True when every pair of levels is further apart than the sum of
    /// their uncertainties times `k`.
    pub fn separable(&self, k: f64) -> bool {
        let l = self.levels();
        (0..4).all(|i| {
            (i + 1..4).all(|j| (l[i] - l[j]).abs() > k * (self.uncertainties[i] + self.uncertainties[j]))
        })
    }
}

/// Boolean function of two inputs, stored as f(0,0), f(0,1), f(1,0), f(1,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruthTable(pub [bool; 4]);

impl TruthTable {
    pub const CONST_0: TruthTable = TruthTable([false; 4]);
    pub const CONST_1: TruthTable = TruthTable([true; 4]);
    pub const AND: TruthTable = TruthTable([false, false, false, true]);
    pub const OR: TruthTable = TruthTable([false, true, true, true]);
    pub const X: TruthTable = TruthTable([false, false, true, true]);
    pub const Y: TruthTable = TruthTable([false, true, false, true]);

    pub fn eval(&self, x: bool, y: bool) -> bool {
        self.0[(x as usize) << 1 | y as usize]
    }

    pub fn name(&self) -> &'static str {
        match self.0 {
            [false, false, false, false] => "const-0",
            [true, true, true, true] => "const-1",
            [false, false, false, true] => "AND",
            [false, true, true, true] => "OR",
            [false, false, true, true] => "x",
            [false, true, false, true] => "y",
            [true, true, false, false] => "NOT x",
            [true, false, true, false] => "NOT y",
            [false, true, true, false] => "XOR",
            [true, false, false, true] => "XNOR",
            [true, true, true, false] => "NAND",
            [true, false, false, false] => "NOR",
            [false, false, true, false] => "x AND NOT y",
            [false, true, false, false] => "y AND NOT x",
            [true, false, true, true] => "x OR NOT y",
            [true, true, false, true] => "y OR NOT x",
        }
    }

    /// Two-row grid: y across, x down.
    pub fn grid(&self) -> String {
        let b = |v: bool| if v { '1' } else { '0' };
        format!(
            "      y=0 y=1\nx=0    {}   {}\nx=1    {}   {}\n",
            b(self.0[0]),
            b(self.0[1]),
            b(self.0[2]),
            b(self.0[3])
        )
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// f(x, y) = 1 exactly when O_xy > T.
pub fn threshold_gate(outputs: &GateOutputs, threshold: f64) -> TruthTable {
    TruthTable(outputs.levels().map(|o| o > threshold))
}

/// Every table `threshold_gate` can produce as T runs over the reals.
pub fn realizable_gates(outputs: &GateOutputs) -> BTreeSet<TruthTable> {
    let mut levels = outputs.levels().to_vec();
    levels.sort_by(f64::total_cmp);
    let mut thresholds = vec![levels[0] - 1.0, levels[3]];
    thresholds.extend(levels.windows(2).filter(|w| w[0] < w[1]).map(|w| 0.5 * (w[0] + w[1])));
    thresholds.into_iter().map(|t| threshold_gate(outputs, t)).collect()
}

/// Timing and acquisition of the four-phase protocol: rest, A down, B down,
/// A up, B up, rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Protocol {
    pub rest_s: f64,
    pub phase_s: f64,
    pub sample_period_s: f64,
    pub probe_frequency_hz: f64,
    #[serde(rename = "mass_g")]
    pub mass_g: f64,
    pub noise: NoiseSettings,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            rest_s: 5.0,
            phase_s: 5.0,
            sample_period_s: 0.2,
            probe_frequency_hz: 1000.0,
            mass_g: 100.0,
            noise: NoiseSettings::QUIET,
            seed: 0,
        }
    }
}

impl Protocol {
    fn press_times(&self) -> [f64; 4] {
        let t1 = self.rest_s;
        [t1, t1 + self.phase_s, t1 + 2.0 * self.phase_s, t1 + 3.0 * self.phase_s]
    }

    pub fn duration_s(&self) -> f64 {
        self.rest_s * 2.0 + self.phase_s * 3.0
    }

    pub fn scenario(&self, pair: ElectrodePair, cell_a: CellId, cell_b: CellId) -> Scenario {
        let [a_on, b_on, a_off, b_off] = self.press_times();
        Scenario {
            presses: vec![
                Press {
                    cell: cell_a,
                    mass_g: self.mass_g,
                    t_on: a_on,
                    t_off: a_off,
                },
                Press {
                    cell: cell_b,
                    mass_g: self.mass_g,
                    t_on: b_on,
                    t_off: b_off,
                },
            ],
            probe_frequency_hz: self.probe_frequency_hz,
            sample_period_s: self.sample_period_s,
            duration_s: self.duration_s(),
            electrode_pair: pair,
            noise: self.noise,
            seed: self.seed,
            ..Scenario::default()
        }
    }

    /// Steady windows as (start, end) in time, ordered: pre rest, phase 1
    /// (A), phase 2 (A and B), phase 3 (B), post rest.
    pub fn windows(&self) -> [(f64, f64); 5] {
        let [t1, t2, t3, t4] = self.press_times();
        let steady = |start: f64, len: f64| (start + (1.0 - STEADY_FRACTION) * len, start + len);
        [
            steady(0.0, self.rest_s),
            steady(t1, self.phase_s),
            steady(t2, self.phase_s),
            steady(t3, self.phase_s),
            steady(t4, self.rest_s),
        ]
    }

    /// Sample indices inside each steady window; end points are excluded so
    /// that no sample straddles a transition.
    fn window_indices(&self) -> Result<[Vec<usize>; 5]> {
        let dt = self.sample_period_s;
        let n = (self.duration_s() / dt + 1e-9).floor() as usize + 1;
        let tol = 1e-9 * dt;
        let windows = self.windows();
        let idx = windows.map(|(a, b)| {
            (0..n)
                .filter(|&i| {
                    let t = i as f64 * dt;
                    t >= a - tol && t < b - tol
                })
                .collect::<Vec<_>>()
        });
        if let Some(k) = idx.iter().position(|w| w.len() < 2) {
            return Err(SkinError::ProtocolWindow(format!(
                "steady window {k} [{:.3}, {:.3}) s holds {} samples at {} s spacing, need at least 2",
                windows[k].0,
                windows[k].1,
                idx[k].len(),
                dt
            )));
        }
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("restS", self.rest_s),
            ("phaseS", self.phase_s),
            ("samplePeriodS", self.sample_period_s),
            ("mass_g", self.mass_g),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SkinError::field(name, format!("must be positive, got {v}")));
            }
        }
        self.noise.validate()?;
        self.window_indices().map(|_| ())
    }
}

/// Result of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MultitouchRun {
    pub outputs: GateOutputs,
    /// Mean reactance of the pre-experiment rest, Ω (absolute).
    pub pre_rest_reactance: f64,
    /// Post-rest level relative to the pre-rest level; equals `outputs.o00`.
    pub post_rest_level: f64,
    pub series: TimeSeries,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Runs the four-phase protocol on cells A and B and extracts the output
/// levels from the steady windows, relative to the pre-experiment rest.
pub fn run_multitouch(
    model: &SkinModel,
    pair: ElectrodePair,
    cell_a: CellId,
    cell_b: CellId,
    protocol: &Protocol,
) -> Result<MultitouchRun> {
    if cell_a == cell_b {
        return Err(SkinError::field("cellB", format!("must differ from cellA ({cell_a})")));
    }
    protocol.validate()?;
    let windows = protocol.window_indices()?;
    let series = model.simulate(&protocol.scenario(pair, cell_a, cell_b))?;
    let stats: Vec<(f64, f64)> = windows
        .iter()
        .map(|w| mean_std(w.iter().map(|&i| series.samples[i].reactance)))
        .collect();
    let base = stats[0].0;
    let mut outputs = GateOutputs::new(
        stats[4].0 - base,
        stats[3].0 - base,
        stats[1].0 - base,
        stats[2].0 - base,
    );
    outputs.uncertainties = [stats[4].1, stats[3].1, stats[1].1, stats[2].1];
    Ok(MultitouchRun {
        outputs,
        pre_rest_reactance: base,
        post_rest_level: outputs.o00,
        series,
    })
}

/// Noiseless output levels, computed from the steady-window samples only.
pub fn protocol_levels(
    model: &SkinModel,
    pair: ElectrodePair,
    cell_a: CellId,
    cell_b: CellId,
    protocol: &Protocol,
) -> Result<GateOutputs> {
    let windows = protocol.window_indices()?;
    let scenario = protocol.scenario(pair, cell_a, cell_b);
    let presses = model.resolve(pair, &scenario.presses);
    let mut means = [0.0; 5];
    for (k, w) in windows.iter().enumerate() {
        let mut sum = 0.0;
        for &i in w {
            let t = scenario.sample_time(i);
            sum += model
                .impedance_at(pair, protocol.probe_frequency_hz, &presses, t)?
                .reactance;
        }
        means[k] = sum / w.len() as f64;
    }
    Ok(GateOutputs::new(
        means[4] - means[0],
        means[3] - means[0],
        means[1] - means[0],
        means[2] - means[0],
    ))
}

/// Coefficients the calibration may adjust, with their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CoeffParam {
    PathResistanceFactor,
    SqueezeResistanceFactor,
    SqueezeCapacitanceFactor,
    PumpInductanceFactor,
    InductanceFactor,
    FootprintResistanceFactor,
    FootprintInductanceFactor,
    ResidualFraction,
    Coupling,
}

impl CoeffParam {
    pub const ALL: [CoeffParam; 9] = [
        CoeffParam::PathResistanceFactor,
        CoeffParam::SqueezeResistanceFactor,
        CoeffParam::SqueezeCapacitanceFactor,
        CoeffParam::PumpInductanceFactor,
        CoeffParam::InductanceFactor,
        CoeffParam::FootprintResistanceFactor,
        CoeffParam::FootprintInductanceFactor,
        CoeffParam::ResidualFraction,
        CoeffParam::Coupling,
    ];

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            CoeffParam::ResidualFraction => (-0.9, 0.9),
            CoeffParam::Coupling => (-0.9, 5.0),
            _ => (0.05, 20.0),
        }
    }

    pub fn get(&self, c: &PerturbCoeffs) -> f64 {
        match self {
            CoeffParam::PathResistanceFactor => c.path_resistance_factor,
            CoeffParam::SqueezeResistanceFactor => c.squeeze_resistance_factor,
            CoeffParam::SqueezeCapacitanceFactor => c.squeeze_capacitance_factor,
            CoeffParam::PumpInductanceFactor => c.pump_inductance_factor,
            CoeffParam::InductanceFactor => c.inductance_factor,
            CoeffParam::FootprintResistanceFactor => c.footprint_resistance_factor,
            CoeffParam::FootprintInductanceFactor => c.footprint_inductance_factor,
            CoeffParam::ResidualFraction => c.residual_fraction,
            CoeffParam::Coupling => c.coupling,
        }
    }

    pub fn set(&self, c: &mut PerturbCoeffs, v: f64) {
        let slot = match self {
            CoeffParam::PathResistanceFactor => &mut c.path_resistance_factor,
            CoeffParam::SqueezeResistanceFactor => &mut c.squeeze_resistance_factor,
            CoeffParam::SqueezeCapacitanceFactor => &mut c.squeeze_capacitance_factor,
            CoeffParam::PumpInductanceFactor => &mut c.pump_inductance_factor,
            CoeffParam::InductanceFactor => &mut c.inductance_factor,
            CoeffParam::FootprintResistanceFactor => &mut c.footprint_resistance_factor,
            CoeffParam::FootprintInductanceFactor => &mut c.footprint_inductance_factor,
            CoeffParam::ResidualFraction => &mut c.residual_fraction,
            CoeffParam::Coupling => &mut c.coupling,
        };
        *slot = v;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationOptions {
    pub protocol: Protocol,
    pub max_evaluations: usize,
    pub params: Vec<CoeffParam>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            protocol: Protocol::default(),
            max_evaluations: DEFAULT_BUDGET,
            params: CoeffParam::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationReport {
    pub coeffs: PerturbCoeffs,
    pub outputs: GateOutputs,
    pub max_residual: f64,
    pub evaluations: usize,
}

struct Objective<'a> {
    model: &'a SkinModel,
    pair: ElectrodePair,
    cells: (CellId, CellId),
    protocol: &'a Protocol,
    params: &'a [CoeffParam],
    base: PerturbCoeffs,
    target: [f64; 4],
}

impl Objective<'_> {
    fn coeffs(&self, x: &[f64]) -> PerturbCoeffs {
        let mut c = self.base;
        for (p, v) in self.params.iter().zip(x) {
            p.set(&mut c, *v);
        }
        c
    }

    fn residuals(&self, x: &[f64]) -> Result<[f64; 4]> {
        let model = self.model.with_coeffs(self.coeffs(x))?;
        let out = protocol_levels(&model, self.pair, self.cells.0, self.cells.1, self.protocol)?;
        let l = out.levels();
        Ok([0, 1, 2, 3].map(|i| l[i] - self.target[i]))
    }
}

fn sum_sq(r: &[f64; 4]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn max_abs(r: &[f64; 4]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves the small symmetric positive definite system `a x = b` by
/// Cholesky factorization; returns `None` if `a` is not positive definite.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Fits perturbation coefficients so the noiseless protocol on cells A and
/// B reproduces `target` within `tolerance` (max absolute error, Ω).
///
/// Bounded Levenberg-Marquardt on a forward-difference Jacobian; columns
/// are evaluated in parallel and gathered in parameter order, so the result
/// does not depend on scheduling. Parameters with no measurable effect on
/// the outputs are left at their initial values.
pub fn calibrate(
    model: &SkinModel,
    pair: ElectrodePair,
    cell_a: CellId,
    cell_b: CellId,
    target: &GateOutputs,
    tolerance: f64,
    options: &CalibrationOptions,
) -> Result<CalibrationReport> {
    if !(tolerance > 0.0) {
        return Err(SkinError::CalibrationInfeasible {
            evaluations: 0,
            best_residual: f64::INFINITY,
            tolerance,
        });
    }
    if cell_a == cell_b {
        return Err(SkinError::field("cellB", format!("must differ from cellA ({cell_a})")));
    }
    options.protocol.validate()?;
    let obj = Objective {
        model,
        pair,
        cells: (cell_a, cell_b),
        protocol: &options.protocol,
        params: &options.params,
        base: model.coeffs,
        target: target.levels(),
    };
    let bounds: Vec<(f64, f64)> = options.params.iter().map(|p| p.bounds()).collect();
    let clamp = |x: &mut Vec<f64>| {
        for (v, (lo, hi)) in x.iter_mut().zip(&bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut x: Vec<f64> = options.params.iter().map(|p| p.get(&model.coeffs)).collect();
    clamp(&mut x);
    let n = x.len();
    let budget = options.max_evaluations;
    let mut evaluations = 1;
    let mut r = obj.residuals(&x)?;
    let mut lambda = 1e-3;

    let report = |x: &[f64], r: &[f64; 4], evaluations: usize| {
        let coeffs = obj.coeffs(x);
        let l = target.levels();
        CalibrationReport {
            coeffs,
            outputs: GateOutputs::new(l[0] + r[0], l[1] + r[1], l[2] + r[2], l[3] + r[3]),
            max_residual: max_abs(r),
            evaluations,
        }
    };

    while max_abs(&r) > tolerance && evaluations + n < budget {
        // Forward differences, stepping inward at an upper bound.
        let steps: Vec<f64> = (0..n)
            .map(|j| {
                let h = 1e-6 * x[j].abs().max(1.0);
                if x[j] + h > bounds[j].1 {
                    -h
                } else {
                    h
                }
            })
            .collect();
        let columns: Vec<Option<[f64; 4]>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut xp = x.clone();
                xp[j] += steps[j];
                let rp = obj.residuals(&xp)?;
                let col = [0, 1, 2, 3].map(|i| (rp[i] - r[i]) / steps[j]);
                Ok(Some(col))
            })
            .collect::<Result<_>>()?;
        evaluations += n;
        let columns: Vec<[f64; 4]> = columns.into_iter().map(|c| c.expect("computed")).collect();
        let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let scale = norms.iter().cloned().fold(0.0, f64::max);
        if scale == 0.0 {
            break;
        }
        let active: Vec<usize> = (0..n).filter(|&j| norms[j] > 1e-9 * scale).collect();
        let m = active.len();
        let jtj: Vec<Vec<f64>> = active
            .iter()
            .map(|&a| {
                active
                    .iter()
                    .map(|&b| (0..4).map(|i| columns[a][i] * columns[b][i]).sum())
                    .collect()
            })
            .collect();
        let jtr: Vec<f64> = active
            .iter()
            .map(|&a| (0..4).map(|i| columns[a][i] * r[i]).sum())
            .collect();

        let mut improved = false;
        while evaluations < budget {
            let mut damped = jtj.clone();
            for k in 0..m {
                damped[k][k] += lambda * (jtj[k][k] + 1e-12 * scale * scale);
            }
            let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = cholesky_solve(&damped, &neg) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = x.clone();
            for (k, &j) in active.iter().enumerate() {
                trial[j] += step[k];
            }
            clamp(&mut trial);
            let rt = obj.residuals(&trial)?;
            evaluations += 1;
            if sum_sq(&rt) < sum_sq(&r) {
                x = trial;
                r = rt;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }

    if max_abs(&r) <= tolerance {
        Ok(report(&x, &r, evaluations))
    } else {
        Err(SkinError::CalibrationInfeasible {
            evaluations,
            best_residual: max_abs(&r),
            tolerance,
        })
    }
}

const REFERENCE_LEVELS_JSON: &str = include_str!("../assets/reference_levels.json");

/// Coefficients calibrated for a documented cell pair, with the targets
/// they were fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LogicAsset {
    pub electrode_pair: ElectrodePair,
    pub cell_a: CellId,
    pub cell_b: CellId,
    pub protocol: Protocol,
    pub target: GateOutputs,
    pub tolerance: f64,
    pub coeffs: PerturbCoeffs,
}

/// The shipped asset reproducing the published two-cell levels on the
/// default network.
pub fn reference_levels_asset() -> LogicAsset {
    crate::io::from_versioned_json(REFERENCE_LEVELS_JSON).expect("bundled logic asset is valid")
}

/// Structured readout of one protocol run at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GateReport {
    pub electrode_pair: ElectrodePair,
    pub cell_a: CellId,
    pub cell_b: CellId,
    pub outputs: GateOutputs,
    pub pre_rest_reactance: f64,
    pub post_rest_level: f64,
    pub thresholds: Vec<ThresholdReadout>,
    pub realizable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdReadout {
    pub threshold: f64,
    pub gate: String,
    pub truth_table: TruthTable,
}

impl GateReport {
    pub fn new(run: &MultitouchRun, pair: ElectrodePair, cell_a: CellId, cell_b: CellId, thresholds: &[f64]) -> Self {
        Self {
            electrode_pair: pair,
            cell_a,
            cell_b,
            outputs: run.outputs,
            pre_rest_reactance: run.pre_rest_reactance,
            post_rest_level: run.post_rest_level,
            thresholds: thresholds
                .iter()
                .map(|&t| {
                    let table = threshold_gate(&run.outputs, t);
                    ThresholdReadout {
                        threshold: t,
                        gate: table.name().to_string(),
                        truth_table: table,
                    }
                })
                .collect(),
            realizable: realizable_gates(&run.outputs).iter().map(|t| t.name().to_string()).collect(),
        }
    }
}
