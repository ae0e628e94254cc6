//! Lumped RLC model of the liquid channels and complex nodal analysis of
//! the two-electrode impedance.
//!
//! Every channel is a series R–L branch between its end nodes; half of its
//! plane capacitance hangs from each end node to a shared floating ground
//! plane. Each electrode interface is a contact resistance shunted by a
//! double-layer capacitance, in series between the instrument terminal and
//! its node.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SkinError};
use crate::geometry::{ElectrodePair, Electrodes, Network};

/// Relative pivot threshold of the dense solver.
pub const SINGULAR_REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MaterialParams {
    /// Liquid conductivity, S/m.
    pub conductivity: f64,
    /// Series inductance per unit channel length, H/m.
    pub inductance_per_length: f64,
    /// Channel-to-plane capacitance per unit channel footprint, F/m².
    pub shunt_capacitance_per_area: f64,
    /// Series resistance of each electrode contact, Ω.
    pub contact_resistance: f64,
    /// Double-layer capacitance of each electrode interface, in parallel
    /// with the contact resistance, F.
    pub contact_capacitance: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            conductivity: 100.0,
            inductance_per_length: 4.0e-2,
            shunt_capacitance_per_area: 1.0e-9,
            contact_resistance: 10.0,
            contact_capacitance: 1.0e-4,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("conductivity", self.conductivity),
            ("inductancePerLength", self.inductance_per_length),
            ("shuntCapacitancePerArea", self.shunt_capacitance_per_area),
            ("contactResistance", self.contact_resistance),
            ("contactCapacitance", self.contact_capacitance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SkinError::field(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if self.conductivity <= 0.0 {
            return Err(SkinError::field("conductivity", "must be positive"));
        }
        Ok(())
    }
}

/// Lumped parameters of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeElement {
    pub resistance: f64,
    pub inductance: f64,
    /// Total plane capacitance; half is attached at each end node.
    pub capacitance: f64,
}

pub fn channel_element(
    length_mm: f64,
    width_mm: f64,
    depth_mm: f64,
    material: &MaterialParams,
) -> Result<EdgeElement> {
    for (name, v) in [("length", length_mm), ("width", width_mm), ("depth", depth_mm)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(SkinError::Domain(format!("channel {name} must be positive, got {v} mm")));
        }
    }
    let (length, width, depth) = (length_mm * 1e-3, width_mm * 1e-3, depth_mm * 1e-3);
    Ok(EdgeElement {
        resistance: length / (material.conductivity * width * depth),
        inductance: material.inductance_per_length * length,
        capacitance: material.shunt_capacitance_per_area * width * length,
    })
}

/// Complex impedance split into resistance and reactance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexZ {
    pub resistance: f64,
    pub reactance: f64,
}

impl ComplexZ {
    pub const ZERO: ComplexZ = ComplexZ {
        resistance: 0.0,
        reactance: 0.0,
    };

    pub fn new(resistance: f64, reactance: f64) -> Self {
        Self {
            resistance,
            reactance,
        }
    }

    pub fn modulus(&self) -> f64 {
        self.resistance.hypot(self.reactance)
    }

    pub fn phase_deg(&self) -> f64 {
        self.reactance.atan2(self.resistance).to_degrees()
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.resistance, self.reactance)
    }

    pub fn is_finite(&self) -> bool {
        self.resistance.is_finite() && self.reactance.is_finite()
    }
}

impl From<Complex64> for ComplexZ {
    fn from(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }
}

impl std::ops::Sub for ComplexZ {
    type Output = ComplexZ;
    fn sub(self, rhs: ComplexZ) -> ComplexZ {
        ComplexZ::new(self.resistance - rhs.resistance, self.reactance - rhs.reactance)
    }
}

impl std::ops::Add for ComplexZ {
    type Output = ComplexZ;
    fn add(self, rhs: ComplexZ) -> ComplexZ {
        ComplexZ::new(self.resistance + rhs.resistance, self.reactance + rhs.reactance)
    }
}

/// Node count, electrode map and per-channel elements of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceSystem {
    pub node_count: usize,
    pub electrodes: Electrodes,
    pub edges: Vec<[usize; 2]>,
    pub elements: Vec<EdgeElement>,
    pub contact_resistance: f64,
    pub contact_capacitance: f64,
}

impl AdmittanceSystem {
    pub fn from_network(network: &Network, material: &MaterialParams) -> Result<Self> {
        material.validate()?;
        let elements = (0..network.edges.len())
            .map(|e| {
                channel_element(
                    network.edge_length_mm(e),
                    network.channel.width_mm,
                    network.channel.depth_mm,
                    material,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            node_count: network.nodes.len(),
            electrodes: network.electrodes,
            edges: network.edges.clone(),
            elements,
            contact_resistance: material.contact_resistance,
            contact_capacitance: material.contact_capacitance,
        })
    }

    /// Same topology with replaced channel elements.
    pub fn with_elements(&self, elements: Vec<EdgeElement>) -> Self {
        assert_eq!(elements.len(), self.edges.len());
        Self {
            elements,
            ..self.clone()
        }
    }

    /// Contact resistance in parallel with the double-layer capacitance.
    pub fn contact_impedance(&self, omega: f64) -> Complex64 {
        let y = Complex64::new(0.0, omega * self.contact_capacitance);
        if self.contact_resistance == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        (Complex64::new(1.0 / self.contact_resistance, 0.0) + y).inv()
    }

    fn component_of(&self, start: usize) -> Vec<bool> {
        let mut adjacency = vec![Vec::new(); self.node_count];
        for &[a, b] in &self.edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Complex nodal matrix at angular frequency `omega` over the nodes
    /// flagged in `keep`, grounded at `reference`. The plane node, when
    /// present (`omega != 0` and some
    /// capacitance exists), is the last unknown.
    fn assemble(&self, omega: f64, keep: &[bool], reference: usize) -> (Vec<Complex64>, Vec<Option<usize>>, usize) {
        let mut index = vec![None; self.node_count];
        let mut n = 0;
        for (node, slot) in index.iter_mut().enumerate() {
            if keep[node] && node != reference {
                *slot = Some(n);
                n += 1;
            }
        }
        let has_plane = omega != 0.0
            && self
                .edges
                .iter()
                .zip(&self.elements)
                .any(|(&[a, _], el)| keep[a] && el.capacitance > 0.0);
        let plane = has_plane.then(|| {
            n += 1;
            n - 1
        });
        let mut y = vec![Complex64::new(0.0, 0.0); n * n];
        let mut stamp = |i: Option<usize>, j: Option<usize>, g: Complex64| {
            if let Some(i) = i {
                y[i * n + i] += g;
            }
            if let Some(j) = j {
                y[j * n + j] += g;
            }
            if let (Some(i), Some(j)) = (i, j) {
                y[i * n + j] -= g;
                y[j * n + i] -= g;
            }
        };
        for (&[a, b], el) in self.edges.iter().zip(&self.elements) {
            if !keep[a] {
                continue;
            }
            let z = Complex64::new(el.resistance, omega * el.inductance);
            stamp(index[a], index[b], z.inv());
            if let Some(p) = plane {
                let yc = Complex64::new(0.0, 0.5 * omega * el.capacitance);
                stamp(index[a], Some(p), yc);
                stamp(index[b], Some(p), yc);
            }
        }
        (y, index, n)
    }

    /// Port impedance with a signed angular frequency, rad/s.
    pub fn impedance_at_omega(&self, pair: ElectrodePair, omega: f64) -> Result<ComplexZ> {
        if !omega.is_finite() {
            return Err(SkinError::Domain(format!("angular frequency {omega} is not finite")));
        }
        let a = self.electrodes.node(pair.first);
        let b = self.electrodes.node(pair.second);
        if a == b {
            return Err(SkinError::Domain("electrodes share a node".into()));
        }
        let keep = self.component_of(a);
        if !keep[b] {
            return Err(SkinError::SingularSystem(format!(
                "electrodes {} (node {a}) and {} (node {b}) are not connected",
                pair.first.name(),
                pair.second.name()
            )));
        }
        let (mut y, index, n) = self.assemble(omega, &keep, b);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        let ia = index[a].expect("driven node is in the system");
        rhs[ia] = Complex64::new(1.0, 0.0);
        solve_dense(&mut y, &mut rhs, n)?;
        Ok((rhs[ia] + 2.0 * self.contact_impedance(omega)).into())
    }
}

/// In-place LU solve with partial row pivoting; `rhs` receives the solution.
fn solve_dense(a: &mut [Complex64], rhs: &mut [Complex64], n: usize) -> Result<()> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let threshold = SINGULAR_REL_EPS * norm;
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|i| (i, a[i * n + k].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best > threshold) {
            return Err(SkinError::SingularSystem(format!(
                "pivot {best:.3e} below {threshold:.3e} at column {k}"
            )));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            rhs.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let v = a[k * n + j];
                a[i * n + j] -= f * v;
            }
            let r = rhs[k];
            rhs[i] -= f * r;
        }
    }
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * rhs[j];
        }
        rhs[k] = acc / a[k * n + k];
    }
    Ok(())
}

pub fn impedance(system: &AdmittanceSystem, pair: ElectrodePair, freq_hz: f64) -> Result<ComplexZ> {
    if !(freq_hz >= 0.0) || !freq_hz.is_finite() {
        return Err(SkinError::Domain(format!("frequency must be finite and >= 0, got {freq_hz}")));
    }
    system.impedance_at_omega(pair, 2.0 * PI * freq_hz)
}

/// Impedance at every frequency, in input order. Points are evaluated in
/// parallel; each is an independent solve.
pub fn sweep(system: &AdmittanceSystem, pair: ElectrodePair, freqs: &[f64]) -> Result<Vec<(f64, ComplexZ)>> {
    if freqs.is_empty() {
        return Err(SkinError::Domain("frequency list is empty".into()));
    }
    freqs
        .par_iter()
        .map(|&f| {
            impedance(system, pair, f)
                .map(|z| (f, z))
                .map_err(|e| SkinError::AtFrequency {
                    freq_hz: f,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// `count` logarithmically spaced frequencies from `start` to `stop` inclusive.
pub fn log_frequencies(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (l0, l1) = (start.ln(), stop.ln());
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        stop
                    } else {
                        (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Ohmic DC current for each applied voltage.
pub fn dc_iv(system: &AdmittanceSystem, pair: ElectrodePair, voltages: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(v) = voltages.iter().find(|v| !v.is_finite()) {
        return Err(SkinError::Domain(format!("voltage {v} is not finite")));
    }
    let r = impedance(system, pair, 0.0)?.resistance;
    Ok(voltages.iter().map(|&v| (v, v / r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChannelDims, Electrode, Node, Point2};

    fn resistor_network(points: &[Point2], edges: &[[usize; 2]], electrodes: Electrodes) -> Network {
        Network {
            nodes: points.iter().map(|&p| Node { position: p, label: None }).collect(),
            edges: edges.to_vec(),
            triangles: Vec::new(),
            electrodes,
            channel: ChannelDims::default(),
        }
    }

    fn bare(n: usize, edges: &[[usize; 2]], r: f64, electrodes: Electrodes) -> AdmittanceSystem {
        AdmittanceSystem {
            node_count: n,
            electrodes,
            edges: edges.to_vec(),
            elements: vec![
                EdgeElement {
                    resistance: r,
                    inductance: 0.0,
                    capacitance: 0.0
                };
                edges.len()
            ],
            contact_resistance: 0.0,
            contact_capacitance: 0.0,
        }
    }

    #[test]
    fn hand_formula_resistance() {
        let el = channel_element(100.0, 4.0, 2.0, &MaterialParams::default()).unwrap();
        assert!((el.resistance - 125.0).abs() < 1e-9);
    }

    #[test]
    fn depth_halves_resistance_only() {
        let m = MaterialParams::default();
        let a = channel_element(80.0, 4.0, 2.0, &m).unwrap();
        let b = channel_element(80.0, 4.0, 4.0, &m).unwrap();
        assert!((b.resistance - a.resistance / 2.0).abs() < 1e-12);
        assert_eq!(a.inductance, b.inductance);
        assert_eq!(a.capacitance, b.capacitance);
    }

    #[test]
    fn short_channels_vanish_monotonically() {
        let m = MaterialParams::default();
        let mut prev = channel_element(1.0, 4.0, 2.0, &m).unwrap();
        for len in [1e-1, 1e-3, 1e-6] {
            let el = channel_element(len, 4.0, 2.0, &m).unwrap();
            assert!(el.resistance < prev.resistance);
            assert!(el.inductance < prev.inductance);
            assert!(el.capacitance < prev.capacitance);
            prev = el;
        }
        assert!(prev.resistance < 1e-5);
    }

    #[test]
    fn non_positive_dimensions_rejected() {
        let m = MaterialParams::default();
        assert!(channel_element(0.0, 4.0, 2.0, &m).is_err());
        assert!(channel_element(10.0, -4.0, 2.0, &m).is_err());
        assert!(channel_element(10.0, 4.0, f64::NAN, &m).is_err());
    }

    #[test]
    fn single_edge_dc() {
        let net = resistor_network(
            &[Point2::new(0.0, 0.0), Point2::new(100.0, 0.0), Point2::new(0.0, 50.0)],
            &[[0, 1]],
            Electrodes { bl: 0, c: 1, tr: 2 },
        );
        let material = MaterialParams {
            contact_resistance: 0.0,
            ..MaterialParams::default()
        };
        let sys = AdmittanceSystem::from_network(&net, &material).unwrap();
        let z = impedance(&sys, ElectrodePair::BL_C, 0.0).unwrap();
        assert!((z.resistance - 125.0).abs() < 1e-9);
        assert_eq!(z.reactance, 0.0);
        // TR is isolated.
        let err = impedance(&sys, ElectrodePair::BL_TR, 1000.0).unwrap_err();
        assert!(matches!(err, SkinError::SingularSystem(_)));
    }

    #[test]
    fn triangle_of_unit_resistors() {
        let sys = bare(3, &[[0, 1], [1, 2], [0, 2]], 1.0, Electrodes { bl: 0, c: 1, tr: 2 });
        for pair in [ElectrodePair::BL_C, ElectrodePair::C_TR, ElectrodePair::BL_TR] {
            let z = impedance(&sys, pair, 0.0).unwrap();
            assert!((z.resistance - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_frequency_rejected() {
        let sys = bare(2, &[[0, 1]], 1.0, Electrodes { bl: 0, c: 1, tr: 1 });
        assert!(matches!(
            impedance(&sys, ElectrodePair::BL_C, -1.0),
            Err(SkinError::Domain(_))
        ));
    }

    #[test]
    fn contact_resistance_adds_twice_at_dc() {
        let mut sys = bare(3, &[[0, 1], [1, 2], [0, 2]], 1.0, Electrodes { bl: 0, c: 1, tr: 2 });
        sys.contact_resistance = 10.0;
        let z = impedance(&sys, ElectrodePair::BL_C, 0.0).unwrap();
        assert!((z.resistance - (20.0 + 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn iv_is_linear_and_odd() {
        let sys = bare(3, &[[0, 1], [1, 2], [0, 2]], 3.0, Electrodes { bl: 0, c: 1, tr: 2 });
        let iv = dc_iv(&sys, ElectrodePair::BL_C, &[0.0, 0.1, -0.1, 2.0]).unwrap();
        assert_eq!(iv[0], (0.0, 0.0));
        assert_eq!(iv[1].1, -iv[2].1);
        assert!((iv[3].1 - 1.0).abs() < 1e-12);
        assert!(dc_iv(&sys, ElectrodePair::BL_C, &[f64::NAN]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let f = log_frequencies(20.0, 2e6, 50);
        assert_eq!(f.len(), 50);
        assert!((f[0] - 20.0).abs() < 1e-9);
        assert_eq!(f[49], 2e6);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn empty_sweep_rejected() {
        let sys = bare(2, &[[0, 1]], 1.0, Electrodes { bl: 0, c: 1, tr: 1 });
        assert!(sweep(&sys, ElectrodePair::BL_C, &[]).is_err());
        let err = sweep(&sys, ElectrodePair::BL_C, &[10.0, -5.0]).unwrap_err();
        assert!(matches!(err, SkinError::AtFrequency { freq_hz, .. } if freq_hz == -5.0));
    }

    #[test]
    fn electrode_names_round_trip() {
        for e in Electrode::ALL {
            assert_eq!(e.name().parse::<Electrode>().unwrap(), e);
        }
    }
}
