use lqskin_core::circuit::MaterialParams;
use lqskin_core::geometry::{CellId, ElectrodePair};
use lqskin_core::io::default_network;
use lqskin_core::localization::{classify_signature, detect_events, SignatureTable};
use lqskin_core::stimulus::{
    family_map, subtract_drift, Family, NoiseSettings, PerturbCoeffs, Press, Scenario, SkinModel,
};
use proptest::prelude::*;

fn model() -> SkinModel {
    SkinModel::new(default_network(), MaterialParams::default(), PerturbCoeffs::default()).unwrap()
}

fn cell(s: &str) -> CellId {
    s.parse().unwrap()
}

fn single_press(c: CellId, noise: NoiseSettings, seed: u64) -> Scenario {
    Scenario {
        presses: vec![Press::new(c, 100.0, 3.0, 8.0).unwrap()],
        duration_s: 14.0,
        noise,
        seed,
        ..Scenario::default()
    }
}

#[test]
fn no_press_series_is_rest_impedance() {
    let m = model();
    let s = m.simulate(&Scenario::default()).unwrap();
    let rest = m.rest_impedance(ElectrodePair::BL_C, 1000.0).unwrap();
    assert_eq!(s.len(), 51);
    assert!(s.samples.iter().all(|&z| z == rest));
}

#[test]
fn named_cells_have_expected_families() {
    let net = default_network();
    let map = family_map(&net, ElectrodePair::BL_C);
    let fam = |s: &str| map.iter().find(|x| x.0 == cell(s)).unwrap().1;
    // The G13-I11 hub link is too short to pump.
    assert_ne!(fam("H12"), Family::Green);
    // Next to the BL electrode on the conductive path.
    assert_eq!(fam("C2"), Family::Red);
    // On the straight line between BL and C.
    assert_eq!(fam("E5"), Family::Gradient);
    // Far corner with no channel under it.
    assert_eq!(fam("I4"), Family::Blue);
    for f in Family::ALL {
        assert!(map.iter().any(|x| x.1 == f), "{f} missing");
    }
}

#[test]
fn every_cell_signature_matches_its_family() {
    let m = model();
    for pair in [ElectrodePair::BL_C, ElectrodePair::C_TR, ElectrodePair::BL_TR] {
        let table = SignatureTable::build(&m, pair, 1000.0, 100.0).unwrap();
        for sig in &table.cells {
            let got = classify_signature(sig.delta.resistance, sig.delta.reactance).unwrap();
            assert_eq!(got, sig.family, "{pair} {}", sig.cell);
            assert!(sig.delta.modulus() > 0.3, "{pair} {} too weak", sig.cell);
        }
    }
}

#[test]
fn family_signature_directions() {
    let m = model();
    let table = SignatureTable::build(&m, ElectrodePair::BL_C, 1000.0, 100.0).unwrap();
    for sig in &table.cells {
        let (r, x) = (sig.delta.resistance, sig.delta.reactance);
        match sig.family {
            Family::Green => assert!(x < 0.0 && r.abs() < 0.2 * x.abs()),
            Family::Blue => assert!(x > 0.0 && r.abs() < 0.2 * x.abs()),
            Family::Red => assert!(r < 0.0 && r.abs() > x.abs()),
            Family::Gradient => assert!(r > 0.0 && x > 0.0),
        }
    }
}

#[test]
fn simulated_press_reaches_steady_signature() {
    let m = model();
    for c in ["C2", "E5", "I4", "M16", "P1"] {
        let s = m.simulate(&single_press(cell(c), NoiseSettings::QUIET, 0)).unwrap();
        let rest = m.rest_impedance(ElectrodePair::BL_C, 1000.0).unwrap();
        let steady = m.steady_signature(ElectrodePair::BL_C, 1000.0, cell(c), 100.0).unwrap();
        // Sample at t = 7.8 s is 4.8 s into the press.
        let held = s.samples[39] - rest;
        assert!((held - steady).modulus() < 1e-5 * steady.modulus(), "{c}");
        // Long after release everything is back to rest.
        assert!((s.samples[70] - rest).modulus() < 1e-6);
    }
}

#[test]
fn heavier_press_gives_larger_response() {
    let m = model();
    let light = m.steady_signature(ElectrodePair::BL_C, 1000.0, cell("I4"), 50.0).unwrap();
    let heavy = m.steady_signature(ElectrodePair::BL_C, 1000.0, cell("I4"), 200.0).unwrap();
    assert!(heavy.reactance > light.reactance && light.reactance > 0.0);
}

#[test]
fn drift_correction_recovers_clean_series() {
    let m = model();
    let quiet = m.simulate(&single_press(cell("I4"), NoiseSettings::QUIET, 0)).unwrap();
    let drift = NoiseSettings {
        noise_std_ohm: 0.0,
        drift_ohm_per_s: 0.05,
        random_walk_ohm_per_sqrt_s: 0.0,
    };
    let drifting = m.simulate(&single_press(cell("I4"), drift, 0)).unwrap();
    let windows = [(0.0, 3.0), (10.0, 14.0)];
    let a = subtract_drift(&quiet, &windows).unwrap();
    let b = subtract_drift(&drifting, &windows).unwrap();
    let peak = a.samples.iter().map(|z| z.modulus()).fold(0.0, f64::max);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!((*x - *y).modulus() < 1e-9 * peak.max(1.0));
    }
    for z in &b.samples[..15] {
        assert!(z.modulus() < 0.01 * peak);
    }
}

#[test]
fn detection_finds_one_event_per_press() {
    let m = model();
    let mut sc = single_press(cell("I4"), NoiseSettings::default(), 5);
    sc.presses.push(Press::new(cell("C2"), 100.0, 16.0, 20.0).unwrap());
    sc.duration_s = 26.0;
    let s = m.simulate(&sc).unwrap();
    let c = subtract_drift(&s, &[(0.0, 3.0), (10.0, 16.0), (22.0, 26.0)]).unwrap();
    let events = detect_events(&c, 0.1, 1.0).unwrap();
    assert_eq!(events.len(), 2);
    assert_eq!(classify_signature(events[0].delta_r, events[0].delta_x).unwrap(), Family::Blue);
    assert_eq!(classify_signature(events[1].delta_r, events[1].delta_x).unwrap(), Family::Red);
    assert!(events[0].t_peak > 3.0 && events[0].t_peak < 9.0);
    assert!(events[1].t_peak > 16.0 && events[1].t_peak < 21.0);
}

#[test]
fn simulation_is_deterministic() {
    let m = model();
    let sc = single_press(cell("E5"), NoiseSettings::default(), 42);
    assert_eq!(m.simulate(&sc).unwrap(), m.simulate(&sc).unwrap());
    let other = Scenario { seed: 43, ..sc.clone() };
    assert_ne!(m.simulate(&sc).unwrap(), m.simulate(&other).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn drift_subtraction_is_idempotent(seed in 0u64..1000, rate in -0.05f64..0.05) {
        let m = model();
        let noise = NoiseSettings { noise_std_ohm: 0.02, drift_ohm_per_s: rate, random_walk_ohm_per_sqrt_s: 0.01 };
        let s = m.simulate(&single_press(cell("I4"), noise, seed)).unwrap();
        let w = [(0.0, 3.0), (10.0, 14.0)];
        let once = subtract_drift(&s, &w).unwrap();
        let twice = subtract_drift(&once, &w).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            prop_assert!((*a - *b).modulus() < 1e-9);
        }
    }

    #[test]
    fn shifting_a_press_shifts_its_event(shift in 0usize..20) {
        let m = model();
        let dt = 0.2;
        let base = single_press(cell("M16"), NoiseSettings::QUIET, 0);
        let mut moved = base.clone();
        moved.presses[0].t_on += shift as f64 * dt;
        moved.presses[0].t_off += shift as f64 * dt;
        moved.duration_s += shift as f64 * dt;
        let e0 = detect_events(&subtract_drift(&m.simulate(&base).unwrap(), &[(0.0, 3.0)]).unwrap(), 0.1, 1.0).unwrap();
        let e1 = detect_events(&subtract_drift(&m.simulate(&moved).unwrap(), &[(0.0, 3.0)]).unwrap(), 0.1, 1.0).unwrap();
        prop_assert_eq!(e0.len(), 1);
        prop_assert_eq!(e1.len(), 1);
        prop_assert!((e1[0].t_peak - e0[0].t_peak - shift as f64 * dt).abs() < 1e-9);
        prop_assert!((e1[0].delta_x - e0[0].delta_x).abs() < 1e-9);
    }
}
