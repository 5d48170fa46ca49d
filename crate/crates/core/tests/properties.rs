use std::collections::HashSet;
use std::sync::Arc;

use boselat::config::{GateName, GateSection, ScenarioConfig, ScenarioKind};
use boselat::fock::{enumerate_sector, hopping_element, sector_dimension, OccupationVector};
use boselat::model::{
    build_lattice_hamiltonian, build_single_qubit_hamiltonian, energy_levels, hermiticity_deviation, Coupling, QubitArraySpec,
    SingleQubitParams,
};
use boselat::pulses::{make_area_pulse, Pulse, ShapeFamily};
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn params() -> impl Strategy<Value = SingleQubitParams> {
    (-3.0..3.0f64, -3.0..3.0f64, -5.0..5.0f64, -5.0..5.0f64, -1.0..1.0f64).prop_map(|(eps1, eps2, gamma1, gamma2, tau)| {
        SingleQubitParams {
            eps1,
            eps2,
            gamma1,
            gamma2,
            tau,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sector_counts_and_order(l in 1usize..=6, n in 0u32..=6) {
        let s = enumerate_sector(l, n).unwrap();
        let expected = binomial(u64::from(n) + l as u64 - 1, l as u64 - 1);
        prop_assert_eq!(s.dimension() as u64, expected);
        prop_assert_eq!(sector_dimension(l, n), Some(u128::from(expected)));
        let mut seen = HashSet::new();
        for (k, st) in s.basis().iter().enumerate() {
            prop_assert_eq!(st.total(), u64::from(n));
            prop_assert_eq!(st.mode_count(), l);
            prop_assert!(seen.insert(st.occupations().to_vec()));
            prop_assert_eq!(s.position(st), Some(k));
        }
        for w in s.basis().windows(2) {
            prop_assert!(w[0].occupations() > w[1].occupations());
        }
    }

    #[test]
    fn hopping_amplitude_and_conservation(occ in prop::collection::vec(0u32..5, 2..6), i in 0usize..6, j in 0usize..6) {
        let l = occ.len();
        let (i, j) = (i % l, j % l);
        prop_assume!(i != j);
        let state = OccupationVector::new(occ.clone());
        let (next, amp) = hopping_element(&state, i, j).unwrap();
        let expected = (f64::from(occ[i] + 1) * f64::from(occ[j])).sqrt();
        prop_assert_eq!(amp, expected);
        if occ[j] > 0 {
            prop_assert_eq!(next.total(), state.total());
            prop_assert_eq!(next.occupations()[i], occ[i] + 1);
            prop_assert_eq!(next.occupations()[j], occ[j] - 1);
        }
    }

    #[test]
    fn single_qubit_hamiltonian_structure(p in params(), n in 0u32..8) {
        let h = build_single_qubit_hamiltonian(&p, n).unwrap();
        prop_assert_eq!(h.matrix().nrows(), n as usize + 1);
        prop_assert_eq!(hermiticity_deviation(h.matrix()), 0.0);
        for i in 0..=n {
            let (fi, fr) = (f64::from(i), f64::from(n - i));
            let e = p.eps1 * fi * fi + p.eps2 * fr * fr + p.gamma1 * fi + p.gamma2 * fr;
            let d = h.matrix()[((n - i) as usize, (n - i) as usize)].re;
            prop_assert!((d - e).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_parameters_close_the_gap(eps1 in 0.1..3.0f64, eps2 in 0.1..3.0f64, gamma2 in -5.0..5.0f64, n in 1u32..40) {
        let p = SingleQubitParams::degenerate(eps1, eps2, gamma2, n);
        let levels = energy_levels(&p, n).unwrap();
        let scale = levels.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        prop_assert!((levels[0] - levels[1]).abs() <= 1e-12 * scale);
        if n >= 2 {
            prop_assert!((levels[2] - levels[1] - p.gap()).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn lattice_is_hermitian(a in params(), b in params(), mu in -1.0..1.0f64, chi in -1.0..1.0f64, n in 1u32..4) {
        let spec = QubitArraySpec::new(vec![a, b]).unwrap().with_coupling(0, 1, Coupling { mu, chi }).unwrap();
        let sector = Arc::new(enumerate_sector(4, 2 * n).unwrap());
        let h = build_lattice_hamiltonian(&spec, &sector).unwrap();
        prop_assert!(hermiticity_deviation(h.matrix()) <= 1e-12);
        let trace: f64 = (0..h.matrix().nrows()).map(|k| h.matrix()[(k, k)].re).sum();
        let eig: f64 = h.eigenvalues().iter().sum();
        prop_assert!((trace - eig).abs() <= 1e-9 * trace.abs().max(1.0));
    }

    #[test]
    fn integrals_are_additive(a in -2.0..2.0f64, c in 0.1..3.0f64, w in 0.05..1.0f64, s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let pulses = [
            Pulse::gaussian(a, c, w, 0.1).unwrap(),
            Pulse::step_on(a, 0.3 * c, c, -0.2).unwrap(),
            Pulse::piecewise_linear(vec![(0.0, 0.0), (c, a), (2.0 * c, 0.5)]).unwrap(),
            Pulse::sampled(vec![0.0, 0.4 * c, c, 1.7 * c], vec![a, -a, 0.3, 1.0]).unwrap(),
        ];
        let (lo, hi) = (2.0 * c * s.min(t), 2.0 * c * s.max(t));
        let mid = 0.5 * (lo + hi);
        for p in &pulses {
            let whole = p.integral(lo, hi);
            let split = p.integral(lo, mid) + p.integral(mid, hi);
            prop_assert!((whole - split).abs() <= 1e-10 * (1.0 + whole.abs()));
            let scaled = p.affine(2.0, 1.0).integral(lo, hi);
            prop_assert!((scaled - (2.0 * whole + (hi - lo))).abs() <= 1e-10 * (1.0 + scaled.abs()));
        }
    }

    #[test]
    fn area_pulses_hit_their_area(area in -3.0..3.0f64, duration in 0.5..20.0f64, wf in 0.05..1.0f64, family in 0usize..4) {
        let family = [ShapeFamily::Constant, ShapeFamily::Step, ShapeFamily::Gaussian, ShapeFamily::Triangle][family];
        let p = make_area_pulse(family, area, duration, wf).unwrap();
        prop_assert!((p.integral(0.0, duration) - area).abs() <= 1e-12 * area.abs().max(1.0));
    }

    #[test]
    fn gate_configs_round_trip(phi in -6.0..6.0f64, n in 1u32..50, pd in 0.1..10.0f64, g2 in -10.0..10.0f64, eps in 0.1..2.0f64) {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Gate);
        cfg.gate = Some(GateSection {
            name: Some(GateName::Pphi),
            particles: Some(n),
            duration: None,
            phase_duration: Some(pd),
            phi: Some(phi),
            shape: None,
            width_fraction: None,
            profile: None,
            m1: None,
            m2: None,
        });
        cfg.qubit.insert("0".into(), SingleQubitParams::degenerate(eps, eps, g2, n));
        cfg.validate().unwrap();
        let text = cfg.effective().to_toml().unwrap();
        let back = ScenarioConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg.effective());
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}
