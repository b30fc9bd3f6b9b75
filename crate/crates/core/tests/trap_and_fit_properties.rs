use std::f64::consts::{SQRT_2, TAU};

use proptest::prelude::*;

use etrap_core::spectra::{fit_lorentzian, frequency_axis, synthetic_trace};
use etrap_core::trapfields::{
    characterize_layout, characterize_map, parse_field_map, quadrupole_map, write_field_map_csv, AnalysisGrid,
    DriveRole, ElectrodeLayout, Species, TrapCharacter,
};

fn coarse() -> AnalysisGrid {
    AnalysisGrid { nx: 121, nz: 121, ..AnalysisGrid::default() }
}

fn electron_trap(lay: &ElectrodeLayout) -> TrapCharacter {
    characterize_layout(lay, &Species::electron(), &coarse()).unwrap().trapped().expect("trapped")
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn layout_scales_with_voltage_and_drive() {
    let base = ElectrodeLayout::five_rail();
    let t0 = electron_trap(&base);

    let mut volt = base.clone();
    volt.scale_voltage(DriveRole::Mw, 2.0);
    let tv = electron_trap(&volt);
    let mut drive = base.clone();
    drive.omega_mw *= 2.0;
    let td = electron_trap(&drive);

    for k in 0..2 {
        assert!(rel(tv.secular_omega[k], 2.0 * t0.secular_omega[k]) < 1e-6);
        assert!(rel(td.secular_omega[k], 0.5 * t0.secular_omega[k]) < 1e-6);
    }
    assert!(rel(tv.depth_ev, 4.0 * t0.depth_ev) < 1e-6);
    assert!(rel(td.depth_ev, 0.25 * t0.depth_ev) < 1e-6);
    assert!(rel(tv.min_position_m[2], t0.min_position_m[2]) < 1e-9);
}

#[test]
fn hessian_is_symmetric() {
    let t = electron_trap(&ElectrodeLayout::five_rail());
    let h = &t.hessian;
    let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!((h - h.transpose()).iter().all(|d| d.abs() <= 1e-6 * scale));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn layout_translation_invariance(dx in -300e-6..300e-6f64) {
        let base = ElectrodeLayout::five_rail();
        let t0 = electron_trap(&base);
        let t1 = electron_trap(&base.translated(dx));
        prop_assert!((t1.min_position_m[0] - dx - t0.min_position_m[0]).abs() < 1e-9);
        prop_assert!(rel(t1.min_position_m[2], t0.min_position_m[2]) < 1e-6);
        for k in 0..2 {
            prop_assert!(rel(t1.secular_omega[k], t0.secular_omega[k]) < 1e-5);
        }
        prop_assert!(rel(t1.depth_ev, t0.depth_ev) < 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrupole_map_frequency_and_translation(
        f_sec in 0.2e9..2e9f64,
        f_drive in 4e9..20e9f64,
        shift in prop::array::uniform3(-50e-6..50e-6f64),
    ) {
        let e = Species::electron();
        let (w, omega) = (TAU * f_sec, TAU * f_drive);
        let g = SQRT_2 * e.mass * omega * w / e.charge.abs();
        let axis: Vec<f64> = (0..21).map(|k| -10e-6 + 1e-6 * k as f64).collect();
        let map = quadrupole_map([axis.clone(), vec![0.0], axis], [0.0; 3], g, omega).unwrap();
        let t0 = characterize_map(&map, &e).unwrap().trapped().unwrap();
        for s in &t0.secular_omega {
            prop_assert!(rel(*s, w) < 5e-3);
        }
        let moved = map.translated([shift[0], 0.0, shift[2]]);
        let t1 = characterize_map(&moved, &e).unwrap().trapped().unwrap();
        prop_assert!((t1.min_position_m[0] - shift[0] - t0.min_position_m[0]).abs() < 1e-9);
        prop_assert!((t1.min_position_m[2] - shift[2] - t0.min_position_m[2]).abs() < 1e-9);
        for (a, b) in t0.secular_omega.iter().zip(&t1.secular_omega) {
            prop_assert!(rel(*a, *b) < 1e-6);
        }
    }

    #[test]
    fn fit_recovers_synthetic_resonator(
        f0 in 0.5e9..8e9f64,
        q_int in 5e3..1e5f64,
        q_ext in 5e3..1e5f64,
    ) {
        let kappa = f0 * (1.0 / q_int + 1.0 / q_ext);
        let t = synthetic_trace(f0, q_int, q_ext, frequency_axis(f0, 5.0 * kappa, 400)).unwrap();
        let fit = fit_lorentzian(&t, None).unwrap();
        prop_assert!(rel(fit.f0_hz, f0) < 1e-9);
        prop_assert!(rel(fit.q_int, q_int) < 1e-3, "{} {}", fit.q_int, q_int);
        prop_assert!(rel(fit.q_ext, q_ext) < 1e-3);
        prop_assert!((1.0 / fit.q_tot - 1.0 / fit.q_int - 1.0 / fit.q_ext).abs() <= 1e-15 / fit.q_tot);
    }
}

#[test]
fn field_map_csv_roundtrip() {
    let axis: Vec<f64> = (0..5).map(|k| 1e-6 * k as f64).collect();
    let map = quadrupole_map([axis.clone(), vec![0.0], axis], [2e-6, 0.0, 2e-6], 1e7, TAU * 6e9).unwrap();
    let mut buf = Vec::new();
    write_field_map_csv(&mut buf, &map).unwrap();
    let back = parse_field_map(buf.as_slice(), map.omega).unwrap();
    assert_eq!(back.shape(), map.shape());
    for (a, b) in back.field.iter().zip(&map.field) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= 1e-11 * b[k].abs().max(1.0));
        }
    }
}
