mod common;

use cglmp_lab::cglmp::{mes, StateKind};
use cglmp_lab::noise_seq::{min_violation_table, sequential_values, SharpnessPolicy};
use cglmp_lab::solvers;
use common::*;

#[test]
fn d3_first_round_is_linear() {
    let rho = mes(3).unwrap().density;
    for k in 1..=20 {
        let l1 = k as f64 / 20.0;
        let got = sequential_values(&rho, &[l1]).unwrap().values[0];
        assert!((got - i3_round1(l1)).abs() <= 1e-10, "l1={l1}: {got}");
    }
}

#[test]
fn d3_second_and_third_rounds() {
    let rho = mes(3).unwrap().density;
    for i in 1..=10 {
        for j in 1..=10 {
            let (l1, l2) = (i as f64 / 10.0, j as f64 / 10.0);
            let run = sequential_values(&rho, &[l1, l2, 0.9]).unwrap();
            assert!((run.values[1] - i3_round2(l1, l2)).abs() <= 1e-8);
            assert!((run.values[2] - i3_round3(l1, l2, 0.9)).abs() <= 1e-8);
        }
    }
}

#[test]
fn d3_thresholds_follow_closed_forms() {
    let exact = min_violation_table(3, StateKind::Mes, SharpnessPolicy::EXACT).unwrap();
    let l1 = 2.0 / i3_round1(1.0);
    assert!((exact.thresholds[0] - l1).abs() < 1e-9);
    assert!((exact.values[1] - i3_round2(l1, 1.0)).abs() < 1e-8);
    let l2 = 2.0 / i3_round2(l1, 1.0);
    assert!((exact.thresholds[1] - l2).abs() < 1e-9);
    assert!((exact.values[2] - i3_round3(l1, l2, 1.0)).abs() < 1e-8);

    // the default policy applies the thresholds rounded up to 1e-3
    let tabulated = min_violation_table(3, StateKind::Mes, SharpnessPolicy::default()).unwrap();
    assert!((tabulated.applied[0] - 0.697).abs() < 1e-12);
    assert!((tabulated.applied[1] - 0.831).abs() < 1e-12);
    assert!((tabulated.values[1] - i3_round2(0.697, 1.0)).abs() < 1e-8);
    assert!((tabulated.values[2] - i3_round3(0.697, 0.831, 1.0)).abs() < 1e-8);
}

#[test]
fn d3_anr_matches_analytic_integral() {
    let p = 2.0 / i3_round1(1.0);
    let expected = 1.0 - p + p * p.ln();
    let got = solvers::anr(3, StateKind::Mes, solvers::QUADRATURE_TOLERANCE).unwrap();
    assert!((got.quadrature - expected).abs() < 1e-6);
    assert!((got.p_min - 0.69615).abs() < 1e-5);
}

#[test]
fn d3_boundary_points() {
    let p_min = 2.0 / i3_round1(1.0);
    for p in [0.8, 0.9, 1.0] {
        let lambda = solvers::lambda_min(3, StateKind::Mes, p).unwrap();
        assert!((lambda - p_min / p).abs() < 1e-5, "p={p}: {lambda}");
    }
}
