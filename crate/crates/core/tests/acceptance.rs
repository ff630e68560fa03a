//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdict lines are always
//! printed; the process exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cglmp_lab::cglmp::{self, alice_basis, bell_operator, cglmp_value, mes, CglmpSetup, StateKind, LOCAL_BOUND};
use cglmp_lab::noise_seq::{
    luders_channel, min_violation_table, sequential_values, unsharp_effects, MinViolation, SharpnessPolicy,
};
use cglmp_lab::qmath::{hermitian_eig, ComplexMatrix};
use cglmp_lab::solvers::{self, NoisePlane};
use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const KINDS: [StateKind; 2] = [StateKind::Mes, StateKind::Mvs];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn rounds_ref(kind: StateKind) -> &'static [(usize, f64, f64, f64); 8] {
    match kind {
        StateKind::Mvs => &ROUNDS_MVS_REF,
        _ => &ROUNDS_MES_REF,
    }
}

fn first_round_mes() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for &(d, bob1, _, _) in &ROUNDS_MES_REF {
        let alice = [alice_basis(d, 1).unwrap(), alice_basis(d, 2).unwrap()];
        let bob = CglmpSetup::shared(d).unwrap().bob_effects(1.0).unwrap();
        let value = cglmp_value(&mes(d).unwrap().density, &alice, &bob).unwrap();
        let dev = (value - bob1).abs();
        worst = worst.max(dev);
        if dev > 1e-3 {
            misses.push(format!("d={d}: {value:.6} vs {bob1}"));
        }
    }
    Verdict::new(
        misses.is_empty(),
        format!("max |dev| {worst:.2e} (tol 1e-3) {}", misses.join("; ")),
    )
}

fn mvs_optima() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for &(d, bob1, _, _) in &ROUNDS_MVS_REF {
        let top = hermitian_eig(&bell_operator(d).unwrap().matrix).unwrap().values[0];
        let dev = (top - bob1).abs();
        worst = worst.max(dev);
        if dev > 1e-3 {
            misses.push(format!("d={d}: {top:.6} vs {bob1}"));
        }
    }
    Verdict::new(
        misses.is_empty(),
        format!("max |dev| {worst:.2e} (tol 1e-3) {}", misses.join("; ")),
    )
}

fn sequential_rounds(rows: &[MinViolation]) -> Verdict {
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for row in rows {
        let &(_, b1, b2, b3) = rounds_ref(row.kind).iter().find(|r| r.0 == row.d).unwrap();
        for (m, reference) in [b1, b2, b3].into_iter().enumerate() {
            let dev = (row.values[m] - reference).abs();
            worst = worst.max(dev);
            if dev > 1e-3 {
                misses.push(format!(
                    "d={} {} Bob{}: {:.6} vs {reference} (|dev| {dev:.1e})",
                    row.d,
                    row.kind,
                    m + 1,
                    row.values[m]
                ));
            }
        }
    }
    let anchor = rows.iter().find(|r| r.d == 3 && r.kind == StateKind::Mes).unwrap();
    let anchors = [
        ("I3^1", anchor.values[0], 2.87293),
        ("I3^2", anchor.values[1], 2.40856),
        ("I3^3", anchor.values[2], 1.83798),
        ("lambda1*", anchor.thresholds[0], 0.69615),
        ("lambda2*", anchor.thresholds[1], 0.830372),
    ];
    for (name, got, want) in anchors {
        if (got - want).abs() > 1e-5 {
            misses.push(format!("anchor {name}: {got:.7} vs {want}"));
        }
    }
    Verdict::new(
        misses.is_empty(),
        format!(
            "48 cells, max |dev| {worst:.2e} (tol 1e-3), 5 anchors (tol 1e-5){}{}",
            if misses.is_empty() { "" } else { "; outside: " },
            misses.join("; ")
        ),
    )
}

fn analytic_d3() -> Verdict {
    let rho = mes(3).unwrap().density;
    let mut worst1: f64 = 0.0;
    for k in 1..=20 {
        let l1 = k as f64 / 20.0;
        let run = sequential_values(&rho, &[l1]).unwrap();
        worst1 = worst1.max((run.values[0] - i3_round1(l1)).abs());
    }
    let mut worst2: f64 = 0.0;
    for i in 1..=10 {
        for j in 1..=10 {
            let (l1, l2) = (i as f64 / 10.0, j as f64 / 10.0);
            let run = sequential_values(&rho, &[l1, l2]).unwrap();
            worst2 = worst2.max((run.values[1] - i3_round2(l1, l2)).abs());
        }
    }
    Verdict::new(
        worst1 <= 1e-10 && worst2 <= 1e-8,
        format!("round 1 max |dev| {worst1:.1e} (tol 1e-10), round 2 max |dev| {worst2:.1e} (tol 1e-8)"),
    )
}

/// Counts 1e-3 cells of the (1−λ, 1−p) square whose midpoint violates.
/// I_d is increasing in both p and λ, so every row of violating cells is a
/// prefix no longer than the row below it; walking the staircase touches
/// each row and column once.
fn grid_area(plane: &NoisePlane) -> f64 {
    const N: usize = 1000;
    let h = 1.0 / N as f64;
    let violates = |i: usize, j: usize| {
        let lambda = 1.0 - (i as f64 + 0.5) * h;
        let p = 1.0 - (j as f64 + 0.5) * h;
        plane.value(p, lambda).unwrap() > LOCAL_BOUND
    };
    let mut k = 0;
    while k < N && violates(k, 0) {
        k += 1;
    }
    let mut cells = k;
    for j in 1..N {
        while k > 0 && !violates(k - 1, j) {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        cells += k;
    }
    cells as f64 * h * h
}

fn anr_table() -> Verdict {
    let mut misses = Vec::new();
    let (mut worst_ref, mut worst_grid, mut worst_closed): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut gaps = Vec::new();
    for &(d, mes_ref, mvs_ref) in &ANR_REF {
        let setup = CglmpSetup::shared(d).unwrap();
        for (kind, reference) in [(StateKind::Mes, mes_ref), (StateKind::Mvs, mvs_ref)] {
            let psi = cglmp::state(d, kind).unwrap();
            let plane = NoisePlane::new(&setup, &psi).unwrap();
            let result = plane.anr(solvers::QUADRATURE_TOLERANCE).unwrap();
            let grid = grid_area(&plane);
            let closed = 1.0 - result.p_min + result.p_min * result.p_min.ln();
            let (dr, dg, dc) = (
                (result.quadrature - reference).abs(),
                (result.quadrature - grid).abs(),
                (result.quadrature - closed).abs(),
            );
            worst_ref = worst_ref.max(dr);
            worst_grid = worst_grid.max(dg);
            worst_closed = worst_closed.max(dc);
            gaps.push(reference - result.quadrature);
            if dr > 5e-3 || dg > 2e-3 || dc > 1e-6 {
                misses.push(format!(
                    "d={d} {kind}: quad {:.6} ref {reference} grid {grid:.6} closed {closed:.6}",
                    result.quadrature
                ));
            }
        }
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Verdict::new(
        misses.is_empty(),
        format!(
            "vs table max {worst_ref:.2e} (tol 5e-3), vs grid max {worst_grid:.2e} (tol 2e-3), vs closed form max {worst_closed:.1e} (tol 1e-6); printed values sit {mean_gap:.4} above on average {}",
            misses.join("; ")
        ),
    )
}

fn q_min_table() -> Verdict {
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    let mut mes_col = Vec::new();
    let mut mvs_col = Vec::new();
    for &(d, mes_ref, mvs_ref) in &QMIN_REF {
        let tol = if d == 3 { 1e-3 } else { 2e-3 };
        for (kind, reference) in [(StateKind::Mes, mes_ref), (StateKind::Mvs, mvs_ref)] {
            let q = solvers::q_min(d, kind).unwrap().q_min;
            let dev = (q - reference).abs();
            worst = worst.max(dev);
            if dev > tol {
                misses.push(format!("d={d} {kind}: {q:.6} vs {reference}"));
            }
            match kind {
                StateKind::Mes => mes_col.push(q),
                _ => mvs_col.push(q),
            }
        }
    }
    let increasing = mes_col.windows(2).all(|w| w[1] > w[0]);
    let spread = mvs_col.iter().cloned().fold(f64::MIN, f64::max) - mvs_col.iter().cloned().fold(f64::MAX, f64::min);
    if !increasing {
        misses.push("MES column not strictly increasing".into());
    }
    if spread >= 0.004 {
        misses.push(format!("MVS spread {spread:.4} >= 0.004"));
    }
    Verdict::new(
        misses.is_empty(),
        format!(
            "max |dev| {worst:.2e} (tol 1e-3 at d=3, 2e-3 otherwise), MES increasing: {increasing}, MVS spread {spread:.4} {}",
            misses.join("; ")
        ),
    )
}

fn property_suite() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed_c61f);
    let mut failures = Vec::new();

    let mut completeness: f64 = 0.0;
    for d in 2..=10 {
        for b in 1..=2 {
            let basis = cglmp::bob_basis(d, b).unwrap();
            for _ in 0..5 {
                let lambda = rng.gen_range(1e-3..=1.0);
                completeness = completeness.max(unsharp_effects(&basis, lambda).unwrap().completeness_residual());
            }
        }
    }
    if completeness > 1e-12 {
        failures.push(format!("completeness {completeness:.1e}"));
    }

    let (mut trace_err, mut unital_err): (f64, f64) = (0.0, 0.0);
    for d in 3..=5 {
        let n = d * d;
        let mixed = ComplexMatrix::identity(n).scale_real(1.0 / n as f64);
        for _ in 0..10 {
            let lambda = rng.gen_range(1e-3..=1.0);
            let rho = random_density(&mut rng, n);
            trace_err = trace_err.max((luders_channel(&rho, lambda).unwrap().trace().re - 1.0).abs());
            unital_err = unital_err.max(luders_channel(&mixed, lambda).unwrap().max_abs_diff(&mixed));
        }
    }
    if trace_err > 1e-12 {
        failures.push(format!("trace preservation {trace_err:.1e}"));
    }
    if unital_err > 1e-12 {
        failures.push(format!("unitality {unital_err:.1e}"));
    }

    let (mut duality, mut factor): (f64, f64) = (0.0, 0.0);
    for d in 3..=5 {
        let setup = CglmpSetup::shared(d).unwrap();
        for kind in KINDS {
            let psi = cglmp::state(d, kind).unwrap();
            let plane = NoisePlane::new(&setup, &psi).unwrap();
            let top = plane.value(1.0, 1.0).unwrap();
            for k in 1..=50 {
                let x = k as f64 / 50.0;
                duality = duality.max((plane.value(1.0, x).unwrap() - plane.value(x, 1.0).unwrap()).abs());
                let (p, l) = (rng.gen_range(0.0..=1.0), rng.gen_range(1e-3..=1.0));
                factor = factor.max((plane.value(p, l).unwrap() - p * l * top).abs());
            }
        }
    }
    if duality > 1e-10 {
        failures.push(format!("duality {duality:.1e}"));
    }
    if factor > 1e-10 {
        failures.push(format!("p*lambda factorization {factor:.1e}"));
    }

    let mut separable = f64::MIN;
    for d in 3..=5 {
        let setup = CglmpSetup::shared(d).unwrap();
        for _ in 0..1000 {
            let rho = random_product_state(&mut rng, d);
            separable = separable.max(setup.value(&rho, 1.0).unwrap());
        }
        for _ in 0..50 {
            let mut rho = ComplexMatrix::zeros(d * d, d * d);
            let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in weights {
                rho.add_scaled(w / total, &random_product_state(&mut rng, d));
            }
            separable = separable.max(setup.value(&rho, 1.0).unwrap());
        }
    }
    if separable > LOCAL_BOUND + 1e-9 {
        failures.push(format!("separable max {separable:.6}"));
    }

    let mut recon: f64 = 0.0;
    for n in [2, 3, 5, 9, 16, 25] {
        for _ in 0..4 {
            let h = random_hermitian(&mut rng, n);
            recon = recon.max(hermitian_eig(&h).unwrap().reconstruct().max_abs_diff(&h));
        }
    }
    for d in 3..=6 {
        let b = bell_operator(d).unwrap().matrix;
        recon = recon.max(hermitian_eig(&b).unwrap().reconstruct().max_abs_diff(&b));
    }
    if recon > 1e-10 {
        failures.push(format!("eigen reconstruction {recon:.1e}"));
    }

    Verdict::new(
        failures.is_empty(),
        format!(
            "completeness {completeness:.1e}, trace {trace_err:.1e}, unitality {unital_err:.1e}, duality {duality:.1e}, factorization {factor:.1e}, separable max {separable:.6}, reconstruction {recon:.1e} {}",
            failures.join("; ")
        ),
    )
}

fn third_round(rows: &[MinViolation]) -> Verdict {
    let offenders: Vec<String> = rows
        .iter()
        .filter(|r| r.values[2] >= LOCAL_BOUND)
        .map(|r| format!("d={} {}: {:.6}", r.d, r.kind, r.values[2]))
        .collect();
    let max = rows.iter().map(|r| r.values[2]).fold(f64::MIN, f64::max);
    Verdict::new(
        offenders.is_empty(),
        format!("largest third-round value {max:.6} over 16 rows {}", offenders.join("; ")),
    )
}

fn main() -> ExitCode {
    let rows: Vec<MinViolation> = (3..=10)
        .flat_map(|d| KINDS.map(|k| min_violation_table(d, k, SharpnessPolicy::default()).unwrap()))
        .collect();

    let criteria: [(&str, &dyn Fn() -> Verdict); 8] = [
        ("first-round optima, maximally entangled", &first_round_mes),
        ("top eigenvalue of the Bell operator", &mvs_optima),
        ("sequential rounds", &|| sequential_rounds(&rows)),
        ("d=3 analytic rounds", &analytic_d3),
        ("area of the nonlocal region", &anr_table),
        ("two-round visibility threshold", &q_min_table),
        ("property suite", &property_suite),
        ("no third-round violation", &|| third_round(&rows)),
    ];

    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = check();
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {title}: {} ({:.1}s)",
            i + 1,
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail.trim_end(),
            started.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
