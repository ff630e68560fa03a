#![allow(dead_code)]

use cglmp_lab::qmath::{ComplexMatrix, C64};
use rand::Rng;

/// (d, MES, MVS) area of the nonlocal region.
pub const ANR_REF: [(usize, f64, f64); 8] = [
    (3, 0.05307, 0.05685),
    (4, 0.05517, 0.06207),
    (5, 0.05644, 0.06595),
    (6, 0.0573, 0.06909),
    (7, 0.05792, 0.07171),
    (8, 0.0584, 0.07382),
    (9, 0.05878, 0.07567),
    (10, 0.05906, 0.07733),
];

/// (d, Bob1, Bob2, Bob3) starting from the maximally entangled state.
pub const ROUNDS_MES_REF: [(usize, f64, f64, f64); 8] = [
    (3, 2.8729, 2.4086, 1.8380),
    (4, 2.8962, 2.3963, 1.7994),
    (5, 2.9105, 2.3819, 1.7650),
    (6, 2.9202, 2.3699, 1.7382),
    (7, 2.9272, 2.3570, 1.7122),
    (8, 2.9324, 2.3458, 1.6910),
    (9, 2.9365, 2.3360, 1.6722),
    (10, 2.9398, 2.3274, 1.6568),
];

/// Same for the maximally violating state.
pub const ROUNDS_MVS_REF: [(usize, f64, f64, f64); 8] = [
    (3, 2.9150, 2.4402, 1.8578),
    (4, 2.9729, 2.4526, 1.8307),
    (5, 3.0158, 2.4564, 1.8015),
    (6, 3.0495, 2.4522, 1.7702),
    (7, 3.0771, 2.4418, 1.7342),
    (8, 3.1012, 2.4324, 1.7041),
    (9, 3.1215, 2.4231, 1.6768),
    (10, 3.1393, 2.4142, 1.6517),
];

/// (d, MES, MVS) two-round visibility threshold.
pub const QMIN_REF: [(usize, f64, f64); 8] = [
    (3, 0.8845, 0.8773),
    (4, 0.8872, 0.8748),
    (5, 0.8900, 0.8737),
    (6, 0.8933, 0.8736),
    (7, 0.8963, 0.8738),
    (8, 0.8987, 0.8741),
    (9, 0.9012, 0.8748),
    (10, 0.9034, 0.8752),
];

fn s(l: f64) -> f64 {
    (1.0 - l).sqrt() * (2.0 * l + 1.0).sqrt()
}

/// First-round value for d = 3 from the maximally entangled state.
pub fn i3_round1(l1: f64) -> f64 {
    4.0 / 9.0 * (3.0 + 2.0 * 3f64.sqrt()) * l1
}

pub fn i3_round2(l1: f64, l2: f64) -> f64 {
    let r3 = 3f64.sqrt();
    4.0 * l2 / 81.0
        * (-2.0 * (r3 + 3.0) * l1
            + 12.0 * (1.0 - l1).sqrt() * (2.0 * l1 + 1.0).sqrt()
            + 4.0 * (2.0 * l1 + 1.0).sqrt() * (3.0 - 3.0 * l1).sqrt()
            + 14.0 * r3
            + 15.0)
}

pub fn i3_round3(l1: f64, l2: f64, l3: f64) -> f64 {
    let r3 = 3f64.sqrt();
    let (s1, s2) = (s(l1), s(l2));
    let a = r3 + 6.0;
    let b = 7.0 * r3 + 15.0;
    4.0 * l3 / 729.0
        * (4.0 * a * (2.0 * s2 - l2) * s1 - 2.0 * l1 * (b - a * l2 + 2.0 * a * s2) - 2.0 * b * l2
            + 4.0 * b * (s1 + s2)
            + 75.0
            + 98.0 * r3)
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

pub fn random_product_state<R: Rng>(rng: &mut R, d: usize) -> ComplexMatrix {
    let a = random_unit_vector(rng, d);
    let b = random_unit_vector(rng, d);
    let joint: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
    ComplexMatrix::outer(&joint)
}

/// Random full-rank density: G G† / Tr.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = g.matmul(&g.adjoint());
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr)
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&g + &g.adjoint()).scale_real(0.5)
}
