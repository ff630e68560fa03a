//! White noise on states, unsharp effects on Bob's side and the sequential
//! scenario in which several Bobs measure one after another.
//!
//! Each Bob picks one of his two settings with equal probability and
//! passes on the post-measurement (Lüders) state averaged over settings and
//! outcomes. Alice never measures before the Bobs are done.

use serde::Serialize;

use crate::cglmp::{state, BipartiteState, CglmpSetup, MeasurementBasis, StateKind, LOCAL_BOUND};
use crate::error::{Error, Result};
use crate::qmath::{effect_sqrt, ComplexMatrix, C64, ZERO};
use crate::solvers::bisect;

/// p|ψ⟩⟨ψ| + (1−p)/d²·𝕀.
#[derive(Debug, Clone)]
pub struct NoisyState {
    pub base: BipartiteState,
    pub visibility: f64,
    pub density: ComplexMatrix,
}

pub fn noisy_state(psi: &BipartiteState, p: f64) -> Result<NoisyState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "visibility",
            value: p,
        });
    }
    if !psi.is_pure() {
        return Err(Error::NotPure);
    }
    Ok(NoisyState {
        base: psi.clone(),
        visibility: p,
        density: white_noise_mixture(&psi.density, psi.d, p),
    })
}

/// p·ρ + (1−p)/d²·𝕀 for any density ρ on C^d ⊗ C^d.
pub fn white_noise_mixture(density: &ComplexMatrix, d: usize, p: f64) -> ComplexMatrix {
    let n = d * d;
    let mut out = density.scale_real(p);
    let noise = (1.0 - p) / n as f64;
    for i in 0..n {
        out[(i, i)] += noise;
    }
    out
}

fn check_sharpness(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "sharpness",
            value: lambda,
        })
    }
}

/// Unsharp POVM {λ|l⟩⟨l| + (1−λ)/d·𝕀}_l built on a measurement basis.
#[derive(Debug, Clone)]
pub struct EffectSet {
    pub d: usize,
    pub basis: MeasurementBasis,
    pub sharpness: f64,
    pub effects: Vec<ComplexMatrix>,
}

impl EffectSet {
    pub fn new(basis: &MeasurementBasis, lambda: f64) -> Result<Self> {
        check_sharpness(lambda)?;
        let d = basis.d;
        let noise = (1.0 - lambda) / d as f64;
        let effects = (0..d)
            .map(|l| {
                let mut e = ComplexMatrix::identity(d).scale_real(noise);
                e.add_scaled(lambda, &basis.projector(l));
                e
            })
            .collect();
        Ok(Self {
            d,
            basis: basis.clone(),
            sharpness: lambda,
            effects,
        })
    }

    /// Square roots of the effects, from their rank-one-plus-identity form.
    pub fn sqrt_effects(&self) -> Vec<ComplexMatrix> {
        (0..self.d)
            .map(|l| effect_sqrt(&self.basis.projector(l), self.sharpness).expect("sharpness checked"))
            .collect()
    }

    /// ‖Σ_l E^l − 𝕀‖_max.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d, self.d);
        for e in &self.effects {
            sum.add_scaled(1.0, e);
        }
        sum.max_abs_diff(&ComplexMatrix::identity(self.d))
    }
}

pub fn unsharp_effects(basis: &MeasurementBasis, lambda: f64) -> Result<EffectSet> {
    EffectSet::new(basis, lambda)
}

fn infer_local_dimension(rho: &ComplexMatrix) -> Result<usize> {
    let n = rho.rows();
    let d = (n as f64).sqrt().round() as usize;
    if !rho.is_square() || d * d != n || d < 2 {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: n,
        });
    }
    Ok(d)
}

/// (𝕀 ⊗ K) ρ (𝕀 ⊗ K) for Hermitian K, accumulated into `out` with weight `w`.
fn accumulate_local_sandwich(out: &mut ComplexMatrix, rho: &ComplexMatrix, k: &ComplexMatrix, w: f64) {
    let d = k.rows();
    let mut tmp = vec![ZERO; d * d];
    for x in 0..d {
        for y in 0..d {
            // tmp = K · ρ_xy
            for m in 0..d {
                for n in 0..d {
                    let mut acc = ZERO;
                    for t in 0..d {
                        acc += k[(m, t)] * rho[(x * d + t, y * d + n)];
                    }
                    tmp[m * d + n] = acc;
                }
            }
            // out_xy += w · tmp · K
            for m in 0..d {
                for n in 0..d {
                    let mut acc = ZERO;
                    for t in 0..d {
                        acc += tmp[m * d + t] * k[(t, n)];
                    }
                    out[(x * d + m, y * d + n)] += acc * w;
                }
            }
        }
    }
}

/// Post-measurement state after one unsharp Bob, averaged over his two
/// equally likely settings: ½ Σ_b Σ_l (𝕀⊗√E^l_b) ρ (𝕀⊗√E^l_b).
pub fn luders_channel(rho: &ComplexMatrix, lambda: f64) -> Result<ComplexMatrix> {
    check_sharpness(lambda)?;
    let d = infer_local_dimension(rho)?;
    let setup = CglmpSetup::shared(d)?;
    luders_channel_with(&setup, rho, lambda)
}

pub(crate) fn luders_channel_with(setup: &CglmpSetup, rho: &ComplexMatrix, lambda: f64) -> Result<ComplexMatrix> {
    let d = setup.d;
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for b in 0..2 {
        for l in 0..d {
            let root = effect_sqrt(setup.bob_projector(b, l), lambda)?;
            accumulate_local_sandwich(&mut out, rho, &root, 0.5);
        }
    }
    Ok(out)
}

/// Record of a sequential run: the value seen by each Bob and the state he
/// received.
#[derive(Debug, Clone)]
pub struct SequentialRun {
    pub d: usize,
    pub sharpness: Vec<f64>,
    pub values: Vec<f64>,
    /// `states[m]` is the state measured in round m + 1.
    pub states: Vec<ComplexMatrix>,
}

impl SequentialRun {
    pub fn violations(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > LOCAL_BOUND).collect()
    }
}

/// Round m uses Bob_m at `sharpness[m−1]` on the state left by the previous
/// m−1 Bobs. Alice is always sharp.
pub fn sequential_values(initial: &ComplexMatrix, sharpness: &[f64]) -> Result<SequentialRun> {
    let d = infer_local_dimension(initial)?;
    let setup = CglmpSetup::shared(d)?;
    sequential_values_with(&setup, initial, sharpness)
}

pub fn sequential_values_with(setup: &CglmpSetup, initial: &ComplexMatrix, sharpness: &[f64]) -> Result<SequentialRun> {
    for &lambda in sharpness {
        check_sharpness(lambda)?;
    }
    let mut states = Vec::with_capacity(sharpness.len());
    let mut values = Vec::with_capacity(sharpness.len());
    let mut current = initial.clone();
    for (m, &lambda) in sharpness.iter().enumerate() {
        values.push(setup.value(&current, lambda)?);
        let next = if m + 1 < sharpness.len() {
            Some(luders_channel_with(setup, &current, lambda)?)
        } else {
            None
        };
        states.push(current);
        match next {
            Some(n) => current = n,
            None => break,
        }
    }
    Ok(SequentialRun {
        d: setup.d,
        sharpness: sharpness.to_vec(),
        values,
        states,
    })
}

/// How a just-violating sharpness is chosen from the exact threshold 2/I.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpnessPolicy {
    /// Thresholds are rounded up to a multiple of this step, if set.
    pub grid_step: Option<f64>,
    /// Lowest sharpness on the scan grid.
    pub floor: f64,
}

impl SharpnessPolicy {
    pub const EXACT: SharpnessPolicy = SharpnessPolicy {
        grid_step: None,
        floor: 0.0,
    };

    /// λ scanned from 0.66 upward in steps of 10⁻³, taking the first grid
    /// point at or above the threshold. This is the policy behind the
    /// reference sequential tables.
    pub const TABULATED: SharpnessPolicy = SharpnessPolicy {
        grid_step: Some(1e-3),
        floor: 0.66,
    };

    pub fn apply(&self, threshold: f64) -> f64 {
        let snapped = match self.grid_step {
            Some(step) => {
                let n = (threshold / step - 1e-9).ceil();
                n * step
            }
            None => threshold,
        };
        snapped.max(self.floor).min(1.0)
    }
}

impl Default for SharpnessPolicy {
    fn default() -> Self {
        Self::TABULATED
    }
}

/// Sharpness at which the current round's value reaches the local bound.
///
/// The value is linear in the measuring Bob's sharpness whenever white noise
/// on his side cancels; that is checked and then exploited (exact division).
/// Otherwise the threshold is bisected to 1e-9.
pub fn round_threshold(setup: &CglmpSetup, density: &ComplexMatrix) -> Result<f64> {
    let sharp = setup.value(density, 1.0)?;
    if sharp <= LOCAL_BOUND {
        return Err(Error::NoViolation {
            best: sharp,
            bound: LOCAL_BOUND,
        });
    }
    let half = setup.value(density, 0.5)?;
    if (half - 0.5 * sharp).abs() <= 1e-10 * sharp.abs().max(1.0) {
        return Ok(LOCAL_BOUND / sharp);
    }
    let f = |lambda: f64| setup.value(density, lambda.max(f64::MIN_POSITIVE)).map(|v| v - LOCAL_BOUND);
    bisect(f, 0.0, 1.0, 1e-9)
}

/// Optimal values of the first three rounds when each unsharp Bob is kept
/// just above his violation threshold and the last Bob is sharp.
#[derive(Debug, Clone, Serialize)]
pub struct MinViolation {
    pub d: usize,
    pub kind: StateKind,
    /// I¹, I², I³ at sharpness 1 for the round being evaluated.
    pub values: [f64; 3],
    /// Exact thresholds 2/I¹ and 2/I².
    pub thresholds: [f64; 2],
    /// Sharpness actually given to Bob₁ and Bob₂.
    pub applied: [f64; 2],
}

pub fn min_violation_table(d: usize, kind: StateKind, policy: SharpnessPolicy) -> Result<MinViolation> {
    let psi = state(d, kind)?;
    min_violation_for(&psi.density, d, kind, policy)
}

pub fn min_violation_for(density: &ComplexMatrix, d: usize, kind: StateKind, policy: SharpnessPolicy) -> Result<MinViolation> {
    let setup = CglmpSetup::shared(d)?;
    let i1 = setup.value(density, 1.0)?;
    let t1 = round_threshold(&setup, density)?;
    let l1 = policy.apply(t1);
    let rho2 = luders_channel_with(&setup, density, l1)?;
    let i2 = setup.value(&rho2, 1.0)?;
    let t2 = round_threshold(&setup, &rho2)?;
    let l2 = policy.apply(t2);
    let rho3 = luders_channel_with(&setup, &rho2, l2)?;
    let i3 = setup.value(&rho3, 1.0)?;
    Ok(MinViolation {
        d,
        kind,
        values: [i1, i2, i3],
        thresholds: [t1, t2],
        applied: [l1, l2],
    })
}

/// Reduced operator on Bob's side, Tr_A ρ.
pub fn partial_trace_alice(rho: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |m, n| (0..d).map(|x| rho[(x * d + m, x * d + n)]).sum::<C64>())
}

/// Reduced operator on Alice's side, Tr_B ρ.
pub fn partial_trace_bob(rho: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |x, y| (0..d).map(|m| rho[(x * d + m, y * d + m)]).sum::<C64>())
}
