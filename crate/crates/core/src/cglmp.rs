//! CGLMP measurement settings, the Bell functional and its operator form,
//! and the two families of pure states studied here (maximally entangled and
//! maximally violating).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_seq::EffectSet;
use crate::qmath::{hermitian_eig, tensor, ComplexMatrix, C64, ZERO};

/// Local-realist bound of the CGLMP expression.
pub const LOCAL_BOUND: f64 = 2.0;
/// Smallest accepted gap between the two largest Bell-operator eigenvalues.
pub const MIN_SPECTRAL_GAP: f64 = 1e-8;
/// Dimensions for which the maximally violating state is validated.
pub const MVS_DIMENSIONS: std::ops::RangeInclusive<usize> = 3..=10;

const ALICE_PHASES: [f64; 2] = [0.0, 0.5];
const BOB_PHASES: [f64; 2] = [0.25, -0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// One of a party's two measurement settings; `index()` is 0 for the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    First,
    Second,
}

impl Setting {
    pub const BOTH: [Setting; 2] = [Setting::First, Setting::Second];

    /// Maps the 1-based label used in the inequality to a setting.
    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            1 => Ok(Setting::First),
            2 => Ok(Setting::Second),
            other => Err(Error::OutOfRange {
                name: "setting",
                value: other as f64,
            }),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Setting::First => 0,
            Setting::Second => 1,
        }
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::OutOfRange {
            name: "d",
            value: d as f64,
        });
    }
    Ok(())
}

/// Orthonormal basis of C^d defining one projective measurement setting.
#[derive(Debug, Clone)]
pub struct MeasurementBasis {
    pub d: usize,
    pub party: Party,
    pub setting: Setting,
    pub phase: f64,
    vectors: Vec<Vec<C64>>,
}

impl MeasurementBasis {
    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    pub fn vector(&self, outcome: usize) -> &[C64] {
        &self.vectors[outcome]
    }

    pub fn projector(&self, outcome: usize) -> ComplexMatrix {
        ComplexMatrix::outer(&self.vectors[outcome])
    }

    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        (0..self.d).map(|k| self.projector(k)).collect()
    }

    /// max |⟨k|k′⟩ − δ_kk′|.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, u) in self.vectors.iter().enumerate() {
            for (kp, v) in self.vectors.iter().enumerate() {
                let inner: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                let target = if k == kp { 1.0 } else { 0.0 };
                worst = worst.max((inner - target).norm());
            }
        }
        worst
    }

    /// ‖Σ_k |k⟩⟨k| − 𝕀‖_max.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d, self.d);
        for k in 0..self.d {
            sum.add_scaled(1.0, &self.projector(k));
        }
        sum.max_abs_diff(&ComplexMatrix::identity(self.d))
    }
}

fn fourier_basis(d: usize, party: Party, setting: Setting, sign: f64, phase: f64) -> MeasurementBasis {
    let norm = 1.0 / (d as f64).sqrt();
    let vectors = (0..d)
        .map(|k| {
            (0..d)
                .map(|j| {
                    let angle = 2.0 * PI * j as f64 * (sign * k as f64 + phase) / d as f64;
                    C64::from_polar(norm, angle)
                })
                .collect()
        })
        .collect();
    MeasurementBasis {
        d,
        party,
        setting,
        phase,
        vectors,
    }
}

/// Alice's setting `a` (1 or 2): |k⟩ = d^{-1/2} Σ_j exp(2πi·j(k + α_a)/d)|j⟩.
pub fn alice_basis(d: usize, a: u8) -> Result<MeasurementBasis> {
    check_dimension(d)?;
    let setting = Setting::from_label(a)?;
    Ok(fourier_basis(d, Party::Alice, setting, 1.0, ALICE_PHASES[setting.index()]))
}

/// Bob's setting `b` (1 or 2): |l⟩ = d^{-1/2} Σ_j exp(2πi·j(−l + β_b)/d)|j⟩.
pub fn bob_basis(d: usize, b: u8) -> Result<MeasurementBasis> {
    check_dimension(d)?;
    let setting = Setting::from_label(b)?;
    Ok(fourier_basis(d, Party::Bob, setting, -1.0, BOB_PHASES[setting.index()]))
}

/// Joint outcome probabilities P(A_a = j, B_b = l), indexed `[a][b][j][l]`
/// with 0-based settings.
#[derive(Debug, Clone)]
pub struct JointProbabilities {
    d: usize,
    values: Vec<f64>,
}

impl JointProbabilities {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            values: vec![0.0; 4 * d * d],
        }
    }

    pub fn uniform(d: usize) -> Self {
        let p = 1.0 / (d * d) as f64;
        Self {
            d,
            values: vec![p; 4 * d * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    fn offset(&self, a: usize, b: usize, j: usize, l: usize) -> usize {
        ((a * 2 + b) * self.d + j) * self.d + l
    }

    pub fn get(&self, a: usize, b: usize, j: usize, l: usize) -> f64 {
        self.values[self.offset(a, b, j, l)]
    }

    pub fn set(&mut self, a: usize, b: usize, j: usize, l: usize, p: f64) {
        let i = self.offset(a, b, j, l);
        self.values[i] = p;
    }
}

/// Coefficient tensor c[a, b, j, l] with I_d = Σ c·P(A_a = j, B_b = l).
#[derive(Debug, Clone)]
pub struct BellFunctional {
    pub d: usize,
    coeff: Vec<f64>,
}

impl BellFunctional {
    pub fn local_bound(&self) -> f64 {
        LOCAL_BOUND
    }

    /// Weight 1 − 2k/(d−1) of the k-th block.
    pub fn weight(d: usize, k: usize) -> f64 {
        1.0 - 2.0 * k as f64 / (d as f64 - 1.0)
    }

    #[inline]
    pub fn coefficient(&self, a: usize, b: usize, j: usize, l: usize) -> f64 {
        self.coeff[((a * 2 + b) * self.d + j) * self.d + l]
    }

    pub fn evaluate(&self, probs: &JointProbabilities) -> f64 {
        assert_eq!(probs.d, self.d);
        self.coeff.iter().zip(&probs.values).map(|(c, p)| c * p).sum()
    }
}

/// Builds the CGLMP coefficient tensor.
///
/// A term written `X = Y + m` collects every outcome pair with
/// `X − Y ≡ m (mod d)`.
pub fn bell_functional(d: usize) -> Result<BellFunctional> {
    check_dimension(d)?;
    let mut coeff = vec![0.0; 4 * d * d];
    let di = d as i64;
    let wrap = |x: i64| x.rem_euclid(di) as usize;
    // (alice setting, bob setting, offset, alice-minus-bob?)
    let mut add = |a: usize, b: usize, diff: i64, alice_first: bool, w: f64| {
        for j in 0..d {
            for l in 0..d {
                let delta = if alice_first {
                    j as i64 - l as i64
                } else {
                    l as i64 - j as i64
                };
                if wrap(delta) == wrap(diff) {
                    coeff[((a * 2 + b) * d + j) * d + l] += w;
                }
            }
        }
    };
    for k in 0..(d / 2) {
        let w = BellFunctional::weight(d, k);
        let k = k as i64;
        // f(k)
        add(0, 0, k, true, w); // A1 = B1 + k
        add(1, 0, k + 1, false, w); // B1 = A2 + k + 1
        add(1, 1, k, true, w); // A2 = B2 + k
        add(0, 1, k, false, w); // B2 = A1 + k
        // f(−k−1)
        add(0, 0, -k - 1, true, -w);
        add(1, 0, -k, false, -w);
        add(1, 1, -k - 1, true, -w);
        add(0, 1, -k - 1, false, -w);
    }
    Ok(BellFunctional { d, coeff })
}

/// Hermitian operator B on C^d ⊗ C^d with I_d(ρ) = Tr[ρB].
#[derive(Debug, Clone)]
pub struct BellOperator {
    pub d: usize,
    pub matrix: ComplexMatrix,
}

impl BellOperator {
    pub fn expectation(&self, density: &ComplexMatrix) -> f64 {
        density.trace_product(&self.matrix).re
    }
}

pub fn bell_operator(d: usize) -> Result<BellOperator> {
    Ok(CglmpSetup::shared(d)?.bell_operator().clone())
}

fn build_bell_operator(setup: &CglmpSetup) -> BellOperator {
    let d = setup.d;
    let mut matrix = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..2 {
        for b in 0..2 {
            for j in 0..d {
                let mut bob_part = ComplexMatrix::zeros(d, d);
                for l in 0..d {
                    let c = setup.functional.coefficient(a, b, j, l);
                    if c != 0.0 {
                        bob_part.add_scaled(c, &setup.bob_projectors[b][l]);
                    }
                }
                matrix.add_scaled(1.0, &tensor(&setup.alice_projectors[a][j], &bob_part));
            }
        }
    }
    BellOperator { d, matrix }
}

/// Everything that depends only on d: bases, projectors, the functional and
/// (lazily) the Bell operator. Shared read-only through [`CglmpSetup::shared`].
#[derive(Debug)]
pub struct CglmpSetup {
    pub d: usize,
    pub functional: BellFunctional,
    pub alice: [MeasurementBasis; 2],
    pub bob: [MeasurementBasis; 2],
    alice_projectors: [Vec<ComplexMatrix>; 2],
    bob_projectors: [Vec<ComplexMatrix>; 2],
    operator: OnceLock<BellOperator>,
}

impl CglmpSetup {
    pub fn new(d: usize) -> Result<Self> {
        let alice = [alice_basis(d, 1)?, alice_basis(d, 2)?];
        let bob = [bob_basis(d, 1)?, bob_basis(d, 2)?];
        Ok(Self {
            d,
            functional: bell_functional(d)?,
            alice_projectors: [alice[0].projectors(), alice[1].projectors()],
            bob_projectors: [bob[0].projectors(), bob[1].projectors()],
            alice,
            bob,
            operator: OnceLock::new(),
        })
    }

    /// Process-wide cached setup for dimension `d`.
    pub fn shared(d: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CglmpSetup>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(hit) = cache.lock().unwrap().get(&d) {
            return Ok(Arc::clone(hit));
        }
        // built outside the lock; a racing builder produces an identical value
        let fresh = Arc::new(Self::new(d)?);
        let mut guard = cache.lock().unwrap();
        Ok(Arc::clone(guard.entry(d).or_insert(fresh)))
    }

    pub fn bell_operator(&self) -> &BellOperator {
        self.operator.get_or_init(|| build_bell_operator(self))
    }

    pub fn alice_projector(&self, setting: usize, outcome: usize) -> &ComplexMatrix {
        &self.alice_projectors[setting][outcome]
    }

    pub fn bob_projector(&self, setting: usize, outcome: usize) -> &ComplexMatrix {
        &self.bob_projectors[setting][outcome]
    }

    /// Bob's two unsharp effect sets at sharpness `lambda`.
    pub fn bob_effects(&self, lambda: f64) -> Result<[EffectSet; 2]> {
        Ok([
            EffectSet::new(&self.bob[0], lambda)?,
            EffectSet::new(&self.bob[1], lambda)?,
        ])
    }

    /// I_d of `density` with Alice sharp and Bob at sharpness `lambda`.
    pub fn value(&self, density: &ComplexMatrix, lambda: f64) -> Result<f64> {
        let effects = self.bob_effects(lambda)?;
        let probs = joint_probabilities(density, &self.alice, &effects)?;
        Ok(self.functional.evaluate(&probs))
    }
}

/// Which family a pure state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Mes,
    Mvs,
    Custom,
}

impl StateKind {
    pub fn label(self) -> &'static str {
        match self {
            StateKind::Mes => "mes",
            StateKind::Mvs => "mvs",
            StateKind::Custom => "custom",
        }
    }
}

impl std::fmt::Display for StateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mes" => Ok(StateKind::Mes),
            "mvs" => Ok(StateKind::Mvs),
            other => Err(format!("unknown state kind '{other}' (expected mes or mvs)")),
        }
    }
}

/// Density operator on C^d ⊗ C^d, optionally remembering its pure amplitudes.
#[derive(Debug, Clone)]
pub struct BipartiteState {
    pub d: usize,
    pub kind: StateKind,
    pub density: ComplexMatrix,
    amplitudes: Option<Vec<C64>>,
}

impl BipartiteState {
    /// Pure state from (not necessarily normalized) amplitudes in the
    /// product basis |i⟩|j⟩ ↦ index i·d + j.
    pub fn pure(d: usize, kind: StateKind, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::OutOfRange {
                name: "state norm",
                value: norm,
            });
        }
        let amplitudes: Vec<C64> = amplitudes.into_iter().map(|z| z / norm).collect();
        Ok(Self {
            d,
            kind,
            density: ComplexMatrix::outer(&amplitudes),
            amplitudes: Some(amplitudes),
        })
    }

    /// Arbitrary density operator; checks Hermiticity, unit trace and
    /// positivity.
    pub fn mixed(d: usize, density: ComplexMatrix) -> Result<Self> {
        if density.rows() != d * d || !density.is_square() {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: density.rows(),
            });
        }
        let eig = hermitian_eig(&density)?;
        let trace = eig.values.iter().sum::<f64>();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::OutOfRange {
                name: "trace",
                value: trace,
            });
        }
        let lowest = *eig.values.last().unwrap();
        if lowest < -1e-10 {
            return Err(Error::OutOfRange {
                name: "minimum eigenvalue",
                value: lowest,
            });
        }
        Ok(Self {
            d,
            kind: StateKind::Custom,
            density,
            amplitudes: None,
        })
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        self.amplitudes.as_deref()
    }

    pub fn is_pure(&self) -> bool {
        self.amplitudes.is_some()
    }

    pub fn purity(&self) -> f64 {
        self.density.trace_product(&self.density).re
    }
}

/// The uniform Schmidt state d^{-1/2} Σ_i |ii⟩.
pub fn mes(d: usize) -> Result<BipartiteState> {
    check_dimension(d)?;
    let mut amps = vec![ZERO; d * d];
    for i in 0..d {
        amps[i * d + i] = C64::new(1.0, 0.0);
    }
    BipartiteState::pure(d, StateKind::Mes, amps)
}

/// The state maximizing I_d for the fixed settings: top eigenvector of the
/// Bell operator.
pub fn mvs(d: usize) -> Result<BipartiteState> {
    if !MVS_DIMENSIONS.contains(&d) {
        return Err(Error::OutOfRange {
            name: "d",
            value: d as f64,
        });
    }
    let setup = CglmpSetup::shared(d)?;
    let eig = hermitian_eig(&setup.bell_operator().matrix)?;
    let gap = eig.values[0] - eig.values[1];
    if gap < MIN_SPECTRAL_GAP {
        return Err(Error::DegenerateTop { gap });
    }
    BipartiteState::pure(d, StateKind::Mvs, eig.vector(0))
}

pub fn state(d: usize, kind: StateKind) -> Result<BipartiteState> {
    match kind {
        StateKind::Mes => mes(d),
        StateKind::Mvs => mvs(d),
        StateKind::Custom => Err(Error::OutOfRange {
            name: "state kind",
            value: f64::NAN,
        }),
    }
}

/// P(A_a = j, B_b = l) = Tr[ρ (Π_j^{A_a} ⊗ E_l^{B_b})].
///
/// Computed through Bob's conditional operators σ_{a,j} = Tr_A[(Π_j ⊗ 𝕀)ρ].
pub fn joint_probabilities(
    density: &ComplexMatrix,
    alice: &[MeasurementBasis; 2],
    bob: &[EffectSet; 2],
) -> Result<JointProbabilities> {
    let d = alice[0].d;
    if alice[1].d != d || bob[0].d != d || bob[1].d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bob[0].d.max(bob[1].d).max(alice[1].d),
        });
    }
    if density.rows() != d * d || !density.is_square() {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: density.rows(),
        });
    }
    let mut probs = JointProbabilities::new(d);
    let mut sigma = ComplexMatrix::zeros(d, d);
    for (a, basis) in alice.iter().enumerate() {
        for j in 0..d {
            let v = basis.vector(j);
            // σ[m][n] = Σ_{x,y} Π[y][x] ρ[(x,m),(y,n)],  Π[y][x] = v_y conj(v_x)
            for m in 0..d {
                for n in 0..d {
                    let mut acc = ZERO;
                    for x in 0..d {
                        let vx = v[x].conj();
                        for y in 0..d {
                            acc += v[y] * vx * density[(x * d + m, y * d + n)];
                        }
                    }
                    sigma[(m, n)] = acc;
                }
            }
            for (b, effects) in bob.iter().enumerate() {
                for l in 0..d {
                    probs.set(a, b, j, l, sigma.trace_product(&effects.effects[l]).re);
                }
            }
        }
    }
    Ok(probs)
}

/// I_d for an arbitrary density with Alice's bases and Bob's effect sets.
pub fn cglmp_value(
    density: &ComplexMatrix,
    alice: &[MeasurementBasis; 2],
    bob_effects: &[EffectSet; 2],
) -> Result<f64> {
    let probs = joint_probabilities(density, alice, bob_effects)?;
    let setup = CglmpSetup::shared(probs.d())?;
    Ok(setup.functional.evaluate(&probs))
}
