//! Thresholds, boundary curves and areas in the (1−λ, 1−p) noise plane, and
//! the two-round visibility q_min.

use serde::Serialize;

use crate::cglmp::{BipartiteState, CglmpSetup, StateKind, LOCAL_BOUND};
use crate::error::{Error, Result};
use crate::noise_seq::{luders_channel_with, white_noise_mixture};

/// Tolerance on the abscissa for every bisection in this module.
pub const BISECTION_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance of the adaptive Simpson rule used for ANR.
pub const QUADRATURE_TOLERANCE: f64 = 1e-7;
/// Default number of visibility samples on a boundary curve.
pub const DEFAULT_CURVE_POINTS: usize = 400;
/// Values within this distance of the bound count as sitting on it.
const BOUNDARY_SLACK: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;
const MAX_SIMPSON_DEPTH: usize = 50;

/// Root of `f` on `[lo, hi]`, which must bracket a sign change.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoCrossing {
            reason: format!("f({lo}) = {f_lo} and f({hi}) = {f_hi} share a sign"),
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "bisection",
        iterations: MAX_BISECTIONS,
    })
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, MAX_SIMPSON_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &mut F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 {
        return Err(Error::NoConvergence {
            what: "adaptive Simpson",
            iterations: MAX_SIMPSON_DEPTH,
        });
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// A pure state together with its cached d-dependent setup.
pub struct NoisePlane<'a> {
    setup: &'a CglmpSetup,
    state: &'a BipartiteState,
}

impl<'a> NoisePlane<'a> {
    pub fn new(setup: &'a CglmpSetup, state: &'a BipartiteState) -> Result<Self> {
        if state.d != setup.d {
            return Err(Error::DimensionMismatch {
                expected: setup.d,
                found: state.d,
            });
        }
        if !state.is_pure() {
            return Err(Error::NotPure);
        }
        Ok(Self { setup, state })
    }

    /// I_d at visibility `p` and Bob sharpness `lambda`, evaluated directly
    /// on the mixed state.
    pub fn value(&self, p: f64, lambda: f64) -> Result<f64> {
        let rho = white_noise_mixture(&self.state.density, self.setup.d, p);
        self.setup.value(&rho, lambda)
    }

    /// Smallest visibility violating the bound at sharpness `lambda`.
    pub fn p_min_at(&self, lambda: f64) -> Result<f64> {
        let top = self.value(1.0, lambda)?;
        if top <= LOCAL_BOUND {
            return Err(Error::NoViolation {
                best: top,
                bound: LOCAL_BOUND,
            });
        }
        bisect(|p| self.value(p, lambda).map(|v| v - LOCAL_BOUND), 0.0, 1.0, BISECTION_TOLERANCE)
    }

    /// Visibility threshold with sharp measurements.
    pub fn p_min(&self) -> Result<f64> {
        self.p_min_at(1.0)
    }

    /// Smallest sharpness violating the bound at visibility `p`.
    pub fn lambda_min(&self, p: f64) -> Result<f64> {
        let top = self.value(p, 1.0)?;
        if top < LOCAL_BOUND - BOUNDARY_SLACK {
            return Err(Error::NoViolation {
                best: top,
                bound: LOCAL_BOUND,
            });
        }
        if top <= LOCAL_BOUND {
            return Ok(1.0);
        }
        bisect(
            |lambda| {
                let lambda = lambda.max(f64::MIN_POSITIVE);
                self.value(p, lambda).map(|v| v - LOCAL_BOUND)
            },
            0.0,
            1.0,
            BISECTION_TOLERANCE,
        )
    }

    /// Area of the violating region in the (1−λ, 1−p) plane by adaptive
    /// Simpson over the boundary, with the closed form for comparison.
    pub fn anr(&self, tol: f64) -> Result<AnrResult> {
        let p_min = self.p_min()?;
        let integrand = |x: f64| -> Result<f64> {
            match self.lambda_min(1.0 - x) {
                Ok(lambda) => Ok(1.0 - lambda),
                // the upper limit is itself a bisection result
                Err(Error::NoViolation { .. }) => Ok(0.0),
                Err(e) => Err(e),
            }
        };
        let quadrature = adaptive_simpson(integrand, 0.0, 1.0 - p_min, tol)?;
        Ok(AnrResult {
            d: self.setup.d,
            kind: self.state.kind,
            p_min,
            quadrature,
            closed_form: anr_closed_form(p_min),
        })
    }

    /// Boundary sampled at `points` visibilities evenly spaced on [p_min, 1].
    pub fn boundary_curve(&self, points: usize) -> Result<BoundaryCurve> {
        if points < 2 {
            return Err(Error::OutOfRange {
                name: "grid",
                value: points as f64,
            });
        }
        let p_min = self.p_min()?;
        let step = (1.0 - p_min) / (points - 1) as f64;
        let mut samples = Vec::with_capacity(points);
        for i in 0..points {
            let p = if i + 1 == points { 1.0 } else { p_min + step * i as f64 };
            let lambda = if i == 0 { 1.0 } else { self.lambda_min(p)? };
            samples.push(BoundaryPoint {
                measurement_noise: 1.0 - lambda,
                state_noise: 1.0 - p,
            });
        }
        Ok(BoundaryCurve {
            d: self.setup.d,
            kind: self.state.kind,
            resolution: step,
            samples,
        })
    }

    /// Two-round visibility threshold.
    pub fn q_min(&self) -> Result<QminResult> {
        let q_linear = self.rounds_scale_with_visibility()?;
        if q_linear {
            let crossing = crossing(self.setup, &self.state.density)?;
            Ok(QminResult {
                d: self.setup.d,
                kind: self.state.kind,
                q_min: LOCAL_BOUND / crossing.value,
                crossing_lambda: crossing.lambda,
                crossing_value: crossing.value,
                q_linear,
            })
        } else {
            // visibility bisection on the best achievable two-round minimum
            let p_min = self.p_min()?;
            let best = |q: f64| -> Result<f64> {
                let rho = white_noise_mixture(&self.state.density, self.setup.d, q);
                crossing(self.setup, &rho).map(|c| c.value - LOCAL_BOUND)
            };
            let q = bisect(best, p_min, 1.0, BISECTION_TOLERANCE)?;
            let c = crossing(self.setup, &self.state.density)?;
            Ok(QminResult {
                d: self.setup.d,
                kind: self.state.kind,
                q_min: q,
                crossing_lambda: c.lambda,
                crossing_value: c.value,
                q_linear,
            })
        }
    }

    /// Checks I¹ and I² on the noisy state are q times their pure values.
    fn rounds_scale_with_visibility(&self) -> Result<bool> {
        let pure = &self.state.density;
        let q = 0.5;
        let noisy = white_noise_mixture(pure, self.setup.d, q);
        for lambda in [0.3, 0.8] {
            let (a1, a2) = two_rounds(self.setup, pure, lambda)?;
            let (b1, b2) = two_rounds(self.setup, &noisy, lambda)?;
            if (b1 - q * a1).abs() > 1e-10 || (b2 - q * a2).abs() > 1e-10 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// (I¹(λ₁), I²(λ₁)) with Bob₂ sharp.
pub fn two_rounds(setup: &CglmpSetup, density: &crate::qmath::ComplexMatrix, lambda1: f64) -> Result<(f64, f64)> {
    let first = setup.value(density, lambda1)?;
    let after = luders_channel_with(setup, density, lambda1)?;
    Ok((first, setup.value(&after, 1.0)?))
}

#[derive(Debug, Clone, Copy)]
pub struct Crossing {
    pub lambda: f64,
    pub value: f64,
}

/// The λ₁ where I¹ (increasing) meets I² (decreasing); there the smaller of
/// the two rounds is largest.
pub fn crossing(setup: &CglmpSetup, density: &crate::qmath::ComplexMatrix) -> Result<Crossing> {
    let diff = |lambda: f64| two_rounds(setup, density, lambda).map(|(a, b)| a - b);
    // coarse monotonicity check on the difference
    let mut prev = diff(1e-6)?;
    if prev >= 0.0 {
        return Err(Error::NoCrossing {
            reason: format!("first round already exceeds second at λ₁→0 ({prev})"),
        });
    }
    for i in 1..=20 {
        let x = i as f64 / 20.0;
        let cur = diff(x)?;
        if cur <= prev {
            return Err(Error::NoCrossing {
                reason: format!("I¹ − I² not increasing near λ₁ = {x}"),
            });
        }
        prev = cur;
    }
    if prev <= 0.0 {
        return Err(Error::NoCrossing {
            reason: format!("first round stays below second at λ₁ = 1 ({prev})"),
        });
    }
    let lambda = bisect(diff, 1e-6, 1.0, BISECTION_TOLERANCE)?;
    let (first, second) = two_rounds(setup, density, lambda)?;
    Ok(Crossing {
        lambda,
        value: first.min(second),
    })
}

/// ∫_{p_min}^1 (1 − p_min/p) dp, the area when λ_min(p) = p_min/p.
pub fn anr_closed_form(p_min: f64) -> f64 {
    1.0 - p_min + p_min * p_min.ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct AnrResult {
    pub d: usize,
    pub kind: StateKind,
    pub p_min: f64,
    pub quadrature: f64,
    pub closed_form: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryPoint {
    /// 1 − λ_min(p)
    pub measurement_noise: f64,
    /// 1 − p
    pub state_noise: f64,
}

/// Boundary of the violating region, ordered from (0, 1−p_min) to
/// (1−p_min, 0).
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCurve {
    pub d: usize,
    pub kind: StateKind,
    pub resolution: f64,
    pub samples: Vec<BoundaryPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QminResult {
    pub d: usize,
    pub kind: StateKind,
    pub q_min: f64,
    pub crossing_lambda: f64,
    pub crossing_value: f64,
    /// Whether both rounds were verified to scale linearly with visibility.
    pub q_linear: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessRecord {
    pub d: usize,
    pub kind: StateKind,
    pub p_min: f64,
    pub anr: f64,
    pub q_min: f64,
}

pub fn robustness_record(d: usize, kind: StateKind) -> Result<RobustnessRecord> {
    let setup = CglmpSetup::shared(d)?;
    let psi = crate::cglmp::state(d, kind)?;
    let plane = NoisePlane::new(&setup, &psi)?;
    let anr = plane.anr(QUADRATURE_TOLERANCE)?;
    let q = plane.q_min()?;
    Ok(RobustnessRecord {
        d,
        kind,
        p_min: anr.p_min,
        anr: anr.quadrature,
        q_min: q.q_min,
    })
}

pub fn p_min(d: usize, kind: StateKind) -> Result<f64> {
    let setup = CglmpSetup::shared(d)?;
    let psi = crate::cglmp::state(d, kind)?;
    NoisePlane::new(&setup, &psi)?.p_min()
}

pub fn lambda_min(d: usize, kind: StateKind, p: f64) -> Result<f64> {
    let setup = CglmpSetup::shared(d)?;
    let psi = crate::cglmp::state(d, kind)?;
    NoisePlane::new(&setup, &psi)?.lambda_min(p)
}

pub fn anr(d: usize, kind: StateKind, tol: f64) -> Result<AnrResult> {
    let setup = CglmpSetup::shared(d)?;
    let psi = crate::cglmp::state(d, kind)?;
    NoisePlane::new(&setup, &psi)?.anr(tol)
}

pub fn q_min(d: usize, kind: StateKind) -> Result<QminResult> {
    let setup = CglmpSetup::shared(d)?;
    let psi = crate::cglmp::state(d, kind)?;
    NoisePlane::new(&setup, &psi)?.q_min()
}

pub fn boundary_curve(d: usize, kind: StateKind, points: usize) -> Result<BoundaryCurve> {
    let setup = CglmpSetup::shared(d)?;
    let psi = crate::cglmp::state(d, kind)?;
    NoisePlane::new(&setup, &psi)?.boundary_curve(points)
}
