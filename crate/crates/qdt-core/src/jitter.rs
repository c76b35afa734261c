//! Gaussian LO phase jitter at the operator level.
//!
//! Averaging `R(ξ)† Π R(ξ)` over a phase `ξ` drawn from a Gaussian of width
//! `δ` multiplies the `l`-th diagonal by
//! `w_l = (1/(δ√(2π))) ∫_{-π}^{π} e^{-ξ²/(2δ²)} cos(lξ) dξ`.
//! The prefactor is that of the untruncated Gaussian, so `w_0 < 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::fock::{CMatrix, FockOperator};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    pub delta: f64,
}

/// Adaptive Simpson on `[a, b]`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Damping factor of the `l`-th diagonal. `w_l = 1` for `δ = 0`.
pub fn jitter_weight(l: usize, delta: f64) -> f64 {
    assert!(delta >= 0.0, "jitter width must be nonnegative");
    if delta == 0.0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    let norm = 1.0 / (delta * (2.0 * pi).sqrt());
    let lf = l as f64;
    let f = move |x: f64| norm * (-x * x / (2.0 * delta * delta)).exp() * (lf * x).cos();
    // even integrand: integrate [0, π] in pieces no wider than the Gaussian
    // width or half an oscillation, so the adaptive rule sees the structure
    let width = delta.min(pi / (lf + 1.0)).max(1e-6);
    let pieces = ((pi / width).ceil() as usize).clamp(1, 100_000);
    let h = pi / pieces as f64;
    let tol = tolerances::JITTER_QUAD / pieces as f64;
    let w = 2.0
        * (0..pieces)
            .map(|i| adaptive_simpson(&f, i as f64 * h, (i + 1) as f64 * h, tol))
            .sum::<f64>();
    // |w_l| never exceeds the Gaussian mass inside [-π, π]; clamp away
    // quadrature roundoff so w_0 ≤ 1 holds exactly
    let mass = statrs::function::erf::erf(pi / (delta * std::f64::consts::SQRT_2));
    w.clamp(-mass, mass)
}

/// Jittered operator: the `l`-th and `-l`-th diagonals scaled by `w_l`.
pub fn apply_jitter(op: &FockOperator, delta: f64) -> Result<FockOperator> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(QdtError::InvalidArgument(format!(
            "jitter width must be finite and ≥ 0, got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(op.clone());
    }
    let d = op.dim();
    let w: Vec<f64> = (0..d).map(|l| jitter_weight(l, delta)).collect();
    let m = CMatrix::from_fn(d, d, |j, k| {
        op.get(j, k) * Complex64::new(w[j.abs_diff(k)], 0.0)
    });
    Ok(FockOperator::from_hermitian_unchecked(m))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayViolation {
    pub j: usize,
    pub l: usize,
    pub jittered: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub delta: f64,
    /// `max_j |π'^{j,j+l}| / |π^{j,j+l}|` per `l` (0 where the original
    /// diagonal vanishes).
    pub max_ratio: Vec<f64>,
    /// `e^{-l²δ²/2}` per `l`.
    pub gaussian_factor: Vec<f64>,
    pub violations: Vec<DecayViolation>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `|π'^{j,j+l}| ≤ 2|π^{j,j+l}| e^{-l²δ²/2}` element-wise.
pub fn decay_bound_check(
    original: &FockOperator,
    jittered: &FockOperator,
    delta: f64,
) -> Result<DecayReport> {
    if original.dim() != jittered.dim() {
        return Err(QdtError::DimensionMismatch(format!(
            "{} vs {}",
            original.dim(),
            jittered.dim()
        )));
    }
    let d = original.dim();
    let mut max_ratio = vec![0.0; d];
    let mut gaussian_factor = vec![0.0; d];
    let mut violations = Vec::new();
    for l in 0..d {
        let g = (-((l * l) as f64) * delta * delta / 2.0).exp();
        gaussian_factor[l] = g;
        for j in 0..d - l {
            let a = original.get(j, j + l).norm();
            let b = jittered.get(j, j + l).norm();
            let bound = 2.0 * a * g + tolerances::JITTER_SLACK;
            if b > bound {
                violations.push(DecayViolation {
                    j,
                    l,
                    jittered: b,
                    bound,
                });
            }
            if a > 0.0 {
                max_ratio[l] = f64::max(max_ratio[l], b / a);
            }
        }
    }
    Ok(DecayReport {
        delta,
        max_ratio,
        gaussian_factor,
        violations,
    })
}
