//! Element-by-element reconstruction through regularised P-function kernels.
//!
//! `|k⟩⟨j|` is written as a mixture of coherent projectors with a
//! Gaussian-filtered P-function; integrating that kernel against measured
//! click probabilities on a phase-space grid yields `π^{jk}` directly. The
//! kernels grow rapidly with `j + k`, which is what makes the method fragile
//! against shot noise.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::exec::Execution;
use crate::fock::{ln_factorial, CMatrix, FockOperator};

/// Square quadrature lattice `X, Y ∈ [-x_max, x_max]` with `α = (X + iY)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_max: f64,
    pub step: f64,
}

impl Default for PhaseSpaceGrid {
    fn default() -> Self {
        Self {
            x_max: 10.0,
            step: 0.05,
        }
    }
}

impl PhaseSpaceGrid {
    pub fn new(x_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(x_max > 0.0) {
            return Err(QdtError::InvalidArgument(
                "phase-space grid needs x_max > 0 and step > 0".into(),
            ));
        }
        Ok(Self { x_max, step })
    }

    pub fn points_per_axis(&self) -> usize {
        (2.0 * self.x_max / self.step + 1e-9).floor() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.points_per_axis().pow(2)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `d²α = dX dY / 2`.
    pub fn area_element(&self) -> f64 {
        0.5 * self.step * self.step
    }

    pub fn alpha(&self, idx: usize) -> Complex64 {
        let n = self.points_per_axis();
        let (ix, iy) = (idx / n, idx % n);
        let x = -self.x_max + ix as f64 * self.step;
        let y = -self.x_max + iy as f64 * self.step;
        Complex64::new(x, y) / std::f64::consts::SQRT_2
    }

    pub fn alphas(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.alpha(i)).collect()
    }
}

/// Kernel of one matrix element on a phase-space grid.
#[derive(Debug, Clone)]
pub struct PKernel {
    pub j: usize,
    pub k: usize,
    pub lambda: f64,
    pub values: Vec<Complex64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k))
        .exp()
        .round()
}

/// Filtered kernel of `∂^a_α ∂^b_{α*}`-type terms:
/// `(Λ²/π)(-1)^a(-c)^b Σ_i C(a,i) b!/(b-i)! (α*)^{b-i} (-cα)^{a-i} e^{-c|α|²}`,
/// `c = Λ²`.
fn derivative_term(a: usize, b: usize, alpha: Complex64, lambda: f64) -> Complex64 {
    let c = lambda * lambda;
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..=a.min(b) {
        let coef = binomial(a, i) * (ln_factorial(b) - ln_factorial(b - i)).exp();
        s += alpha.conj().powu((b - i) as u32) * (-c * alpha).powu((a - i) as u32) * coef;
    }
    let sign_a = if a.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pre =
        c / std::f64::consts::PI * sign_a * (-c).powi(b as i32) * (-c * alpha.norm_sqr()).exp();
    s * pre
}

/// Value at `α` of the kernel whose integral against `⟨α|Π|α⟩` gives
/// `⟨j|Π|k⟩`.
pub fn kernel_value(j: usize, k: usize, alpha: Complex64, lambda: f64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for m in 0..=j.min(k) {
        let coef = (0.5 * (ln_factorial(j) + ln_factorial(k))
            - ln_factorial(m)
            - ln_factorial(j - m)
            - ln_factorial(k - m))
        .exp();
        let sign = if (k - m).is_multiple_of(2) { 1.0 } else { -1.0 };
        s += derivative_term(j - m, k - m, alpha, lambda) * (coef * sign);
    }
    s
}

pub fn build_kernel(
    grid: &PhaseSpaceGrid,
    j: usize,
    k: usize,
    lambda: f64,
    exec: Execution,
) -> PKernel {
    let values = exec.map(grid.len(), |i| kernel_value(j, k, grid.alpha(i), lambda));
    PKernel {
        j,
        k,
        lambda,
        values,
    }
}

/// Riemann sum `Σ K(α) p(α) d²α` with `p = ⟨α|Π|α⟩` sampled on the grid.
pub fn pfunction_element(
    probabilities: &[f64],
    kernel: &PKernel,
    grid: &PhaseSpaceGrid,
) -> Result<Complex64> {
    if probabilities.len() != kernel.values.len() || kernel.values.len() != grid.len() {
        return Err(QdtError::DimensionMismatch(
            "probabilities, kernel and grid sizes differ".into(),
        ));
    }
    let s: Complex64 = probabilities
        .iter()
        .zip(&kernel.values)
        .map(|(&p, &k)| k * p)
        .sum();
    Ok(s * grid.area_element())
}

/// All elements `j, k < block` as a (generally non-Hermitian) matrix.
pub fn pfunction_block(
    probabilities: &[f64],
    grid: &PhaseSpaceGrid,
    block: usize,
    lambda: f64,
    exec: Execution,
) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(block, block);
    for j in 0..block {
        for k in 0..block {
            let kern = build_kernel(grid, j, k, lambda, exec);
            m[(j, k)] = pfunction_element(probabilities, &kern, grid)?;
        }
    }
    Ok(m)
}

/// Binomially resampled probabilities `Bin(f, p)/f`, one ChaCha stream per
/// grid point.
pub fn noisy_probabilities(p: &[f64], trials: u64, seed: u64, exec: Execution) -> Vec<f64> {
    exec.map(p.len(), |i| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let q = p[i].clamp(0.0, 1.0);
        Binomial::new(trials, q)
            .expect("clamped probability")
            .sample(&mut rng) as f64
            / trials as f64
    })
}

/// Per-element comparison row for plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementError {
    pub j: usize,
    pub k: usize,
    pub reconstructed_re: f64,
    pub reconstructed_im: f64,
    pub truth_re: f64,
    pub truth_im: f64,
    pub abs_error: f64,
}

pub fn element_errors(rec: &CMatrix, truth: &FockOperator) -> Vec<ElementError> {
    let mut out = Vec::new();
    for j in 0..rec.nrows() {
        for k in 0..rec.ncols() {
            let t = truth.get(j, k);
            let r = rec[(j, k)];
            out.push(ElementError {
                j,
                k,
                reconstructed_re: r.re,
                reconstructed_im: r.im,
                truth_re: t.re,
                truth_im: t.im,
                abs_error: (r - t).norm(),
            });
        }
    }
    out
}

pub fn write_element_errors<W: Write>(rows: &[ElementError], w: W) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}
