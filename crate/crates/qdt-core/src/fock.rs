//! Truncated Fock-basis operators and coherent-state amplitudes.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QdtError, Result};
use crate::linalg;
use crate::tolerances;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const LN_FACT_TABLE: usize = 8192;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..LN_FACT_TABLE)
            .map(|n| {
                if n < 2 {
                    0.0
                } else {
                    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
                }
            })
            .collect()
    })
}

/// `ln(n!)` via log-gamma, cached for small `n`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_TABLE {
        ln_fact_table()[n]
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// `ln(e^{-m²} m^{j+k} / sqrt(j! k!))`. Returns `-inf` when the weight is
/// exactly zero (`m = 0` and `j + k > 0`).
pub fn log_weight(j: usize, k: usize, magnitude: f64) -> f64 {
    assert!(magnitude >= 0.0, "magnitude must be nonnegative");
    let p = j + k;
    let pow = if p == 0 {
        0.0
    } else if magnitude == 0.0 {
        return f64::NEG_INFINITY;
    } else {
        p as f64 * magnitude.ln()
    };
    -magnitude * magnitude + pow - 0.5 * (ln_factorial(j) + ln_factorial(k))
}

/// Poisson probability mass beyond `n_max` (exclusive of `n_max`), by direct
/// summation of the log-space pmf.
pub fn poisson_tail_above(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let pmf = |n: usize| (-mean + n as f64 * ln_mean - ln_factorial(n)).exp();
    let mut total = 0.0;
    let mut n = n_max + 1;
    loop {
        let t = pmf(n);
        total += t;
        // past the mode the terms fall at least geometrically
        if n as f64 > mean && (t == 0.0 || t < total * 1e-18) {
            break;
        }
        n += 1;
    }
    total
}

/// Fock coefficients of a coherent state truncated to `dim` levels.
#[derive(Debug, Clone)]
pub struct CoherentAmplitudes {
    pub magnitude: f64,
    pub phase: f64,
    pub coeffs: CVector,
    /// Probability mass of the untruncated state above photon number `dim-1`.
    pub tail_mass: f64,
}

impl CoherentAmplitudes {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub fn coherent_amplitudes(magnitude: f64, phase: f64, dim: usize) -> Result<CoherentAmplitudes> {
    if !(magnitude >= 0.0) || !magnitude.is_finite() {
        return Err(QdtError::InvalidArgument(format!(
            "coherent magnitude must be finite and nonnegative, got {magnitude}"
        )));
    }
    if dim == 0 {
        return Err(QdtError::InvalidArgument("dim must be at least 1".into()));
    }
    let phase = phase.rem_euclid(std::f64::consts::TAU);
    let coeffs = CVector::from_fn(dim, |j, _| {
        // half of log_weight(j, j, m) is exactly ln(e^{-m²/2} m^j / sqrt(j!))
        let lw = 0.5 * log_weight(j, j, magnitude);
        Complex64::from_polar(lw.exp(), j as f64 * phase)
    });
    let tail_mass = poisson_tail_above(magnitude * magnitude, dim - 1);
    Ok(CoherentAmplitudes {
        magnitude,
        phase,
        coeffs,
        tail_mass,
    })
}

/// Dense Hermitian operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    m: CMatrix,
}

impl FockOperator {
    /// Wrap a matrix, checking it is square and Hermitian.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QdtError::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(QdtError::InvalidArgument("dim must be at least 1".into()));
        }
        let err = hermitian_defect(&m);
        if err > tolerances::HERMITIAN_ABS {
            return Err(QdtError::InvalidArgument(format!(
                "operator is not Hermitian (defect {err:.3e})"
            )));
        }
        Ok(Self { m })
    }

    /// Wrap a matrix known to be Hermitian by construction. Applies
    /// [`hermitize`] to remove rounding asymmetry.
    pub fn from_hermitian_unchecked(m: CMatrix) -> Self {
        Self {
            m: hermitize_matrix(&m),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMatrix::zeros(d, d);
        for (j, &x) in diag.iter().enumerate() {
            m[(j, j)] = Complex64::new(x, 0.0);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.m[(j, k)]
    }

    /// `⟨v|A|v⟩`, real for Hermitian `A`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        let av = &self.m * v;
        v.dotc(&av).re
    }

    /// Entries `A[j][j+l]` for `j = 0..dim-l`.
    pub fn diagonal(&self, l: usize) -> Vec<Complex64> {
        let d = self.dim();
        (0..d.saturating_sub(l))
            .map(|j| self.m[(j, j + l)])
            .collect()
    }

    /// Real part of the main diagonal.
    pub fn main_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.m[(j, j)].re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `I - A`.
    pub fn complement(&self) -> Self {
        let d = self.dim();
        Self {
            m: CMatrix::identity(d, d) - &self.m,
        }
    }

    /// Copy of the operator keeping only diagonals `|l| <= l_max`.
    pub fn band(&self, l_max: usize) -> Self {
        let d = self.dim();
        let m = CMatrix::from_fn(d, d, |j, k| {
            if j.abs_diff(k) <= l_max {
                self.m[(j, k)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self { m }
    }

    /// Leading `dim x dim` block.
    pub fn truncate(&self, dim: usize) -> Self {
        let dim = dim.min(self.dim());
        Self {
            m: self.m.view((0, 0), (dim, dim)).into_owned(),
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.m)
    }
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        for k in j..d {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

fn hermitize_matrix(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `(A + A†)/2` for any square complex matrix.
pub fn hermitize(m: &CMatrix) -> Result<FockOperator> {
    if m.nrows() != m.ncols() {
        return Err(QdtError::DimensionMismatch(format!(
            "hermitize needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(QdtError::InvalidArgument("dim must be at least 1".into()));
    }
    Ok(FockOperator {
        m: hermitize_matrix(m),
    })
}

#[derive(Serialize, Deserialize)]
struct FockOperatorJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for FockOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let re = (0..d)
            .map(|j| (0..d).map(|k| self.m[(j, k)].re).collect())
            .collect();
        let im = (0..d)
            .map(|j| (0..d).map(|k| self.m[(j, k)].im).collect())
            .collect();
        FockOperatorJson { dim: d, re, im }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FockOperator {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = FockOperatorJson::deserialize(de)?;
        let d = raw.dim;
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !rows_ok(&raw.re) || !rows_ok(&raw.im) {
            return Err(D::Error::custom(format!("re/im must both be {d}x{d}")));
        }
        let m = CMatrix::from_fn(d, d, |j, k| Complex64::new(raw.re[j][k], raw.im[j][k]));
        FockOperator::new(m).map_err(D::Error::custom)
    }
}

/// Outcome of checking a [`PovmSet`] against its physical constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmCheck {
    pub min_eigenvalues: Vec<f64>,
    /// Largest element-wise deviation of `Σ Π_n` from the identity.
    pub completeness_error: f64,
    pub hermitian_defect: f64,
}

impl PovmCheck {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, psd_tol: f64, completeness_tol: f64) -> bool {
        self.min_eigenvalue() >= -psd_tol
            && self.completeness_error <= completeness_tol
            && self.hermitian_defect <= tolerances::HERMITIAN_ABS
    }
}

/// Ordered list of POVM elements sharing one truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmSet {
    pub outcomes: Vec<FockOperator>,
}

impl PovmSet {
    /// Build without validating physical constraints (only shapes).
    pub fn new(outcomes: Vec<FockOperator>) -> Result<Self> {
        let Some(first) = outcomes.first() else {
            return Err(QdtError::InvalidArgument(
                "POVM needs at least one outcome".into(),
            ));
        };
        let d = first.dim();
        if outcomes.iter().any(|o| o.dim() != d) {
            return Err(QdtError::DimensionMismatch(
                "POVM elements differ in dim".into(),
            ));
        }
        Ok(Self { outcomes })
    }

    /// Build and insist on positivity and completeness at the default
    /// tolerances.
    pub fn validated(outcomes: Vec<FockOperator>) -> Result<Self> {
        let s = Self::new(outcomes)?;
        let c = s.check();
        if !c.passes(tolerances::POVM_PSD, tolerances::POVM_COMPLETENESS) {
            return Err(QdtError::ModelInvalid(format!(
                "POVM fails invariants: min eigenvalue {:.3e}, completeness error {:.3e}",
                c.min_eigenvalue(),
                c.completeness_error
            )));
        }
        Ok(s)
    }

    /// Two-outcome set `{Π₀, I - Π₀}`.
    pub fn binary(no_click: FockOperator) -> Self {
        let click = no_click.complement();
        Self {
            outcomes: vec![no_click, click],
        }
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].dim()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn check(&self) -> PovmCheck {
        let d = self.dim();
        let mut sum = CMatrix::zeros(d, d);
        for o in &self.outcomes {
            sum += o.matrix();
        }
        let id = CMatrix::identity(d, d);
        let completeness_error = (sum - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        PovmCheck {
            min_eigenvalues: self.outcomes.iter().map(|o| o.min_eigenvalue()).collect(),
            completeness_error,
            hermitian_defect: self
                .outcomes
                .iter()
                .map(|o| o.hermitian_defect())
                .fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_amplitudes() {
        let c = coherent_amplitudes(0.0, 0.0, 5).unwrap();
        assert_eq!(c.coeffs[0], Complex64::new(1.0, 0.0));
        for j in 1..5 {
            assert_eq!(c.coeffs[j], Complex64::new(0.0, 0.0));
        }
        assert_eq!(c.tail_mass, 0.0);
    }

    #[test]
    fn unit_amplitude_ground_coefficient() {
        let c = coherent_amplitudes(1.0, 0.0, 50).unwrap();
        assert_abs_diff_eq!(c.coeffs[0].re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.coeffs[0].re, 0.60653, epsilon = 1e-5);
    }

    #[test]
    fn phase_enters_as_j_theta() {
        let c = coherent_amplitudes(2.0, std::f64::consts::FRAC_PI_2, 10).unwrap();
        // j = 1 carries a factor i
        assert!(c.coeffs[1].re.abs() < 1e-15 && c.coeffs[1].im > 0.0);
        // j = 2 carries -1
        assert!(c.coeffs[2].re < 0.0 && c.coeffs[2].im.abs() < 1e-15);
    }

    #[test]
    fn norm_matches_direct_poisson_tail() {
        let m = 5f64.sqrt();
        let c = coherent_amplitudes(m, std::f64::consts::FRAC_PI_2, 60).unwrap();
        // direct recursion of Poisson(5) pmf, independent of log-gamma
        let mut p = (-5f64).exp();
        let mut head = 0.0;
        for n in 0..60 {
            if n > 0 {
                p *= 5.0 / n as f64;
            }
            head += p;
        }
        let mut tail = 0.0;
        let mut q = p;
        for n in 60..400 {
            q *= 5.0 / n as f64;
            tail += q;
        }
        assert!((c.norm_sqr() - (1.0 - tail)).abs() < 1e-10);
        assert!((c.norm_sqr() - head).abs() < 1e-12);
        assert!((c.tail_mass - tail).abs() < 1e-30 + 1e-12 * tail);
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let c = coherent_amplitudes(100.0, 1.0, 1000).unwrap();
        assert!(c
            .coeffs
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!(c.norm_sqr() <= 1.0 + 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(coherent_amplitudes(-1.0, 0.0, 5).is_err());
        assert!(coherent_amplitudes(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn log_weight_examples() {
        assert_abs_diff_eq!(log_weight(0, 0, 1.0), -1.0, epsilon = 1e-15);
        assert_eq!(log_weight(0, 0, 0.0), 0.0);
        assert_eq!(log_weight(1, 0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_weight_matches_direct_product() {
        // e^{-50} 50^11 / sqrt(10! 12!) is representable in f64 without log tricks
        let f10: f64 = (1..=10).map(|x| x as f64).product();
        let f12: f64 = (1..=12).map(|x| x as f64).product();
        let direct = (-50f64).exp() * 50f64.powi(11) / (f10 * f12).sqrt();
        assert!((log_weight(10, 12, 50f64.sqrt()) - direct.ln()).abs() < 1e-9);
    }

    #[test]
    fn hermitize_examples() {
        let id = CMatrix::identity(3, 3);
        assert_eq!(hermitize(&id).unwrap().matrix(), &id);
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let h = Complex64::new(0.5, 0.0);
        let a = CMatrix::from_row_slice(2, 2, &[z, o, z, z]);
        let b = CMatrix::from_row_slice(2, 2, &[z, h, h, z]);
        assert_eq!(hermitize(&a).unwrap().matrix(), &b);
        assert!(hermitize(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = CMatrix::from_fn(3, 3, |j, k| {
            if j == k {
                Complex64::new(j as f64, 0.0)
            } else if j < k {
                Complex64::new(0.1, 0.2)
            } else {
                Complex64::new(0.1, -0.2)
            }
        });
        let op = FockOperator::new(m).unwrap();
        let s = serde_json::to_string(&op).unwrap();
        assert!(s.contains("\"dim\":3") && s.contains("\"re\"") && s.contains("\"im\""));
        let back: FockOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn povm_check_flags_violations() {
        let p = PovmSet::binary(FockOperator::from_real_diagonal(&[1.0, 0.5]));
        assert!(p.check().passes(1e-8, 1e-8));
        let bad = PovmSet::new(vec![FockOperator::from_real_diagonal(&[1.5, 0.5])]).unwrap();
        assert!(!bad.check().passes(1e-8, 1e-8));
        assert!(PovmSet::validated(bad.outcomes).is_err());
    }
}
