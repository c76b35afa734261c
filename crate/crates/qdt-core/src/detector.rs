//! Ground-truth POVM of a weak-field homodyne click detector.
//!
//! The signal mode `a` meets a local oscillator `α_L` on a beam splitter of
//! reflectivity `R`. The APD watches the port carrying `√(1-R)·a + √R·α_L`;
//! the other port, `√R·a - √(1-R)·α_L`, is discarded. Flipping the sign of
//! the monitored LO term is the same as shifting the LO phase by π.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::fock::{poisson_tail_above, CMatrix, FockOperator, PovmSet};
use crate::linalg;
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Fraction of LO power sent to the monitored port.
    pub reflectivity: f64,
    pub eta_apd: f64,
    /// LO amplitude in √photons.
    pub lo_amplitude: Complex64,
    /// Fock truncation.
    pub dim: usize,
}

impl DetectorSpec {
    pub fn new(
        reflectivity: f64,
        eta_apd: f64,
        lo_amplitude: Complex64,
        dim: usize,
    ) -> Result<Self> {
        let s = Self {
            reflectivity,
            eta_apd,
            lo_amplitude,
            dim,
        };
        s.validate()?;
        Ok(s)
    }

    /// Real LO with mean photon number `lo_photons`.
    pub fn with_lo_photons(
        reflectivity: f64,
        eta_apd: f64,
        lo_photons: f64,
        dim: usize,
    ) -> Result<Self> {
        Self::new(
            reflectivity,
            eta_apd,
            Complex64::new(lo_photons.sqrt(), 0.0),
            dim,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(QdtError::InvalidArgument(format!(
                "reflectivity must lie in [0,1], got {}",
                self.reflectivity
            )));
        }
        if !(0.0..=1.0).contains(&self.eta_apd) {
            return Err(QdtError::InvalidArgument(format!(
                "eta_apd must lie in [0,1], got {}",
                self.eta_apd
            )));
        }
        if !(self.lo_amplitude.re.is_finite() && self.lo_amplitude.im.is_finite()) {
            return Err(QdtError::InvalidArgument(
                "LO amplitude must be finite".into(),
            ));
        }
        if self.dim == 0 {
            return Err(QdtError::InvalidArgument("dim must be at least 1".into()));
        }
        Ok(())
    }

    /// Fraction of signal photons that reach and trigger the APD.
    pub fn overall_efficiency(&self) -> f64 {
        (1.0 - self.reflectivity) * self.eta_apd
    }
}

/// Photons per port needed so that the neglected part of the double series
/// is below `tol/dim²`.
fn series_order(spec: &DetectorSpec, tol: f64, cap: usize) -> Result<usize> {
    let lo = spec.lo_amplitude.norm_sqr();
    let target = tol / (spec.dim * spec.dim) as f64;
    let base = spec.dim - 1;
    let mut extra = 0usize;
    loop {
        // A shell with c+d = N contributes to the truncated block only through
        // at least N-(dim-1) LO factors, whose total weight is a Poisson tail.
        let bound = poisson_tail_above(lo, extra);
        if bound < target {
            return Ok(base + extra);
        }
        if base + extra >= cap {
            return Err(QdtError::SeriesTruncation { cap, bound });
        }
        extra += 1;
    }
}

/// `(p a† + q) v` on the truncated space.
fn raise_affine(v: &[Complex64], p: f64, q: Complex64, sqrt_n: &[f64]) -> Vec<Complex64> {
    let d = v.len();
    let mut out: Vec<Complex64> = v.iter().map(|x| q * x).collect();
    for n in 1..d {
        out[n] += v[n - 1] * (p * sqrt_n[n]);
    }
    out
}

/// No-click operator Π₀ in the `spec.dim` Fock basis.
///
/// Sums `Π₀ = Σ_{c,d} u_cd u_cd†` where `u_cd` is the state with `c` photons
/// in the monitored port (weighted by `(1-η)^c`) and `d` in the discarded
/// port. Each `u_cd` is built by repeated application of `(x a† + y)` and
/// `(z a† + w)` to the vacuum, which is exact under truncation because
/// `a†` only raises.
pub fn build_no_click_povm(spec: &DetectorSpec, series_tolerance: f64) -> Result<FockOperator> {
    build_no_click_povm_capped(spec, series_tolerance, tolerances::SERIES_CAP)
}

pub fn build_no_click_povm_capped(
    spec: &DetectorSpec,
    series_tolerance: f64,
    cap: usize,
) -> Result<FockOperator> {
    spec.validate()?;
    if !(series_tolerance > 0.0) {
        return Err(QdtError::InvalidArgument(
            "series_tolerance must be positive".into(),
        ));
    }
    let dim = spec.dim;
    let eta = spec.eta_apd;
    if eta == 0.0 {
        return Ok(FockOperator::identity(dim));
    }
    let n_max = series_order(spec, series_tolerance, cap)?;

    let r = spec.reflectivity;
    let al = spec.lo_amplitude;
    let x = (1.0 - r).sqrt();
    let y = al.conj() * r.sqrt();
    let z = r.sqrt();
    let w = -al.conj() * (1.0 - r).sqrt();
    let keep = (1.0 - eta).sqrt();
    let sqrt_n: Vec<f64> = (0..dim).map(|n| (n as f64).sqrt()).collect();

    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    let mut vd = vec![Complex64::new(0.0, 0.0); dim];
    vd[0] = Complex64::new((-0.5 * al.norm_sqr()).exp(), 0.0);
    for dd in 0..=n_max {
        if dd > 0 {
            let s = 1.0 / (dd as f64).sqrt();
            vd = raise_affine(&vd, z, w, &sqrt_n)
                .into_iter()
                .map(|t| t * s)
                .collect();
        }
        let mut u = vd.clone();
        for c in 0..=(n_max - dd) {
            if c > 0 {
                if keep == 0.0 {
                    break;
                }
                let s = keep / (c as f64).sqrt();
                u = raise_affine(&u, x, y, &sqrt_n)
                    .into_iter()
                    .map(|t| t * s)
                    .collect();
            }
            cols.push(u.clone());
        }
    }
    let u = CMatrix::from_fn(dim, cols.len(), |r, c| cols[c][r]);
    let p = &u * u.adjoint();
    Ok(FockOperator::from_hermitian_unchecked(p))
}

/// `Π₁ = I - Π₀`, after checking Π₀ has a physical spectrum.
pub fn click_povm(no_click: &FockOperator) -> Result<FockOperator> {
    let ev = no_click.eigenvalues();
    let lo = ev.first().copied().unwrap_or(0.0);
    let hi = ev.last().copied().unwrap_or(0.0);
    let tol = tolerances::MODEL_EIGEN;
    if lo < -tol || hi > 1.0 + tol {
        return Err(QdtError::ModelInvalid(format!(
            "no-click operator spectrum [{lo:.3e}, {hi:.3e}] leaves [0,1]"
        )));
    }
    Ok(no_click.complement())
}

/// The detector POVM `{Π₀, Π₁}`.
pub fn detector_povm(spec: &DetectorSpec, series_tolerance: f64) -> Result<PovmSet> {
    let p0 = build_no_click_povm(spec, series_tolerance)?;
    let p1 = click_povm(&p0)?;
    PovmSet::new(vec![p0, p1])
}

/// Closed-form no-click probability for a coherent input `α`.
pub fn q_oracle(spec: &DetectorSpec, alpha: Complex64) -> f64 {
    let r = spec.reflectivity;
    let field = alpha * (1.0 - r).sqrt() + spec.lo_amplitude * r.sqrt();
    (-spec.eta_apd * field.norm_sqr()).exp()
}

/// Eigenvalue range of Π₀ (diagnostic).
pub fn spectrum_range(op: &FockOperator) -> (f64, f64) {
    let ev = linalg::hermitian_eigenvalues(op.matrix());
    (ev[0], ev[ev.len() - 1])
}
