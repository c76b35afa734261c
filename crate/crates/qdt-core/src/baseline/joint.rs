//! Full joint least squares over all matrix elements at once.
//!
//! Every Hermitian `Π_n` is flattened to `d²` real coordinates (diagonal
//! entries, then √2-scaled real and imaginary parts above the diagonal, so
//! the Euclidean norm equals the Frobenius norm). The regularised fit is
//! solved by ADMM: an exact linear solve for the data term and a Frobenius
//! projection onto the POVM set for the constraints.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::fock::{coherent_amplitudes, CMatrix, FockOperator, PovmSet};
use crate::linalg;
use crate::probe::ProbeData;
use crate::qp;

/// Largest truncation accepted; the design has `d²` columns per outcome.
pub const MAX_JOINT_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointConfig {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            tol: 1e-10,
            max_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointReport {
    pub effective_weight: f64,
    pub residual_norm: f64,
    pub admm_iterations: usize,
    pub weight_evaluations: usize,
}

struct Layout {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl Layout {
    fn new(d: usize) -> Self {
        let pairs = (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .collect();
        Self { d, pairs }
    }

    fn len(&self) -> usize {
        self.d * self.d
    }

    fn re_index(&self, p: usize) -> usize {
        self.d + 2 * p
    }

    fn unpack(&self, x: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.d, self.d);
        for j in 0..self.d {
            m[(j, j)] = Complex64::new(x[j], 0.0);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (p, &(j, k)) in self.pairs.iter().enumerate() {
            let i = self.re_index(p);
            let z = Complex64::new(x[i] * s, x[i + 1] * s);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
        m
    }

    fn pack(&self, m: &CMatrix) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for j in 0..self.d {
            x[j] = m[(j, j)].re;
        }
        let s = std::f64::consts::SQRT_2;
        for (p, &(j, k)) in self.pairs.iter().enumerate() {
            let i = self.re_index(p);
            x[i] = m[(j, k)].re * s;
            x[i + 1] = m[(j, k)].im * s;
        }
        x
    }
}

/// Row of the design for one coherent probe: `⟨α|Π|α⟩ = g · x`.
fn design_row(layout: &Layout, c: &[Complex64]) -> Vec<f64> {
    let mut row = vec![0.0; layout.len()];
    for j in 0..layout.d {
        row[j] = c[j].norm_sqr();
    }
    let s = std::f64::consts::SQRT_2;
    for (p, &(j, k)) in layout.pairs.iter().enumerate() {
        let w = c[j].conj() * c[k];
        let i = layout.re_index(p);
        row[i] = s * w.re;
        row[i + 1] = -s * w.im;
    }
    row
}

struct Admm {
    z: DMatrix<f64>,
    u: DMatrix<f64>,
    rho: f64,
    iterations: usize,
}

/// Minimise `||GX - B||² + g Σ_n ||D diag(Π_n)||²` over the POVM set.
fn admm_solve(
    layout: &Layout,
    gtg: &DMatrix<f64>,
    gtb: &DMatrix<f64>,
    dtd: &DMatrix<f64>,
    g: f64,
    state: &mut Admm,
    cfg: &JointConfig,
) -> Result<()> {
    let v = layout.len();
    let n = gtb.ncols();
    let base = gtg * 2.0 + dtd * (2.0 * g);
    let factor = |rho: f64| {
        (&base + DMatrix::identity(v, v) * rho)
            .cholesky()
            .ok_or_else(|| QdtError::Solver("ADMM system is not positive definite".into()))
    };
    let mut chol = factor(state.rho)?;
    let scale = (v * n) as f64;
    for _ in 0..cfg.max_iter {
        state.iterations += 1;
        let rhs = gtb * 2.0 + (&state.z - &state.u) * state.rho;
        let x = chol.solve(&rhs);
        let mats: Vec<CMatrix> = (0..n)
            .map(|k| {
                let col: Vec<f64> = (x.column(k) + state.u.column(k)).iter().copied().collect();
                layout.unpack(&col)
            })
            .collect();
        let proj = linalg::project_povm(&mats, 1e-13, 10_000);
        let mut z_new = DMatrix::zeros(v, n);
        for (k, m) in proj.iter().enumerate() {
            z_new.set_column(k, &DVector::from_vec(layout.pack(m)));
        }
        let primal = (&x - &z_new).norm();
        let dual = state.rho * (&z_new - &state.z).norm();
        state.u += &x - &z_new;
        state.z = z_new;
        let eps = cfg.tol * scale.sqrt() * (1.0 + state.z.norm());
        if primal < eps && dual < eps {
            return Ok(());
        }
        // residual balancing
        if primal > 10.0 * dual {
            state.rho *= 2.0;
            state.u /= 2.0;
            chol = factor(state.rho)?;
        } else if dual > 10.0 * primal {
            state.rho /= 2.0;
            state.u *= 2.0;
            chol = factor(state.rho)?;
        }
    }
    Ok(())
}

/// Regularised joint fit of all `d²` parameters of every outcome.
pub fn full_joint_solve(
    data: &ProbeData,
    d: usize,
    cfg: &JointConfig,
) -> Result<(PovmSet, JointReport)> {
    if d > MAX_JOINT_DIM {
        return Err(QdtError::CapExceeded(format!(
            "joint solve supports d ≤ {MAX_JOINT_DIM}, got {d}"
        )));
    }
    if d == 0 {
        return Err(QdtError::InvalidArgument("dim must be at least 1".into()));
    }
    let layout = Layout::new(d);
    let grid = &data.grid;
    let n = data.n_outcomes;
    let m = grid.n_probes();
    let v = layout.len();
    let mut gmat = DMatrix::zeros(m, v);
    let mut b = DMatrix::zeros(m, n);
    for u in 0..grid.m_a() {
        for w in 0..grid.m_p() {
            let i = u * grid.m_p() + w;
            let c = coherent_amplitudes(grid.magnitudes[u], grid.phase(w), d)?;
            let coeffs: Vec<Complex64> = c.coeffs.iter().copied().collect();
            for (col, val) in design_row(&layout, &coeffs).into_iter().enumerate() {
                gmat[(i, col)] = val;
            }
            for k in 0..n {
                b[(i, k)] = data.get(u, w, k);
            }
        }
    }
    // Tikhonov acts on adjacent main-diagonal entries only
    let mut dmat = DMatrix::zeros(d.saturating_sub(1), v);
    for j in 0..d.saturating_sub(1) {
        dmat[(j, j)] = 1.0;
        dmat[(j, j + 1)] = -1.0;
    }
    let gtg = gmat.transpose() * &gmat;
    let gtb = gmat.transpose() * &b;
    let dtd = dmat.transpose() * &dmat;

    let start = vec![CMatrix::identity(d, d) * Complex64::new(1.0 / n as f64, 0.0); n];
    let mut z0 = DMatrix::zeros(v, n);
    for (k, mtx) in start.iter().enumerate() {
        z0.set_column(k, &DVector::from_vec(layout.pack(mtx)));
    }
    let rho0 = (2.0 * gtg.trace() / v as f64).max(1e-6);
    let mut state = Admm {
        z: z0,
        u: DMatrix::zeros(v, n),
        rho: rho0,
        iterations: 0,
    };
    let eval = |g: f64| -> Result<(DMatrix<f64>, f64)> {
        admm_solve(&layout, &gtg, &gtb, &dtd, g, &mut state, cfg)?;
        let r = (&gmat * &state.z - &b).norm();
        Ok((state.z.clone(), r))
    };
    let big = 1e8 * (1.0 + gtg.trace());
    let (z, g, evals) = qp::effective_weight(cfg.gamma, big, eval)?;
    let residual_norm = (&gmat * &z - &b).norm();
    let ops: Vec<FockOperator> = (0..n)
        .map(|k| {
            let col: Vec<f64> = z.column(k).iter().copied().collect();
            FockOperator::from_hermitian_unchecked(layout.unpack(&col))
        })
        .collect();
    let povm = PovmSet::new(ops)?;
    Ok((
        povm,
        JointReport {
            effective_weight: g,
            residual_norm,
            admm_iterations: state.iterations,
            weight_evaluations: evals,
        },
    ))
}
