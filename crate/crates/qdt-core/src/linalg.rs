//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::fock::{CMatrix, FockOperator};
use crate::tolerances;

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching eigenvector columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `V f(Λ) V†` for a Hermitian input.
pub fn spectral_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (c, &v) in vals.iter().enumerate() {
        let s = f(v);
        for r in 0..scaled.nrows() {
            scaled[(r, c)] *= s;
        }
    }
    let out = scaled * vecs.adjoint();
    (&out + out.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Square root of a PSD matrix, clamping eigenvalues below `SQRT_CLAMP` to 0.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    spectral_map(m, |x| {
        if x < tolerances::SQRT_CLAMP {
            0.0
        } else {
            x.sqrt()
        }
    })
}

/// Frobenius-nearest Hermitian matrix with spectrum in `[lo, hi]`.
pub fn clip_spectrum(m: &CMatrix, lo: f64, hi: f64) -> CMatrix {
    spectral_map(m, |x| x.clamp(lo, hi))
}

/// Frobenius projection of a list of Hermitian operators onto the POVM set
/// `{X_n ⪰ 0, Σ X_n = I}`.
///
/// Closed form for one or two outcomes; Dykstra's alternating projection
/// between the product PSD cone and the completeness plane otherwise.
pub fn project_povm(ops: &[CMatrix], tol: f64, max_iter: usize) -> Vec<CMatrix> {
    let n = ops.len();
    assert!(n > 0);
    let d = ops[0].nrows();
    let id = CMatrix::identity(d, d);
    match n {
        1 => vec![id],
        2 => {
            let x0 = clip_spectrum(
                &((&ops[0] + &id - &ops[1]) * Complex64::new(0.5, 0.0)),
                0.0,
                1.0,
            );
            let x1 = &id - &x0;
            vec![x0, x1]
        }
        _ => {
            let to_plane = |xs: &mut [CMatrix]| {
                let mut s = CMatrix::zeros(d, d);
                for x in xs.iter() {
                    s += x;
                }
                let corr = (&id - s) * Complex64::new(1.0 / n as f64, 0.0);
                for x in xs.iter_mut() {
                    *x += &corr;
                }
            };
            let mut y: Vec<CMatrix> = ops.to_vec();
            to_plane(&mut y);
            let mut p = vec![CMatrix::zeros(d, d); n];
            for _ in 0..max_iter {
                let mut change = 0.0;
                let mut z = Vec::with_capacity(n);
                for k in 0..n {
                    let arg = &y[k] + &p[k];
                    let proj = clip_spectrum(&arg, 0.0, f64::INFINITY);
                    p[k] = &arg - &proj;
                    z.push(proj);
                }
                to_plane(&mut z);
                for k in 0..n {
                    change += (&z[k] - &y[k]).norm_squared();
                }
                y = z;
                if change.sqrt() < tol {
                    break;
                }
            }
            y
        }
    }
}

/// Minimum-norm least-squares solution via SVD, discarding singular values
/// below `LSQ_RCOND · σ_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (tolerances::LSQ_RCOND * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("SVD computed with both factors")
}

/// 2-norm condition number `σ_max/σ_min` (infinite when rank deficient).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 1.0;
    }
    let s = a.clone().singular_values();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    if a.nrows() < a.ncols() || smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Project a set of operators to a physical POVM and wrap them.
pub fn repair_povm(ops: &[FockOperator]) -> Vec<FockOperator> {
    let mats: Vec<CMatrix> = ops.iter().map(|o| o.matrix().clone()).collect();
    project_povm(&mats, 1e-12, 10_000)
        .into_iter()
        .map(FockOperator::from_hermitian_unchecked)
        .collect()
}
