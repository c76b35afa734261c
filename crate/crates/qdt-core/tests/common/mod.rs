//! Exhaustive active-set oracle for small box- and sum-constrained
//! least-squares problems.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qdt_core::qp::{self, QuadraticProblem};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Equality-constrained minimiser with a given set of variables pinned,
/// solved through the dense KKT system. `None` if the system is
/// inconsistent.
pub fn kkt_candidate(p: &QuadraticProblem, pinned: &[Option<f64>]) -> Option<DMatrix<f64>> {
    let (v, n) = (p.design.ncols(), p.targets.ncols());
    let nv = v * n;
    let h = (p.design.transpose() * &p.design
        + p.smoothing.transpose() * &p.smoothing * p.tikhonov_weight)
        * 2.0;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    if let Some(e) = &p.equality {
        for (j, &ej) in e.iter().enumerate() {
            let mut r = vec![0.0; nv];
            for k in 0..n {
                r[j + v * k] = 1.0;
            }
            rows.push((r, ej));
        }
    }
    for (i, pin) in pinned.iter().enumerate() {
        if let Some(val) = pin {
            let mut r = vec![0.0; nv];
            r[i] = 1.0;
            rows.push((r, *val));
        }
    }
    let m = rows.len();
    let mut kkt = DMatrix::zeros(nv + m, nv + m);
    let mut rhs = DVector::zeros(nv + m);
    for k in 0..n {
        let g = p.design.transpose() * p.targets.column(k) * 2.0;
        for a in 0..v {
            rhs[a + v * k] = g[a];
            for b in 0..v {
                kkt[(a + v * k, b + v * k)] = h[(a, b)];
            }
        }
    }
    for (r, (coef, val)) in rows.iter().enumerate() {
        for (c, &x) in coef.iter().enumerate() {
            kkt[(nv + r, c)] = x;
            kkt[(c, nv + r)] = x;
        }
        rhs[nv + r] = *val;
    }
    let sol = kkt.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
    if (&kkt * &sol - &rhs).norm() > 1e-8 * (1.0 + rhs.norm()) {
        return None;
    }
    Some(DMatrix::from_fn(v, n, |j, k| sol[j + v * k]))
}

pub fn brute_force(p: &QuadraticProblem) -> (DMatrix<f64>, f64) {
    let (v, n) = (p.design.ncols(), p.targets.ncols());
    let nv = v * n;
    let mut best: Option<(DMatrix<f64>, f64)> = None;
    for code in 0..3usize.pow(nv as u32) {
        let mut c = code;
        let pinned: Vec<Option<f64>> = (0..nv)
            .map(|i| {
                let s = c % 3;
                c /= 3;
                let (j, k) = (i % v, i / v);
                match s {
                    0 => None,
                    1 => Some(p.lower[(j, k)]),
                    _ => Some(p.upper[(j, k)]),
                }
            })
            .collect();
        if let Some(x) = kkt_candidate(p, &pinned) {
            if qp::constraint_violation(p, &x) < 1e-9 {
                let f = qp::objective(p, &x);
                if best.as_ref().is_none_or(|b| f < b.1) {
                    best = Some((x, f));
                }
            }
        }
    }
    best.expect("feasible instance")
}

pub fn random_problem(
    rng: &mut ChaCha20Rng,
    v: usize,
    n: usize,
    rows: usize,
    sum: f64,
    lo: f64,
    hi: f64,
) -> QuadraticProblem {
    let a = DMatrix::from_fn(rows, v, |_, _| rng.random::<f64>());
    let b = DMatrix::from_fn(rows, n, |_, _| 2.0 * rng.random::<f64>() - 0.5);
    let mut p = QuadraticProblem::new(a, b).with_tikhonov(1.0).with_bounds(
        DMatrix::from_element(v, n, lo),
        DMatrix::from_element(v, n, hi),
    );
    if n > 1 {
        p = p.with_equality(vec![sum; v]);
    }
    p
}
