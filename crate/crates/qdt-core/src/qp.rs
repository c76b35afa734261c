//! Box- and sum-constrained Tikhonov least squares.
//!
//! Solves
//!
//! ```text
//! min  Σ_n ||A x_n - b_n||² + γ Σ_n ||S x_n||²
//! s.t. Σ_n x_n[j] = e_j          (optional, every coordinate j)
//!      lo[j,n] ≤ x_n[j] ≤ hi[j,n]
//! ```
//!
//! with a feasible primal active-set method. Each subproblem eliminates one
//! free outcome per constrained coordinate and is solved by SVD least
//! squares on the stacked design, so no normal equations are formed.
//! Optimality is certified by the projected-gradient residual
//! [`kkt_residual`].

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{QdtError, Result};
use crate::linalg;
use crate::tolerances;

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    /// `A`, rows × V.
    pub design: DMatrix<f64>,
    /// `B`, rows × N; column `n` is the target for outcome `n`.
    pub targets: DMatrix<f64>,
    pub tikhonov_weight: f64,
    /// `S`, any number of rows × V. Defaults to the first difference.
    pub smoothing: DMatrix<f64>,
    /// `e_j` for `Σ_n x_n[j] = e_j`, or `None` for no coupling.
    pub equality: Option<Vec<f64>>,
    /// V × N.
    pub lower: DMatrix<f64>,
    /// V × N.
    pub upper: DMatrix<f64>,
}

/// `(V-1) × V` matrix with rows `e_j - e_{j+1}`.
pub fn first_difference(v: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(v.saturating_sub(1), v);
    for j in 0..v.saturating_sub(1) {
        d[(j, j)] = 1.0;
        d[(j, j + 1)] = -1.0;
    }
    d
}

impl QuadraticProblem {
    /// Unconstrained, unregularised problem.
    pub fn new(design: DMatrix<f64>, targets: DMatrix<f64>) -> Self {
        let v = design.ncols();
        let n = targets.ncols();
        Self {
            smoothing: first_difference(v),
            design,
            targets,
            tikhonov_weight: 0.0,
            equality: None,
            lower: DMatrix::from_element(v, n, f64::NEG_INFINITY),
            upper: DMatrix::from_element(v, n, f64::INFINITY),
        }
    }

    pub fn with_tikhonov(mut self, gamma: f64) -> Self {
        self.tikhonov_weight = gamma;
        self
    }

    pub fn with_smoothing(mut self, s: DMatrix<f64>) -> Self {
        self.smoothing = s;
        self
    }

    pub fn with_equality(mut self, e: Vec<f64>) -> Self {
        self.equality = Some(e);
        self
    }

    pub fn with_bounds(mut self, lower: DMatrix<f64>, upper: DMatrix<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_outcomes(&self) -> usize {
        self.targets.ncols()
    }

    fn validate(&self) -> Result<()> {
        let v = self.n_vars();
        let n = self.n_outcomes();
        if self.targets.nrows() != self.design.nrows() {
            return Err(QdtError::DimensionMismatch(
                "targets and design row counts differ".into(),
            ));
        }
        if self.smoothing.ncols() != v && self.smoothing.nrows() > 0 {
            return Err(QdtError::DimensionMismatch(
                "smoothing operator width differs from V".into(),
            ));
        }
        if self.lower.shape() != (v, n) || self.upper.shape() != (v, n) {
            return Err(QdtError::DimensionMismatch("bounds must be V × N".into()));
        }
        if !(self.tikhonov_weight >= 0.0) || !self.tikhonov_weight.is_finite() {
            return Err(QdtError::InvalidArgument(
                "tikhonov weight must be finite and ≥ 0".into(),
            ));
        }
        if self
            .design
            .iter()
            .chain(self.targets.iter())
            .any(|x| !x.is_finite())
        {
            return Err(QdtError::InvalidArgument(
                "design and targets must be finite".into(),
            ));
        }
        for (l, h) in self.lower.iter().zip(self.upper.iter()) {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(QdtError::InvalidArgument(format!(
                    "invalid bound pair [{l}, {h}]"
                )));
            }
        }
        if let Some(e) = &self.equality {
            if e.len() != v || e.iter().any(|x| !x.is_finite()) {
                return Err(QdtError::InvalidArgument(
                    "equality targets must be V finite values".into(),
                ));
            }
            for (j, &ej) in e.iter().enumerate() {
                let lo_sum: f64 = (0..n).map(|k| self.lower[(j, k)]).sum();
                let hi_sum: f64 = (0..n).map(|k| self.upper[(j, k)]).sum();
                let slack = tolerances::QP_FEAS * (1.0 + ej.abs());
                if lo_sum > ej + slack || hi_sum < ej - slack {
                    return Err(QdtError::Infeasible {
                        coordinate: j,
                        lo_sum,
                        hi_sum,
                        target: ej,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// V × N.
    pub x: DMatrix<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Objective value at `x`.
pub fn objective(p: &QuadraticProblem, x: &DMatrix<f64>) -> f64 {
    let r = &p.design * x - &p.targets;
    let s = &p.smoothing * x;
    r.norm_squared() + p.tikhonov_weight * s.norm_squared()
}

/// Data residual `sqrt(Σ_n ||A x_n - b_n||²)`.
pub fn residual_norm(p: &QuadraticProblem, x: &DMatrix<f64>) -> f64 {
    (&p.design * x - &p.targets).norm()
}

/// Gradient of the objective, V × N.
pub fn gradient(p: &QuadraticProblem, x: &DMatrix<f64>) -> DMatrix<f64> {
    let r = &p.design * x - &p.targets;
    let s = &p.smoothing * x;
    (p.design.transpose() * r + p.smoothing.transpose() * s * p.tikhonov_weight) * 2.0
}

fn at_lower(p: &QuadraticProblem, x: f64, j: usize, n: usize) -> bool {
    let lo = p.lower[(j, n)];
    lo.is_finite() && x <= lo + 1e-9 * (1.0 + lo.abs())
}

fn at_upper(p: &QuadraticProblem, x: f64, j: usize, n: usize) -> bool {
    let hi = p.upper[(j, n)];
    hi.is_finite() && x >= hi - 1e-9 * (1.0 + hi.abs())
}

/// Squared projected residual of one coordinate for multiplier `lam`.
fn coordinate_residual(
    p: &QuadraticProblem,
    x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    j: usize,
    lam: f64,
) -> f64 {
    let mut s = 0.0;
    for n in 0..p.n_outcomes() {
        if p.lower[(j, n)] == p.upper[(j, n)] {
            continue;
        }
        let r = g[(j, n)] + lam;
        let xv = x[(j, n)];
        let proj = if at_lower(p, xv, j, n) && at_upper(p, xv, j, n) {
            0.0
        } else if at_lower(p, xv, j, n) {
            r.min(0.0)
        } else if at_upper(p, xv, j, n) {
            r.max(0.0)
        } else {
            r
        };
        s += proj * proj;
    }
    s
}

/// Norm of the projected-gradient stationarity residual.
///
/// For coupled coordinates the multiplier of the sum constraint is chosen to
/// minimise the residual, so the value is zero exactly at a KKT point.
pub fn kkt_residual(p: &QuadraticProblem, x: &DMatrix<f64>) -> f64 {
    let g = gradient(p, x);
    let mut total = 0.0;
    for j in 0..p.n_vars() {
        if p.equality.is_none() {
            total += coordinate_residual(p, x, &g, j, 0.0);
            continue;
        }
        // the residual is convex and piecewise quadratic in λ, with its
        // minimiser between the extreme values of -g
        let row: Vec<f64> = (0..p.n_outcomes()).map(|n| -g[(j, n)]).collect();
        let mut a = row.iter().copied().fold(f64::INFINITY, f64::min);
        let mut b = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f = |lam: f64| coordinate_residual(p, x, &g, j, lam);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        total += f(0.5 * (a + b)).min(fc).min(fd);
    }
    total.sqrt()
}

/// Largest violation of the bounds or the sum constraints.
pub fn constraint_violation(p: &QuadraticProblem, x: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..p.n_vars() {
        for n in 0..p.n_outcomes() {
            worst = worst
                .max(p.lower[(j, n)] - x[(j, n)])
                .max(x[(j, n)] - p.upper[(j, n)]);
        }
        if let Some(e) = &p.equality {
            let s: f64 = (0..p.n_outcomes()).map(|n| x[(j, n)]).sum();
            worst = worst.max((s - e[j]).abs());
        }
    }
    worst
}

/// Solve with a cold start.
pub fn solve(p: &QuadraticProblem, tol: f64, max_iter: usize) -> Result<Solution> {
    solve_from(p, tol, max_iter, None)
}

/// A feasible point: `clamp(0)` per entry, then push coupled coordinates
/// toward their targets in outcome order.
fn initial_point(p: &QuadraticProblem, start: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let (v, n) = (p.n_vars(), p.n_outcomes());
    let mut x = DMatrix::from_fn(v, n, |j, k| {
        let s = start.map_or(0.0, |s| s[(j, k)]);
        let s = if s.is_finite() { s } else { 0.0 };
        s.clamp(p.lower[(j, k)], p.upper[(j, k)])
    });
    if let Some(e) = &p.equality {
        for j in 0..v {
            let mut gap = e[j] - (0..n).map(|k| x[(j, k)]).sum::<f64>();
            for k in 0..n {
                if gap == 0.0 {
                    break;
                }
                let room = if gap > 0.0 {
                    p.upper[(j, k)] - x[(j, k)]
                } else {
                    p.lower[(j, k)] - x[(j, k)]
                };
                let step = if gap > 0.0 {
                    gap.min(room)
                } else {
                    gap.max(room)
                };
                x[(j, k)] += step;
                gap -= step;
            }
        }
    }
    x
}

struct Workspace<'a> {
    p: &'a QuadraticProblem,
    /// Stacked block-diagonal `[A; √γ S]` over outcomes.
    c: DMatrix<f64>,
    rhs: DVector<f64>,
    v: usize,
    n: usize,
}

impl<'a> Workspace<'a> {
    fn new(p: &'a QuadraticProblem) -> Self {
        let (v, n) = (p.n_vars(), p.n_outcomes());
        let ra = p.design.nrows();
        let rs = if p.tikhonov_weight > 0.0 {
            p.smoothing.nrows()
        } else {
            0
        };
        let block = ra + rs;
        let sg = p.tikhonov_weight.sqrt();
        let mut c = DMatrix::zeros(block * n, v * n);
        let mut rhs = DVector::zeros(block * n);
        for k in 0..n {
            c.view_mut((k * block, k * v), (ra, v)).copy_from(&p.design);
            if rs > 0 {
                c.view_mut((k * block + ra, k * v), (rs, v))
                    .copy_from(&(&p.smoothing * sg));
            }
            rhs.rows_mut(k * block, ra).copy_from(&p.targets.column(k));
        }
        Self { p, c, rhs, v, n }
    }

    fn idx(&self, j: usize, k: usize) -> usize {
        k * self.v + j
    }

    /// Minimiser over free variables with fixed ones held at `x`.
    fn subproblem(&self, x: &DMatrix<f64>, free: &[bool]) -> DMatrix<f64> {
        let (v, n) = (self.v, self.n);
        let coupled = self.p.equality.is_some();
        // pivot per coordinate: the last free outcome
        let mut pivot = vec![None; v];
        if coupled {
            for j in 0..v {
                pivot[j] = (0..n).rev().find(|&k| free[self.idx(j, k)]);
            }
        }
        let mut cols: Vec<(usize, usize)> = Vec::new();
        for k in 0..n {
            for j in 0..v {
                if free[self.idx(j, k)] && pivot[j] != Some(k) {
                    cols.push((j, k));
                }
            }
        }
        // base point: fixed at current values, pivots closing the sum, other
        // free variables at zero
        let mut base = x.clone();
        for &(j, k) in &cols {
            base[(j, k)] = 0.0;
        }
        if let Some(e) = &self.p.equality {
            for j in 0..v {
                if let Some(pk) = pivot[j] {
                    let others: f64 = (0..n).filter(|&k| k != pk).map(|k| base[(j, k)]).sum();
                    base[(j, pk)] = e[j] - others;
                }
            }
        }
        let base_vec = DVector::from_iterator(
            v * n,
            (0..n)
                .flat_map(|k| (0..v).map(move |j| (j, k)))
                .map(|(j, k)| base[(j, k)]),
        );
        let r = &self.rhs - &self.c * base_vec;
        let mut z = DMatrix::zeros(self.c.nrows(), cols.len());
        for (ci, &(j, k)) in cols.iter().enumerate() {
            let mut col = self.c.column(self.idx(j, k)).into_owned();
            if let Some(pk) = pivot[j] {
                col -= self.c.column(self.idx(j, pk));
            }
            z.set_column(ci, &col);
        }
        let y = linalg::lstsq(&z, &r);
        let mut out = base;
        for (ci, &(j, k)) in cols.iter().enumerate() {
            out[(j, k)] = y[ci];
            if let Some(pk) = pivot[j] {
                out[(j, pk)] -= y[ci];
            }
        }
        out
    }
}

/// Solve, optionally warm-started from `start` (which is clamped and
/// repaired to feasibility first).
pub fn solve_from(
    p: &QuadraticProblem,
    tol: f64,
    max_iter: usize,
    start: Option<&DMatrix<f64>>,
) -> Result<Solution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(QdtError::InvalidArgument("tol must be positive".into()));
    }
    let (v, n) = (p.n_vars(), p.n_outcomes());
    if v == 0 || n == 0 {
        let x = DMatrix::zeros(v, n);
        return Ok(Solution {
            objective: objective(p, &x),
            x,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }
    let ws = Workspace::new(p);
    let mut x = initial_point(p, start);
    let pinned = |j: usize, k: usize| p.lower[(j, k)] == p.upper[(j, k)];
    // free[idx] false means held at a bound
    let mut free: Vec<bool> = vec![true; v * n];
    for k in 0..n {
        for j in 0..v {
            let xv = x[(j, k)];
            free[ws.idx(j, k)] = !(pinned(j, k) || xv == p.lower[(j, k)] || xv == p.upper[(j, k)]);
        }
    }
    let grad0 = gradient(p, &DMatrix::zeros(v, n));
    let scale = 1.0 + grad0.amax();
    let threshold = tol * scale;
    let mut visited: HashSet<Vec<bool>> = HashSet::new();
    let mut bland = false;

    for it in 0..max_iter {
        let z = ws.subproblem(&x, &free);
        // ratio test toward z over free variables
        let mut step = 1.0f64;
        let mut blocking: Option<(usize, usize, bool)> = None;
        for k in 0..n {
            for j in 0..v {
                if !free[ws.idx(j, k)] {
                    continue;
                }
                let (lo, hi) = (p.lower[(j, k)], p.upper[(j, k)]);
                let (xv, zv) = (x[(j, k)], z[(j, k)]);
                let feas = 1e-13 * (1.0 + zv.abs());
                if zv < lo - feas {
                    let t = if zv < xv {
                        ((lo - xv) / (zv - xv)).max(0.0)
                    } else {
                        0.0
                    };
                    if t < step {
                        step = t;
                        blocking = Some((j, k, false));
                    }
                } else if zv > hi + feas {
                    let t = if zv > xv {
                        ((hi - xv) / (zv - xv)).max(0.0)
                    } else {
                        0.0
                    };
                    if t < step {
                        step = t;
                        blocking = Some((j, k, true));
                    }
                }
            }
        }
        if let Some((bj, bk, upper)) = blocking {
            x += (&z - &x) * step;
            for k in 0..n {
                for j in 0..v {
                    x[(j, k)] = x[(j, k)].clamp(p.lower[(j, k)], p.upper[(j, k)]);
                }
            }
            // fix every free variable that has reached a bound along the step
            for k in 0..n {
                for j in 0..v {
                    let i = ws.idx(j, k);
                    if !free[i] {
                        continue;
                    }
                    let hit_lo = p.lower[(j, k)].is_finite()
                        && (x[(j, k)] - p.lower[(j, k)]).abs()
                            <= 1e-14 * (1.0 + p.lower[(j, k)].abs())
                        && z[(j, k)] < x[(j, k)];
                    let hit_hi = p.upper[(j, k)].is_finite()
                        && (x[(j, k)] - p.upper[(j, k)]).abs()
                            <= 1e-14 * (1.0 + p.upper[(j, k)].abs())
                        && z[(j, k)] > x[(j, k)];
                    if hit_lo {
                        x[(j, k)] = p.lower[(j, k)];
                        free[i] = false;
                    } else if hit_hi {
                        x[(j, k)] = p.upper[(j, k)];
                        free[i] = false;
                    }
                }
            }
            let i = ws.idx(bj, bk);
            if free[i] {
                x[(bj, bk)] = if upper {
                    p.upper[(bj, bk)]
                } else {
                    p.lower[(bj, bk)]
                };
                free[i] = false;
            }
            continue;
        }
        // subproblem optimum is feasible
        for k in 0..n {
            for j in 0..v {
                if free[ws.idx(j, k)] {
                    x[(j, k)] = z[(j, k)].clamp(p.lower[(j, k)], p.upper[(j, k)]);
                }
            }
        }
        let g = gradient(p, &x);
        let mut worst: Option<(usize, usize)> = None;
        let mut worst_val = threshold;
        let mut first_violator: Option<(usize, usize)> = None;
        for j in 0..v {
            let lam = multiplier(p, &x, &g, &free, &ws, j);
            for k in 0..n {
                let i = ws.idx(j, k);
                if free[i] || pinned(j, k) {
                    continue;
                }
                let r = g[(j, k)] + lam;
                let viol = if x[(j, k)] == p.lower[(j, k)] { -r } else { r };
                if viol > threshold {
                    let key = (j, k);
                    if first_violator.is_none_or(|(fj, fk)| ws.idx(fj, fk) > ws.idx(key.0, key.1)) {
                        first_violator = Some(key);
                    }
                    if viol > worst_val {
                        worst_val = viol;
                        worst = Some(key);
                    }
                }
            }
        }
        let release = if bland { first_violator } else { worst };
        match release {
            None => {
                return Ok(Solution {
                    objective: objective(p, &x),
                    kkt_residual: kkt_residual(p, &x),
                    x,
                    iterations: it + 1,
                });
            }
            Some((j, k)) => {
                if !visited.insert(free.clone()) {
                    bland = true;
                }
                free[ws.idx(j, k)] = true;
            }
        }
    }
    let residual = kkt_residual(p, &x);
    Err(QdtError::MaxIterations {
        iterations: max_iter,
        residual,
        best: Box::new(Solution {
            objective: objective(p, &x),
            kkt_residual: residual,
            x,
            iterations: max_iter,
        }),
    })
}

/// Multiplier of the sum constraint on coordinate `j` at a subproblem
/// optimum.
fn multiplier(
    p: &QuadraticProblem,
    x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    free: &[bool],
    ws: &Workspace,
    j: usize,
) -> f64 {
    if p.equality.is_none() {
        return 0.0;
    }
    let n = p.n_outcomes();
    let free_g: Vec<f64> = (0..n)
        .filter(|&k| free[ws.idx(j, k)])
        .map(|k| g[(j, k)])
        .collect();
    if !free_g.is_empty() {
        return -free_g.iter().sum::<f64>() / free_g.len() as f64;
    }
    // every outcome held: any λ in [max over lower of -g, min over upper of -g]
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for k in 0..n {
        if p.lower[(j, k)] == p.upper[(j, k)] {
            continue;
        }
        if x[(j, k)] == p.lower[(j, k)] {
            lo = lo.max(-g[(j, k)]);
        } else {
            hi = hi.min(-g[(j, k)]);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Result of [`solve_norm_objective`].
#[derive(Debug, Clone)]
pub struct NormSolution {
    pub solution: Solution,
    /// Weight `γ'` of the equivalent squared problem.
    pub effective_weight: f64,
    /// `sqrt(Σ_n ||A x_n - b_n||²)` at the optimum.
    pub residual_norm: f64,
    /// Squared problems solved to locate `γ'`.
    pub weight_evaluations: usize,
}

/// Minimise `||AX - B||_F + γ Σ_n ||S x_n||²` (norm, not squared) under the
/// same constraints as [`solve`].
///
/// Stationarity of this objective coincides with that of the squared
/// objective at weight `γ' = 2γ·||r||`, where `r` is the residual at the
/// optimum. `γ'` is the unique root of `h(g) = g - 2γ||r(g)||`, which is
/// negative at 0 and positive at `2γ||r(∞)||`; it is found by Illinois
/// false position on that bracket with warm-started inner solves.
pub fn solve_norm_objective(
    p: &QuadraticProblem,
    tol: f64,
    max_iter: usize,
) -> Result<NormSolution> {
    let mut last: Option<DMatrix<f64>> = None;
    let eval = |g: f64| -> Result<(Solution, f64)> {
        let mut q = p.clone();
        q.tikhonov_weight = g;
        let s = solve_from(&q, tol, max_iter, last.as_ref())?;
        last = Some(s.x.clone());
        let r = residual_norm(p, &s.x);
        Ok((s, r))
    };
    let big = 1e8 * (1.0 + p.design.norm_squared());
    let (solution, effective_weight, weight_evaluations) =
        effective_weight(p.tikhonov_weight, big, eval)?;
    let residual_norm = residual_norm(p, &solution.x);
    Ok(NormSolution {
        solution,
        effective_weight,
        residual_norm,
        weight_evaluations,
    })
}

/// Locate the weight `g` of a squared-residual problem whose solution also
/// minimises `||r|| + γ·penalty`, i.e. the root of `h(g) = g - 2γ||r(g)||`.
///
/// `eval(g)` solves the squared problem at weight `g` and returns the
/// solution with its residual norm. `h` is negative at 0 and nonnegative at
/// `2γ||r(big)||`; Illinois false position runs on that bracket. Returns the
/// best solution, its weight and the number of evaluations.
pub fn effective_weight<S: Clone>(
    gamma: f64,
    big: f64,
    mut eval: impl FnMut(f64) -> Result<(S, f64)>,
) -> Result<(S, f64, usize)> {
    let (s0, r0) = eval(0.0)?;
    if gamma == 0.0 || r0 == 0.0 {
        return Ok((s0, 0.0, 1));
    }
    let mut evals = 1;
    // residual of the smoothest admissible fit bounds the root from above
    let (_, r_inf) = eval(big)?;
    evals += 1;
    let (mut a, mut ha) = (0.0, -2.0 * gamma * r0);
    let mut b = 2.0 * gamma * r_inf * (1.0 + 1e-9);
    let (mut sb, rb) = eval(b)?;
    evals += 1;
    let mut hb = b - 2.0 * gamma * rb;
    while hb < 0.0 {
        b *= 2.0;
        let (s, r) = eval(b)?;
        evals += 1;
        sb = s;
        hb = b - 2.0 * gamma * r;
    }
    let mut best = (sb, b, hb.abs());
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (a * hb - b * ha) / (hb - ha);
        let (sc, rc) = eval(c)?;
        evals += 1;
        let hc = c - 2.0 * gamma * rc;
        if hc.abs() < best.2 {
            best = (sc, c, hc.abs());
        }
        let scale = c.max(f64::MIN_POSITIVE);
        if hc.abs() <= tolerances::NORM_WEIGHT_RTOL * scale
            || (b - a).abs() <= tolerances::NORM_WEIGHT_RTOL * scale
        {
            break;
        }
        if hc > 0.0 {
            b = c;
            hb = hc;
            if side == 1 {
                ha *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ha = hc;
            if side == -1 {
                hb *= 0.5;
            }
            side = -1;
        }
    }
    let (s, g, _) = best;
    Ok((s, g, evals))
}

/// `||AX - B||_F + γ Σ_n ||S x_n||²`.
pub fn norm_objective(p: &QuadraticProblem, x: &DMatrix<f64>) -> f64 {
    residual_norm(p, x) + p.tikhonov_weight * (&p.smoothing * x).norm_squared()
}
