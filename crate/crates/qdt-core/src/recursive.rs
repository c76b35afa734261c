//! Diagonal-by-diagonal POVM reconstruction.
//!
//! Averaging the probe data over phase with weight `e^{-ilθ}` isolates the
//! `l`-th leading diagonal, so each diagonal is a small linear inverse
//! problem `P^(l) = F^(l) π^(l)`. Diagonals are solved in order
//! `l = 0, 1, ...`; once diagonals `< l` are known, positivity of each
//! `(l+1)×(l+1)` leading block restricts every new element to an interval.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::exec::Execution;
use crate::fock::{log_weight, CMatrix, FockOperator, PovmSet};
use crate::linalg;
use crate::probe::{ProbeData, ProbeGrid};
use crate::qp::{self, QuadraticProblem};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    /// Tikhonov weight on adjacent differences along each diagonal.
    pub gamma: f64,
    /// Highest diagonal reconstructed; higher ones are zero.
    pub l_max: usize,
    /// When set, `l_max` is replaced by [`estimate_l_max`] at this threshold
    /// after the main diagonal is known (never exceeding `l_max`).
    pub auto_l_max_threshold: Option<f64>,
    /// LO phase jitter used by the automatic estimate (radians).
    pub jitter_delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Slack added to every positivity interval.
    pub eps_pos: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            l_max: 4,
            auto_l_max_threshold: None,
            jitter_delta: 0.0,
            tol: tolerances::QP_TOL,
            max_iter: tolerances::QP_MAX_ITER,
            eps_pos: tolerances::EPS_POS,
            exec: Execution::default(),
        }
    }
}

impl ReconConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(QdtError::InvalidArgument(
                "gamma must be finite and ≥ 0".into(),
            ));
        }
        if self.l_max >= dim {
            return Err(QdtError::InvalidArgument(format!(
                "l_max {} must be below dim {dim}",
                self.l_max
            )));
        }
        if !(self.tol > 0.0) || !(self.eps_pos >= 0.0) {
            return Err(QdtError::InvalidArgument(
                "tol must be > 0 and eps_pos ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Phase-averaged data for one diagonal, `M_a × N`.
#[derive(Debug, Clone)]
pub struct FourierAveragedData {
    pub l: usize,
    pub values: DMatrix<Complex64>,
}

/// `(1/M_p) Σ_v p_{n|u,v} e^{-ilθ_v}` for every magnitude and outcome.
pub fn fourier_average(freqs: &ProbeData, l: usize) -> FourierAveragedData {
    let g = &freqs.grid;
    let m_p = g.m_p();
    let twiddle: Vec<Complex64> = (0..m_p)
        .map(|v| Complex64::from_polar(1.0 / m_p as f64, -(l as f64) * g.phase(v)))
        .collect();
    let values = DMatrix::from_fn(g.m_a(), freqs.n_outcomes, |u, n| {
        (0..m_p).map(|v| twiddle[v] * freqs.get(u, v, n)).sum()
    });
    FourierAveragedData { l, values }
}

/// Design matrix of one diagonal: `F[u][j] = e^{-|α_u|²}|α_u|^{2j+l}/√(j!(j+l)!)`.
#[derive(Debug, Clone)]
pub struct DiagonalDesign {
    pub l: usize,
    pub matrix: DMatrix<f64>,
    pub condition_number: f64,
}

pub fn build_design(grid: &ProbeGrid, l: usize, dim: usize) -> Result<DiagonalDesign> {
    if l >= dim {
        return Err(QdtError::InvalidArgument(format!(
            "diagonal {l} outside dim {dim}"
        )));
    }
    let matrix = DMatrix::from_fn(grid.m_a(), dim - l, |u, j| {
        log_weight(j, j + l, grid.magnitudes[u]).exp()
    });
    let condition_number = linalg::condition_number(&matrix);
    Ok(DiagonalDesign {
        l,
        matrix,
        condition_number,
    })
}

/// Statistics of the positivity intervals used at one diagonal.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IntervalStats {
    pub mean_width: f64,
    pub max_width: f64,
    /// Intervals that collapsed to a point.
    pub collapsed: usize,
    /// Coordinates whose intervals had to be widened to admit `Σ_n π_n = 0`.
    pub relaxed: usize,
}

/// Per-diagonal solve record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalRecord {
    pub l: usize,
    pub objective: f64,
    pub residual_norm: f64,
    pub kkt_residual: f64,
    pub effective_weight: f64,
    pub weight_evaluations: usize,
    pub iterations: usize,
    pub condition_number: f64,
    pub intervals: IntervalStats,
    /// Wall-clock time; kept out of serialized artifacts so reruns are
    /// byte-identical.
    #[serde(skip)]
    pub seconds: f64,
}

/// Partially reconstructed POVM.
#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub dim: usize,
    pub ops: Vec<CMatrix>,
    /// Highest diagonal filled so far.
    pub filled: Option<usize>,
    pub records: Vec<DiagonalRecord>,
    /// `bounds[l-1][n][j]` for `l ≥ 1`.
    pub bounds: Vec<Vec<Vec<(f64, f64)>>>,
}

impl ReconstructionState {
    pub fn new(dim: usize, n_outcomes: usize) -> Self {
        Self {
            dim,
            ops: vec![CMatrix::zeros(dim, dim); n_outcomes],
            filled: None,
            records: Vec::new(),
            bounds: Vec::new(),
        }
    }

    /// State whose diagonals `0..=filled` are taken from `ops`.
    pub fn from_operators(ops: Vec<CMatrix>, filled: usize) -> Self {
        let dim = ops[0].nrows();
        let ops = ops
            .into_iter()
            .map(|m| {
                CMatrix::from_fn(dim, dim, |j, k| {
                    if j.abs_diff(k) <= filled {
                        m[(j, k)]
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Self {
            dim,
            ops,
            filled: Some(filled),
            records: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.ops.len()
    }

    pub fn diagonal(&self, n: usize) -> Vec<f64> {
        (0..self.dim).map(|j| self.ops[n][(j, j)].re).collect()
    }

    /// Current operators, not repaired.
    pub fn operators(&self) -> Vec<FockOperator> {
        self.ops
            .iter()
            .map(|m| FockOperator::from_hermitian_unchecked(m.clone()))
            .collect()
    }

    /// Smallest determinant of the `(l+1)×(l+1)` leading blocks of all
    /// outcomes.
    pub fn min_block_determinant(&self, l: usize) -> f64 {
        let mut worst = f64::INFINITY;
        for m in &self.ops {
            for j in 0..self.dim.saturating_sub(l) {
                let d = m.view((j, j), (l + 1, l + 1)).into_owned().determinant().re;
                worst = worst.min(d);
            }
        }
        worst
    }
}

/// Interval of real `t` for which the leading block of outcome `n` at
/// `(j, l)` stays positive with corner `t·phase_direction`.
///
/// The block determinant is quadratic in `t`, `det(t) = -a t² + B t + C`,
/// with `a` the determinant of the interior block. `a`, `B`, `C` come from
/// three numerical determinants at `t = 0, ±1`.
pub fn sylvester_bounds(
    state: &ReconstructionState,
    l: usize,
    j: usize,
    n: usize,
    phase_direction: Complex64,
    eps_pos: f64,
) -> Result<(f64, f64)> {
    if l == 0 || j + l >= state.dim || n >= state.n_outcomes() {
        return Err(QdtError::InvalidArgument(format!(
            "no off-diagonal block at l={l}, j={j}, n={n}"
        )));
    }
    if state.filled.is_none_or(|f| f + 1 < l) {
        return Err(QdtError::InvalidArgument(format!(
            "diagonals below {l} are not filled"
        )));
    }
    let m = &state.ops[n];
    let pjj = m[(j, j)].re;
    let pll = m[(j + l, j + l)].re;
    if pjj == 0.0 || pll == 0.0 {
        return Ok((0.0, 0.0));
    }
    let block = m.view((j, j), (l + 1, l + 1)).into_owned();
    let det = |t: f64| {
        let mut b = block.clone();
        b[(0, l)] = phase_direction * t;
        b[(l, 0)] = (phase_direction * t).conj();
        b.determinant().re
    };
    let (d0, dp, dm) = (det(0.0), det(1.0), det(-1.0));
    let a = d0 - 0.5 * (dp + dm);
    let b = 0.5 * (dp - dm);
    let c = d0;
    let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
    if a < -1e-6 * scale {
        return Err(QdtError::InconsistentState {
            l,
            j,
            n,
            reason: format!("interior block determinant {a:.3e} is negative"),
        });
    }
    let (lo, hi) = if a <= 1e-14 * scale {
        // interior block singular: det is linear in t
        if b > 0.0 {
            (-c / b, f64::INFINITY)
        } else if b < 0.0 {
            (f64::NEG_INFINITY, -c / b)
        } else if c >= 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, 0.0)
        }
    } else {
        let disc = b * b + 4.0 * a * c;
        if disc < 0.0 {
            let mid = b / (2.0 * a);
            (mid, mid)
        } else {
            let s = disc.sqrt();
            ((b - s) / (2.0 * a), (b + s) / (2.0 * a))
        }
    };
    Ok((lo - eps_pos, hi + eps_pos))
}

/// Per-coordinate unit phase axis from a bound-free regularised complex fit.
fn phase_axes(
    design: &DMatrix<f64>,
    avg: &FourierAveragedData,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let (m_a, v) = design.shape();
    let n = avg.values.ncols();
    // real and imaginary parts side by side in one real problem so that the
    // norm of the full complex residual is what gets balanced against γ
    let mut a = DMatrix::zeros(2 * m_a, 2 * v);
    a.view_mut((0, 0), (m_a, v)).copy_from(design);
    a.view_mut((m_a, v), (m_a, v)).copy_from(design);
    let b = DMatrix::from_fn(2 * m_a, n, |r, k| {
        if r < m_a {
            avg.values[(r, k)].re
        } else {
            avg.values[(r - m_a, k)].im
        }
    });
    let d = qp::first_difference(v);
    let mut s = DMatrix::zeros(2 * d.nrows(), 2 * v);
    s.view_mut((0, 0), d.shape()).copy_from(&d);
    s.view_mut((d.nrows(), v), d.shape()).copy_from(&d);
    let p = QuadraticProblem::new(a, b)
        .with_tikhonov(gamma)
        .with_smoothing(s)
        .with_equality(vec![0.0; 2 * v]);
    let sol = qp::solve_norm_objective(&p, tol, max_iter)?.solution;
    Ok((0..v)
        .map(|j| {
            let best = (0..n)
                .map(|k| Complex64::new(sol.x[(j, k)], sol.x[(j + v, k)]))
                .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                .unwrap_or_default();
            if best.norm() > 0.0 {
                best / best.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect())
}

/// Solve diagonal `l` and write it (and its conjugate) into every outcome.
pub fn reconstruct_diagonal(
    state: &mut ReconstructionState,
    data: &ProbeData,
    cfg: &ReconConfig,
    l: usize,
) -> Result<()> {
    let started = Instant::now();
    let dim = state.dim;
    let n = state.n_outcomes();
    if data.n_outcomes != n {
        return Err(QdtError::DimensionMismatch(
            "data and state outcome counts differ".into(),
        ));
    }
    if l >= dim {
        return Err(QdtError::InvalidArgument(format!(
            "diagonal {l} outside dim {dim}"
        )));
    }
    match (l, state.filled) {
        (0, _) => {}
        (_, Some(f)) if f + 1 == l => {}
        _ => {
            return Err(QdtError::InvalidArgument(format!(
                "diagonal {l} requested out of order"
            )))
        }
    }
    let avg = fourier_average(data, l);
    let design = build_design(&data.grid, l, dim)?;
    let v = dim - l;
    let f = &design.matrix;
    let m_a = f.nrows();

    let (sol, phases, stats) = if l == 0 {
        let targets = DMatrix::from_fn(m_a, n, |u, k| avg.values[(u, k)].re);
        let p = QuadraticProblem::new(f.clone(), targets)
            .with_tikhonov(cfg.gamma)
            .with_equality(vec![1.0; v])
            .with_bounds(DMatrix::zeros(v, n), DMatrix::from_element(v, n, 1.0));
        let s = qp::solve_norm_objective(&p, cfg.tol, cfg.max_iter)?;
        (
            s,
            vec![Complex64::new(1.0, 0.0); v],
            IntervalStats::default(),
        )
    } else {
        let phases = phase_axes(f, &avg, cfg.gamma, cfg.tol, cfg.max_iter)?;
        let a = DMatrix::from_fn(2 * m_a, v, |r, j| {
            if r < m_a {
                f[(r, j)] * phases[j].re
            } else {
                f[(r - m_a, j)] * phases[j].im
            }
        });
        let b = DMatrix::from_fn(2 * m_a, n, |r, k| {
            if r < m_a {
                avg.values[(r, k)].re
            } else {
                avg.values[(r - m_a, k)].im
            }
        });
        // |π_j - π_{j+1}|² with π_j = t_j φ_j, split into real and imaginary rows
        let mut s = DMatrix::zeros(2 * (v - 1), v);
        for j in 0..v - 1 {
            s[(j, j)] = phases[j].re;
            s[(j, j + 1)] = -phases[j + 1].re;
            s[(v - 1 + j, j)] = phases[j].im;
            s[(v - 1 + j, j + 1)] = -phases[j + 1].im;
        }
        let rows: Vec<Result<Vec<(f64, f64)>>> = cfg.exec.map(n, |k| {
            (0..v)
                .map(|j| {
                    let (lo, hi) = sylvester_bounds(state, l, j, k, phases[j], cfg.eps_pos)?;
                    let m = &state.ops[k];
                    let cs = (m[(j, j)].re * m[(j + l, j + l)].re).max(0.0).sqrt() + cfg.eps_pos;
                    let (lo, hi) = (lo.max(-cs), hi.min(cs));
                    Ok(if lo > hi {
                        let mid = 0.5 * (lo + hi);
                        (mid, mid)
                    } else {
                        (lo, hi)
                    })
                })
                .collect()
        });
        let mut intervals = Vec::with_capacity(n);
        for r in rows {
            intervals.push(r?);
        }
        let mut stats = IntervalStats::default();
        for j in 0..v {
            let lo_sum: f64 = (0..n).map(|k| intervals[k][j].0).sum();
            let hi_sum: f64 = (0..n).map(|k| intervals[k][j].1).sum();
            let short = lo_sum.max(-hi_sum);
            if short > 0.0 {
                let w = short / n as f64;
                for iv in intervals.iter_mut() {
                    iv[j].0 -= w;
                    iv[j].1 += w;
                }
                stats.relaxed += 1;
            }
        }
        let mut widths = Vec::with_capacity(n * v);
        for iv in &intervals {
            for &(lo, hi) in iv {
                widths.push(hi - lo);
                if hi == lo {
                    stats.collapsed += 1;
                }
            }
        }
        stats.mean_width = widths.iter().sum::<f64>() / widths.len().max(1) as f64;
        stats.max_width = widths.iter().copied().fold(0.0, f64::max);
        let lower = DMatrix::from_fn(v, n, |j, k| intervals[k][j].0);
        let upper = DMatrix::from_fn(v, n, |j, k| intervals[k][j].1);
        let p = QuadraticProblem::new(a, b)
            .with_tikhonov(cfg.gamma)
            .with_smoothing(s)
            .with_equality(vec![0.0; v])
            .with_bounds(lower, upper);
        let sol = qp::solve_norm_objective(&p, cfg.tol, cfg.max_iter)?;
        state.bounds.push(intervals);
        (sol, phases, stats)
    };

    for k in 0..n {
        for (j, &ph) in phases.iter().enumerate().take(v) {
            let z = ph * sol.solution.x[(j, k)];
            if l == 0 {
                state.ops[k][(j, j)] = Complex64::new(z.re, 0.0);
            } else {
                state.ops[k][(j, j + l)] = z;
                state.ops[k][(j + l, j)] = z.conj();
            }
        }
    }
    state.filled = Some(l);
    state.records.push(DiagonalRecord {
        l,
        objective: sol.residual_norm + cfg.gamma * smoothing_penalty(&state.ops, l),
        residual_norm: sol.residual_norm,
        kkt_residual: sol.solution.kkt_residual,
        effective_weight: sol.effective_weight,
        weight_evaluations: sol.weight_evaluations,
        iterations: sol.solution.iterations,
        condition_number: design.condition_number,
        intervals: stats,
        seconds: started.elapsed().as_secs_f64(),
    });
    Ok(())
}

fn smoothing_penalty(ops: &[CMatrix], l: usize) -> f64 {
    let d = ops[0].nrows();
    ops.iter()
        .map(|m| {
            (0..d - l - 1)
                .map(|j| (m[(j, j + l)] - m[(j + 1, j + l + 1)]).norm_sqr())
                .sum::<f64>()
        })
        .sum()
}

/// Largest `l` at which the envelope `max_{j,n} √(π^{jj} π^{j+l,j+l})`,
/// damped by the jitter factor `e^{-l²δ²/2}`, still reaches `threshold`.
pub fn estimate_l_max(state: &ReconstructionState, threshold: f64, delta: f64) -> usize {
    let d = state.dim;
    let diags: Vec<Vec<f64>> = (0..state.n_outcomes()).map(|n| state.diagonal(n)).collect();
    let mut best = 0;
    for l in 1..d {
        let jitter = (-((l * l) as f64) * delta * delta / 2.0).exp();
        let env = diags
            .iter()
            .flat_map(|dg| (0..d - l).map(move |j| (dg[j] * dg[j + l]).max(0.0).sqrt()))
            .fold(0.0, f64::max);
        if env * jitter >= threshold {
            best = l;
        }
    }
    best
}

/// Frobenius bound on the part of each outcome above `l_max`, from the
/// main diagonal alone.
pub fn unreconstructed_envelope(state: &ReconstructionState, l_max: usize) -> f64 {
    let d = state.dim;
    (0..state.n_outcomes())
        .map(|n| {
            let dg = state.diagonal(n);
            let mut s = 0.0;
            for l in l_max + 1..d {
                for j in 0..d - l {
                    s += 2.0 * (dg[j] * dg[j + l]).max(0.0);
                }
            }
            s.sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecursionReport {
    pub l_max: usize,
    pub diagonals: Vec<DiagonalRecord>,
    /// Smallest eigenvalue over outcomes before the final projection.
    pub raw_min_eigenvalue: f64,
    /// Smallest leading-block determinant seen at each `l`.
    pub min_block_determinants: Vec<f64>,
    pub unreconstructed_envelope: f64,
    /// Frobenius distance moved by the final projection onto the POVM set.
    pub repair_distance: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub povm: PovmSet,
    /// Operators as assembled by the recursion, before projection.
    pub raw: Vec<FockOperator>,
    pub report: RecursionReport,
}

/// Reconstruct diagonals `0..=l_max` and project the result onto the POVM
/// set. On failure the error is returned together with the partial state.
pub fn run_recursion(
    data: &ProbeData,
    dim: usize,
    cfg: &ReconConfig,
) -> std::result::Result<Reconstruction, (QdtError, Box<ReconstructionState>)> {
    let mut state = ReconstructionState::new(dim, data.n_outcomes);
    if let Err(e) = cfg.validate(dim) {
        return Err((e, Box::new(state)));
    }
    if let Err(e) = reconstruct_diagonal(&mut state, data, cfg, 0) {
        return Err((e, Box::new(state)));
    }
    let l_max = match cfg.auto_l_max_threshold {
        Some(t) => estimate_l_max(&state, t, cfg.jitter_delta).min(cfg.l_max),
        None => cfg.l_max,
    };
    let mut dets = vec![state.min_block_determinant(0)];
    for l in 1..=l_max {
        if let Err(e) = reconstruct_diagonal(&mut state, data, cfg, l) {
            return Err((e, Box::new(state)));
        }
        dets.push(state.min_block_determinant(l));
    }
    let raw = state.operators();
    let raw_min_eigenvalue = raw
        .iter()
        .map(|o| o.min_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    let repaired = linalg::repair_povm(&raw);
    let repair_distance = raw
        .iter()
        .zip(&repaired)
        .map(|(a, b)| (a.matrix() - b.matrix()).norm_squared())
        .sum::<f64>()
        .sqrt();
    let povm = match PovmSet::new(repaired) {
        Ok(p) => p,
        Err(e) => return Err((e, Box::new(state))),
    };
    let report = RecursionReport {
        l_max,
        diagonals: state.records.clone(),
        raw_min_eigenvalue,
        min_block_determinants: dets,
        unreconstructed_envelope: unreconstructed_envelope(&state, l_max),
        repair_distance,
    };
    Ok(Reconstruction { povm, raw, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn single_phase_data(m_p: usize, p: impl Fn(f64) -> f64) -> ProbeData {
        let grid = ProbeGrid::new(vec![1.0], m_p).unwrap();
        let values = (0..m_p).map(|v| p(grid.phase(v))).collect();
        ProbeData {
            grid,
            n_outcomes: 1,
            values,
        }
    }

    #[test]
    fn fourier_examples() {
        let d = single_phase_data(40, |_| 0.3);
        assert!((fourier_average(&d, 0).values[(0, 0)] - c(0.3)).norm() < 1e-15);
        let d = single_phase_data(40, |t| (3.0 * t).cos());
        assert!((fourier_average(&d, 3).values[(0, 0)] - c(0.5)).norm() < 1e-12);
        assert!(fourier_average(&d, 5).values[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn design_examples() {
        let g = ProbeGrid::new(vec![0.0, 1.0], 1).unwrap();
        let d0 = build_design(&g, 0, 4).unwrap();
        assert!((d0.matrix[(1, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(
            d0.matrix.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        let d1 = build_design(&g, 2, 4).unwrap();
        assert!(d1.matrix.row(0).iter().all(|&x| x == 0.0));
        assert!(d1.matrix.iter().all(|&x| x >= 0.0));
        assert!(build_design(&g, 4, 4).is_err());
    }

    #[test]
    fn two_by_two_bounds() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5), c(0.5)]));
        let st = ReconstructionState::from_operators(vec![m], 0);
        let (lo, hi) = sylvester_bounds(&st, 1, 0, 0, c(1.0), 1e-9).unwrap();
        assert!((lo + 0.5).abs() < 2e-9 && (hi - 0.5).abs() < 2e-9);
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(0.5)]));
        let st = ReconstructionState::from_operators(vec![m], 0);
        assert_eq!(
            sylvester_bounds(&st, 1, 0, 0, c(1.0), 1e-9).unwrap(),
            (0.0, 0.0)
        );
    }

    #[test]
    fn bounds_need_filled_diagonals() {
        let st = ReconstructionState::new(4, 1);
        assert!(sylvester_bounds(&st, 1, 0, 0, c(1.0), 0.0).is_err());
    }

    #[test]
    fn l_max_from_geometric_diagonal() {
        let d = 60;
        let diag: Vec<f64> = (0..d).map(|j| 0.7f64.powi(j as i32)).collect();
        let st = ReconstructionState::from_operators(
            vec![FockOperator::from_real_diagonal(&diag).into_matrix()],
            0,
        );
        let got = estimate_l_max(&st, 1e-3, 0.0);
        // direct scan: the envelope at l is max_j 0.7^{j + l/2} = 0.7^{l/2}
        let want = (1..d)
            .filter(|&l| 0.7f64.powf(l as f64 / 2.0) >= 1e-3)
            .max()
            .unwrap();
        assert_eq!(got, want);
        assert_eq!(got, 38);
    }
}
