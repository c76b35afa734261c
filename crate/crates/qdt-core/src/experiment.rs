//! Config-driven pipelines: simulate, reconstruct, sweep and jitter checks.
//!
//! Everything here is deterministic given an [`ExperimentConfig`]; the
//! config hash and seed are stamped on every artifact so outputs can be
//! traced back to their inputs. Wall-clock timings are never part of an
//! artifact.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::joint::{full_joint_solve, JointConfig, JointReport};
use crate::baseline::pfunction::{self, ElementError, PhaseSpaceGrid};
use crate::detector::{self, DetectorSpec};
use crate::error::{QdtError, Result};
use crate::exec::Execution;
use crate::fock::{coherent_amplitudes, hermitize, CMatrix, PovmSet};
use crate::jitter::{self, DecayReport};
use crate::metrics::{self, ComparisonReport};
use crate::probe::{self, Dataset, ProbeGrid};
use crate::recursive::{run_recursion, ReconConfig, RecursionReport};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Recursive,
    Pfunction,
    FullJoint,
}

impl std::str::FromStr for Method {
    type Err = QdtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursive" => Ok(Method::Recursive),
            "pfunction" => Ok(Method::Pfunction),
            "full-joint" => Ok(Method::FullJoint),
            _ => Err(QdtError::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Gamma,
    MP,
    Trials,
    Eta,
    Reflectivity,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::MP => "m-p",
            SweepAxis::Trials => "trials",
            SweepAxis::Eta => "eta",
            SweepAxis::Reflectivity => "reflectivity",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = QdtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepAxis::Gamma),
            "m-p" | "m_p" | "mp" => Ok(SweepAxis::MP),
            "trials" | "f" => Ok(SweepAxis::Trials),
            "eta" => Ok(SweepAxis::Eta),
            "reflectivity" | "r" => Ok(SweepAxis::Reflectivity),
            _ => Err(QdtError::InvalidArgument(format!(
                "unknown sweep axis '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub reflectivity: f64,
    pub eta_apd: f64,
    /// `|α_L|²`.
    pub lo_photons: f64,
    #[serde(default)]
    pub lo_phase: f64,
    /// Truncation of the simulated ground truth.
    pub dim: usize,
}

impl DetectorConfig {
    pub fn spec(&self) -> Result<DetectorSpec> {
        if !(self.lo_photons >= 0.0) || !self.lo_photons.is_finite() {
            return Err(QdtError::InvalidArgument(format!(
                "lo_photons must be ≥ 0, got {}",
                self.lo_photons
            )));
        }
        let amp = num_complex::Complex64::from_polar(self.lo_photons.sqrt(), self.lo_phase);
        DetectorSpec::new(self.reflectivity, self.eta_apd, amp, self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub max_photons: f64,
    pub step: f64,
    pub phases: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<ProbeGrid> {
        ProbeGrid::from_photon_range(self.max_photons, self.step, self.phases)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PFunctionConfig {
    pub x_max: f64,
    pub step: f64,
    pub block: usize,
    pub lambda: f64,
}

impl Default for PFunctionConfig {
    fn default() -> Self {
        Self {
            x_max: 10.0,
            step: 0.05,
            block: 5,
            lambda: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub detector: DetectorConfig,
    pub grid: GridConfig,
    /// Shots per probe; `0` means exact Born probabilities.
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub recon: ReconConfig,
    /// Truncation used for reconstruction; defaults to `detector.dim`.
    #[serde(default)]
    pub recon_dim: Option<usize>,
    pub method: Method,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_series_tolerance")]
    pub series_tolerance: f64,
    #[serde(default)]
    pub pfunction: PFunctionConfig,
    #[serde(default)]
    pub joint: JointConfig,
}

fn default_series_tolerance() -> f64 {
    tolerances::SERIES_TOL
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        preset("desk").expect("desk preset exists")
    }
}

pub const PRESETS: &[&str] = &[
    "desk",
    "full-scale",
    "low-efficiency",
    "high-efficiency",
    "pfunction",
    "full-joint",
];

/// Named configurations. `desk` is the default: `|α|² ≤ 30` in steps of
/// 0.5, 40 phases, `d = 60`, `f = 10⁵`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let desk = ExperimentConfig {
        detector: DetectorConfig {
            reflectivity: 0.5,
            eta_apd: 0.6,
            lo_photons: 5.0,
            lo_phase: 0.0,
            dim: 60,
        },
        grid: GridConfig {
            max_photons: 30.0,
            step: 0.5,
            phases: 40,
        },
        trials: 100_000,
        seed: 42,
        recon: ReconConfig::default(),
        recon_dim: None,
        method: Method::Recursive,
        sweep: None,
        series_tolerance: tolerances::SERIES_TOL,
        pfunction: PFunctionConfig::default(),
        joint: JointConfig::default(),
    };
    let mut c = desk.clone();
    match name {
        "desk" => {}
        "full-scale" => {
            c.detector.dim = 150;
            c.grid.max_photons = 100.0;
        }
        "low-efficiency" => c.detector.eta_apd = 0.2,
        "high-efficiency" => {
            c.detector.reflectivity = 0.1;
            c.detector.eta_apd = 0.9;
        }
        "pfunction" => c.method = Method::Pfunction,
        "full-joint" => {
            c.method = Method::FullJoint;
            // low probe energies keep the d = 8 truncation accurate
            c.grid.max_photons = 2.0;
            c.grid.step = 0.1;
            c.grid.phases = 20;
            c.trials = 0;
            c.recon_dim = Some(8);
        }
        _ => {
            return Err(QdtError::InvalidArgument(format!(
                "unknown preset '{name}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(c)
}

impl ExperimentConfig {
    pub fn recon_dim(&self) -> usize {
        self.recon_dim.unwrap_or(self.detector.dim)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.spec()?;
        self.grid.build()?;
        let rd = self.recon_dim();
        if rd == 0 || rd > self.detector.dim {
            return Err(QdtError::InvalidArgument(format!(
                "recon_dim must lie in 1..={}, got {rd}",
                self.detector.dim
            )));
        }
        self.recon.validate(rd)?;
        if !(self.series_tolerance > 0.0) {
            return Err(QdtError::InvalidArgument(
                "series_tolerance must be positive".into(),
            ));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(QdtError::InvalidArgument(
                    "sweep needs at least one value".into(),
                ));
            }
            for &v in &s.values {
                self.at(s.axis, v)?;
            }
        }
        if self.method == Method::Pfunction {
            PhaseSpaceGrid::new(self.pfunction.x_max, self.pfunction.step)?;
            if self.pfunction.block == 0 || self.pfunction.block > self.detector.dim {
                return Err(QdtError::InvalidArgument(
                    "pfunction.block must lie in 1..=detector.dim".into(),
                ));
            }
        }
        Ok(())
    }

    /// Copy with one sweep axis set to `value` (sweep removed).
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.sweep = None;
        let as_count = |v: f64, what: &str| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as u64)
            } else {
                Err(QdtError::InvalidArgument(format!(
                    "{what} sweep values must be nonnegative integers, got {v}"
                )))
            }
        };
        match axis {
            SweepAxis::Gamma => c.recon.gamma = value,
            SweepAxis::MP => c.grid.phases = as_count(value, "m-p")? as usize,
            SweepAxis::Trials => c.trials = as_count(value, "trials")?,
            SweepAxis::Eta => c.detector.eta_apd = value,
            SweepAxis::Reflectivity => c.detector.reflectivity = value,
        }
        c.detector.spec()?;
        c.grid.build()?;
        c.recon.validate(c.recon_dim())?;
        Ok(c)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// Wrapper stamped on every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub seed: u64,
    pub kind: String,
    pub data: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(cfg: &ExperimentConfig, kind: &str, data: T) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            kind: kind.to_string(),
            data,
        }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationDiagnostics {
    /// Largest Poisson mass above `dim - 1` over all probe magnitudes.
    pub max_probe_tail_mass: f64,
    /// Same, above the reconstruction truncation.
    pub max_probe_tail_mass_recon: f64,
    pub truth_min_eigenvalue: f64,
    pub truth_max_eigenvalue: f64,
    pub overall_efficiency: f64,
}

pub struct Simulation {
    pub truth: PovmSet,
    pub dataset: Dataset,
    pub diagnostics: TruncationDiagnostics,
}

pub fn ground_truth(cfg: &ExperimentConfig) -> Result<PovmSet> {
    detector::detector_povm(&cfg.detector.spec()?, cfg.series_tolerance)
}

pub fn simulate_with_truth(
    cfg: &ExperimentConfig,
    truth: &PovmSet,
    exec: Execution,
) -> Result<Simulation> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let probs = probe::born_table(truth, &grid, exec)?;
    let dataset = if cfg.trials == 0 {
        // store probabilities scaled to a nominal shot count
        let mut ds = probe::expected_counts(&probs, 1 << 40);
        ds.seed = cfg.seed;
        ds
    } else {
        probe::sample_counts(&probs, cfg.trials, cfg.seed, exec)?
    };
    let (mut tail, mut tail_recon) = (0.0f64, 0.0f64);
    for &m in &grid.magnitudes {
        tail = tail.max(coherent_amplitudes(m, 0.0, cfg.detector.dim)?.tail_mass);
        tail_recon = tail_recon.max(coherent_amplitudes(m, 0.0, cfg.recon_dim())?.tail_mass);
    }
    let (lo, hi) = detector::spectrum_range(&truth.outcomes[0]);
    Ok(Simulation {
        truth: truth.clone(),
        dataset,
        diagnostics: TruncationDiagnostics {
            max_probe_tail_mass: tail,
            max_probe_tail_mass_recon: tail_recon,
            truth_min_eigenvalue: lo,
            truth_max_eigenvalue: hi,
            overall_efficiency: cfg.detector.spec()?.overall_efficiency(),
        },
    })
}

pub fn simulate(cfg: &ExperimentConfig, exec: Execution) -> Result<Simulation> {
    cfg.validate()?;
    let truth = ground_truth(cfg)?;
    simulate_with_truth(cfg, &truth, exec)
}

/// Result of the selected method.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodReport {
    Recursive(RecursionReport),
    FullJoint(JointReport),
    Pfunction {
        /// Raw element block, rows then columns, as `[re, im]` pairs.
        block: Vec<Vec<[f64; 2]>>,
        min_eigenvalue_hermitized: f64,
        elements: Vec<ElementError>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructOutput {
    /// Reconstructed POVM; absent for the P-function method, whose output
    /// is a single unconstrained block.
    pub povm: Option<PovmSet>,
    pub comparison: Option<ComparisonReport>,
    pub method: MethodReport,
}

fn compare_no_click(rec: &PovmSet, truth: &PovmSet, l_max: usize) -> Result<ComparisonReport> {
    let d = rec.dim();
    metrics::compare(&rec.outcomes[0], &truth.outcomes[0].truncate(d), l_max)
}

/// Runs the configured method. `truth` enables the comparison report.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    truth: Option<&PovmSet>,
    exec: Execution,
) -> Result<ReconstructOutput> {
    cfg.validate()?;
    let d = cfg.recon_dim();
    match cfg.method {
        Method::Recursive => {
            let freqs = probe::relative_frequencies(dataset)?;
            let mut rc = cfg.recon;
            rc.exec = exec;
            let rec = run_recursion(&freqs, d, &rc).map_err(|(e, _)| e)?;
            let comparison = truth
                .map(|t| compare_no_click(&rec.povm, t, rec.report.l_max))
                .transpose()?;
            Ok(ReconstructOutput {
                povm: Some(rec.povm),
                comparison,
                method: MethodReport::Recursive(rec.report),
            })
        }
        Method::FullJoint => {
            let freqs = probe::relative_frequencies(dataset)?;
            let jc = JointConfig {
                gamma: cfg.recon.gamma,
                ..cfg.joint
            };
            let (povm, rep) = full_joint_solve(&freqs, d, &jc)?;
            let comparison = truth
                .map(|t| compare_no_click(&povm, t, d - 1))
                .transpose()?;
            Ok(ReconstructOutput {
                povm: Some(povm),
                comparison,
                method: MethodReport::FullJoint(rep),
            })
        }
        Method::Pfunction => {
            let out = run_pfunction(cfg, exec)?;
            Ok(out)
        }
    }
}

/// The phase-space method samples its own lattice of probes; the probe
/// grid and dataset are not used.
pub fn run_pfunction(cfg: &ExperimentConfig, exec: Execution) -> Result<ReconstructOutput> {
    let spec = cfg.detector.spec()?;
    let pc = &cfg.pfunction;
    let grid = PhaseSpaceGrid::new(pc.x_max, pc.step)?;
    let exact: Vec<f64> = exec.map(grid.len(), |i| detector::q_oracle(&spec, grid.alpha(i)));
    let probs = if cfg.trials == 0 {
        exact
    } else {
        pfunction::noisy_probabilities(&exact, cfg.trials, cfg.seed, exec)
    };
    let block = pfunction::pfunction_block(&probs, &grid, pc.block, pc.lambda, exec)?;
    let truth = detector::build_no_click_povm(&spec, cfg.series_tolerance)?.truncate(pc.block);
    let h = hermitize(&block)?;
    let elements = pfunction::element_errors(&block, &truth);
    let rel = (&block - truth.matrix()).norm() / truth.frobenius_norm();
    let fid = if h.min_eigenvalue() >= -tolerances::POVM_PSD && h.trace() > 0.0 {
        metrics::fidelity(&h, &truth).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(ReconstructOutput {
        povm: None,
        comparison: Some(ComparisonReport {
            fidelity: fid,
            relative_error: rel,
            per_diagonal_distance: metrics::diagonal_distances(&h, &truth, pc.block - 1),
        }),
        method: MethodReport::Pfunction {
            block: matrix_rows(&block),
            min_eigenvalue_hermitized: h.min_eigenvalue(),
            elements,
        },
    })
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|j| {
            (0..m.ncols())
                .map(|k| [m[(j, k)].re, m[(j, k)].im])
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub fidelity: Option<f64>,
    pub relative_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Simulate and reconstruct one configuration; returns the comparison.
pub fn run_point(cfg: &ExperimentConfig, exec: Execution) -> Result<ComparisonReport> {
    if cfg.method == Method::Pfunction {
        return run_pfunction(cfg, exec)?
            .comparison
            .ok_or_else(|| QdtError::Solver("no comparison".into()));
    }
    let sim = simulate(cfg, exec)?;
    let out = reconstruct(cfg, &sim.dataset, Some(&sim.truth), exec)?;
    out.comparison
        .ok_or_else(|| QdtError::Solver("no comparison".into()))
}

/// Runs every sweep point with the base seed, so only the swept quantity
/// differs between rows. Failures are recorded per row.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let s = cfg
        .sweep
        .clone()
        .ok_or_else(|| QdtError::InvalidArgument("config has no sweep section".into()))?;
    let rows = exec.map_bounded(s.values.len(), jobs, |i| {
        let v = s.values[i];
        match cfg.at(s.axis, v).and_then(|c| run_point(&c, exec)) {
            Ok(r) => SweepRow {
                value: v,
                fidelity: Some(r.fidelity),
                relative_error: Some(r.relative_error),
                error: None,
            },
            Err(e) => SweepRow {
                value: v,
                fidelity: None,
                relative_error: None,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(SweepResult { axis: s.axis, rows })
}

impl SweepResult {
    /// Columns: `config_hash,seed,axis,value,fidelity,relative_error,error`.
    pub fn write_csv<W: Write>(&self, cfg: &ExperimentConfig, w: W) -> Result<()> {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record([
            "config_hash",
            "seed",
            "axis",
            "value",
            "fidelity",
            "relative_error",
            "error",
        ])?;
        let hash = cfg.hash();
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            cw.write_record(&[
                hash.clone(),
                cfg.seed.to_string(),
                self.axis.name().to_string(),
                r.value.to_string(),
                opt(r.fidelity),
                opt(r.relative_error),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        cw.flush()?;
        Ok(())
    }

    /// Plain-text table for terminals.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{:>12}  {:>10}  {:>14}\n",
            self.axis.name(),
            "fidelity",
            "rel. error"
        );
        for r in &self.rows {
            match (r.fidelity, r.relative_error) {
                (Some(f), Some(e)) => s.push_str(&format!(
                    "{:>12}  {:>9.3}%  {:>14.4e}\n",
                    r.value,
                    100.0 * f,
                    e
                )),
                _ => s.push_str(&format!(
                    "{:>12}  failed: {}\n",
                    r.value,
                    r.error.as_deref().unwrap_or("?")
                )),
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JitterCheck {
    pub delta_degrees: f64,
    pub weight_ratio_l18: f64,
    pub report: DecayReport,
}

/// Decay-bound check on the no-click element for each jitter width.
pub fn jitter_check(cfg: &ExperimentConfig, deltas_degrees: &[f64]) -> Result<Vec<JitterCheck>> {
    let spec = cfg.detector.spec()?;
    let pi0 = detector::build_no_click_povm(&spec, cfg.series_tolerance)?;
    deltas_degrees
        .iter()
        .map(|&deg| {
            let delta = deg.to_radians();
            let jit = jitter::apply_jitter(&pi0, delta)?;
            let report = jitter::decay_bound_check(&pi0, &jit, delta)?;
            let ratio = jitter::jitter_weight(18, delta) / jitter::jitter_weight(0, delta);
            Ok(JitterCheck {
                delta_degrees: deg,
                weight_ratio_l18: ratio,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            preset(p).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = preset("desk").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut a = preset("high-efficiency").unwrap();
        a.sweep = Some(Sweep {
            axis: SweepAxis::Gamma,
            values: vec![0.1, 1.0, 10.0],
        });
        let s = serde_json::to_string(&a).unwrap();
        let b: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_axis_application() {
        let c = preset("desk").unwrap();
        assert_eq!(c.at(SweepAxis::MP, 5.0).unwrap().grid.phases, 5);
        assert_eq!(c.at(SweepAxis::Trials, 1000.0).unwrap().trials, 1000);
        assert!(c.at(SweepAxis::Trials, 0.5).is_err());
        assert!(c.at(SweepAxis::Eta, 1.5).is_err());
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut c = preset("desk").unwrap();
        c.sweep = Some(Sweep {
            axis: SweepAxis::Gamma,
            values: vec![],
        });
        assert!(c.validate().is_err());
    }
}
