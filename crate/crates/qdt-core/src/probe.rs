//! Coherent probe lattice, Born-rule probabilities and shot-noise synthesis.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::exec::Execution;
use crate::fock::{coherent_amplitudes, CoherentAmplitudes, PovmSet};

/// `M_a` magnitudes times `M_p` equally spaced phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub magnitudes: Vec<f64>,
    pub phases_per_magnitude: usize,
}

impl ProbeGrid {
    pub fn new(magnitudes: Vec<f64>, phases_per_magnitude: usize) -> Result<Self> {
        let g = Self {
            magnitudes,
            phases_per_magnitude,
        };
        g.validate()?;
        Ok(g)
    }

    /// Magnitudes with `|α|² = 0, step, 2·step, ..., ≤ max_photons`.
    pub fn from_photon_range(
        max_photons: f64,
        step: f64,
        phases_per_magnitude: usize,
    ) -> Result<Self> {
        if !(step > 0.0) || !(max_photons >= 0.0) {
            return Err(QdtError::InvalidArgument(
                "photon range needs step > 0 and max ≥ 0".into(),
            ));
        }
        let count = (max_photons / step + 1e-9).floor() as usize + 1;
        let magnitudes = (0..count).map(|i| (i as f64 * step).sqrt()).collect();
        Self::new(magnitudes, phases_per_magnitude)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases_per_magnitude == 0 {
            return Err(QdtError::InvalidArgument("M_p must be positive".into()));
        }
        if self.magnitudes.is_empty() {
            return Err(QdtError::InvalidArgument(
                "grid needs at least one magnitude".into(),
            ));
        }
        if self.magnitudes[0] < 0.0 || !self.magnitudes.iter().all(|m| m.is_finite()) {
            return Err(QdtError::InvalidArgument(
                "magnitudes must be finite and ≥ 0".into(),
            ));
        }
        if self.magnitudes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QdtError::InvalidArgument(
                "magnitudes must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn m_a(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn m_p(&self) -> usize {
        self.phases_per_magnitude
    }

    pub fn n_probes(&self) -> usize {
        self.m_a() * self.m_p()
    }

    pub fn phase(&self, v: usize) -> f64 {
        std::f64::consts::TAU * v as f64 / self.phases_per_magnitude as f64
    }

    pub fn alpha(&self, u: usize, v: usize) -> Complex64 {
        Complex64::from_polar(self.magnitudes[u], self.phase(v))
    }
}

/// Per-probe outcome probabilities (exact or empirical), laid out
/// `[u][v][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeData {
    pub grid: ProbeGrid,
    pub n_outcomes: usize,
    pub values: Vec<f64>,
}

impl ProbeData {
    pub fn get(&self, u: usize, v: usize, n: usize) -> f64 {
        self.values[(u * self.grid.m_p() + v) * self.n_outcomes + n]
    }
}

/// Recorded click statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub grid: ProbeGrid,
    pub trials: u64,
    pub n_outcomes: usize,
    /// Flattened `[u][v][n]`.
    pub counts: Vec<u64>,
    pub seed: u64,
}

impl Dataset {
    pub fn count(&self, u: usize, v: usize, n: usize) -> u64 {
        self.counts[(u * self.grid.m_p() + v) * self.n_outcomes + n]
    }

    /// Check every probe sums to `trials`.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.counts.len() != self.grid.n_probes() * self.n_outcomes {
            return Err(QdtError::DimensionMismatch(
                "count array does not match grid".into(),
            ));
        }
        for (i, probe) in self.counts.chunks(self.n_outcomes).enumerate() {
            let s: u64 = probe.iter().sum();
            if s != self.trials {
                return Err(QdtError::InvalidArgument(format!(
                    "probe {i} sums to {s}, expected {}",
                    self.trials
                )));
            }
        }
        Ok(())
    }
}

/// `p_n = ⟨α|Π_n|α⟩`, clamped to `[0, 1]`.
pub fn born_probability(povm: &PovmSet, alpha: &CoherentAmplitudes) -> Result<Vec<f64>> {
    if povm.dim() != alpha.dim() {
        return Err(QdtError::DimensionMismatch(format!(
            "POVM dim {} vs amplitude dim {}",
            povm.dim(),
            alpha.dim()
        )));
    }
    Ok(povm
        .outcomes
        .iter()
        .map(|o| o.expectation(&alpha.coeffs).clamp(0.0, 1.0))
        .collect())
}

/// Exact probabilities for every probe of the grid.
pub fn born_table(povm: &PovmSet, grid: &ProbeGrid, exec: Execution) -> Result<ProbeData> {
    grid.validate()?;
    let d = povm.dim();
    let m_p = grid.m_p();
    let rows: Vec<Result<Vec<f64>>> = exec.map(grid.n_probes(), |i| {
        let (u, v) = (i / m_p, i % m_p);
        let a = coherent_amplitudes(grid.magnitudes[u], grid.phase(v), d)?;
        born_probability(povm, &a)
    });
    let mut values = Vec::with_capacity(grid.n_probes() * povm.len());
    for r in rows {
        values.extend(r?);
    }
    Ok(ProbeData {
        grid: grid.clone(),
        n_outcomes: povm.len(),
        values,
    })
}

/// Draw `trials` outcomes per probe: binomial for two outcomes, multinomial
/// (chained conditional binomials) otherwise. Each probe has its own
/// ChaCha stream indexed by its position, so the result is independent of
/// the execution strategy.
pub fn sample_counts(
    probs: &ProbeData,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Dataset> {
    if trials == 0 {
        return Err(QdtError::InvalidArgument(
            "trials must be at least 1".into(),
        ));
    }
    let n = probs.n_outcomes;
    let per_probe: Vec<Vec<u64>> = exec.map(probs.grid.n_probes(), |i| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let p = &probs.values[i * n..(i + 1) * n];
        let mut left = trials;
        let mut mass = 1.0;
        let mut out = vec![0u64; n];
        for k in 0..n {
            if k + 1 == n {
                out[k] = left;
                break;
            }
            let q = if mass > 0.0 {
                (p[k] / mass).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let draw = Binomial::new(left, q)
                .expect("probability clamped to [0,1]")
                .sample(&mut rng);
            out[k] = draw;
            left -= draw;
            mass -= p[k];
        }
        out
    });
    Ok(Dataset {
        grid: probs.grid.clone(),
        trials,
        n_outcomes: n,
        counts: per_probe.into_iter().flatten().collect(),
        seed,
    })
}

/// Born table plus sampling in one step.
pub fn synthesize(
    povm: &PovmSet,
    grid: &ProbeGrid,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Dataset> {
    let probs = born_table(povm, grid, exec)?;
    sample_counts(&probs, trials, seed, exec)
}

/// Deterministic counts `round(f·p)`, with the last outcome absorbing the
/// rounding so each probe still sums to `f`.
pub fn expected_counts(probs: &ProbeData, trials: u64) -> Dataset {
    let n = probs.n_outcomes;
    let mut counts = Vec::with_capacity(probs.values.len());
    for p in probs.values.chunks(n) {
        let mut left = trials;
        for (k, &pk) in p.iter().enumerate() {
            if k + 1 == n {
                counts.push(left);
            } else {
                let c = ((pk * trials as f64).round() as u64).min(left);
                counts.push(c);
                left -= c;
            }
        }
    }
    Dataset {
        grid: probs.grid.clone(),
        trials,
        n_outcomes: n,
        counts,
        seed: 0,
    }
}

/// Per-probe normalised counts.
pub fn relative_frequencies(ds: &Dataset) -> Result<ProbeData> {
    let n = ds.n_outcomes;
    let mut values = Vec::with_capacity(ds.counts.len());
    for probe in ds.counts.chunks(n) {
        let total: u64 = probe.iter().sum();
        if total == 0 {
            return Err(QdtError::InvalidArgument(
                "probe with zero total trials".into(),
            ));
        }
        values.extend(probe.iter().map(|&c| c as f64 / total as f64));
    }
    Ok(ProbeData {
        grid: ds.grid.clone(),
        n_outcomes: n,
        values,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub grid: ProbeGrid,
    pub trials: u64,
    pub seed: u64,
    pub n_outcomes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// One JSON header line, then CSV rows `u,v,alpha_sq,theta,n,count`.
pub fn write_dataset<W: Write>(ds: &Dataset, config_hash: Option<&str>, mut w: W) -> Result<()> {
    let header = DatasetHeader {
        grid: ds.grid.clone(),
        trials: ds.trials,
        seed: ds.seed,
        n_outcomes: ds.n_outcomes,
        config_hash: config_hash.map(str::to_owned),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["u", "v", "alpha_sq", "theta", "n", "count"])?;
    for u in 0..ds.grid.m_a() {
        let a2 = ds.grid.magnitudes[u] * ds.grid.magnitudes[u];
        for v in 0..ds.grid.m_p() {
            let th = ds.grid.phase(v);
            for n in 0..ds.n_outcomes {
                cw.write_record(&[
                    u.to_string(),
                    v.to_string(),
                    a2.to_string(),
                    th.to_string(),
                    n.to_string(),
                    ds.count(u, v, n).to_string(),
                ])?;
            }
        }
    }
    cw.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(mut r: R) -> Result<(Dataset, DatasetHeader)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: DatasetHeader = serde_json::from_str(line.trim())?;
    let n = header.n_outcomes;
    let m_p = header.grid.m_p();
    let mut counts = vec![0u64; header.grid.n_probes() * n];
    let mut seen = vec![false; counts.len()];
    let mut cr = csv::Reader::from_reader(r);
    for rec in cr.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| QdtError::Parse(format!("row has no column {i}")))
        };
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| QdtError::Parse(format!("{s}: {e}")))
        };
        let u = parse(field(0)?)? as usize;
        let v = parse(field(1)?)? as usize;
        let k = parse(field(4)?)? as usize;
        let c = parse(field(5)?)?;
        if u >= header.grid.m_a() || v >= m_p || k >= n {
            return Err(QdtError::Parse(format!(
                "row index ({u},{v},{k}) outside grid"
            )));
        }
        let idx = (u * m_p + v) * n + k;
        counts[idx] = c;
        seen[idx] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(QdtError::Parse("dataset is missing rows".into()));
    }
    let ds = Dataset {
        grid: header.grid.clone(),
        trials: header.trials,
        n_outcomes: n,
        counts,
        seed: header.seed,
    };
    ds.validate()?;
    Ok((ds, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockOperator;

    fn vacuum_povm(d: usize) -> PovmSet {
        let mut diag = vec![0.0; d];
        diag[0] = 1.0;
        PovmSet::binary(FockOperator::from_real_diagonal(&diag))
    }

    #[test]
    fn grid_layout() {
        let g = ProbeGrid::from_photon_range(100.0, 0.5, 40).unwrap();
        assert_eq!(g.m_a(), 201);
        assert!((g.magnitudes[200] - 10.0).abs() < 1e-12);
        assert!(ProbeGrid::new(vec![1.0, 0.5], 3).is_err());
        assert!(ProbeGrid::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn born_examples() {
        let id = PovmSet::new(vec![FockOperator::identity(4)]).unwrap();
        let a = coherent_amplitudes(0.7, 1.0, 4).unwrap();
        let p = born_probability(&id, &a).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - a.norm_sqr()).abs() < 1e-15);

        let v = vacuum_povm(4);
        let a0 = coherent_amplitudes(0.0, 0.0, 4).unwrap();
        assert_eq!(born_probability(&v, &a0).unwrap(), vec![1.0, 0.0]);

        let a5 = coherent_amplitudes(0.0, 0.0, 5).unwrap();
        assert!(born_probability(&v, &a5).is_err());
    }

    #[test]
    fn certain_outcome_gives_full_counts() {
        let g = ProbeGrid::new(vec![0.0], 7).unwrap();
        let ds = synthesize(&vacuum_povm(3), &g, 1234, 1, Execution::Sequential).unwrap();
        assert!((0..7).all(|v| ds.count(0, v, 0) == 1234));
    }

    #[test]
    fn binomial_mean_concentrates() {
        let g = ProbeGrid::new((0..100).map(|i| i as f64).collect(), 1).unwrap();
        let probs = ProbeData {
            grid: g,
            n_outcomes: 2,
            values: [0.5, 0.5].repeat(100),
        };
        let ds = sample_counts(&probs, 100_000, 7, Execution::Parallel).unwrap();
        let mean: f64 = (0..100)
            .map(|u| ds.count(u, 0, 0) as f64 / 1e5)
            .sum::<f64>()
            / 100.0;
        assert!((mean - 0.5).abs() < 5e-4);
        ds.validate().unwrap();
    }

    #[test]
    fn seeded_runs_repeat() {
        let g = ProbeGrid::new(vec![0.0, 1.0], 5).unwrap();
        let probs = ProbeData {
            grid: g,
            n_outcomes: 2,
            values: [0.22313, 1.0 - 0.22313].repeat(10),
        };
        let a = sample_counts(&probs, 1000, 42, Execution::Sequential).unwrap();
        let b = sample_counts(&probs, 1000, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frequency_examples() {
        let g = ProbeGrid::new(vec![0.0, 1.0], 1).unwrap();
        let ds = Dataset {
            grid: g,
            trials: 10,
            n_outcomes: 2,
            counts: vec![10, 0, 5, 5],
            seed: 0,
        };
        let f = relative_frequencies(&ds).unwrap();
        assert_eq!(f.values, vec![1.0, 0.0, 0.5, 0.5]);
        let mut empty = ds.clone();
        empty.counts = vec![0, 0, 5, 5];
        assert!(relative_frequencies(&empty).is_err());
    }

    #[test]
    fn rounding_round_trip() {
        let g = ProbeGrid::new(vec![0.0, 1.0, 2.0], 3).unwrap();
        let values: Vec<f64> = (0..9)
            .flat_map(|i| {
                let p = 0.05 + 0.1 * i as f64;
                [p, 1.0 - p]
            })
            .collect();
        let probs = ProbeData {
            grid: g,
            n_outcomes: 2,
            values,
        };
        let f = 997;
        let back = relative_frequencies(&expected_counts(&probs, f)).unwrap();
        for (a, b) in back.values.iter().zip(&probs.values) {
            assert!((a - b).abs() <= 0.5 / f as f64 + 1e-15);
        }
    }

    #[test]
    fn multinomial_rows_sum() {
        let g = ProbeGrid::new(vec![0.0, 1.0], 2).unwrap();
        let probs = ProbeData {
            grid: g,
            n_outcomes: 3,
            values: [0.2, 0.5, 0.3].repeat(4),
        };
        let ds = sample_counts(&probs, 500, 3, Execution::Sequential).unwrap();
        ds.validate().unwrap();
    }

    #[test]
    fn file_round_trip() {
        let g = ProbeGrid::new(vec![0.0, 0.5], 3).unwrap();
        let ds = synthesize(&vacuum_povm(4), &g, 50, 9, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, Some("abc"), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == "u,v,alpha_sq,theta,n,count");
        let (back, h) = read_dataset(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, ds);
        assert_eq!(h.config_hash.as_deref(), Some("abc"));
    }
}
