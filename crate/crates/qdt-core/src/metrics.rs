//! Distances between reconstructed and reference POVM elements.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QdtError, Result};
use crate::fock::FockOperator;
use crate::linalg;
use crate::tolerances;

/// Trace-normalised fidelity
/// `(Tr √(√A B √A))² / (Tr A · Tr B)`.
pub fn fidelity(a: &FockOperator, b: &FockOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(QdtError::DimensionMismatch(format!(
            "{} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    for (name, op) in [("first", a), ("second", b)] {
        let m = op.min_eigenvalue();
        if m < -tolerances::POVM_PSD {
            return Err(QdtError::InvalidArgument(format!(
                "{name} operator is not PSD (min eigenvalue {m:.3e})"
            )));
        }
    }
    let (ta, tb) = (a.trace(), b.trace());
    if ta <= 0.0 || tb <= 0.0 {
        return Err(QdtError::InvalidArgument(
            "fidelity needs nonzero traces".into(),
        ));
    }
    let s = linalg::psd_sqrt(a.matrix());
    let inner = &s * b.matrix() * &s;
    let root_trace: f64 = linalg::hermitian_eigenvalues(&inner)
        .into_iter()
        .map(|x| if x > 0.0 { x.sqrt() } else { 0.0 })
        .sum();
    Ok(root_trace * root_trace / (ta * tb))
}

/// `||a - b||_F / ||b||_F`.
pub fn relative_error(a: &FockOperator, b: &FockOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(QdtError::DimensionMismatch(format!(
            "{} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let nb = b.frobenius_norm();
    if nb == 0.0 {
        return Err(QdtError::InvalidArgument(
            "reference operator has zero norm".into(),
        ));
    }
    Ok((a.matrix() - b.matrix()).norm() / nb)
}

/// Euclidean distance between the `l`-th upper diagonals, `l = 0..=l_max`.
pub fn diagonal_distances(a: &FockOperator, b: &FockOperator, l_max: usize) -> Vec<f64> {
    let d = a.dim().min(b.dim());
    (0..=l_max)
        .map(|l| {
            if l >= d {
                return 0.0;
            }
            (0..d - l)
                .map(|j| (a.get(j, j + l) - b.get(j, j + l)).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub fidelity: f64,
    pub relative_error: f64,
    pub per_diagonal_distance: Vec<f64>,
}

pub fn compare(rec: &FockOperator, truth: &FockOperator, l_max: usize) -> Result<ComparisonReport> {
    Ok(ComparisonReport {
        fidelity: fidelity(rec, truth)?,
        relative_error: relative_error(rec, truth)?,
        per_diagonal_distance: diagonal_distances(rec, truth, l_max),
    })
}

impl ComparisonReport {
    /// One row per diagonal: `l,distance,fidelity,relative_error`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["l", "distance", "fidelity", "relative_error"])?;
        for (l, d) in self.per_diagonal_distance.iter().enumerate() {
            cw.write_record(&[
                l.to_string(),
                d.to_string(),
                self.fidelity.to_string(),
                self.relative_error.to_string(),
            ])?;
        }
        cw.flush()?;
        Ok(())
    }
}
