//! Spectral diagnostics of batches of compressed codes.
//!
//! For a batch `Z` (`B×d_C`): `sigma` are its singular values in descending
//! order, `λ_i = σ_i²`, `d_eff = (Σλ)² / Σλ²` and `kappa = σ_1 / σ_last`
//! where `σ_last` is `σ_{d_C}` when `B ≥ d_C` and the smallest of the `B`
//! singular values otherwise. A zero `σ_last` reports `kappa = +∞`; in JSON
//! that sentinel is the string `"inf"`. `offdiag_ratio` compares mean
//! absolute off-diagonal and diagonal entries of `C = ZᵀZ / B`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::nn::{svd, Tensor};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid batch: {0}")]
    Invalid(String),
    #[error("reports have different code widths ({0} vs {1})")]
    WidthMismatch(usize, usize),
}

/// Absolute tolerance for ties in `compare_runs`.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub sigma: Vec<f64>,
    #[serde(serialize_with = "ser_kappa", deserialize_with = "de_kappa")]
    pub kappa: f64,
    pub d_eff: f64,
    pub offdiag_ratio: f64,
    pub batch: usize,
    pub d_c: usize,
}

fn ser_kappa<S: Serializer>(k: &f64, s: S) -> Result<S::Ok, S::Error> {
    if k.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*k)
    }
}

fn de_kappa<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum K {
        Num(f64),
        Str(String),
    }
    match K::deserialize(d)? {
        K::Num(v) => Ok(v),
        K::Str(s) if s == "inf" => Ok(f64::INFINITY),
        K::Str(s) => Err(serde::de::Error::custom(format!("bad kappa {s:?}"))),
    }
}

pub fn spectrum(z: &Tensor) -> Result<SpectrumReport, AnalysisError> {
    if z.rank() != 2 || z.rows() == 0 || z.cols() == 0 {
        return Err(AnalysisError::Invalid(format!(
            "expected a non-empty matrix, got {:?}",
            z.shape()
        )));
    }
    if !z.is_finite() {
        return Err(AnalysisError::Invalid("non-finite entries".into()));
    }
    if z.max_abs() == 0.0 {
        return Err(AnalysisError::Invalid(
            "all-zero batch has no spectrum".into(),
        ));
    }
    let (b, d) = (z.rows(), z.cols());
    let sigma = svd(z)
        .map_err(|e| AnalysisError::Invalid(e.to_string()))?
        .sigma;
    let lambda: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let sum: f64 = lambda.iter().sum();
    let sum_sq: f64 = lambda.iter().map(|l| l * l).sum();
    let d_eff = sum * sum / sum_sq;
    let last = *sigma.last().expect("non-empty");
    let kappa = if last == 0.0 {
        f64::INFINITY
    } else {
        sigma[0] / last
    };
    let c = z.t_matmul(z).expect("ZᵀZ").scale(1.0 / b as f64);
    let (mut diag, mut off) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                diag += c.get(i, j).abs();
            } else {
                off += c.get(i, j).abs();
            }
        }
    }
    let offdiag_ratio = if d == 1 {
        0.0
    } else {
        (off / (d * (d - 1)) as f64) / (diag / d as f64)
    };
    Ok(SpectrumReport {
        sigma,
        kappa,
        d_eff,
        offdiag_ratio,
        batch: b,
        d_c: d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AMoreEfficient,
    BMoreEfficient,
    Tie,
}

fn cmp_tol(a: f64, b: f64) -> Ordering {
    if a == b || (a - b).abs() <= TIE_TOLERANCE {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Higher `d_eff` wins; equal `d_eff` falls back to lower `kappa`.
pub fn compare_runs(a: &SpectrumReport, b: &SpectrumReport) -> Result<Verdict, AnalysisError> {
    if a.d_c != b.d_c {
        return Err(AnalysisError::WidthMismatch(a.d_c, b.d_c));
    }
    let order = cmp_tol(a.d_eff, b.d_eff).then(cmp_tol(b.kappa, a.kappa));
    Ok(match order {
        Ordering::Greater => Verdict::AMoreEfficient,
        Ordering::Less => Verdict::BMoreEfficient,
        Ordering::Equal => Verdict::Tie,
    })
}

impl SpectrumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let rows = [
            ("batch", self.batch.to_string()),
            ("d_c", self.d_c.to_string()),
            ("d_eff", format!("{:.6}", self.d_eff)),
            (
                "kappa",
                if self.kappa.is_infinite() {
                    "inf".into()
                } else {
                    format!("{:.6}", self.kappa)
                },
            ),
            ("offdiag_ratio", format!("{:.6}", self.offdiag_ratio)),
            ("sigma_max", format!("{:.6}", self.sigma[0])),
            (
                "sigma_min",
                format!("{:.6}", self.sigma[self.sigma.len() - 1]),
            ),
        ];
        for (k, v) in rows {
            writeln!(s, "{k:<14} {v:>14}").expect("writing to a String");
        }
        s
    }

    pub fn sigma_csv(&self) -> String {
        let mut s = String::from("index,sigma\n");
        for (i, v) in self.sigma.iter().enumerate() {
            writeln!(s, "{i},{v}").expect("writing to a String");
        }
        s
    }
}

/// Reports for consecutive batches of `batch` rows; a trailing partial
/// batch is dropped.
pub fn batch_spectra(z: &Tensor, batch: usize) -> Result<Vec<SpectrumReport>, AnalysisError> {
    if batch == 0 || z.rank() != 2 || z.rows() < batch {
        return Err(AnalysisError::Invalid(format!(
            "cannot cut {:?} into batches of {batch}",
            z.shape()
        )));
    }
    (0..z.rows() / batch)
        .map(|k| {
            let data = (k * batch..(k + 1) * batch)
                .flat_map(|i| z.row(i).iter().copied())
                .collect();
            spectrum(&Tensor::matrix(batch, z.cols(), data).expect("valid rows"))
        })
        .collect()
}

/// Median of a non-empty slice (mean of the middle two for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
