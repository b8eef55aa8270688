//! Multiple-testing and combination rules on a vector of p-values.

use serde::Serialize;

use super::chi2::chi2_upper_quantile;
use crate::error::{Error, Result};

/// Tolerance on `Σ w = 1` for combination weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejections {
    pub threshold: f64,
    /// Indices of rejected hypotheses, ascending.
    pub rejected: Vec<usize>,
}

impl Rejections {
    fn at(pvalues: &[f64], threshold: f64) -> Self {
        let rejected = pvalues.iter().enumerate().filter(|(_, p)| **p <= threshold).map(|(i, _)| i).collect();
        Self { threshold, rejected }
    }

    pub fn count(&self) -> usize {
        self.rejected.len()
    }
}

fn check_pvalues(pvalues: &[f64]) -> Result<()> {
    match pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(Error::Domain(format!("p-value {p} is outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Benjamini-Hochberg: the largest candidate `s ∈ {attained p} ∪ {0}` with
/// `M·s / max(#{P ≤ s}, 1) ≤ α`, rejecting every `P_i ≤ s`.
pub fn bh_threshold(pvalues: &[f64], alpha: f64) -> Result<Rejections> {
    check_pvalues(pvalues)?;
    let m = pvalues.len() as f64;
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let s = sorted[k];
        while k < sorted.len() && sorted[k] == s {
            k += 1;
        }
        if s * m <= alpha * k.max(1) as f64 {
            best = s;
        }
    }
    Ok(Rejections::at(pvalues, best))
}

/// Classical step-up form of the same rule: reject the `k` smallest where
/// `k` is the largest index with `P_(k) ≤ kα/M`.
pub fn bh_step_up(pvalues: &[f64], alpha: f64) -> Result<Rejections> {
    check_pvalues(pvalues)?;
    let m = pvalues.len() as f64;
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold =
        (1..=sorted.len()).rev().find(|&k| sorted[k - 1] * m <= alpha * k as f64).map_or(0.0, |k| sorted[k - 1]);
    Ok(Rejections::at(pvalues, threshold))
}

pub fn bonferroni(pvalues: &[f64], alpha: f64) -> Result<Rejections> {
    check_pvalues(pvalues)?;
    if pvalues.is_empty() {
        return Ok(Rejections { threshold: 0.0, rejected: Vec::new() });
    }
    Ok(Rejections::at(pvalues, alpha / pvalues.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub note: Option<String>,
}

/// `−2 Σ ln P_i`; `+∞` as soon as any `P_i = 0`.
pub fn fisher_statistic(pvalues: &[f64]) -> Result<f64> {
    check_pvalues(pvalues)?;
    Ok(-2.0 * pvalues.iter().map(|p| p.ln()).sum::<f64>())
}

/// Rejects iff the statistic reaches the upper-α quantile of `χ²_{2n}`.
pub fn fisher_test(pvalues: &[f64], alpha: f64) -> Result<FisherResult> {
    if pvalues.is_empty() {
        return Err(Error::Domain("Fisher's method needs at least one p-value".into()));
    }
    let statistic = fisher_statistic(pvalues)?;
    let critical_value = chi2_upper_quantile(2.0 * pvalues.len() as f64, alpha)?;
    let note = statistic.is_infinite().then(|| "a p-value of 0 makes the statistic infinite".to_string());
    Ok(FisherResult { statistic, critical_value, reject: statistic >= critical_value, note })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricMean {
    pub combined: f64,
    /// `α/e`, the cutoff that makes the combined test level α.
    pub cutoff: f64,
    pub reject: bool,
}

/// `P̃ = exp(Σ w_i ln P_i)`, equal weights when `weights` is `None`.
pub fn geometric_mean_combination(pvalues: &[f64], weights: Option<&[f64]>, alpha: f64) -> Result<GeometricMean> {
    check_pvalues(pvalues)?;
    if pvalues.is_empty() {
        return Err(Error::Domain("nothing to combine".into()));
    }
    let equal = vec![1.0 / pvalues.len() as f64; pvalues.len()];
    let w = weights.unwrap_or(&equal);
    if w.len() != pvalues.len() {
        return Err(Error::Config(format!("{} weights for {} p-values", w.len(), pvalues.len())));
    }
    if w.iter().any(|x| x.is_nan() || *x < 0.0) {
        return Err(Error::Config("weights must be nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Config(format!("weights sum to {total}, not 1")));
    }
    let log: f64 = pvalues.iter().zip(w).filter(|(_, w)| **w > 0.0).map(|(p, w)| w * p.ln()).sum();
    let combined = log.exp();
    let cutoff = alpha / std::f64::consts::E;
    Ok(GeometricMean { combined, cutoff, reject: combined <= cutoff })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibrator {
    /// `k·p^(k−1)` for `k ∈ (0, 1)`.
    PowerK(f64),
    /// `p^(−1/2) − 1`.
    InverseSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EValue {
    pub value: f64,
    pub note: Option<String>,
}

pub fn evalue_calibrate(p: f64, method: Calibrator) -> Result<EValue> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p-value {p} is outside [0, 1]")));
    }
    if let Calibrator::PowerK(k) = method {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::InvalidParameter(format!("power calibrator needs 0 < k < 1, got {k}")));
        }
    }
    if p == 0.0 {
        return Ok(EValue { value: f64::INFINITY, note: Some("p = 0 calibrates to an infinite e-value".into()) });
    }
    let value = match method {
        Calibrator::PowerK(k) => k * p.powf(k - 1.0),
        Calibrator::InverseSqrt => p.powf(-0.5) - 1.0,
    };
    Ok(EValue { value, note: None })
}
