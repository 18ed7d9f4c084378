//! The squared-correlation test: Σ T² > 1 over distinct full-weight settings.
//!
//! Every pure product state reaches exactly 1, so sums are compared against
//! `1 + DETECTION_MARGIN` to keep rounding from manufacturing detections.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

pub const DETECTION_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub sum: f64,
    pub entangled: bool,
}

/// Whether a squared sum certifies entanglement.
pub fn exceeds(sum: f64) -> bool {
    sum > 1.0 + DETECTION_MARGIN
}

/// Σ T² over the given settings. Repeated or non-full-weight settings are rejected.
pub fn criterion_sum(entries: &[(PauliString, f64)]) -> Result<CriterionResult> {
    let mut seen = HashSet::new();
    let mut sum = 0.0;
    for (s, v) in entries {
        if !s.is_full_weight() {
            return Err(Error::NotFullWeight(s.to_string()));
        }
        if !seen.insert(*s) {
            return Err(Error::DuplicateSetting(s.to_string()));
        }
        if !v.is_finite() {
            return Err(Error::ValueOutOfRange(*v));
        }
        sum += v * v;
    }
    Ok(CriterionResult { sum, entangled: exceeds(sum) })
}

/// Σ v² for already-distinct values, with the same verdict rule.
pub fn squared_sum(values: &[f64]) -> CriterionResult {
    let sum = values.iter().map(|v| v * v).sum();
    CriterionResult { sum, entangled: exceeds(sum) }
}

/// Linear error propagation for Σ v²: sqrt(Σ (2 v σ_v)²).
pub fn propagated_error(values: &[(f64, f64)]) -> f64 {
    values.iter().map(|(v, s)| (2.0 * v * s).powi(2)).sum::<f64>().sqrt()
}
