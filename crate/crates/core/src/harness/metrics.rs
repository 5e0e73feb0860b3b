use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

/// Percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
}

/// Harmonic mean of precision and recall; inputs and output share units.
pub fn f_measure(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn detection_metrics(c: &DetectionCounts) -> Result<DetectionMetrics, HarnessError> {
    let (tp, fp, fnn) = (c.true_positives as f64, c.false_positives as f64, c.false_negatives as f64);
    if c.true_positives + c.false_negatives == 0 || c.true_positives + c.false_positives == 0 {
        return Err(HarnessError::Metrics(format!("undefined ratio for {c:?}")));
    }
    let recall = 100.0 * tp / (tp + fnn);
    let precision = 100.0 * tp / (tp + fp);
    Ok(DetectionMetrics { recall, precision, f_measure: f_measure(recall, precision) })
}
