use serde::{Deserialize, Serialize};

use super::ForestError;

/// Harrell's C. A pair is usable when the shorter time is an event and the
/// times differ; the case failing first should carry the higher score. Score
/// ties count one half.
pub fn concordance_index(times: &[f64], events: &[bool], scores: &[f64]) -> Result<f64, ForestError> {
    let n = times.len();
    if events.len() != n || scores.len() != n {
        return Err(ForestError::LengthMismatch { expected: n, got: events.len().min(scores.len()) });
    }
    let mut usable = 0u64;
    let mut concordant = 0.0;
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if times[j] > times[i] {
                usable += 1;
                if scores[i] > scores[j] {
                    concordant += 1.0;
                } else if scores[i] == scores[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if usable == 0 {
        return Err(ForestError::NoUsablePairs);
    }
    Ok(concordant / usable as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this are called positive.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub horizon: f64,
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub n_cases: usize,
    pub n_controls: usize,
    pub n_excluded: usize,
}

/// Cumulative/dynamic ROC at `horizon`: cases had the event by the horizon,
/// controls are still under observation after it, and subjects censored
/// before it are dropped.
pub fn time_dependent_auc(scores: &[f64], times: &[f64], events: &[bool], horizon: f64) -> Result<RocCurve, ForestError> {
    let n = times.len();
    if events.len() != n || scores.len() != n {
        return Err(ForestError::LengthMismatch { expected: n, got: events.len().min(scores.len()) });
    }
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || !(horizon >= min && horizon <= max) {
        return Err(ForestError::HorizonOutOfRange { horizon, min, max });
    }
    let mut labelled: Vec<(f64, bool)> = Vec::with_capacity(n);
    for i in 0..n {
        if events[i] && times[i] <= horizon {
            labelled.push((scores[i], true));
        } else if times[i] >= horizon {
            labelled.push((scores[i], false));
        }
    }
    let n_pos = labelled.iter().filter(|l| l.1).count();
    let n_neg = labelled.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ForestError::DegenerateLabels);
    }
    labelled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < labelled.len() {
        let s = labelled[i].0;
        while i < labelled.len() && labelled[i].0 == s {
            if labelled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().unwrap();
        let p = RocPoint { fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64, threshold: s };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { horizon, points, auc, n_cases: n_pos, n_controls: n_neg, n_excluded: n - labelled.len() })
}
