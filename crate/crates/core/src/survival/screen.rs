use serde::{Deserialize, Serialize};

use super::{log_rank, SurvivalError};
use crate::dataset::SurvivalDataset;

/// Truncates follow-up at `quantile` × the longest observed time: later cases
/// become censored at the cutoff.
pub fn apply_common_censor(dataset: &SurvivalDataset, quantile: f64) -> Result<SurvivalDataset, SurvivalError> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(SurvivalError::InvalidQuantile(quantile));
    }
    let max_time = dataset.cases.iter().map(|c| c.time_days).fold(0.0, f64::max);
    let cutoff = quantile * max_time;
    let mut out = dataset.clone();
    for case in &mut out.cases {
        if case.time_days > cutoff {
            case.time_days = cutoff;
            case.event = false;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub variable: String,
    pub chi_square: Option<f64>,
    pub p_value: Option<f64>,
    pub degrees_of_freedom: Option<usize>,
    pub admitted: bool,
    /// Why the variable could not be tested, when it was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub threshold: f64,
    pub entries: Vec<ScreenEntry>,
}

impl ScreeningReport {
    pub fn admitted(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.admitted).map(|e| e.variable.clone()).collect()
    }
}

/// Log-rank test of each candidate factor across its populated levels;
/// admits those with p strictly below `threshold`. Entries follow schema order.
pub fn screen_variables(
    dataset: &SurvivalDataset,
    candidates: &[String],
    threshold: f64,
) -> Result<ScreeningReport, SurvivalError> {
    for name in candidates {
        if !dataset.spec(name)?.is_factor() {
            return Err(SurvivalError::NotAFactor(name.clone()));
        }
    }
    let times = dataset.times();
    let events = dataset.events();
    let mut entries = Vec::new();
    for spec in dataset.schema.iter().filter(|s| candidates.contains(&s.name)) {
        let codes = dataset.level_codes(&spec.name)?;
        let n_levels = spec.levels().map_or(0, <[String]>::len);
        let mut groups: Vec<(Vec<f64>, Vec<bool>)> = vec![(Vec::new(), Vec::new()); n_levels];
        for ((&code, &t), &e) in codes.iter().zip(&times).zip(&events) {
            groups[code].0.push(t);
            groups[code].1.push(e);
        }
        let populated: Vec<(&[f64], &[bool])> = groups
            .iter()
            .filter(|g| !g.0.is_empty())
            .map(|g| (g.0.as_slice(), g.1.as_slice()))
            .collect();
        let mut entry = ScreenEntry {
            variable: spec.name.clone(),
            chi_square: None,
            p_value: None,
            degrees_of_freedom: None,
            admitted: false,
            skipped: None,
        };
        match log_rank(&populated) {
            Ok(r) => {
                entry.chi_square = Some(r.chi_square);
                entry.p_value = Some(r.p_value);
                entry.degrees_of_freedom = Some(r.degrees_of_freedom);
                entry.admitted = r.p_value < threshold;
            }
            Err(SurvivalError::TooFewGroups(_)) => {
                log::warn!("screening skipped '{}': only one populated level", spec.name);
                entry.skipped = Some("one populated level".to_string());
            }
            Err(e) => return Err(e),
        }
        entries.push(entry);
    }
    Ok(ScreeningReport { threshold, entries })
}
