//! Cohort construction: eligibility rules, baseline/outcome pairing and
//! covariate derivation.

mod covariates;
mod demographics;
mod eligibility;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, Value};
use crate::parser::{ColonSite, VisitSummary};

pub use covariates::{
    assemble_dataset, baseline_covariates, default_schema, designate_side, discretize, quantile,
    Assembled, ColonSide, Scheme, SideMap, DISCRETIZED_VARIABLES,
};
pub use demographics::{Demographics, Ethnicity, Gender, MaritalStatus, Race, SmokingFrequency, SmokingStatus};
pub use eligibility::{clean_visits, filter_eligible, pair_baseline_outcome};

#[derive(Debug, Error, PartialEq)]
pub enum CohortError {
    #[error("visits of patient '{0}' are not strictly increasing by date")]
    UnorderedVisits(String),
    #[error("patient '{patient_id}' is not eligible: {reason}")]
    Ineligible { patient_id: String, reason: ExclusionReason },
    #[error("side designation needs at least one polyp")]
    NoPolyps,
    #[error("cannot discretize an empty column")]
    EmptyColumn,
    #[error("cannot discretize non-finite value {0}")]
    NonFinite(f64),
    #[error("no complete cases remain after dropping missing data")]
    NoCompleteCases,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Why a patient or case left the cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    NoPolyp,
    ColitisOrCrohns,
    TooFewVisits,
    InsufficientSeparation,
    MissingData,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::NoPolyp => "no_polyp",
            ExclusionReason::ColitisOrCrohns => "colitis_or_crohns",
            ExclusionReason::TooFewVisits => "too_few_visits",
            ExclusionReason::InsufficientSeparation => "insufficient_separation",
            ExclusionReason::MissingData => "missing_data",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExclusionReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ExclusionReason::*;
        [NoPolyp, ColitisOrCrohns, TooFewVisits, InsufficientSeparation, MissingData]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown exclusion reason '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub patient_id: String,
    pub reason: ExclusionReason,
}

/// Thresholds of the inclusion rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    /// Minimum days between baseline and outcome visit.
    pub min_separation_days: i64,
    /// A visit closer than this to the previous retained visit is dropped.
    pub faulty_gap_days: i64,
    pub sides: SideMap,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig { min_separation_days: 183, faulty_gap_days: 14, sides: SideMap::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub date: NaiveDate,
    pub summary: VisitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientHistory {
    pub patient_id: String,
    pub demographics: Demographics,
    visits: Vec<Visit>,
    pub colitis_or_crohns: bool,
}

impl PatientHistory {
    /// Fails unless visit dates are strictly increasing.
    pub fn new(
        patient_id: impl Into<String>,
        demographics: Demographics,
        visits: Vec<Visit>,
        colitis_or_crohns: bool,
    ) -> Result<Self, CohortError> {
        let patient_id = patient_id.into();
        if visits.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(CohortError::UnorderedVisits(patient_id));
        }
        Ok(PatientHistory { patient_id, demographics, visits, colitis_or_crohns })
    }

    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }

    /// Replaces the visit list; used by tests that mutate follow-up visits.
    pub fn with_visits(mut self, visits: Vec<Visit>) -> Result<Self, CohortError> {
        if visits.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(CohortError::UnorderedVisits(self.patient_id));
        }
        self.visits = visits;
        Ok(self)
    }
}

/// One baseline/outcome pair with baseline covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientCase {
    pub patient_id: String,
    pub time_days: f64,
    /// True when recurrence was observed at the outcome visit.
    pub event: bool,
    pub covariates: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<ExclusionReason>,
}

impl PatientCase {
    pub fn new(
        patient_id: impl Into<String>,
        time_days: f64,
        event: bool,
        covariates: BTreeMap<String, Value>,
    ) -> Self {
        PatientCase { patient_id: patient_id.into(), time_days, event, covariates, exclusion: None }
    }
}

pub(crate) fn site_variable(site: ColonSite) -> String {
    format!("site_{}", site.key())
}
