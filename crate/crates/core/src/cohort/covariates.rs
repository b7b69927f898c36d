use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    site_variable, CohortError, Demographics, Ethnicity, Exclusion, ExclusionReason, Gender,
    MaritalStatus, PatientCase, Race, SmokingFrequency, SmokingStatus,
};
use crate::dataset::{SurvivalDataset, Value, VariableKind, VariableSpec};
use crate::parser::{ColonSite, VisitSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColonSide {
    Left,
    Right,
    Other,
}

impl ColonSide {
    pub const LEVELS: &'static [&'static str] = &["Left", "Right", "Other"];

    pub fn as_str(self) -> &'static str {
        match self {
            ColonSide::Left => "Left",
            ColonSide::Right => "Right",
            ColonSide::Other => "Other",
        }
    }
}

/// Which sites count toward each side. Sites in neither list (transverse by
/// default) only count toward the located total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SideMap {
    pub left: Vec<ColonSite>,
    pub right: Vec<ColonSite>,
}

impl Default for SideMap {
    fn default() -> Self {
        use ColonSite::*;
        SideMap {
            left: vec![Descending, Sigmoid, Rectum, Anus, Splenic],
            right: vec![IleumCecum, Ileocecal, Ascending, Hepatic],
        }
    }
}

/// Left or right when that side holds a strict majority of located polyps,
/// otherwise other.
pub fn designate_side(summary: &VisitSummary, sides: &SideMap) -> Result<ColonSide, CohortError> {
    if summary.polyp_count == 0 {
        return Err(CohortError::NoPolyps);
    }
    let tally = |sites: &[ColonSite]| sites.iter().map(|s| summary.site_count(*s)).sum::<u32>();
    let located = summary.located_count();
    let (left, right) = (tally(&sides.left), tally(&sides.right));
    Ok(if 2 * left > located {
        ColonSide::Left
    } else if 2 * right > located {
        ColonSide::Right
    } else {
        ColonSide::Other
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    MedianBinary,
    Tertile,
}

impl Scheme {
    pub fn levels(self) -> &'static [&'static str] {
        match self {
            Scheme::MedianBinary => &["Low", "High"],
            Scheme::Tertile => &["T1", "T2", "T3"],
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Scheme::MedianBinary => "median",
            Scheme::Tertile => "tertile",
        }
    }
}

/// Linear-interpolation sample quantile (R type 7) of unsorted values.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bins values by the median (`High` strictly above) or by the 1/3 and 2/3
/// quantiles (values on a cut point go to the lower bin).
pub fn discretize(values: &[f64], scheme: Scheme) -> Result<Vec<&'static str>, CohortError> {
    if values.is_empty() {
        return Err(CohortError::EmptyColumn);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(CohortError::NonFinite(*bad));
    }
    let levels = scheme.levels();
    let cuts: Vec<f64> = match scheme {
        Scheme::MedianBinary => vec![quantile(values, 0.5)],
        Scheme::Tertile => vec![quantile(values, 1.0 / 3.0), quantile(values, 2.0 / 3.0)],
    };
    Ok(values
        .iter()
        .map(|v| levels[cuts.iter().filter(|c| v > c).count()])
        .collect())
}

/// Continuous variables that also get median and tertile variants, with the
/// stem used for the variant names.
pub const DISCRETIZED_VARIABLES: &[(&str, &str)] = &[
    ("age", "age"),
    ("height", "height"),
    ("bmi", "bmi"),
    ("weight", "weight"),
    ("polyp_count", "polyp_count"),
    ("polyp_size_max", "polyp_size"),
];

/// Covariates known at the baseline visit. Missing demographics are left out.
pub fn baseline_covariates(
    demographics: &Demographics,
    baseline: &VisitSummary,
    sides: &SideMap,
) -> BTreeMap<String, Value> {
    let mut cov = BTreeMap::new();
    let mut real = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            cov.insert(name.to_string(), Value::Real(v));
        }
    };
    real("age", demographics.age_years);
    real("bmi", demographics.bmi);
    real("height", demographics.height_cm);
    real("weight", demographics.weight_kg);
    real("polyp_count", Some(baseline.polyp_count as f64));
    real("polyp_size_mean", baseline.mean_size_mm);
    real("polyp_size_max", baseline.max_size_mm);
    for site in ColonSite::ALL {
        real(&site_variable(site), Some(baseline.site_count(site) as f64));
    }
    let mut level = |name: &str, v: Option<&'static str>| {
        if let Some(v) = v {
            cov.insert(name.to_string(), Value::level(v));
        }
    };
    level("gender", demographics.gender.map(Gender::as_str));
    level("smoking", demographics.smoking_status.map(SmokingStatus::as_str));
    level("smoking_frequency", demographics.smoking_frequency.map(SmokingFrequency::as_str));
    level("race", demographics.race.map(Race::as_str));
    level("ethnicity", demographics.ethnicity.map(Ethnicity::as_str));
    level("marital_status", demographics.marital_status.map(MaritalStatus::as_str));
    level("colon_side", designate_side(baseline, sides).ok().map(ColonSide::as_str));
    cov
}

/// Base (undiscretized) schema of the baseline covariates.
pub fn default_schema() -> Vec<VariableSpec> {
    let mut schema = vec![
        VariableSpec::continuous("age"),
        VariableSpec::factor("gender", Gender::LEVELS.iter().copied()),
        VariableSpec::continuous("bmi"),
        VariableSpec::continuous("height"),
        VariableSpec::continuous("weight"),
        VariableSpec::factor("smoking", SmokingStatus::LEVELS.iter().copied()),
        VariableSpec::factor("smoking_frequency", SmokingFrequency::LEVELS.iter().copied()),
        VariableSpec::factor("race", Race::LEVELS.iter().copied()),
        VariableSpec::factor("ethnicity", Ethnicity::LEVELS.iter().copied()),
        VariableSpec::factor("marital_status", MaritalStatus::LEVELS.iter().copied()),
        VariableSpec::continuous("polyp_count"),
        VariableSpec::continuous("polyp_size_mean"),
        VariableSpec::continuous("polyp_size_max"),
        VariableSpec::factor("colon_side", ColonSide::LEVELS.iter().copied()),
    ];
    schema.extend(ColonSite::ALL.into_iter().map(|s| VariableSpec::continuous(site_variable(s))));
    schema
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub dataset: SurvivalDataset,
    /// Cases dropped for missing data.
    pub excluded: Vec<Exclusion>,
}

/// Keeps complete cases and appends median/tertile variants of the
/// continuous variables listed in [`DISCRETIZED_VARIABLES`].
pub fn assemble_dataset(cases: Vec<PatientCase>, base: &[VariableSpec]) -> Result<Assembled, CohortError> {
    let mut kept = Vec::with_capacity(cases.len());
    let mut excluded = Vec::new();
    for mut case in cases {
        let complete = base.iter().all(|spec| case.covariates.contains_key(&spec.name));
        if complete {
            case.covariates.retain(|k, _| base.iter().any(|s| s.name == *k));
            kept.push(case);
        } else {
            excluded.push(Exclusion { patient_id: case.patient_id, reason: ExclusionReason::MissingData });
        }
    }
    if kept.is_empty() {
        return Err(CohortError::NoCompleteCases);
    }
    let mut dataset = SurvivalDataset::new(kept, base.to_vec());
    dataset.dropped = excluded.len();
    for (source, stem) in DISCRETIZED_VARIABLES {
        let Some(spec) = base.iter().find(|s| s.name == *source) else { continue };
        if spec.kind != VariableKind::Continuous {
            continue;
        }
        let column = dataset.real_column(source)?;
        for scheme in [Scheme::MedianBinary, Scheme::Tertile] {
            let name = format!("{stem}_{}", scheme.suffix());
            let bins = discretize(&column, scheme)?;
            for (case, bin) in dataset.cases.iter_mut().zip(bins) {
                case.covariates.insert(name.clone(), Value::level(bin));
            }
            dataset.schema.push(VariableSpec::factor(name, scheme.levels().iter().copied()));
        }
    }
    Ok(Assembled { dataset, excluded })
}
