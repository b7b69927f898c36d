//! Analysis-ready survival data: cases plus a typed covariate schema.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::PatientCase;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("variable '{0}' is not in the schema")]
    UnknownVariable(String),
    #[error("variable '{name}' is not {expected}")]
    WrongKind { name: String, expected: &'static str },
    #[error("case '{patient_id}' has no value for '{name}'")]
    MissingValue { patient_id: String, name: String },
    #[error("level '{level}' is not declared for factor '{name}'")]
    UnknownLevel { name: String, level: String },
}

/// A single covariate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Level(String),
}

impl Value {
    pub fn level(s: impl Into<String>) -> Self {
        Value::Level(s.into())
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v),
            Value::Level(_) => None,
        }
    }

    pub fn as_level(&self) -> Option<&str> {
        match self {
            Value::Level(s) => Some(s),
            Value::Real(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => write!(f, "{v}"),
            Value::Level(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    Continuous,
    /// The first level is the reference level.
    Factor { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous }
    }

    pub fn factor<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Factor { levels: levels.into_iter().map(Into::into).collect() },
        }
    }

    pub fn is_factor(&self) -> bool {
        matches!(self.kind, VariableKind::Factor { .. })
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            VariableKind::Factor { levels } => Some(levels),
            VariableKind::Continuous => None,
        }
    }

    pub fn reference_level(&self) -> Option<&str> {
        self.levels().and_then(|l| l.first()).map(String::as_str)
    }
}

/// Reference-coded numeric design for a set of covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Coded column names: the variable name for continuous variables,
    /// `name=level` for each non-reference factor level.
    pub columns: Vec<String>,
    /// Row-major values, one row per case.
    pub rows: Vec<Vec<f64>>,
}

/// Per-variable column used by the forest: raw values or level codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Continuous(Vec<f64>),
    Factor { codes: Vec<u32>, n_levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub cases: Vec<PatientCase>,
    pub schema: Vec<VariableSpec>,
    /// Cases removed for missing values during assembly.
    pub dropped: usize,
}

impl SurvivalDataset {
    pub fn new(cases: Vec<PatientCase>, schema: Vec<VariableSpec>) -> Self {
        SurvivalDataset { cases, schema, dropped: 0 }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.cases.iter().map(|c| c.time_days).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.cases.iter().map(|c| c.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.cases.iter().filter(|c| c.event).count()
    }

    pub fn spec(&self, name: &str) -> Result<&VariableSpec, DatasetError> {
        self.schema
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| DatasetError::UnknownVariable(name.to_string()))
    }

    fn value<'a>(&self, case: &'a PatientCase, name: &str) -> Result<&'a Value, DatasetError> {
        case.covariates.get(name).ok_or_else(|| DatasetError::MissingValue {
            patient_id: case.patient_id.clone(),
            name: name.to_string(),
        })
    }

    pub fn real_column(&self, name: &str) -> Result<Vec<f64>, DatasetError> {
        let spec = self.spec(name)?;
        if spec.is_factor() {
            return Err(DatasetError::WrongKind { name: name.to_string(), expected: "continuous" });
        }
        self.cases
            .iter()
            .map(|c| {
                self.value(c, name)?.as_real().ok_or_else(|| DatasetError::WrongKind {
                    name: name.to_string(),
                    expected: "continuous",
                })
            })
            .collect()
    }

    /// Level index (into the declared levels) of a factor for every case.
    pub fn level_codes(&self, name: &str) -> Result<Vec<usize>, DatasetError> {
        let spec = self.spec(name)?;
        let levels = spec
            .levels()
            .ok_or_else(|| DatasetError::WrongKind { name: name.to_string(), expected: "a factor" })?;
        self.cases
            .iter()
            .map(|c| level_index(name, levels, self.value(c, name)?))
            .collect()
    }

    /// Reference-coded design over `covariates`, in the given order.
    pub fn design(&self, covariates: &[String]) -> Result<Design, DatasetError> {
        let specs = covariates
            .iter()
            .map(|n| self.spec(n))
            .collect::<Result<Vec<_>, _>>()?;
        let columns = coded_columns(&specs);
        let rows = self
            .cases
            .iter()
            .map(|c| code_row(&specs, &c.covariates, &c.patient_id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Design { columns, rows })
    }

    pub fn feature(&self, name: &str) -> Result<Feature, DatasetError> {
        let spec = self.spec(name)?;
        match &spec.kind {
            VariableKind::Continuous => Ok(Feature::Continuous(self.real_column(name)?)),
            VariableKind::Factor { levels } => Ok(Feature::Factor {
                codes: self.level_codes(name)?.into_iter().map(|c| c as u32).collect(),
                n_levels: levels.len(),
            }),
        }
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.schema.iter().map(|s| s.name.clone()).collect()
    }
}

fn level_index(name: &str, levels: &[String], value: &Value) -> Result<usize, DatasetError> {
    let level = value
        .as_level()
        .ok_or_else(|| DatasetError::WrongKind { name: name.to_string(), expected: "a factor" })?;
    levels
        .iter()
        .position(|l| l == level)
        .ok_or_else(|| DatasetError::UnknownLevel { name: name.to_string(), level: level.to_string() })
}

pub(crate) fn coded_columns(specs: &[&VariableSpec]) -> Vec<String> {
    let mut columns = Vec::new();
    for spec in specs {
        match &spec.kind {
            VariableKind::Continuous => columns.push(spec.name.clone()),
            VariableKind::Factor { levels } => {
                columns.extend(levels.iter().skip(1).map(|l| format!("{}={}", spec.name, l)))
            }
        }
    }
    columns
}

/// Reference-codes one covariate map against `specs`.
pub(crate) fn code_row(
    specs: &[&VariableSpec],
    values: &BTreeMap<String, Value>,
    patient_id: &str,
) -> Result<Vec<f64>, DatasetError> {
    let mut row = Vec::new();
    for spec in specs {
        let value = values.get(&spec.name).ok_or_else(|| DatasetError::MissingValue {
            patient_id: patient_id.to_string(),
            name: spec.name.clone(),
        })?;
        match &spec.kind {
            VariableKind::Continuous => row.push(value.as_real().ok_or_else(|| DatasetError::WrongKind {
                name: spec.name.clone(),
                expected: "continuous",
            })?),
            VariableKind::Factor { levels } => {
                let idx = level_index(&spec.name, levels, value)?;
                row.extend((1..levels.len()).map(|k| if k == idx { 1.0 } else { 0.0 }));
            }
        }
    }
    Ok(row)
}
