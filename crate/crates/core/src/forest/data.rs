use serde::{Deserialize, Serialize};

use super::ForestError;
use crate::dataset::{Feature, SurvivalDataset, VariableKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestVariable {
    pub name: String,
    /// Declared levels for factors; `None` for continuous variables.
    pub levels: Option<Vec<String>>,
}

/// Row-major numeric view of a dataset: continuous values as-is, factors as
/// level codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestData {
    pub variables: Vec<ForestVariable>,
    values: Vec<f64>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    /// Distinct event times, ascending.
    pub grid: Vec<f64>,
    /// Case indices ordered by (time, index).
    pub time_order: Vec<usize>,
}

impl ForestData {
    pub fn from_dataset(dataset: &SurvivalDataset, variables: &[String]) -> Result<Self, ForestError> {
        let n = dataset.len();
        let p = variables.len();
        let mut values = vec![0.0; n * p];
        let mut vars = Vec::with_capacity(p);
        for (j, name) in variables.iter().enumerate() {
            let spec = dataset.spec(name)?;
            match dataset.feature(name)? {
                Feature::Continuous(col) => {
                    for (i, v) in col.into_iter().enumerate() {
                        values[i * p + j] = v;
                    }
                }
                Feature::Factor { codes, n_levels } => {
                    if n_levels > 64 {
                        return Err(ForestError::TooManyLevels(name.clone()));
                    }
                    for (i, c) in codes.into_iter().enumerate() {
                        values[i * p + j] = c as f64;
                    }
                }
            }
            vars.push(ForestVariable {
                name: name.clone(),
                levels: match &spec.kind {
                    VariableKind::Factor { levels } => Some(levels.clone()),
                    VariableKind::Continuous => None,
                },
            });
        }
        Ok(Self::from_parts(vars, values, dataset.times(), dataset.events()))
    }

    pub fn from_parts(variables: Vec<ForestVariable>, values: Vec<f64>, times: Vec<f64>, events: Vec<bool>) -> Self {
        assert_eq!(times.len(), events.len());
        assert_eq!(values.len(), times.len() * variables.len());
        let mut grid: Vec<f64> = times.iter().zip(&events).filter(|(_, e)| **e).map(|(t, _)| *t).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut time_order: Vec<usize> = (0..times.len()).collect();
        time_order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        ForestData { variables, values, times, events, grid, time_order }
    }

    pub fn n_cases(&self) -> usize {
        self.times.len()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    #[inline]
    pub fn value(&self, case: usize, variable: usize) -> f64 {
        self.values[case * self.variables.len() + variable]
    }

    pub fn row(&self, case: usize) -> &[f64] {
        let p = self.variables.len();
        &self.values[case * p..(case + 1) * p]
    }

    pub fn is_factor(&self, variable: usize) -> bool {
        self.variables[variable].levels.is_some()
    }

    pub fn grid_index(&self, t: f64) -> usize {
        self.grid.partition_point(|&g| g < t)
    }
}
