//! Random survival forest: bootstrap survival trees with log-rank splitting,
//! Nelson-Aalen leaves, OOB concordance error, permutation importance and
//! time-dependent ROC.

mod chf;
mod data;
mod metrics;
mod tree;
mod vimp;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, SurvivalDataset, Value};

pub use chf::{nelson_aalen, StepFunction};
pub use data::{ForestData, ForestVariable};
pub use metrics::{concordance_index, time_dependent_auc, RocCurve, RocPoint};
pub use tree::{best_logrank_split, Leaf, Node, Split, SplitRule, SurvivalTree};
pub use vimp::variable_importance;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("no events in the training data")]
    NoEvents,
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("factor '{0}' has more than 64 levels")]
    TooManyLevels(String),
    #[error("case {0} is in-bag for every tree")]
    NoOobTrees(usize),
    #[error("no usable pairs for concordance")]
    NoUsablePairs,
    #[error("all cases fall in one class at the horizon")]
    DegenerateLabels,
    #[error("horizon {horizon} is outside the observed range [{min}, {max}]")]
    HorizonOutOfRange { horizon: f64, min: f64, max: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unsupported forest format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Variables tried per node; `None` means ceil(sqrt(p)).
    pub mtry: Option<usize>,
    pub min_node_events: usize,
    pub min_node_size: usize,
    pub n_split_candidates: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 1000,
            mtry: None,
            min_node_events: 3,
            min_node_size: 15,
            n_split_candidates: 10,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
    }

    fn validate(&self, p: usize) -> Result<usize, ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if p == 0 {
            return Err(ForestError::InvalidConfig("no predictor variables".into()));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(ForestError::InvalidConfig(format!("mtry {mtry} outside 1..={p}")));
        }
        if self.n_split_candidates == 0 {
            return Err(ForestError::InvalidConfig("n_split_candidates must be at least 1".into()));
        }
        if self.min_node_size == 0 {
            return Err(ForestError::InvalidConfig("min_node_size must be at least 1".into()));
        }
        Ok(mtry)
    }
}

/// Which trees contribute to a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    AllTrees,
    /// Only trees for which this training case was out of bag.
    OobOnly(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestPrediction {
    /// Ensemble cumulative hazard on the event-time grid.
    pub chf: StepFunction,
    pub mortality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub config: ForestConfig,
    pub mtry: usize,
    pub variables: Vec<ForestVariable>,
    pub grid: Vec<f64>,
    pub trees: Vec<SurvivalTree>,
}

/// Tree `index` of a forest seeded with `seed` draws from its own stream.
pub(crate) fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn grow_forest(dataset: &SurvivalDataset, variables: &[String], config: &ForestConfig) -> Result<Forest, ForestError> {
    let data = ForestData::from_dataset(dataset, variables)?;
    grow_forest_on(&data, config)
}

pub fn grow_forest_on(data: &ForestData, config: &ForestConfig) -> Result<Forest, ForestError> {
    let mtry = config.validate(data.n_variables())?;
    if data.grid.is_empty() {
        return Err(ForestError::NoEvents);
    }
    let trees: Vec<SurvivalTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| tree::grow_tree(data, config, mtry, &mut tree_rng(config.seed, t)))
        .collect();
    let forest = Forest {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        mtry,
        variables: data.variables.clone(),
        grid: data.grid.clone(),
        trees,
    };
    let uncovered = forest.uncovered_cases();
    if !uncovered.is_empty() {
        log::warn!(
            "{} training cases are in-bag for all {} trees and have no OOB prediction",
            uncovered.len(),
            config.n_trees
        );
    }
    Ok(forest)
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Training cases that are out of bag for no tree.
    pub fn uncovered_cases(&self) -> Vec<usize> {
        let n = self.trees.first().map_or(0, |t| t.in_bag.len());
        (0..n).filter(|&i| self.trees.iter().all(|t| !t.is_oob(i))).collect()
    }

    fn selected(&self, mode: Mode) -> Result<Vec<&SurvivalTree>, ForestError> {
        let trees: Vec<&SurvivalTree> = match mode {
            Mode::AllTrees => self.trees.iter().collect(),
            Mode::OobOnly(case) => self.trees.iter().filter(|t| t.in_bag.get(case) == Some(&0)).collect(),
        };
        match (mode, trees.is_empty()) {
            (Mode::OobOnly(case), true) => Err(ForestError::NoOobTrees(case)),
            _ => Ok(trees),
        }
    }

    fn check_row(&self, row: &[f64]) -> Result<(), ForestError> {
        if row.len() != self.variables.len() {
            return Err(ForestError::LengthMismatch { expected: self.variables.len(), got: row.len() });
        }
        Ok(())
    }

    /// Mean of the selected trees' leaf CHFs for a coded row.
    pub fn predict(&self, row: &[f64], mode: Mode) -> Result<ForestPrediction, ForestError> {
        self.check_row(row)?;
        let trees = self.selected(mode)?;
        let mut sum = vec![0.0; self.grid.len()];
        for tree in &trees {
            for (s, h) in sum.iter_mut().zip(tree.leaf(row).chf_on_grid(self.grid.len())) {
                *s += h;
            }
        }
        let k = trees.len() as f64;
        let values: Vec<f64> = sum.into_iter().map(|s| s / k).collect();
        let mortality = values.iter().sum();
        Ok(ForestPrediction { chf: StepFunction { times: self.grid.clone(), values }, mortality })
    }

    /// Mortality only: the mean of the selected leaves' summed CHFs.
    pub fn mortality(&self, row: &[f64], mode: Mode) -> Result<f64, ForestError> {
        self.check_row(row)?;
        let trees = self.selected(mode)?;
        Ok(trees.iter().map(|t| t.leaf(row).mortality).sum::<f64>() / trees.len() as f64)
    }

    /// Codes a covariate map into the forest's variable order.
    pub fn encode_row(&self, covariates: &BTreeMap<String, Value>) -> Result<Vec<f64>, ForestError> {
        self.variables
            .iter()
            .map(|v| {
                let value = covariates
                    .get(&v.name)
                    .ok_or_else(|| DatasetError::UnknownVariable(v.name.clone()))?;
                match (&v.levels, value) {
                    (None, Value::Real(x)) => Ok(*x),
                    (Some(levels), Value::Level(l)) => levels
                        .iter()
                        .position(|x| x == l)
                        .map(|c| c as f64)
                        .ok_or_else(|| DatasetError::UnknownLevel { name: v.name.clone(), level: l.clone() }.into()),
                    (None, _) => Err(DatasetError::WrongKind { name: v.name.clone(), expected: "continuous" }.into()),
                    (Some(_), _) => Err(DatasetError::WrongKind { name: v.name.clone(), expected: "factor" }.into()),
                }
            })
            .collect()
    }

    /// OOB mortality of every training case.
    pub fn oob_mortality(&self, data: &ForestData) -> Result<Vec<f64>, ForestError> {
        (0..data.n_cases()).map(|i| self.mortality(data.row(i), Mode::OobOnly(i))).collect()
    }

    /// 1 - Harrell's C of the OOB mortalities.
    pub fn oob_error(&self, data: &ForestData) -> Result<f64, ForestError> {
        let m = self.oob_mortality(data)?;
        Ok(1.0 - concordance_index(&data.times, &data.events, &m)?)
    }

    pub fn to_json(&self) -> Result<String, ForestError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let forest: Forest = serde_json::from_str(s)?;
        if forest.format_version != FORMAT_VERSION {
            return Err(ForestError::UnsupportedVersion(forest.format_version));
        }
        Ok(forest)
    }
}

/// 1 - Harrell's C; a shorthand used by the pipeline and tests.
pub fn oob_concordance_error(forest: &Forest, data: &ForestData) -> Result<f64, ForestError> {
    forest.oob_error(data)
}
