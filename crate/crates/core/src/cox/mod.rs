//! Cox proportional-hazards regression fitted by Newton-Raphson on the
//! partial likelihood, with Efron or Breslow handling of tied event times.

mod likelihood;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{code_row, DatasetError, SurvivalDataset, Value, VariableSpec};
use crate::survival::chi_square_sf;

pub use likelihood::{CoxProblem, Derivatives};

#[derive(Debug, Error, PartialEq)]
pub enum CoxError {
    #[error("no events in the data")]
    NoEvents,
    #[error("information matrix is singular (collinear covariates?)")]
    SingularHessian,
    #[error("coefficient for '{column}' diverged to {beta} (monotone likelihood)")]
    MonotoneLikelihood { column: String, beta: f64 },
    #[error("coefficient vector is not finite")]
    NonFiniteBeta,
    #[error("expected {expected} coefficients, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row has no value for covariate '{0}'")]
    MissingCovariate(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoxConfig {
    pub ties: Ties,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Coefficients beyond this magnitude signal separation.
    pub max_abs_beta: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        CoxConfig { ties: Ties::Efron, tol: 1e-9, max_iter: 25, max_abs_beta: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRatio {
    pub column: String,
    pub beta: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub rr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    /// Variables as requested, before reference coding.
    pub covariates: Vec<VariableSpec>,
    /// Coded column names, aligned with `coefficients`.
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub risk_ratios: Vec<RiskRatio>,
    pub global_chi_square: f64,
    pub global_df: usize,
    pub global_p_value: f64,
    pub log_likelihood_fit: f64,
    pub log_likelihood_null: f64,
    /// Log-likelihood after each accepted iterate, starting at beta = 0.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub ties: Ties,
    pub n_cases: usize,
    pub n_events: usize,
}

impl CoxFit {
    pub fn coefficient(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == column).map(|i| self.coefficients[i])
    }

    pub fn risk_ratio(&self, column: &str) -> Option<&RiskRatio> {
        self.risk_ratios.iter().find(|r| r.column == column)
    }

    pub fn coefficient_map(&self) -> BTreeMap<String, f64> {
        self.columns.iter().cloned().zip(self.coefficients.iter().copied()).collect()
    }
}

fn problem(dataset: &SurvivalDataset, covariates: &[String]) -> Result<(CoxProblem, Vec<String>), CoxError> {
    let design = dataset.design(covariates)?;
    Ok((CoxProblem::new(dataset.times(), dataset.events(), design.rows), design.columns))
}

/// Log partial likelihood at `beta` over the reference-coded `covariates`.
pub fn partial_log_likelihood(
    beta: &[f64],
    dataset: &SurvivalDataset,
    covariates: &[String],
    ties: Ties,
) -> Result<f64, CoxError> {
    let (problem, columns) = problem(dataset, covariates)?;
    if beta.len() != columns.len() {
        return Err(CoxError::DimensionMismatch { expected: columns.len(), got: beta.len() });
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(CoxError::NonFiniteBeta);
    }
    Ok(problem.log_likelihood(beta, ties))
}

/// Fits the model by Newton-Raphson from beta = 0 with step halving.
pub fn fit_cox(dataset: &SurvivalDataset, covariates: &[String], config: &CoxConfig) -> Result<CoxFit, CoxError> {
    let (problem, columns) = problem(dataset, covariates)?;
    let specs = covariates
        .iter()
        .map(|c| dataset.spec(c).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    let n_events = problem.n_events();
    if n_events == 0 {
        return Err(CoxError::NoEvents);
    }
    let p = columns.len();
    let mut beta = DVector::<f64>::zeros(p);
    let mut current = problem.derivatives(beta.as_slice(), config.ties);
    let ll_null = current.log_likelihood;
    let mut trace = vec![ll_null];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let step = newton_step(&current)?;
        let mut scale = 1.0;
        let mut candidate_beta = &beta + &step;
        let mut candidate = problem.derivatives(candidate_beta.as_slice(), config.ties);
        // halve until the likelihood does not decrease
        let mut halvings = 0;
        while !(candidate.log_likelihood >= current.log_likelihood) && halvings < 40 {
            scale *= 0.5;
            candidate_beta = &beta + &step * scale;
            candidate = problem.derivatives(candidate_beta.as_slice(), config.ties);
            halvings += 1;
        }
        if !(candidate.log_likelihood >= current.log_likelihood) {
            // no ascent direction left at machine precision
            converged = true;
            break;
        }
        let improvement = candidate.log_likelihood - current.log_likelihood;
        beta = candidate_beta;
        current = candidate;
        trace.push(current.log_likelihood);
        if let Some((i, b)) = beta.iter().enumerate().find(|(_, b)| b.abs() > config.max_abs_beta) {
            return Err(CoxError::MonotoneLikelihood { column: columns[i].clone(), beta: *b });
        }
        if improvement < config.tol {
            converged = true;
            break;
        }
    }

    let information = -DMatrix::from_row_slice(p, p, &current.hessian);
    let covariance = information.clone().cholesky().ok_or(CoxError::SingularHessian)?.inverse();
    let risk_ratios = columns
        .iter()
        .enumerate()
        .map(|(i, column)| {
            let b = beta[i];
            let se = covariance[(i, i)].sqrt();
            let z = b / se;
            RiskRatio {
                column: column.clone(),
                beta: b,
                std_error: se,
                z,
                p_value: chi_square_sf(z * z, 1),
                rr: b.exp(),
                ci_low: (b - 1.96 * se).exp(),
                ci_high: (b + 1.96 * se).exp(),
            }
        })
        .collect();
    let global = (2.0 * (current.log_likelihood - ll_null)).max(0.0);
    Ok(CoxFit {
        covariates: specs,
        columns,
        coefficients: beta.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| covariance[(i, j)]).collect()).collect(),
        risk_ratios,
        global_chi_square: global,
        global_df: p,
        global_p_value: chi_square_sf(global, p),
        log_likelihood_fit: current.log_likelihood,
        log_likelihood_null: ll_null,
        log_likelihood_trace: trace,
        iterations_used: iterations,
        converged,
        ties: config.ties,
        n_cases: dataset.len(),
        n_events,
    })
}

/// Solves (-H) step = gradient.
fn newton_step(d: &Derivatives) -> Result<DVector<f64>, CoxError> {
    let p = d.gradient.len();
    let information = -DMatrix::from_row_slice(p, p, &d.hessian);
    let chol = information.cholesky().ok_or(CoxError::SingularHessian)?;
    Ok(chol.solve(&DVector::from_column_slice(&d.gradient)))
}

/// exp(betaᵀx) for one covariate row, coded as in training.
pub fn predict_relative_risk(fit: &CoxFit, row: &BTreeMap<String, Value>) -> Result<f64, CoxError> {
    let specs: Vec<&VariableSpec> = fit.covariates.iter().collect();
    let x = code_row(&specs, row, "").map_err(|e| match e {
        DatasetError::MissingValue { name, .. } => CoxError::MissingCovariate(name),
        other => CoxError::Dataset(other),
    })?;
    let eta: f64 = x.iter().zip(&fit.coefficients).map(|(x, b)| x * b).sum();
    Ok(eta.exp())
}

#[cfg(test)]
mod tests;
