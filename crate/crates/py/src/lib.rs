//! Python bindings. Results that are plain records come back as dicts and
//! lists; datasets and forests are wrapped as classes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use polyp_recur::cohort::{assemble_dataset, default_schema, filter_eligible, pair_baseline_outcome, CohortConfig};
use polyp_recur::cox::{CoxConfig, Ties};
use polyp_recur::forest::{variable_importance, ForestData};
use polyp_recur::io::{build_histories, ExtractionRow};
use polyp_recur::pipeline::{self, PipelineConfig};
use polyp_recur::survival::apply_common_censor;
use polyp_recur::synth::{generate_cohort, SynthConfig};
use polyp_recur::{aggregate_visit, parse_report as parse, ColonoscopyReport, ParserConfig, SurvivalDataset, Value};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn report(text: &str, patient_id: &str, visit_date: &str) -> PyResult<ColonoscopyReport> {
    Ok(ColonoscopyReport {
        patient_id: patient_id.to_string(),
        visit_date: visit_date.parse::<NaiveDate>().map_err(err)?,
        text: text.to_string(),
    })
}

/// Per-visit summary of one report: count, sizes and per-site counts.
#[pyfunction]
#[pyo3(signature = (text, patient_id = "p", visit_date = "2000-01-01"))]
fn parse_report(py: Python<'_>, text: &str, patient_id: &str, visit_date: &str) -> PyResult<Py<PyAny>> {
    let r = report(text, patient_id, visit_date)?;
    to_py(py, &aggregate_visit(&parse(&r, &ParserConfig::default())))
}

/// The individual polyp mentions found in a report.
#[pyfunction]
fn extract_mentions(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let r = report(text, "p", "2000-01-01")?;
    to_py(py, &parse(&r, &ParserConfig::default()).mentions)
}

#[pyfunction]
fn km_estimate(py: Python<'_>, times: Vec<f64>, events: Vec<bool>) -> PyResult<Py<PyAny>> {
    to_py(py, &polyp_recur::km_estimate(&times, &events).map_err(err)?)
}

/// Takes a list of `(times, events)` pairs, one per group.
#[pyfunction]
fn log_rank(py: Python<'_>, groups: Vec<(Vec<f64>, Vec<bool>)>) -> PyResult<Py<PyAny>> {
    let refs: Vec<(&[f64], &[bool])> = groups.iter().map(|(t, e)| (t.as_slice(), e.as_slice())).collect();
    to_py(py, &polyp_recur::log_rank(&refs).map_err(err)?)
}

/// Synthetic reports with their ground truth, as lists of dicts.
#[pyfunction]
#[pyo3(signature = (n_patients, seed = 0))]
fn generate_reports(py: Python<'_>, n_patients: usize, seed: u64) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let cohort = generate_cohort(&SynthConfig { n_patients, seed, ..SynthConfig::default() }).map_err(err)?;
    Ok((to_py(py, &cohort.reports)?, to_py(py, &cohort.truth)?))
}

#[pyclass(name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: SurvivalDataset,
}

#[pymethods]
impl PyDataset {
    /// Reads the cohort written by a pipeline run and applies the common
    /// censoring cut-off.
    #[staticmethod]
    #[pyo3(signature = (out_dir, censor_quantile = 0.95))]
    fn load(out_dir: PathBuf, censor_quantile: f64) -> PyResult<Self> {
        Ok(PyDataset { inner: pipeline::load_dataset(&out_dir, censor_quantile).map_err(err)? })
    }

    /// Synthetic cohort taken through report parsing and cohort assembly.
    /// `planted` maps coded columns such as `"gender=Male"` to log hazard ratios.
    #[staticmethod]
    #[pyo3(signature = (n_patients, seed = 0, planted = None, censor_quantile = 0.95))]
    fn synthetic(
        n_patients: usize,
        seed: u64,
        planted: Option<BTreeMap<String, f64>>,
        censor_quantile: f64,
    ) -> PyResult<Self> {
        let cfg = SynthConfig {
            n_patients,
            seed,
            planted_log_hazard_ratios: planted.unwrap_or_default(),
            ..SynthConfig::default()
        };
        let cohort = generate_cohort(&cfg).map_err(err)?;
        let parser = ParserConfig::default();
        let rows: Vec<ExtractionRow> = cohort
            .reports
            .iter()
            .map(|r| ExtractionRow {
                patient_id: r.patient_id.clone(),
                visit_date: r.visit_date,
                summary: aggregate_visit(&parse(r, &parser)),
            })
            .collect();
        let demographics = cohort
            .histories
            .iter()
            .map(|h| (h.patient_id.clone(), (h.demographics.clone(), h.colitis_or_crohns)))
            .collect();
        let histories = build_histories(&rows, &demographics).map_err(err)?;
        let cc = CohortConfig::default();
        let (eligible, _) = filter_eligible(histories, &cc);
        let cases = eligible.iter().map(|h| pair_baseline_outcome(h, &cc)).collect::<Result<_, _>>().map_err(err)?;
        let dataset = assemble_dataset(cases, &default_schema()).map_err(err)?.dataset;
        Ok(PyDataset { inner: apply_common_censor(&dataset, censor_quantile).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.schema.iter().map(|v| v.name.clone()).collect()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.cases.iter().map(|c| c.time_days).collect()
    }

    #[getter]
    fn events(&self) -> Vec<bool> {
        self.inner.cases.iter().map(|c| c.event).collect()
    }

    /// Cox fit on the named variables; factors are reference coded.
    #[pyo3(signature = (covariates, ties = "efron"))]
    fn fit_cox(&self, py: Python<'_>, covariates: Vec<String>, ties: &str) -> PyResult<Py<PyAny>> {
        let ties = match ties {
            "efron" => Ties::Efron,
            "breslow" => Ties::Breslow,
            other => return Err(PyValueError::new_err(format!("unknown ties method '{other}'"))),
        };
        let fit = polyp_recur::fit_cox(&self.inner, &covariates, &CoxConfig { ties, ..CoxConfig::default() })
            .map_err(err)?;
        to_py(py, &fit)
    }

    #[pyo3(signature = (variables = None, n_trees = 500, seed = 0, mtry = None))]
    fn grow_forest(
        &self,
        py: Python<'_>,
        variables: Option<Vec<String>>,
        n_trees: usize,
        seed: u64,
        mtry: Option<usize>,
    ) -> PyResult<PyForest> {
        let variables = variables.unwrap_or_else(|| self.variables());
        let config = polyp_recur::ForestConfig { n_trees, seed, mtry, ..Default::default() };
        let data = ForestData::from_dataset(&self.inner, &variables).map_err(err)?;
        let forest = py
            .detach(|| polyp_recur::forest::grow_forest_on(&data, &config))
            .map_err(err)?;
        Ok(PyForest { inner: forest, data: Some(data) })
    }
}

#[pyclass(name = "Forest")]
struct PyForest {
    inner: polyp_recur::Forest,
    /// Training data; absent for forests restored from JSON.
    data: Option<ForestData>,
}

impl PyForest {
    fn training(&self) -> PyResult<&ForestData> {
        self.data
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("out-of-bag results need the forest's training data"))
    }
}

#[pymethods]
impl PyForest {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyForest { inner: polyp_recur::Forest::from_json(text).map_err(err)?, data: None })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.n_trees()
    }

    fn oob_error(&self) -> PyResult<f64> {
        self.inner.oob_error(self.training()?).map_err(err)
    }

    fn oob_mortality(&self) -> PyResult<Vec<f64>> {
        self.inner.oob_mortality(self.training()?).map_err(err)
    }

    /// Permutation importance per variable, most important first.
    #[pyo3(signature = (seed = 0))]
    fn importance(&self, py: Python<'_>, seed: u64) -> PyResult<Vec<(String, f64)>> {
        let data = self.training()?;
        let mut vimp = py.detach(|| variable_importance(&self.inner, data, seed)).map_err(err)?;
        vimp.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(vimp)
    }

    /// Ensemble mortality for one patient given as `{variable: value}`.
    fn mortality(&self, covariates: BTreeMap<String, Bound<'_, PyAny>>) -> PyResult<f64> {
        let mut row = BTreeMap::new();
        for (k, v) in covariates {
            let value = match v.extract::<f64>() {
                Ok(x) => Value::Real(x),
                Err(_) => Value::Level(v.extract::<String>()?),
            };
            row.insert(k, value);
        }
        let encoded = self.inner.encode_row(&row).map_err(err)?;
        self.inner.mortality(&encoded, polyp_recur::forest::Mode::AllTrees).map_err(err)
    }
}

/// Runs the pipeline from a TOML config file and returns the stages run and
/// reused with the manifest.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, threads = None, seed = None))]
fn run_pipeline(
    py: Python<'_>,
    config: PathBuf,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = PipelineConfig::from_file(&config).map_err(err)?;
    if let Some(out) = out_dir {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.set_seed(seed);
    }
    let summary = py.detach(|| pipeline::run(&cfg, threads)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        out_dir: &'a std::path::Path,
        ran: Vec<&'static str>,
        resumed: Vec<&'static str>,
        manifest: &'a pipeline::Manifest,
    }
    to_py(
        py,
        &Summary {
            out_dir: &summary.out_dir,
            ran: summary.ran.iter().map(|s| s.as_str()).collect(),
            resumed: summary.resumed.iter().map(|s| s.as_str()).collect(),
            manifest: &summary.manifest,
        },
    )
}

#[pymodule]
fn polyp_recur_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_report, m)?)?;
    m.add_function(wrap_pyfunction!(extract_mentions, m)?)?;
    m.add_function(wrap_pyfunction!(km_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(log_rank, m)?)?;
    m.add_function(wrap_pyfunction!(generate_reports, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyForest>()?;
    Ok(())
}
