//! End-to-end run: parse -> cohort -> screen -> cox -> forest.
//!
//! Every stage reads the files of the stages before it, so a run can stop
//! after any stage and resume later. `manifest.json` records which stages
//! finished under which config hash, with the SHA-256 of every artifact.

mod config;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{AucConfig, InputPaths, OutputConfig, PipelineConfig, ScreeningConfig, StageToggles};

use crate::cohort::{assemble_dataset, default_schema, filter_eligible, pair_baseline_outcome};
use crate::cox::{fit_cox, CoxError};
use crate::dataset::{SurvivalDataset, VariableSpec};
use crate::forest::{self, concordance_index, time_dependent_auc, variable_importance, ForestData};
use crate::io::{self as fio, fmt_f64, ExtractionRow};
use crate::parser::{aggregate_visit, parse_report};
use crate::survival::{apply_common_censor, km_estimate, screen_variables, KmCurve, ScreeningReport};
use crate::synth::generate_cohort;
use config::hex;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Cohort,
    Screen,
    Cox,
    Forest,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Parse, Stage::Cohort, Stage::Screen, Stage::Cox, Stage::Forest];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Cohort => "cohort",
            Stage::Screen => "screen",
            Stage::Cox => "cox",
            Stage::Forest => "forest",
        }
    }

    /// Stages whose files this one reads.
    pub fn needs(self) -> &'static [Stage] {
        match self {
            Stage::Parse => &[],
            Stage::Cohort => &[Stage::Parse],
            Stage::Screen => &[Stage::Cohort],
            Stage::Cox => &[Stage::Cohort, Stage::Screen],
            Stage::Forest => &[Stage::Cohort],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage '{s}' (expected parse, cohort, screen, cox or forest)"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("output directory: {0}")]
    Output(String),
}

impl PipelineError {
    /// Name used in `error.json`.
    pub fn stage_name(&self) -> &str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Stage { stage, .. } => stage.as_str(),
            PipelineError::Output(_) => "output",
        }
    }

    pub fn to_json(&self) -> String {
        let body = json!({ "stage": self.stage_name(), "error": self.to_string() });
        serde_json::to_string_pretty(&body).expect("json") + "\n"
    }
}

type StageResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub crate_version: String,
    pub forest_format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 of each external input file.
    pub inputs: BTreeMap<String, String>,
    pub completed: Vec<Stage>,
    /// Per finished stage: artifact path (relative to the output dir) -> SHA-256.
    pub artifacts: BTreeMap<Stage, BTreeMap<String, String>>,
}

impl Manifest {
    fn fresh(config: &PipelineConfig, inputs: BTreeMap<String, String>) -> Self {
        Manifest {
            manifest_version: MANIFEST_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            forest_format_version: forest::FORMAT_VERSION,
            config_hash: config.hash(),
            seed: config.seed,
            inputs,
            completed: Vec::new(),
            artifacts: BTreeMap::new(),
        }
    }

    fn compatible(&self, other: &Manifest) -> bool {
        self.manifest_version == other.manifest_version
            && self.crate_version == other.crate_version
            && self.forest_format_version == other.forest_format_version
            && self.config_hash == other.config_hash
            && self.inputs == other.inputs
    }

    /// Finished, with every artifact present and unchanged.
    fn is_done(&self, stage: Stage, out: &Path) -> bool {
        self.completed.contains(&stage)
            && self.artifacts.get(&stage).is_some_and(|files| {
                files.iter().all(|(rel, hash)| file_hash(&out.join(rel)).is_ok_and(|h| h == *hash))
            })
    }

    /// Forgets `stage` and everything after it.
    fn invalidate_from(&mut self, stage: Stage) {
        self.completed.retain(|s| *s < stage);
        self.artifacts.retain(|s, _| *s < stage);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub ran: Vec<Stage>,
    pub resumed: Vec<Stage>,
    pub manifest: Manifest,
}

fn file_hash(path: &Path) -> std::io::Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";

/// Runs the enabled stages, writing `error.json` into the output directory
/// on failure. `threads` caps the worker pool; `None` uses all cores.
pub fn run(config: &PipelineConfig, threads: Option<usize>) -> Result<RunSummary, PipelineError> {
    let result = run_inner(config, threads);
    if let Err(e) = &result {
        // best effort: the directory may be the problem
        let _ = fs::create_dir_all(&config.out_dir).and_then(|_| fs::write(config.out_dir.join(ERROR_FILE), e.to_json()));
    }
    result
}

fn run_inner(config: &PipelineConfig, threads: Option<usize>) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let out = config.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| PipelineError::Output(format!("{}: {e}", out.display())))?;
    let _ = fs::remove_file(out.join(ERROR_FILE));

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_stages(config, &out))
}

fn run_stages(config: &PipelineConfig, out: &Path) -> Result<RunSummary, PipelineError> {
    let mut inputs = BTreeMap::new();
    if let Some(paths) = &config.inputs {
        for (name, p) in [("reports", &paths.reports), ("demographics", &paths.demographics)] {
            let h = file_hash(p).map_err(|e| PipelineError::Stage {
                stage: if name == "reports" { Stage::Parse } else { Stage::Cohort },
                message: format!("{}: {e}", p.display()),
            })?;
            inputs.insert(name.to_string(), h);
        }
    }
    let fresh = Manifest::fresh(config, inputs);
    let mut manifest = match read_manifest(out) {
        Some(m) if m.compatible(&fresh) => m,
        _ => fresh,
    };

    let mut ran = Vec::new();
    let mut resumed = Vec::new();
    for stage in Stage::ALL {
        if !config.stages.get(stage) {
            continue;
        }
        if manifest.is_done(stage, out) {
            log::info!("{stage}: outputs up to date, skipping");
            resumed.push(stage);
            continue;
        }
        let fail = |message: String| PipelineError::Stage { stage, message };
        for dep in stage.needs() {
            if !manifest.is_done(*dep, out) {
                return Err(fail(format!("needs the outputs of stage '{dep}'; enable it or run it first")));
            }
        }
        manifest.invalidate_from(stage);
        write_manifest(out, &manifest).map_err(|e| fail(e.to_string()))?;
        log::info!("{stage}: running");
        let files = run_stage(stage, config, out).map_err(|e| fail(e.to_string()))?;
        let mut hashes = BTreeMap::new();
        for rel in files {
            let h = file_hash(&out.join(&rel)).map_err(|e| fail(format!("{rel}: {e}")))?;
            hashes.insert(rel, h);
        }
        manifest.completed.push(stage);
        manifest.artifacts.insert(stage, hashes);
        write_manifest(out, &manifest).map_err(|e| fail(e.to_string()))?;
        ran.push(stage);
    }
    Ok(RunSummary { out_dir: out.to_path_buf(), ran, resumed, manifest })
}

fn read_manifest(out: &Path) -> Option<Manifest> {
    let text = fs::read_to_string(out.join(MANIFEST_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_manifest(out: &Path, manifest: &Manifest) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    fs::write(out.join(MANIFEST_FILE), text)
}

/// Collects the files a stage writes.
struct Writer<'a> {
    out: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn create(&mut self, rel: &str) -> StageResult<BufWriter<File>> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.written.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> StageResult<()> {
        let mut w = self.create(rel)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn text(&mut self, rel: &str, text: &str) -> StageResult<()> {
        let mut w = self.create(rel)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

pub const EXTRACTION_CSV: &str = "extraction.csv";
pub const SYNTH_REPORTS: &str = "inputs/reports.jsonl";
pub const SYNTH_DEMOGRAPHICS: &str = "inputs/demographics.csv";
pub const SYNTH_TRUTH: &str = "inputs/ground_truth.csv";
pub const DATASET_CSV: &str = "dataset.csv";
pub const SCHEMA_JSON: &str = "schema.json";
pub const EXCLUSIONS_CSV: &str = "exclusions.csv";
pub const COHORT_JSON: &str = "cohort.json";
pub const SCREENING_JSON: &str = "screening.json";
pub const COX_FOREST_PLOT_CSV: &str = "cox_forest_plot.csv";
pub const COX_FIT_JSON: &str = "cox_fit.json";
pub const RSF_FIT_JSON: &str = "rsf_fit.json";
pub const ROC_CSV: &str = "roc.csv";
pub const AUC_JSON: &str = "auc.json";
pub const VIMP_CSV: &str = "vimp.csv";
pub const OOB_CSV: &str = "oob_predictions.csv";
pub const FOREST_JSON: &str = "forest.json";

pub const KM_HEADER: [&str; 5] = ["time", "survival", "n_risk", "n_event", "group"];
pub const COX_HEADER: [&str; 5] = ["covariate", "rr", "ci_low", "ci_high", "p"];
pub const ROC_HEADER: [&str; 3] = ["fpr", "tpr", "threshold"];
pub const VIMP_HEADER: [&str; 3] = ["variable", "vimp", "log10_abs_vimp"];
pub const OOB_HEADER: [&str; 4] = ["patient_id", "time_days", "event", "oob_mortality"];

fn run_stage(stage: Stage, config: &PipelineConfig, out: &Path) -> StageResult<Vec<String>> {
    let mut w = Writer { out, written: Vec::new() };
    match stage {
        Stage::Parse => parse_stage(config, &mut w)?,
        Stage::Cohort => cohort_stage(config, &mut w)?,
        Stage::Screen => screen_stage(config, &mut w)?,
        Stage::Cox => cox_stage(config, &mut w)?,
        Stage::Forest => forest_stage(config, &mut w)?,
    }
    Ok(w.written)
}

fn parse_stage(config: &PipelineConfig, w: &mut Writer) -> StageResult<()> {
    let reports = match (&config.synth, &config.inputs) {
        (Some(synth), _) => {
            let cohort = generate_cohort(synth)?;
            let mut f = w.create(SYNTH_REPORTS)?;
            fio::write_reports_jsonl(&mut f, &cohort.reports)?;
            f.flush()?;
            fio::write_demographics_csv(w.create(SYNTH_DEMOGRAPHICS)?, &cohort.histories)?;
            fio::write_ground_truth_csv(w.create(SYNTH_TRUTH)?, &cohort.truth)?;
            cohort.reports
        }
        (None, Some(inputs)) => fio::read_reports_jsonl(BufReader::new(File::open(&inputs.reports)?))?,
        (None, None) => unreachable!("validated config"),
    };
    let rows: Vec<ExtractionRow> = reports
        .par_iter()
        .map(|r| ExtractionRow {
            patient_id: r.patient_id.clone(),
            visit_date: r.visit_date,
            summary: aggregate_visit(&parse_report(r, &config.parser)),
        })
        .collect();
    log::info!("parsed {} reports", rows.len());
    fio::write_extraction_csv(w.create(EXTRACTION_CSV)?, &rows)?;
    Ok(())
}

fn cohort_stage(config: &PipelineConfig, w: &mut Writer) -> StageResult<()> {
    let rows = fio::read_extraction_csv(File::open(w.out.join(EXTRACTION_CSV))?)?;
    let demo_path = match &config.inputs {
        Some(inputs) => inputs.demographics.clone(),
        None => w.out.join(SYNTH_DEMOGRAPHICS),
    };
    let demographics = fio::read_demographics_csv(File::open(&demo_path)?)?;
    let histories = fio::build_histories(&rows, &demographics)?;
    let n_patients = histories.len();
    let (eligible, mut excluded) = filter_eligible(histories, &config.cohort);
    let n_eligible = eligible.len();
    let cases = eligible
        .iter()
        .map(|h| pair_baseline_outcome(h, &config.cohort))
        .collect::<Result<Vec<_>, _>>()?;
    let assembled = assemble_dataset(cases, &default_schema())?;
    excluded.extend(assembled.excluded);
    excluded.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let dataset = assembled.dataset;

    fio::write_dataset_csv(w.create(DATASET_CSV)?, &dataset)?;
    w.json(SCHEMA_JSON, &dataset.schema)?;
    fio::write_exclusions_csv(w.create(EXCLUSIONS_CSV)?, &excluded)?;
    let mut by_reason: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &excluded {
        *by_reason.entry(e.reason.as_str()).or_default() += 1;
    }
    w.json(
        COHORT_JSON,
        &json!({
            "n_patients": n_patients,
            "n_eligible": n_eligible,
            "n_cases": dataset.len(),
            "n_events": dataset.n_events(),
            "exclusions": by_reason,
        }),
    )?;
    log::info!("cohort: {} of {n_patients} patients are analysable cases", dataset.len());
    Ok(())
}

/// The cohort dataset with the common censoring cutoff applied.
pub fn load_dataset(out: &Path, censor_quantile: f64) -> StageResult<SurvivalDataset> {
    let schema: Vec<VariableSpec> = serde_json::from_reader(BufReader::new(File::open(out.join(SCHEMA_JSON))?))?;
    let dataset = fio::read_dataset_csv(File::open(out.join(DATASET_CSV))?, schema)?;
    Ok(apply_common_censor(&dataset, censor_quantile)?)
}

fn km_rows(curve: &KmCurve, group: &str) -> Vec<Vec<String>> {
    curve
        .points
        .iter()
        .map(|p| {
            vec![fmt_f64(p.time), fmt_f64(p.survival), p.n_at_risk.to_string(), p.n_events.to_string(), group.to_string()]
        })
        .collect()
}

fn km_svg(title: &str, curves: &[(String, KmCurve)]) -> String {
    let series: Vec<svg::Series> = curves
        .iter()
        .map(|(label, c)| svg::Series { label: label.clone(), points: c.points.iter().map(|p| (p.time, p.survival)).collect() })
        .collect();
    svg::line_plot(title, "days", "recurrence-free", &series, true)
}

fn screen_stage(config: &PipelineConfig, w: &mut Writer) -> StageResult<()> {
    let dataset = load_dataset(w.out, config.screening.censor_quantile)?;
    let factors: Vec<String> = dataset.schema.iter().filter(|s| s.is_factor()).map(|s| s.name.clone()).collect();
    let report = screen_variables(&dataset, &factors, config.screening.threshold)?;
    w.json(SCREENING_JSON, &report)?;

    let times = dataset.times();
    let events = dataset.events();
    let overall = vec![("all".to_string(), km_estimate(&times, &events)?)];
    write_km(w, "overall", &overall, config.output.render_svg)?;
    for spec in dataset.schema.iter().filter(|s| s.is_factor()) {
        let levels = spec.levels().unwrap_or_default();
        let codes = dataset.level_codes(&spec.name)?;
        let mut curves = Vec::new();
        for (code, level) in levels.iter().enumerate() {
            let (t, e): (Vec<f64>, Vec<bool>) = codes
                .iter()
                .zip(times.iter().zip(&events))
                .filter(|(c, _)| **c == code)
                .map(|(_, (t, e))| (*t, *e))
                .unzip();
            if !t.is_empty() {
                curves.push((level.clone(), km_estimate(&t, &e)?));
            }
        }
        write_km(w, &spec.name, &curves, config.output.render_svg)?;
    }
    log::info!("screening admitted {:?}", report.admitted());
    Ok(())
}

fn write_km(w: &mut Writer, name: &str, curves: &[(String, KmCurve)], render_svg: bool) -> StageResult<()> {
    let rows = curves.iter().flat_map(|(g, c)| km_rows(c, g));
    fio::write_table(w.create(&format!("km/{name}.csv"))?, &KM_HEADER, rows)?;
    if render_svg {
        w.text(&format!("km/{name}.svg"), &km_svg(name, curves))?;
    }
    Ok(())
}

fn cox_stage(config: &PipelineConfig, w: &mut Writer) -> StageResult<()> {
    let dataset = load_dataset(w.out, config.screening.censor_quantile)?;
    let screening: ScreeningReport = serde_json::from_reader(BufReader::new(File::open(w.out.join(SCREENING_JSON))?))?;
    let covariates = screening.admitted();
    if covariates.is_empty() {
        log::warn!("no variable passed screening; the Cox model is skipped");
        fio::write_table(w.create(COX_FOREST_PLOT_CSV)?, &COX_HEADER, std::iter::empty())?;
        w.json(COX_FIT_JSON, &json!({ "covariates": [], "skipped": "no variable passed screening" }))?;
        return Ok(());
    }
    let (fit, dropped) = select_cox_covariates(&dataset, &screening, &config.cox)?;
    let rows = fit.risk_ratios.iter().map(|r| {
        vec![r.column.clone(), fmt_f64(r.rr), fmt_f64(r.ci_low), fmt_f64(r.ci_high), fmt_f64(r.p_value)]
    });
    fio::write_table(w.create(COX_FOREST_PLOT_CSV)?, &COX_HEADER, rows)?;
    w.json(COX_FIT_JSON, &json!({ "fit": fit, "dropped": dropped }))?;
    Ok(())
}

/// Adds the admitted factors in order of increasing p-value, leaving out any
/// that makes the fit singular or divergent. The kept set is refitted in
/// schema order. Returns the fit and the dropped variables with reasons.
fn select_cox_covariates(
    dataset: &SurvivalDataset,
    screening: &ScreeningReport,
    config: &crate::cox::CoxConfig,
) -> StageResult<(crate::cox::CoxFit, BTreeMap<String, String>)> {
    let mut admitted: Vec<(usize, f64, String)> = screening
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.admitted)
        .map(|(i, e)| (i, e.p_value.unwrap_or(1.0), e.variable.clone()))
        .collect();
    admitted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, String)> = Vec::new();
    let mut dropped = BTreeMap::new();
    for (i, _, name) in admitted {
        let mut trial: Vec<String> = kept.iter().map(|k| k.1.clone()).collect();
        trial.push(name.clone());
        match fit_cox(dataset, &trial, config) {
            Ok(_) => kept.push((i, name)),
            Err(e @ (CoxError::SingularHessian | CoxError::MonotoneLikelihood { .. })) => {
                log::warn!("cox: leaving out '{name}': {e}");
                dropped.insert(name, e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    if kept.is_empty() {
        return Err("every admitted variable made the Cox fit singular or divergent".into());
    }
    kept.sort();
    let names: Vec<String> = kept.into_iter().map(|k| k.1).collect();
    Ok((fit_cox(dataset, &names, config)?, dropped))
}

fn forest_stage(config: &PipelineConfig, w: &mut Writer) -> StageResult<()> {
    let dataset = load_dataset(w.out, config.screening.censor_quantile)?;
    let data = ForestData::from_dataset(&dataset, &dataset.variable_names())?;
    let forest = forest::grow_forest_on(&data, &config.forest)?;
    let uncovered = forest.uncovered_cases();
    if !uncovered.is_empty() {
        return Err(format!(
            "{} cases are in-bag for every tree; grow more trees to get OOB estimates",
            uncovered.len()
        )
        .into());
    }
    let mortality = forest.oob_mortality(&data)?;
    let oob_error = 1.0 - concordance_index(&data.times, &data.events, &mortality)?;
    let roc = time_dependent_auc(&mortality, &data.times, &data.events, config.auc.horizon_days)?;
    let mut vimp = variable_importance(&forest, &data, config.seed)?;
    vimp.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    w.json(
        RSF_FIT_JSON,
        &json!({
            "n_cases": data.n_cases(),
            "n_events": data.events.iter().filter(|e| **e).count(),
            "n_trees": forest.n_trees(),
            "mtry": forest.mtry,
            "variables": forest.variable_names(),
            "oob_error": oob_error,
        }),
    )?;
    let roc_rows = roc.points.iter().map(|p| vec![fmt_f64(p.fpr), fmt_f64(p.tpr), fmt_f64(p.threshold)]);
    fio::write_table(w.create(ROC_CSV)?, &ROC_HEADER, roc_rows)?;
    w.json(
        AUC_JSON,
        &json!({
            "horizon_days": roc.horizon,
            "auc": roc.auc,
            "n_cases": roc.n_cases,
            "n_controls": roc.n_controls,
            "n_excluded": roc.n_excluded,
        }),
    )?;
    let vimp_rows = vimp.iter().map(|(name, v)| {
        let log = if *v == 0.0 { String::new() } else { fmt_f64(v.abs().log10()) };
        vec![name.clone(), fmt_f64(*v), log]
    });
    fio::write_table(w.create(VIMP_CSV)?, &VIMP_HEADER, vimp_rows)?;
    let oob_rows = dataset.cases.iter().zip(&mortality).map(|(c, m)| {
        vec![c.patient_id.clone(), fmt_f64(c.time_days), (c.event as u8).to_string(), fmt_f64(*m)]
    });
    fio::write_table(w.create(OOB_CSV)?, &OOB_HEADER, oob_rows)?;
    if config.output.save_forest {
        w.text(FOREST_JSON, &forest.to_json()?)?;
    }
    if config.output.render_svg {
        let series = svg::Series {
            label: format!("AUC {:.3}", roc.auc),
            points: roc.points.iter().map(|p| (p.fpr, p.tpr)).collect(),
        };
        let title = format!("ROC at {} days", roc.horizon);
        w.text("roc.svg", &svg::line_plot(&title, "false positive rate", "true positive rate", &[series], false))?;
    }
    log::info!("forest: OOB error {oob_error:.4}, AUC {:.4}", roc.auc);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SynthConfig;

    fn small(out: &Path) -> PipelineConfig {
        let synth = SynthConfig { n_patients: 150, seed: 3, ..SynthConfig::default() };
        let mut c = PipelineConfig::synthetic(synth, out);
        c.forest.n_trees = 40;
        c.forest.min_node_size = 5;
        c
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("model".parse::<Stage>().is_err());
    }

    #[test]
    fn parse_only_writes_extraction() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.stages = StageToggles::only(Stage::Parse);
        let s = run(&c, Some(2)).unwrap();
        assert_eq!(s.ran, vec![Stage::Parse]);
        assert!(dir.path().join(EXTRACTION_CSV).exists());
        assert!(!dir.path().join(DATASET_CSV).exists());
        assert!(!dir.path().join(SCREENING_JSON).exists());
    }

    #[test]
    fn resume_skips_finished_stages() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.stages = StageToggles { forest: false, ..StageToggles::default() };
        let first = run(&c, None).unwrap();
        assert_eq!(first.ran.len(), 4);
        c.stages = StageToggles::default();
        let second = run(&c, None).unwrap();
        assert_eq!(second.resumed, vec![Stage::Parse, Stage::Cohort, Stage::Screen, Stage::Cox]);
        assert_eq!(second.ran, vec![Stage::Forest]);
        for f in [RSF_FIT_JSON, ROC_CSV, AUC_JSON, VIMP_CSV, COX_FOREST_PLOT_CSV, "km/overall.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }

        // a touched artifact forces that stage and the later ones to rerun
        fs::write(dir.path().join(SCREENING_JSON), "{}").unwrap();
        let third = run(&c, None).unwrap();
        assert_eq!(third.ran, vec![Stage::Screen, Stage::Cox, Stage::Forest]);
    }

    #[test]
    fn missing_dependency_names_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.stages = StageToggles::only(Stage::Cox);
        let err = run(&c, None).unwrap_err();
        assert_eq!(err.stage_name(), "cox");
        let body: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(ERROR_FILE)).unwrap()).unwrap();
        assert_eq!(body["stage"], "cox");
    }

    #[test]
    fn bad_input_path_fails_in_parse() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.synth = None;
        c.inputs = Some(InputPaths { reports: dir.path().join("nope.jsonl"), demographics: dir.path().join("d.csv") });
        let err = run(&c, None).unwrap_err();
        assert_eq!(err.stage_name(), "parse");
    }
}
