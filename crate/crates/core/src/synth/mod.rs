//! Seeded synthetic cohorts: demographics, visit schedules, polyp findings and
//! report text, with recurrence times drawn from a proportional-hazards model
//! whose coefficients are set by the caller.

mod report;

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{
    baseline_covariates, default_schema, Demographics, Ethnicity, Gender, MaritalStatus, PatientHistory, Race,
    SideMap, SmokingFrequency, SmokingStatus, Visit,
};
use crate::dataset::{coded_columns, Value, VariableKind};
use crate::parser::{ColonSite, ColonoscopyReport, VisitSummary};

pub use report::{generate_report_text, render_report, ReportStyle};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("summary cannot be rendered exactly: {0}")]
    UnrenderableSummary(String),
}

/// Mixture weights over report styles; must sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleWeights {
    pub plain: f64,
    pub ranged: f64,
    pub number_words: f64,
}

impl Default for StyleWeights {
    fn default() -> Self {
        StyleWeights { plain: 0.5, ranged: 0.25, number_words: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub baseline_hazard_per_day: f64,
    /// Log hazard ratios keyed by coded column: `polyp_count`, `bmi`,
    /// `smoking=Used`, `colon_side=Right`, ...
    pub planted_log_hazard_ratios: BTreeMap<String, f64>,
    pub censor_horizon_days: u32,
    /// Chance that a patient has one demographic field blanked.
    pub missingness_rate: f64,
    pub seed: u64,
    pub report_style: StyleWeights,
    pub visit_interval_days: (u32, u32),
    /// Chance of a repeat exam a few days after a follow-up visit.
    pub faulty_visit_rate: f64,
    pub colitis_rate: f64,
    /// Success probability of the geometric part of the polyp count.
    pub polyp_count_p: f64,
    /// Median and log-sd of polyp size in mm.
    pub size_median_mm: f64,
    pub size_log_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 1000,
            baseline_hazard_per_day: 1.0 / 3000.0,
            planted_log_hazard_ratios: BTreeMap::new(),
            censor_horizon_days: 3650,
            missingness_rate: 0.0,
            seed: 0,
            report_style: StyleWeights::default(),
            visit_interval_days: (365, 1095),
            faulty_visit_rate: 0.0,
            colitis_rate: 0.0,
            polyp_count_p: 0.5,
            size_median_mm: 5.0,
            size_log_sd: 0.5,
        }
    }
}

/// Columns that may carry a planted effect: coded columns of the base schema.
pub fn plantable_columns() -> Vec<String> {
    let schema = default_schema();
    coded_columns(&schema.iter().collect::<Vec<_>>())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_patients == 0 {
            return bad("n_patients must be positive".into());
        }
        if !(self.baseline_hazard_per_day > 0.0 && self.baseline_hazard_per_day.is_finite()) {
            return bad(format!("baseline hazard {} must be positive", self.baseline_hazard_per_day));
        }
        if !(0.0..1.0).contains(&self.missingness_rate) {
            return bad(format!("missingness_rate {} outside [0, 1)", self.missingness_rate));
        }
        for (name, p) in [("faulty_visit_rate", self.faulty_visit_rate), ("colitis_rate", self.colitis_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(self.polyp_count_p > 0.0 && self.polyp_count_p <= 1.0) {
            return bad(format!("polyp_count_p {} outside (0, 1]", self.polyp_count_p));
        }
        if !(self.size_median_mm > 0.0 && self.size_log_sd >= 0.0) {
            return bad("size distribution needs a positive median and non-negative log-sd".into());
        }
        let w = &self.report_style;
        let total = w.plain + w.ranged + w.number_words;
        if [w.plain, w.ranged, w.number_words].iter().any(|x| *x < 0.0) || (total - 1.0).abs() > 1e-9 {
            return bad(format!("report style weights must be non-negative and sum to 1 (got {total})"));
        }
        let (lo, hi) = self.visit_interval_days;
        if lo < 15 || lo > hi {
            return bad(format!("visit interval ({lo}, {hi}) must satisfy 15 <= lo <= hi"));
        }
        let allowed = plantable_columns();
        for (name, beta) in &self.planted_log_hazard_ratios {
            if !allowed.contains(name) {
                return bad(format!("unknown planted covariate '{name}'"));
            }
            if !beta.is_finite() {
                return bad(format!("planted coefficient for '{name}' is not finite"));
            }
        }
        Ok(())
    }
}

/// Per-patient simulation truth, for test harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub patient_id: String,
    /// Planted linear predictor; the hazard is baseline * exp(risk_score).
    pub risk_score: f64,
    pub latent_time_days: f64,
    /// Day offset of the first visit at or after the latent time, if observed.
    pub recurrence_visit_day: Option<u32>,
    pub last_visit_day: u32,
    pub colitis_or_crohns: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub histories: Vec<PatientHistory>,
    pub truth: Vec<GroundTruth>,
    /// One report per visit, patient by patient in visit order.
    pub reports: Vec<ColonoscopyReport>,
}

fn origin() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).unwrap()
}

fn pick<T: Copy, R: Rng>(rng: &mut R, items: &[(T, f64)]) -> T {
    let dist = WeightedIndex::new(items.iter().map(|i| i.1)).unwrap();
    items[dist.sample(rng)].0
}

const SITE_WEIGHTS: [(ColonSite, f64); 10] = [
    (ColonSite::Transverse, 0.15),
    (ColonSite::Sigmoid, 0.20),
    (ColonSite::IleumCecum, 0.05),
    (ColonSite::Anus, 0.02),
    (ColonSite::Ascending, 0.18),
    (ColonSite::Descending, 0.10),
    (ColonSite::Hepatic, 0.05),
    (ColonSite::Rectum, 0.15),
    (ColonSite::Ileocecal, 0.05),
    (ColonSite::Splenic, 0.05),
];

/// Share of polyps reported without a location.
const UNLOCATED: f64 = 0.05;
const MAX_POLYPS: u32 = 20;

fn draw_demographics<R: Rng>(rng: &mut R) -> Demographics {
    let gender = if rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
    let age: f64 = Normal::new(60.0, 10.0).unwrap().sample(rng);
    let age = age.clamp(30.0, 90.0).round();
    let height: f64 = Normal::new(170.0, 10.0).unwrap().sample(rng);
    let height = height.clamp(140.0, 205.0).round();
    let weight: f64 = Normal::new(80.0, 15.0).unwrap().sample(rng);
    let weight = weight.clamp(40.0, 180.0).round();
    let bmi = (weight / (height / 100.0).powi(2) * 10.0).round() / 10.0;
    let used = rng.random_bool(0.5);
    let frequency = if used {
        if rng.random_bool(0.4) { SmokingFrequency::Occasional } else { SmokingFrequency::Daily }
    } else {
        SmokingFrequency::Nonsmoker
    };
    Demographics {
        gender: Some(gender),
        age_years: Some(age),
        bmi: Some(bmi),
        height_cm: Some(height),
        weight_kg: Some(weight),
        smoking_status: Some(if used { SmokingStatus::Used } else { SmokingStatus::Never }),
        smoking_frequency: Some(frequency),
        race: Some(pick(rng, &[(Race::White, 0.85), (Race::Black, 0.05), (Race::Asian, 0.05), (Race::Other, 0.05)])),
        ethnicity: Some(if rng.random_bool(0.05) { Ethnicity::Hispanic } else { Ethnicity::NonHispanic }),
        marital_status: Some(pick(
            rng,
            &[
                (MaritalStatus::Married, 0.6),
                (MaritalStatus::Single, 0.2),
                (MaritalStatus::Divorced, 0.12),
                (MaritalStatus::Widowed, 0.08),
            ],
        )),
    }
}

/// Blanks one demographic field chosen uniformly.
fn blank_one<R: Rng>(d: &mut Demographics, rng: &mut R) {
    match rng.random_range(0..10) {
        0 => d.gender = None,
        1 => d.age_years = None,
        2 => d.bmi = None,
        3 => d.height_cm = None,
        4 => d.weight_kg = None,
        5 => d.smoking_status = None,
        6 => d.smoking_frequency = None,
        7 => d.race = None,
        8 => d.ethnicity = None,
        _ => d.marital_status = None,
    }
}

/// A visit with at least one polyp: count is 1 + geometric, sizes lognormal
/// rounded to whole mm, sites categorical.
pub fn draw_findings<R: Rng>(rng: &mut R, config: &SynthConfig) -> VisitSummary {
    let mut count = 1;
    while count < MAX_POLYPS && !rng.random_bool(config.polyp_count_p) {
        count += 1;
    }
    let size_dist = LogNormal::new(config.size_median_mm.ln(), config.size_log_sd).unwrap();
    let mut summary = VisitSummary { polyp_count: count, ..VisitSummary::default() };
    let mut total = 0.0;
    let mut max: f64 = 0.0;
    for _ in 0..count {
        let size = size_dist.sample(rng).round().clamp(1.0, 60.0);
        total += size;
        max = max.max(size);
        if !rng.random_bool(UNLOCATED) {
            *summary.location_counts.entry(pick(rng, &SITE_WEIGHTS)).or_insert(0) += 1;
        }
    }
    summary.mean_size_mm = Some(total / count as f64);
    summary.max_size_mm = Some(max);
    summary
}

fn linear_predictor(planted: &BTreeMap<String, f64>, covariates: &BTreeMap<String, Value>) -> f64 {
    planted
        .iter()
        .map(|(column, beta)| {
            let x = match column.split_once('=') {
                Some((name, level)) => {
                    (covariates.get(name).and_then(Value::as_level) == Some(level)) as u8 as f64
                }
                None => covariates.get(column).and_then(Value::as_real).unwrap_or(0.0),
            };
            beta * x
        })
        .sum()
}

fn style_of<R: Rng>(rng: &mut R, w: &StyleWeights) -> ReportStyle {
    pick(rng, &[(ReportStyle::Plain, w.plain), (ReportStyle::Ranged, w.ranged), (ReportStyle::NumberWords, w.number_words)])
}

struct Patient {
    history: PatientHistory,
    truth: GroundTruth,
    reports: Vec<ColonoscopyReport>,
}

fn simulate_patient(index: usize, config: &SynthConfig) -> Result<Patient, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let patient_id = format!("P{:06}", index + 1);
    let demographics = draw_demographics(&mut rng);
    let baseline = draw_findings(&mut rng, config);
    let covariates = baseline_covariates(&demographics, &baseline, &SideMap::default());
    let risk_score = linear_predictor(&config.planted_log_hazard_ratios, &covariates);
    let rate = config.baseline_hazard_per_day * risk_score.exp();
    let latent = Exp::new(rate)
        .map_err(|e| SynthError::InvalidConfig(format!("hazard {rate}: {e}")))?
        .sample(&mut rng);

    let start = origin() + Days::new(rng.random_range(0..3650));
    let mut days: Vec<(u32, VisitSummary)> = vec![(0, baseline)];
    let mut recurrence_visit_day = None;
    let mut day = 0u32;
    let (lo, hi) = config.visit_interval_days;
    loop {
        day += rng.random_range(lo..=hi);
        if day > config.censor_horizon_days {
            break;
        }
        if f64::from(day) >= latent {
            days.push((day, draw_findings(&mut rng, config)));
            recurrence_visit_day = Some(day);
            break;
        }
        days.push((day, VisitSummary::empty()));
        if rng.random_bool(config.faulty_visit_rate) {
            // a repeat exam shortly after a clean visit; the cohort rules drop it
            let repeat = day + rng.random_range(1..14);
            days.push((repeat, draw_findings(&mut rng, config)));
            day = repeat;
        }
    }
    let last_visit_day = days.last().unwrap().0;
    let colitis = rng.random_bool(config.colitis_rate);
    let mut observed_demographics = demographics;
    if rng.random_bool(config.missingness_rate) {
        blank_one(&mut observed_demographics, &mut rng);
    }

    let mut visits = Vec::with_capacity(days.len());
    let mut reports = Vec::with_capacity(days.len());
    for (offset, summary) in days {
        let date = start + Days::new(u64::from(offset));
        let style = style_of(&mut rng, &config.report_style);
        let text = render_report(&summary, style, &mut rng)?;
        reports.push(ColonoscopyReport { patient_id: patient_id.clone(), visit_date: date, text });
        visits.push(Visit { date, summary });
    }
    let history = PatientHistory::new(patient_id.clone(), observed_demographics, visits, colitis)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    Ok(Patient {
        history,
        truth: GroundTruth {
            patient_id,
            risk_score,
            latent_time_days: latent,
            recurrence_visit_day,
            last_visit_day,
            colitis_or_crohns: colitis,
        },
        reports,
    })
}

/// Simulates `config.n_patients` patients. Patient `i` draws from its own
/// stream keyed by (seed, i), so the result does not depend on threading.
pub fn generate_cohort(config: &SynthConfig) -> Result<SynthCohort, SynthError> {
    config.validate()?;
    let patients: Vec<Patient> = (0..config.n_patients)
        .into_par_iter()
        .map(|i| simulate_patient(i, config))
        .collect::<Result<_, _>>()?;
    let mut cohort = SynthCohort { histories: Vec::new(), truth: Vec::new(), reports: Vec::new() };
    for p in patients {
        cohort.histories.push(p.history);
        cohort.truth.push(p.truth);
        cohort.reports.extend(p.reports);
    }
    Ok(cohort)
}

/// Variables of the base schema that are factors, for screening.
pub fn factor_variables() -> Vec<String> {
    default_schema()
        .into_iter()
        .filter(|s| matches!(s.kind, VariableKind::Factor { .. }))
        .map(|s| s.name)
        .collect()
}
