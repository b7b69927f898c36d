//! File formats: JSONL reports, and CSV for extractions, demographics,
//! datasets, exclusions and plot data.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Demographics, Exclusion, ExclusionReason, PatientHistory, SmokingStatus, Visit};
use crate::dataset::{SurvivalDataset, Value, VariableKind};
use crate::parser::{ColonSite, ColonoscopyReport, VisitSummary};
use crate::synth::GroundTruth;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

pub fn read_reports_jsonl<R: BufRead>(reader: R) -> Result<Vec<ColonoscopyReport>, IoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_reports_jsonl<W: Write>(mut writer: W, reports: &[ColonoscopyReport]) -> Result<(), IoError> {
    for r in reports {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Formats a float with the shortest text that parses back to it,
/// switching to exponent form for very small or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_opt_f64(s: &str, line: usize, column: &str) -> Result<Option<f64>, IoError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| parse_err(line, format!("{column}: '{s}' is not a number")))
}

/// One parsed visit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRow {
    pub patient_id: String,
    pub visit_date: NaiveDate,
    pub summary: VisitSummary,
}

pub fn extraction_header() -> Vec<String> {
    let mut h: Vec<String> = ["patient_id", "visit_date", "polyp_count", "mean_size_mm", "max_size_mm"]
        .into_iter()
        .map(String::from)
        .collect();
    h.extend(ColonSite::ALL.iter().map(|s| s.key().to_string()));
    h
}

pub fn write_extraction_csv<W: Write>(writer: W, rows: &[ExtractionRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(extraction_header())?;
    for r in rows {
        let mut rec = vec![
            r.patient_id.clone(),
            r.visit_date.to_string(),
            r.summary.polyp_count.to_string(),
            fmt_opt(r.summary.mean_size_mm),
            fmt_opt(r.summary.max_size_mm),
        ];
        rec.extend(ColonSite::ALL.iter().map(|s| r.summary.site_count(*s).to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<(), IoError> {
    if found.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(1, format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

pub fn read_extraction_csv<R: Read>(reader: R) -> Result<Vec<ExtractionRow>, IoError> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(r.headers()?, &extraction_header())?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let visit_date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("visit_date: {e}")))?;
        let polyp_count = rec[2].parse().map_err(|_| parse_err(line, "polyp_count"))?;
        let mut location_counts = BTreeMap::new();
        for (k, site) in ColonSite::ALL.iter().enumerate() {
            let c: u32 = rec[5 + k].parse().map_err(|_| parse_err(line, site.key()))?;
            if c > 0 {
                location_counts.insert(*site, c);
            }
        }
        out.push(ExtractionRow {
            patient_id: rec[0].to_string(),
            visit_date,
            summary: VisitSummary {
                polyp_count,
                mean_size_mm: parse_opt_f64(&rec[3], line, "mean_size_mm")?,
                max_size_mm: parse_opt_f64(&rec[4], line, "max_size_mm")?,
                location_counts,
            },
        });
    }
    Ok(out)
}

/// Demographics CSV row; empty strings are missing values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemographicsRow {
    pub patient_id: String,
    pub gender: String,
    pub age_years: String,
    pub bmi: String,
    pub height_cm: String,
    pub weight_kg: String,
    pub smoking_status: String,
    pub smoking_frequency: String,
    pub race: String,
    pub ethnicity: String,
    pub marital_status: String,
    pub colitis_or_crohns: String,
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DemographicsRow {
    pub fn from_history(h: &PatientHistory) -> Self {
        let d = &h.demographics;
        DemographicsRow {
            patient_id: h.patient_id.clone(),
            gender: opt_str(d.gender),
            age_years: fmt_opt(d.age_years),
            bmi: fmt_opt(d.bmi),
            height_cm: fmt_opt(d.height_cm),
            weight_kg: fmt_opt(d.weight_kg),
            smoking_status: opt_str(d.smoking_status),
            smoking_frequency: opt_str(d.smoking_frequency),
            race: opt_str(d.race),
            ethnicity: opt_str(d.ethnicity),
            marital_status: opt_str(d.marital_status),
            colitis_or_crohns: h.colitis_or_crohns.to_string(),
        }
    }

    /// Parses the row; returns the demographics and the colitis flag.
    pub fn parse(&self, line: usize) -> Result<(Demographics, bool), IoError> {
        fn level<T: std::str::FromStr<Err = String>>(s: &str, line: usize) -> Result<Option<T>, IoError> {
            let s = s.trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|e| parse_err(line, e))
        }
        let nonneg = |s: &str, col: &str| -> Result<Option<f64>, IoError> {
            match parse_opt_f64(s, line, col)? {
                Some(v) if v < 0.0 || !v.is_finite() => Err(parse_err(line, format!("{col}: {v} must be non-negative"))),
                v => Ok(v),
            }
        };
        let colitis = match self.colitis_or_crohns.trim().to_ascii_lowercase().as_str() {
            "" | "false" | "0" | "no" => false,
            "true" | "1" | "yes" => true,
            other => return Err(parse_err(line, format!("colitis_or_crohns: '{other}'"))),
        };
        Ok((
            Demographics {
                gender: level(&self.gender, line)?,
                age_years: nonneg(&self.age_years, "age_years")?,
                bmi: nonneg(&self.bmi, "bmi")?,
                height_cm: nonneg(&self.height_cm, "height_cm")?,
                weight_kg: nonneg(&self.weight_kg, "weight_kg")?,
                smoking_status: SmokingStatus::collapse(&self.smoking_status),
                smoking_frequency: level(&self.smoking_frequency, line)?,
                race: level(&self.race, line)?,
                ethnicity: level(&self.ethnicity, line)?,
                marital_status: level(&self.marital_status, line)?,
            },
            colitis,
        ))
    }
}

pub fn write_demographics_csv<W: Write>(writer: W, histories: &[PatientHistory]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for h in histories {
        w.serialize(DemographicsRow::from_history(h))?;
    }
    w.flush()?;
    Ok(())
}

/// patient_id -> (demographics, colitis flag)
pub fn read_demographics_csv<R: Read>(reader: R) -> Result<BTreeMap<String, (Demographics, bool)>, IoError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, row) in r.deserialize::<DemographicsRow>().enumerate() {
        let row = row?;
        let parsed = row.parse(i + 2)?;
        if out.insert(row.patient_id.clone(), parsed).is_some() {
            return Err(parse_err(i + 2, format!("duplicate patient_id '{}'", row.patient_id)));
        }
    }
    Ok(out)
}

/// Joins extracted visits with demographics. Patients without a demographics
/// row get empty demographics (and drop out later as missing data).
pub fn build_histories(
    rows: &[ExtractionRow],
    demographics: &BTreeMap<String, (Demographics, bool)>,
) -> Result<Vec<PatientHistory>, IoError> {
    let mut by_patient: BTreeMap<&str, Vec<Visit>> = BTreeMap::new();
    for r in rows {
        by_patient
            .entry(&r.patient_id)
            .or_default()
            .push(Visit { date: r.visit_date, summary: r.summary.clone() });
    }
    let mut out = Vec::with_capacity(by_patient.len());
    for (id, mut visits) in by_patient {
        visits.sort_by_key(|v| v.date);
        if visits.windows(2).any(|w| w[0].date == w[1].date) {
            // two reports on one day describe one visit
            visits = merge_same_day(visits);
        }
        let (demo, colitis) = demographics.get(id).cloned().unwrap_or_default();
        out.push(PatientHistory::new(id, demo, visits, colitis).map_err(|e| parse_err(0, e.to_string()))?);
    }
    Ok(out)
}

fn merge_same_day(visits: Vec<Visit>) -> Vec<Visit> {
    let mut out: Vec<Visit> = Vec::with_capacity(visits.len());
    for v in visits {
        match out.last_mut() {
            Some(last) if last.date == v.date => {
                let (a, b) = (&last.summary, &v.summary);
                let sized = |s: &VisitSummary| s.mean_size_mm.map(|m| (m, s.polyp_count as f64));
                let mean = match (sized(a), sized(b)) {
                    (Some((ma, na)), Some((mb, nb))) => Some((ma * na + mb * nb) / (na + nb)),
                    (x, y) => x.or(y).map(|p| p.0),
                };
                let mut merged = VisitSummary {
                    polyp_count: a.polyp_count + b.polyp_count,
                    mean_size_mm: mean,
                    max_size_mm: match (a.max_size_mm, b.max_size_mm) {
                        (Some(x), Some(y)) => Some(x.max(y)),
                        (x, y) => x.or(y),
                    },
                    location_counts: a.location_counts.clone(),
                };
                for (site, c) in &b.location_counts {
                    *merged.location_counts.entry(*site).or_insert(0) += c;
                }
                last.summary = merged;
            }
            _ => out.push(v),
        }
    }
    out
}

pub fn dataset_header(dataset: &SurvivalDataset) -> Vec<String> {
    let mut h = vec!["patient_id".to_string(), "time_days".to_string(), "event".to_string()];
    h.extend(dataset.schema.iter().map(|s| s.name.clone()));
    h
}

pub fn write_dataset_csv<W: Write>(writer: W, dataset: &SurvivalDataset) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header(dataset))?;
    for case in &dataset.cases {
        let mut rec = vec![case.patient_id.clone(), fmt_f64(case.time_days), (case.event as u8).to_string()];
        for spec in &dataset.schema {
            rec.push(match case.covariates.get(&spec.name) {
                Some(Value::Real(x)) => fmt_f64(*x),
                Some(Value::Level(l)) => l.clone(),
                None => String::new(),
            });
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV against a known schema; every schema column must be present.
pub fn read_dataset_csv<R: Read>(reader: R, schema: Vec<crate::dataset::VariableSpec>) -> Result<SurvivalDataset, IoError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| parse_err(1, format!("missing column '{name}'")));
    let (id_col, time_col, event_col) = (col("patient_id")?, col("time_days")?, col("event")?);
    let spec_cols: Vec<usize> = schema.iter().map(|s| col(&s.name)).collect::<Result<_, _>>()?;
    let mut cases = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let time = rec[time_col].parse().map_err(|_| parse_err(line, "time_days"))?;
        let event = match &rec[event_col] {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(line, format!("event: '{other}'"))),
        };
        let mut cov = BTreeMap::new();
        for (spec, &c) in schema.iter().zip(&spec_cols) {
            let raw = &rec[c];
            if raw.is_empty() {
                continue;
            }
            let v = match spec.kind {
                VariableKind::Continuous => Value::Real(raw.parse().map_err(|_| parse_err(line, spec.name.clone()))?),
                VariableKind::Factor { .. } => Value::level(raw),
            };
            cov.insert(spec.name.clone(), v);
        }
        cases.push(crate::cohort::PatientCase::new(&rec[id_col], time, event, cov));
    }
    Ok(SurvivalDataset::new(cases, schema))
}

pub fn write_exclusions_csv<W: Write>(writer: W, exclusions: &[Exclusion]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["patient_id", "reason"])?;
    for e in exclusions {
        w.write_record([e.patient_id.as_str(), e.reason.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_exclusions_csv<R: Read>(reader: R) -> Result<Vec<Exclusion>, IoError> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(r.headers()?, &["patient_id".into(), "reason".into()])?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let reason: ExclusionReason = rec[1].parse().map_err(|e: String| parse_err(i + 2, e))?;
            Ok(Exclusion { patient_id: rec[0].to_string(), reason })
        })
        .collect()
}

pub fn write_ground_truth_csv<W: Write>(writer: W, truth: &[GroundTruth]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "patient_id",
        "risk_score",
        "latent_time_days",
        "recurrence_visit_day",
        "last_visit_day",
        "colitis_or_crohns",
    ])?;
    for t in truth {
        w.write_record([
            t.patient_id.clone(),
            fmt_f64(t.risk_score),
            fmt_f64(t.latent_time_days),
            opt_str(t.recurrence_visit_day),
            t.last_visit_day.to_string(),
            t.colitis_or_crohns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `header` then each row of pre-formatted fields.
pub fn write_table<W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
