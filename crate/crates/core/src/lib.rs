//! Colorectal polyp recurrence pipeline.
//!
//! Rule-based extraction of polyp size, count and location from free-text
//! colonoscopy reports, cohort construction (baseline/outcome pairing and
//! covariate derivation), and time-to-event models: Kaplan-Meier curves with
//! log-rank screening, a Cox proportional-hazards fit and a random survival
//! forest. A seeded synthetic generator with planted hazards exercises the
//! whole chain end to end.

pub mod cohort;
pub mod cox;
pub mod dataset;
pub mod forest;
pub mod io;
pub mod parser;
pub mod pipeline;
pub mod survival;
pub mod synth;

pub use cohort::{Demographics, PatientCase, PatientHistory};
pub use cox::{fit_cox, CoxConfig, CoxFit};
pub use dataset::{SurvivalDataset, Value, VariableKind, VariableSpec};
pub use forest::{Forest, ForestConfig};
pub use parser::{aggregate_visit, parse_report, ColonSite, ColonoscopyReport, ParserConfig, VisitSummary};
pub use survival::{km_estimate, log_rank, KmCurve, LogRankResult};
