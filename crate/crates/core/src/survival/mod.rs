//! Kaplan-Meier curves, log-rank tests, common-censor truncation and the
//! log-rank variable screen.

pub mod chisq;
mod km;
mod logrank;
mod screen;

use thiserror::Error;

use crate::dataset::DatasetError;

pub use chisq::chi_square_sf;
pub use km::{km_estimate, KmCurve, KmPoint};
pub use logrank::{log_rank, logrank_increment, LogRankResult};
pub use screen::{apply_common_censor, screen_variables, ScreenEntry, ScreeningReport};

#[derive(Debug, Error, PartialEq)]
pub enum SurvivalError {
    #[error("times and events differ in length ({times} vs {events})")]
    LengthMismatch { times: usize, events: usize },
    #[error("time {0} is not positive")]
    NonPositiveTime(f64),
    #[error("log-rank needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("no events observed")]
    NoEvents,
    #[error("common-censor quantile {0} is outside (0, 1]")]
    InvalidQuantile(f64),
    #[error("'{0}' is not a factor variable")]
    NotAFactor(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
