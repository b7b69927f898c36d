//! Rule-based extraction of polyp features from colonoscopy report text.
//!
//! The text is lexed into words, numbers (digits or number words), units and
//! punctuation. Site names from a fixed vocabulary anchor mentions; numbers
//! are classified as sizes when a unit follows closely, otherwise as counts.
//! Mentions are then aggregated into one [`VisitSummary`] per report.

mod extract;
mod lexer;
mod summary;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use extract::{classify_number, parse_report, NumberRole, PolypMention, VisitExtraction};
pub use lexer::{lex, Token, TokenKind, Unit};
pub use summary::{aggregate_visit, VisitSummary};

/// Anatomic sites of the controlled location vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColonSite {
    Transverse,
    Sigmoid,
    IleumCecum,
    Anus,
    Ascending,
    Descending,
    Hepatic,
    Rectum,
    Ileocecal,
    Splenic,
}

impl ColonSite {
    pub const ALL: [ColonSite; 10] = [
        ColonSite::Transverse,
        ColonSite::Sigmoid,
        ColonSite::IleumCecum,
        ColonSite::Anus,
        ColonSite::Ascending,
        ColonSite::Descending,
        ColonSite::Hepatic,
        ColonSite::Rectum,
        ColonSite::Ileocecal,
        ColonSite::Splenic,
    ];

    /// Lowercase vocabulary entry, as words. Only `IleumCecum` spans two words.
    pub fn vocabulary(self) -> &'static [&'static str] {
        match self {
            ColonSite::Transverse => &["transverse"],
            ColonSite::Sigmoid => &["sigmoid"],
            ColonSite::IleumCecum => &["ileum", "cecum"],
            ColonSite::Anus => &["anus"],
            ColonSite::Ascending => &["ascending"],
            ColonSite::Descending => &["descending"],
            ColonSite::Hepatic => &["hepatic"],
            ColonSite::Rectum => &["rectum"],
            ColonSite::Ileocecal => &["ileocecal"],
            ColonSite::Splenic => &["splenic"],
        }
    }

    /// Snake-case key used for CSV columns and config maps.
    pub fn key(self) -> &'static str {
        match self {
            ColonSite::Transverse => "transverse",
            ColonSite::Sigmoid => "sigmoid",
            ColonSite::IleumCecum => "ileum_cecum",
            ColonSite::Anus => "anus",
            ColonSite::Ascending => "ascending",
            ColonSite::Descending => "descending",
            ColonSite::Hepatic => "hepatic",
            ColonSite::Rectum => "rectum",
            ColonSite::Ileocecal => "ileocecal",
            ColonSite::Splenic => "splenic",
        }
    }
}

impl fmt::Display for ColonSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ColonSite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        ColonSite::ALL
            .into_iter()
            .find(|site| site.key() == s)
            .ok_or_else(|| format!("unknown colon site '{s}'"))
    }
}

/// One free-text report with its patient and date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColonoscopyReport {
    pub patient_id: String,
    pub visit_date: NaiveDate,
    pub text: String,
}

/// Tunables for the extraction rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    /// How many tokens after a number may hold its unit.
    pub unit_window: usize,
    /// Count-classified numbers above this are treated as noise.
    pub max_count: f64,
    /// Lowercase words joining the two ends of a size range. `-` is always accepted.
    pub range_markers: Vec<String>,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            unit_window: 2,
            max_count: 50.0,
            range_markers: vec!["to".to_string()],
        }
    }
}
