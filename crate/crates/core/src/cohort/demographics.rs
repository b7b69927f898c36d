use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! factor_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// Declared levels; the first is the reference level.
            pub const LEVELS: &'static [&'static str] = &[$($label),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let lower = s.trim().to_ascii_lowercase();
                $(
                    if lower == $label.to_ascii_lowercase() $(|| lower == $alias)* {
                        return Ok($name::$variant);
                    }
                )+
                Err(format!("unknown {} '{}'", stringify!($name), s))
            }
        }
    };
}

factor_enum!(Gender { Female => "Female" | "f", Male => "Male" | "m" });

factor_enum!(
    /// Tobacco history collapsed to never vs. ever used.
    SmokingStatus { Never => "Never" | "never smoker", Used => "Used" | "current" | "former" | "occasional" }
);

impl SmokingStatus {
    /// Maps any recorded status other than never-smoker to `Used`; empty is missing.
    pub fn collapse(raw: &str) -> Option<SmokingStatus> {
        let raw = raw.trim();
        if raw.is_empty() {
            None
        } else {
            Some(raw.parse().unwrap_or(SmokingStatus::Used))
        }
    }
}

factor_enum!(SmokingFrequency { Nonsmoker => "Nonsmoker" | "none", Occasional => "Occasional", Daily => "Daily" });

factor_enum!(Race { White => "White", Black => "Black", Asian => "Asian", Other => "Other" });

factor_enum!(Ethnicity { NonHispanic => "NonHispanic" | "non-hispanic", Hispanic => "Hispanic" });

factor_enum!(MaritalStatus { Married => "Married", Single => "Single", Divorced => "Divorced", Widowed => "Widowed" });

/// Baseline demographics; every field may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Option<Gender>,
    pub age_years: Option<f64>,
    pub bmi: Option<f64>,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub smoking_status: Option<SmokingStatus>,
    pub smoking_frequency: Option<SmokingFrequency>,
    pub race: Option<Race>,
    pub ethnicity: Option<Ethnicity>,
    pub marital_status: Option<MaritalStatus>,
}
