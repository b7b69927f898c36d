use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Stage};
use crate::cohort::CohortConfig;
use crate::cox::CoxConfig;
use crate::forest::ForestConfig;
use crate::parser::ParserConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    /// One JSON report per line.
    pub reports: PathBuf,
    pub demographics: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub parse: bool,
    pub cohort: bool,
    pub screen: bool,
    pub cox: bool,
    pub forest: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles { parse: true, cohort: true, screen: true, cox: true, forest: true }
    }
}

impl StageToggles {
    pub fn only(stage: Stage) -> Self {
        let mut t = StageToggles { parse: false, cohort: false, screen: false, cox: false, forest: false };
        *t.get_mut(stage) = true;
        t
    }

    pub fn get(&self, stage: Stage) -> bool {
        match stage {
            Stage::Parse => self.parse,
            Stage::Cohort => self.cohort,
            Stage::Screen => self.screen,
            Stage::Cox => self.cox,
            Stage::Forest => self.forest,
        }
    }

    fn get_mut(&mut self, stage: Stage) -> &mut bool {
        match stage {
            Stage::Parse => &mut self.parse,
            Stage::Cohort => &mut self.cohort,
            Stage::Screen => &mut self.screen,
            Stage::Cox => &mut self.cox,
            Stage::Forest => &mut self.forest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    /// Factors with log-rank p strictly below this enter the Cox model.
    pub threshold: f64,
    /// Follow-up is truncated at this fraction of the longest observed time.
    pub censor_quantile: f64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig { threshold: 0.2, censor_quantile: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AucConfig {
    pub horizon_days: f64,
}

impl Default for AucConfig {
    fn default() -> Self {
        AucConfig { horizon_days: 1500.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub render_svg: bool,
    /// Write the grown forest as JSON.
    pub save_forest: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { render_svg: false, save_forest: true }
    }
}

/// The whole run, as read from TOML.
///
/// The top-level `seed` overrides `synth.seed` and `forest.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub inputs: Option<InputPaths>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub stages: StageToggles,
    #[serde(default)]
    pub parser: ParserConfig,
    #[serde(default)]
    pub cohort: CohortConfig,
    #[serde(default)]
    pub screening: ScreeningConfig,
    #[serde(default)]
    pub cox: CoxConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub auc: AucConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Fields that decide what the run computes. Output location, stage
/// toggles and rendering are left out.
#[derive(Serialize)]
struct Semantic<'a> {
    seed: u64,
    inputs: &'a Option<InputPaths>,
    synth: &'a Option<SynthConfig>,
    parser: &'a ParserConfig,
    cohort: &'a CohortConfig,
    screening: &'a ScreeningConfig,
    cox: &'a CoxConfig,
    forest: &'a ForestConfig,
    auc: &'a AucConfig,
}

impl PipelineConfig {
    /// A synthetic-data run with default settings.
    pub fn synthetic(synth: SynthConfig, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            seed: synth.seed,
            out_dir: out_dir.into(),
            inputs: None,
            synth: Some(synth),
            stages: StageToggles::default(),
            parser: ParserConfig::default(),
            cohort: CohortConfig::default(),
            screening: ScreeningConfig::default(),
            cox: CoxConfig::default(),
            forest: ForestConfig::default(),
            auc: AucConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.apply_seed();
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(inputs) = &mut config.inputs {
            inputs.reports = base.join(&inputs.reports);
            inputs.demographics = base.join(&inputs.demographics);
        }
        config.out_dir = base.join(&config.out_dir);
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.apply_seed();
    }

    fn apply_seed(&mut self) {
        if let Some(s) = &mut self.synth {
            s.seed = self.seed;
        }
        self.forest.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        match (&self.inputs, &self.synth) {
            (Some(_), Some(_)) => return bad("give either [inputs] or [synth], not both"),
            (None, None) => return bad("one of [inputs] or [synth] is required"),
            (None, Some(s)) => s.validate().map_err(|e| PipelineError::Config(e.to_string()))?,
            (Some(_), None) => {}
        }
        if !(self.screening.threshold > 0.0 && self.screening.threshold <= 1.0) {
            return bad("screening.threshold must be in (0, 1]");
        }
        if !(self.screening.censor_quantile > 0.0 && self.screening.censor_quantile <= 1.0) {
            return bad("screening.censor_quantile must be in (0, 1]");
        }
        if !(self.auc.horizon_days > 0.0 && self.auc.horizon_days.is_finite()) {
            return bad("auc.horizon_days must be positive");
        }
        Ok(())
    }

    /// SHA-256 over the semantic fields, hex encoded.
    pub fn hash(&self) -> String {
        let semantic = Semantic {
            seed: self.seed,
            inputs: &self.inputs,
            synth: &self.synth,
            parser: &self.parser,
            cohort: &self.cohort,
            screening: &self.screening,
            cox: &self.cox,
            forest: &self.forest,
            auc: &self.auc,
        };
        let bytes = serde_json::to_vec(&semantic).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
