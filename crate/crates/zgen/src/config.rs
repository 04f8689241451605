//! Run configuration (TOML).
//!
//! Relative paths resolve against the directory holding the config file.
//! One master seed drives every component; per-section `seed` keys are
//! replaced by values derived from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zgen_core::classifier::{GbdtConfig, LabelMode};
use zgen_core::covgen::{CovSource, OutlierSpec};
use zgen_core::cvae::CvaeConfig;
use zgen_core::gan::GanConfig;
use zgen_core::harness::{GanFactory, OosProtocol, OotProtocol, OutlierSweep};
use zgen_core::rng::{derive_seed, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Oos,
    Oot,
    Sweep,
    Correlate,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Oos => "oos",
            Protocol::Oot => "oot",
            Protocol::Sweep => "sweep",
            Protocol::Correlate => "correlate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    /// Without a test file the training file is split at random.
    pub test: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.33
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub rows: usize,
    /// Bootstrap the training rows to this count before GAN training.
    pub augment_rows: Option<usize>,
    pub filter: bool,
    pub label_mode: LabelMode,
    /// Emit the `__outlier` mask column.
    pub mask: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { rows: 4000, augment_rows: None, filter: true, label_mode: LabelMode::Threshold(0.5), mask: false }
    }
}

/// Training rows for the synthetic OOS condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticInput {
    None,
    /// Fit a generator inside the run.
    Fit,
    /// Use the model files written by `fit`.
    Model,
    /// Import a synthetic CSV.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OosConfig {
    pub iterations: usize,
    pub subsample: f64,
    pub synthetic: SyntheticInput,
}

impl Default for OosConfig {
    fn default() -> Self {
        let p = OosProtocol::default();
        OosConfig { iterations: p.iterations, subsample: p.subsample, synthetic: SyntheticInput::None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateConfig {
    pub synthetic: Vec<PathBuf>,
    pub scale: (f64, f64),
    /// Pixels per matrix cell in heatmaps.
    pub cell: usize,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig { synthetic: Vec::new(), scale: zgen_core::corr::DEFAULT_SCALE, cell: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub protocols: Vec<Protocol>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { protocols: vec![Protocol::Oos, Protocol::Correlate] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub protocol: Option<Protocol>,
    pub data: DataConfig,
    #[serde(default)]
    pub gan: GanConfig,
    #[serde(default)]
    pub gbdt: GbdtConfig,
    #[serde(default)]
    pub generate: GenerateConfig,
    pub cvae: Option<CvaeConfig>,
    pub outliers: Option<OutlierSpec>,
    #[serde(default)]
    pub oos: OosConfig,
    #[serde(default)]
    pub oot: OotProtocol,
    #[serde(default)]
    pub sweep: OutlierSweep,
    #[serde(default)]
    pub correlate: CorrelateConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config `{path}`: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("file `{0}` does not exist")]
    MissingFile(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::parse(&text, path)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.data.train);
        self.data.test.as_mut().map(fix);
        self.data.schema.as_mut().map(fix);
        if let SyntheticInput::Csv(p) = &mut self.oos.synthetic {
            fix(p);
        }
        self.correlate.synthetic.iter_mut().for_each(fix);
    }

    /// Replaces component seeds with values derived from the master seed.
    pub fn apply_seed(&mut self, master: u64) {
        self.seed = master;
        self.gan.seed = derive_seed(master, &[tag("config.gan")]);
        self.gbdt.seed = derive_seed(master, &[tag("config.gbdt")]);
        if let Some(c) = &mut self.cvae {
            c.seed = derive_seed(master, &[tag("config.cvae")]);
        }
        if let Some(o) = &mut self.outliers {
            o.seed = derive_seed(master, &[tag("config.outliers")]);
        }
        self.oot.oos.seed = master;
        self.sweep.seed = master;
    }

    /// Checks values and that every referenced input exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let exists = |p: &Path| if p.exists() { Ok(()) } else { Err(ConfigError::MissingFile(p.to_path_buf())) };
        exists(&self.data.train)?;
        if let Some(p) = &self.data.test {
            exists(p)?;
        }
        if let Some(p) = &self.data.schema {
            exists(p)?;
        }
        if let SyntheticInput::Csv(p) = &self.oos.synthetic {
            exists(p)?;
        }
        self.correlate.synthetic.iter().try_for_each(|p| exists(p))?;
        let invalid = |e: zgen_core::Error| ConfigError::Invalid(e.to_string());
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(ConfigError::Invalid(format!("data.test_fraction must lie in (0, 1), got {}", self.data.test_fraction)));
        }
        self.gan.validate().map_err(invalid)?;
        self.gbdt.validate().map_err(invalid)?;
        if let Some(c) = &self.cvae {
            c.validate().map_err(invalid)?;
        }
        if let Some(o) = &self.outliers {
            o.validate().map_err(invalid)?;
            if o.cov_source == CovSource::FromCvae && self.cvae.is_none() {
                return Err(ConfigError::Invalid("outliers.cov_source = from_cvae needs a [cvae] section".into()));
            }
        }
        if self.generate.rows == 0 {
            return Err(ConfigError::Invalid("generate.rows must be positive".into()));
        }
        let (lo, hi) = self.correlate.scale;
        if !(lo < hi) {
            return Err(ConfigError::Invalid(format!("correlate.scale needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn gan_factory(&self) -> GanFactory {
        GanFactory {
            gan: self.gan.clone(),
            augment_rows: self.generate.augment_rows,
            target: self.gbdt.clone(),
            label_mode: self.generate.label_mode,
            filter: self.generate.filter,
        }
    }

    pub fn oos_protocol(&self) -> OosProtocol {
        OosProtocol { iterations: self.oos.iterations, subsample: self.oos.subsample, seed: self.seed }
    }
}
