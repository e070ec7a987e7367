//! Pipeline configuration: a TOML file with one section per stage, plus
//! `section.key=value` overrides from the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use slotloc_core::filtering::SelectionMode;
use slotloc_core::ifm::{BaselineConfig, PlateauPolicy};
use slotloc_core::remote::RetryPolicy;
use slotloc_core::{DatasetFormat, SamplingConfig, TargetLanguage};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub paths: Paths,
    pub backend: BackendSpec,
    pub oracle: OracleSpec,
    pub sampling: SamplingConfig,
    pub seeds: Seeds,
    pub ifm: PlateauPolicy,
    pub pipeline: Pipeline,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// English training corpus.
    pub train: Option<PathBuf>,
    /// Overrides detection from the file extension.
    pub train_format: Option<String>,
    /// Slot operation policy; the built-in travel policy when unset.
    pub policy: Option<PathBuf>,
    pub output: PathBuf,
    /// Defaults to `<output>/checkpoints`.
    pub checkpoints: Option<PathBuf>,
    /// Held-out data per language code.
    pub validation: BTreeMap<String, PathBuf>,
    /// Extra corpora the round-0 tagger is trained on, besides `train`.
    pub oracle_train: Vec<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            train: None,
            train_format: None,
            policy: None,
            output: PathBuf::from("out"),
            checkpoints: None,
            validation: BTreeMap::new(),
            oracle_train: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub lexicon: Option<PathBuf>,
    pub url: Option<String>,
    pub max_concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec {
            kind: BackendKind::Mock,
            lexicon: None,
            url: None,
            max_concurrency: 8,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[default]
    Baseline,
    Remote,
    None,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub kind: OracleKind,
    pub url: Option<String>,
    pub retry: RetryPolicy,
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    pub languages: Vec<String>,
    pub selection: SelectionMode,
    pub default_domain: String,
    /// Method name shown in success-rate tables.
    pub method: String,
    pub jobs: usize,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            languages: Vec::new(),
            selection: SelectionMode::Random,
            default_domain: "travel".into(),
            method: "slotloc".into(),
            jobs: 1,
        }
    }
}

/// A problem with the configuration or the files it names.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! invalid {
    ($($t:tt)*) => {
        return Err(ConfigError(format!($($t)*)).into())
    };
}
pub(crate) use invalid;

fn config_error(what: String) -> ConfigError {
    ConfigError(what)
}

fn parse_override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `a.b.c=value`; the value is read as TOML, or as a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {spec:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        invalid!("override {spec:?} has an empty key segment");
    }
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override {spec:?}: {s} is not a section")))?;
    }
    cur.insert(last.to_string(), parse_override_value(raw.trim()));
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    /// Loads `path` (if any), applies overrides and resolves relative paths
    /// against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let (mut table, base) = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| config_error(format!("reading config {}: {e}", p.display())))?;
                let table: toml::Table = text
                    .parse()
                    .with_context(|| format!("parsing config {}", p.display()))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, base)
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: Config = table
            .try_into()
            .map_err(|e| config_error(format!("invalid config: {e}")))?;
        let base = if base.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            base
        };
        let p = &mut cfg.paths;
        for path in [&mut p.train, &mut p.policy, &mut p.checkpoints].into_iter().flatten() {
            resolve(&base, path);
        }
        resolve(&base, &mut p.output);
        p.validation.values_mut().for_each(|v| resolve(&base, v));
        p.oracle_train.iter_mut().for_each(|v| resolve(&base, v));
        if let Some(l) = &mut cfg.backend.lexicon {
            resolve(&base, l);
        }
        Ok(cfg)
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths
            .checkpoints
            .clone()
            .unwrap_or_else(|| self.paths.output.join("checkpoints"))
    }

    pub fn train_path(&self) -> Result<&Path> {
        let p = self
            .paths
            .train
            .as_deref()
            .ok_or_else(|| config_error("paths.train is not set".into()))?;
        if !p.exists() {
            invalid!("paths.train {} does not exist", p.display());
        }
        Ok(p)
    }

    pub fn train_format(&self) -> Result<DatasetFormat> {
        match &self.paths.train_format {
            Some(f) => Ok(f
                .parse()
                .map_err(|e| config_error(format!("paths.train_format: {e}")))?),
            None => {
                let p = self.train_path()?;
                Ok(DatasetFormat::from_extension(p).ok_or_else(|| {
                    config_error(format!(
                        "cannot infer the format of {}; set paths.train_format",
                        p.display()
                    ))
                })?)
            }
        }
    }

    pub fn languages(&self) -> Result<Vec<TargetLanguage>> {
        if self.pipeline.languages.is_empty() {
            invalid!("pipeline.languages is empty");
        }
        self.pipeline
            .languages
            .iter()
            .map(|c| {
                TargetLanguage::from_code(c).ok_or_else(|| config_error(format!("unknown language code {c:?}")).into())
            })
            .collect()
    }

    pub fn jobs(&self) -> usize {
        self.pipeline.jobs.max(1)
    }

    /// Checks that every path the pipeline stages read is present.
    pub fn validate(&self) -> Result<()> {
        self.train_path()?;
        self.train_format()?;
        self.languages()?;
        self.sampling.validate().map_err(|e| config_error(e.to_string()))?;
        self.ifm.validate().map_err(|e| config_error(e.to_string()))?;
        if let Some(p) = &self.paths.policy {
            if !p.exists() {
                invalid!("paths.policy {} does not exist", p.display());
            }
        }
        for p in self.paths.validation.values().chain(&self.paths.oracle_train) {
            if !p.exists() {
                invalid!("{} does not exist", p.display());
            }
        }
        match self.backend.kind {
            BackendKind::Mock => match &self.backend.lexicon {
                Some(p) if p.exists() => {}
                Some(p) => invalid!("backend.lexicon {} does not exist", p.display()),
                None => invalid!("backend.kind = \"mock\" needs backend.lexicon"),
            },
            BackendKind::Remote => {
                if self.backend.url.is_none() {
                    invalid!("backend.kind = \"remote\" needs backend.url");
                }
            }
        }
        if self.oracle.kind == OracleKind::Remote && self.oracle.url.is_none() {
            invalid!("oracle.kind = \"remote\" needs oracle.url");
        }
        Ok(())
    }
}
