//! Flat `key = value` pipeline configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use seislabel::features::Measure;
use seislabel::labelmap::NmfConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    /// Ground-truth masks aligned with `corpus`.
    pub masks: Option<PathBuf>,
    /// A labeled exemplar corpus, or a directory of them.
    pub exemplars: PathBuf,
    pub output: PathBuf,
    pub m: usize,
    pub measure: Measure,
    pub nmf: NmfConfig,
    /// Root seed; every stage derives its own from it.
    pub seed: u64,
    pub evaluate: bool,
    pub max_m: usize,
    pub robustness: bool,
    pub robustness_k: Vec<usize>,
    pub robustness_fractions: Vec<f64>,
    pub robustness_trials: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::new(),
            masks: None,
            exemplars: PathBuf::new(),
            output: PathBuf::from("out"),
            m: 500,
            measure: Measure::CurveletSvd,
            nmf: NmfConfig::default(),
            seed: 0,
            evaluate: true,
            max_m: 100,
            robustness: false,
            robustness_k: vec![100, 300],
            robustness_fractions: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            robustness_trials: 3,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect()
}

impl PipelineConfig {
    /// Applies one setting. Paths are taken relative to `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), CliError> {
        let value = value.trim();
        let path = || base.join(value);
        match key {
            "corpus" => self.corpus = path(),
            "masks" => self.masks = if value.is_empty() { None } else { Some(path()) },
            "exemplars" => self.exemplars = path(),
            "output" => self.output = path(),
            "m" => self.m = parse(key, value)?,
            "measure" => self.measure = value.parse().map_err(|e| CliError::Config(format!("measure: {e}")))?,
            "seed" => self.seed = parse(key, value)?,
            "evaluate" => self.evaluate = parse(key, value)?,
            "max_m" => self.max_m = parse(key, value)?,
            "robustness" => self.robustness = parse(key, value)?,
            "robustness_k" => self.robustness_k = parse_list(key, value)?,
            "robustness_fractions" => self.robustness_fractions = parse_list(key, value)?,
            "robustness_trials" => self.robustness_trials = parse(key, value)?,
            _ => {
                let known = self
                    .nmf
                    .set(key, value)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                if !known {
                    return Err(CliError::Config(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut config = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            config.set(key.trim(), value, base)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Applies `key=value` overrides given on the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            self.set(key.trim(), value, Path::new(""))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let exists = |field: &str, p: &Path| {
            if p.as_os_str().is_empty() {
                Err(CliError::Config(format!("{field}: no path given")))
            } else if !p.exists() {
                Err(CliError::Config(format!("{field}: {} does not exist", p.display())))
            } else {
                Ok(())
            }
        };
        exists("corpus", &self.corpus)?;
        exists("exemplars", &self.exemplars)?;
        if let Some(m) = &self.masks {
            exists("masks", m)?;
        }
        if self.m == 0 {
            return Err(CliError::Config("m: must be at least 1".into()));
        }
        if self.robustness && (self.robustness_k.is_empty() || self.robustness_fractions.is_empty()) {
            return Err(CliError::Config("robustness: needs k values and fractions".into()));
        }
        self.nmf.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus = {}", self.corpus.display())?;
        if let Some(m) = &self.masks {
            writeln!(f, "masks = {}", m.display())?;
        }
        writeln!(f, "exemplars = {}", self.exemplars.display())?;
        writeln!(f, "output = {}", self.output.display())?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "measure = {}", self.measure)?;
        writeln!(f, "seed = {}", self.seed)?;
        for line in self.nmf.to_string().lines().filter(|l| !l.starts_with("seed")) {
            writeln!(f, "{line}")?;
        }
        writeln!(f, "evaluate = {}", self.evaluate)?;
        writeln!(f, "max_m = {}", self.max_m)?;
        writeln!(f, "robustness = {}", self.robustness)?;
        writeln!(f, "robustness_k = {}", join(&self.robustness_k))?;
        writeln!(f, "robustness_fractions = {}", join(&self.robustness_fractions))?;
        writeln!(f, "robustness_trials = {}", self.robustness_trials)
    }
}
