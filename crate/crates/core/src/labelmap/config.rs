use std::fmt;

use crate::error::{Error, Result};

/// Weights and settings of the constrained factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfConfig {
    /// Penalty on `|W|_F^2`.
    pub lambda1: f64,
    /// Penalty on `|H|_F^2`.
    pub lambda2: f64,
    /// Penalty on `|H H^T - I|_F^2`.
    pub gamma: f64,
    /// Sparsity of the initial feature columns.
    pub rho_w: f64,
    /// Confidence below which a pixel is left uncertain.
    pub tau: f64,
    /// Features per class.
    pub k: usize,
    pub iterations: usize,
    /// Guard added to numerator and denominator of every update.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            lambda1: 0.1,
            lambda2: 0.5,
            gamma: 5.0,
            rho_w: 0.4,
            tau: 0.001,
            k: 300,
            iterations: 200,
            epsilon: 1e-12,
            seed: 0,
        }
    }
}

/// Keys accepted by [`NmfConfig::set`].
pub const NMF_KEYS: [&str; 9] = [
    "lambda1", "lambda2", "gamma", "rho_w", "tau", "k", "iterations", "epsilon", "seed",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

impl NmfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("gamma", self.gamma),
            ("tau", self.tau),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !(self.rho_w > 0.0 && self.rho_w < 1.0) {
            return bad(format!("rho_w must lie in (0, 1), got {}", self.rho_w));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Sets one field from its text form. Returns `Ok(false)` for keys that
    /// are not factorization settings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "rho_w" => self.rho_w = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

impl fmt::Display for NmfConfig {
    /// One `key = value` line per field.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda1 = {}", self.lambda1)?;
        writeln!(f, "lambda2 = {}", self.lambda2)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "rho_w = {}", self.rho_w)?;
        writeln!(f, "tau = {}", self.tau)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "epsilon = {:e}", self.epsilon)?;
        writeln!(f, "seed = {}", self.seed)
    }
}
