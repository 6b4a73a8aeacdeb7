use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::DescentOptions;
use crate::error::{Error, Result};

/// How the diagonal dynamics matrix is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    /// `A = I`: cumulative counts, plain LDA over time.
    Identity,
    /// `A = 0.5 I`.
    HalfDecay,
    /// `A = 0`: every step stands alone.
    FullDecay,
    /// Decays fitted per user and transition.
    Learned,
}

impl DynamicsMode {
    pub const ALL: [DynamicsMode; 4] = [
        DynamicsMode::Identity,
        DynamicsMode::HalfDecay,
        DynamicsMode::FullDecay,
        DynamicsMode::Learned,
    ];

    /// Decay value every entry starts with (and keeps, for fixed modes).
    pub fn initial_decay(self) -> f64 {
        match self {
            DynamicsMode::Identity | DynamicsMode::Learned => 1.0,
            DynamicsMode::HalfDecay => 0.5,
            DynamicsMode::FullDecay => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DynamicsMode::Identity => "identity",
            DynamicsMode::HalfDecay => "half_decay",
            DynamicsMode::FullDecay => "full_decay",
            DynamicsMode::Learned => "learned",
        }
    }
}

impl fmt::Display for DynamicsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DynamicsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "identity" | "lda" => Ok(DynamicsMode::Identity),
            "half_decay" | "half" => Ok(DynamicsMode::HalfDecay),
            "full_decay" | "full" => Ok(DynamicsMode::FullDecay),
            "learned" | "ldtm" => Ok(DynamicsMode::Learned),
            _ => Err(Error::InvalidConfig(format!("unknown dynamics mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub dynamics_mode: DynamicsMode,
    pub seed: u64,
    pub descent: DescentOptions,
    /// Use `K * beta` instead of `M * beta` in the topic-item normalizer.
    #[serde(default)]
    pub k_beta_normalizer: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            topics: 26,
            alpha: 0.5,
            beta: 0.1,
            iterations: 50,
            dynamics_mode: DynamicsMode::Learned,
            seed: 0,
            descent: DescentOptions::default(),
            k_beta_normalizer: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.topics < 2 {
            return fail(format!("topics must be >= 2, got {}", self.topics));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return fail(format!("beta must be > 0, got {}", self.beta));
        }
        if self.iterations < 1 {
            return fail("iterations must be >= 1".into());
        }
        if self.descent.learn_rate.is_nan() || self.descent.learn_rate <= 0.0 {
            return fail(format!("learn rate must be > 0, got {}", self.descent.learn_rate));
        }
        Ok(())
    }
}
