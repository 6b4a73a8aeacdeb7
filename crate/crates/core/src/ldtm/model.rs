use std::io::{BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ModelConfig;
use super::kalman::expected_posterior;
use super::state::TopicItemCounts;

pub const MODEL_FORMAT: &str = "ldtm-model";
pub const MODEL_VERSION: u32 = 1;

/// Prior and posterior concentrations, `[n][t - 1][k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    pub x_prior: Vec<Vec<Vec<f64>>>,
    pub x_post: Vec<Vec<Vec<f64>>>,
}

impl DirichletParams {
    pub fn zeros(steps: &[usize], topics: usize) -> Self {
        let x: Vec<Vec<Vec<f64>>> = steps.iter().map(|&t| vec![vec![0.0; topics]; t]).collect();
        DirichletParams {
            x_prior: x.clone(),
            x_post: x,
        }
    }
}

/// Diagonal decays: `mu[n][t - 1]` maps step `t` to step `t + 1`, so each
/// user has `T_n - 1` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsMatrix {
    pub mu: Vec<Vec<Vec<f64>>>,
}

impl DynamicsMatrix {
    pub fn constant(steps: &[usize], topics: usize, value: f64) -> Self {
        DynamicsMatrix {
            mu: steps
                .iter()
                .map(|&t| vec![vec![value; topics]; t.saturating_sub(1)])
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.mu.iter().flatten().flatten().copied()
    }
}

/// Expected posterior topic distributions, `theta[n][t - 1][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicSeries {
    pub theta: Vec<Vec<Vec<f64>>>,
}

impl TopicSeries {
    pub fn from_posteriors(x_post: &[Vec<Vec<f64>>], alpha: f64) -> Self {
        TopicSeries {
            theta: x_post
                .iter()
                .map(|u| u.iter().map(|x| expected_posterior(x, alpha)).collect())
                .collect(),
        }
    }

    /// Distribution of user `n` at 1-based step `t`.
    pub fn at(&self, n: usize, t: usize) -> Option<&[f64]> {
        t.checked_sub(1)
            .and_then(|ti| self.theta.get(n)?.get(ti))
            .map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.theta.iter().flatten().map(Vec::as_slice)
    }
}

/// Smoothed topic-item probabilities `(xi[k][m] + beta) / (xi[k] + M beta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiMatrix {
    topics: usize,
    items: usize,
    probs: Vec<f64>,
}

impl PhiMatrix {
    pub fn from_counts(xi: &TopicItemCounts, beta: f64) -> Self {
        let items = xi.items();
        let mut probs = Vec::with_capacity(xi.topics() * items);
        for k in 0..xi.topics() {
            let denom = xi.row_sum(k) as f64 + items as f64 * beta;
            probs.extend(xi.row(k).iter().map(|&c| (f64::from(c) + beta) / denom));
        }
        PhiMatrix {
            topics: xi.topics(),
            items,
            probs,
        }
    }

    /// Builds directly from probability rows (used for planted parameters).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        PhiMatrix {
            topics: rows.len(),
            items: rows.first().map_or(0, Vec::len),
            probs: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn items(&self) -> usize {
        self.items
    }

    #[inline]
    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.probs[k * self.items + m]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.items..(k + 1) * self.items]
    }

    /// `sum_k theta_k phi[k][m]`.
    pub fn mixture(&self, theta: &[f64], m: usize) -> f64 {
        theta.iter().enumerate().map(|(k, t)| t * self.get(k, m)).sum()
    }
}

/// A trained model: everything needed to rebuild topic series and item
/// distributions, plus the training trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub vocabulary_fingerprint: String,
    pub users: Vec<String>,
    /// Token count per user and step, `[n][t - 1]`.
    pub step_tokens: Vec<Vec<u32>>,
    pub params: DirichletParams,
    pub dynamics: DynamicsMatrix,
    pub topic_items: TopicItemCounts,
    /// Training log-likelihood after each sweep.
    pub trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

impl Model {
    pub fn topics(&self) -> usize {
        self.config.topics
    }

    pub fn theta(&self) -> TopicSeries {
        TopicSeries::from_posteriors(&self.params.x_post, self.config.alpha)
    }

    pub fn phi(&self) -> PhiMatrix {
        PhiMatrix::from_counts(&self.topic_items, self.config.beta)
    }

    pub fn user_position(&self, id: &str) -> Option<usize> {
        self.users.iter().position(|u| u == id)
    }

    pub fn write_snapshot<W: Write>(&self, writer: W) -> Result<()> {
        let env = Envelope {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self,
        };
        serde_json::to_writer(writer, &env)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(reader: R) -> Result<Self> {
        let env: Envelope<Model> = serde_json::from_reader(BufReader::new(reader))?;
        if env.format != MODEL_FORMAT {
            return Err(Error::Snapshot(format!("not a model snapshot: `{}`", env.format)));
        }
        if env.version != MODEL_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported model snapshot version {}",
                env.version
            )));
        }
        Ok(env.model)
    }
}
