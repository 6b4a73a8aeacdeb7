//! Inference engine: random initialization, Kalman-style propagation of
//! Dirichlet parameters, collapsed Gibbs resampling and per-sweep decay
//! estimation.

mod config;
mod inference;
mod kalman;
mod model;
mod sampler;
mod state;

pub use config::{DynamicsMode, ModelConfig};
pub use inference::{run_inference, run_inference_with, Inference};
pub use kalman::{expected_posterior, expected_prior, kalman_predict, kalman_update, smoothed_distribution};
pub use model::{DirichletParams, DynamicsMatrix, Model, PhiMatrix, TopicSeries, MODEL_FORMAT, MODEL_VERSION};
pub use sampler::{sample_topic, topic_weights, ItemNormalizer, SamplerParams};
pub use state::{init_assignments, TopicItemCounts, TopicState};
