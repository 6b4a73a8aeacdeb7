use crate::corpus::Corpus;
use crate::dynamics::{update_dynamics, KlContext};
use crate::error::Result;
use crate::rng::{self, Rng};

use super::config::{DynamicsMode, ModelConfig};
use super::kalman::{kalman_predict, kalman_update};
use super::model::{DirichletParams, DynamicsMatrix, Model, PhiMatrix, TopicSeries};
use super::sampler::{sample_topic, ItemNormalizer, SamplerParams};
use super::state::{init_assignments, TopicState};

/// Sequential reference sampler. One RNG stream, users visited in corpus
/// order, so a fixed seed reproduces every sweep bit for bit.
pub struct Inference<'c> {
    corpus: &'c Corpus,
    config: ModelConfig,
    state: TopicState,
    params: DirichletParams,
    dynamics: DynamicsMatrix,
    rng: Rng,
    trace: Vec<f64>,
}

impl<'c> Inference<'c> {
    pub fn new(corpus: &'c Corpus, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::rng_for(config.seed, rng::stream::GIBBS);
        let state = init_assignments(corpus, config.topics, &mut rng);
        let steps: Vec<usize> = (0..corpus.num_users()).map(|n| corpus.time_steps(n)).collect();
        let params = DirichletParams::zeros(&steps, config.topics);
        let dynamics = DynamicsMatrix::constant(&steps, config.topics, config.dynamics_mode.initial_decay());
        Ok(Inference {
            corpus,
            config,
            state,
            params,
            dynamics,
            rng,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn state(&self) -> &TopicState {
        &self.state
    }

    pub fn params(&self) -> &DirichletParams {
        &self.params
    }

    pub fn dynamics(&self) -> &DynamicsMatrix {
        &self.dynamics
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn sweeps_done(&self) -> usize {
        self.trace.len()
    }

    fn sampler_params(&self) -> SamplerParams {
        SamplerParams {
            alpha: self.config.alpha,
            beta: self.config.beta,
            normalizer: if self.config.k_beta_normalizer {
                ItemNormalizer::Topics
            } else {
                ItemNormalizer::Vocabulary
            },
        }
    }

    /// One full Gibbs sweep over every user, followed by the trace update.
    pub fn sweep(&mut self) -> Result<()> {
        let params = self.sampler_params();
        let mut weights = vec![0.0; self.config.topics];
        for n in 0..self.corpus.num_users() {
            self.sweep_user(n, &params, &mut weights)?;
            if self.config.dynamics_mode == DynamicsMode::Learned {
                self.update_user_dynamics(n);
            }
        }
        let ll = self.log_likelihood();
        self.trace.push(ll);
        Ok(())
    }

    fn sweep_user(&mut self, n: usize, params: &SamplerParams, weights: &mut [f64]) -> Result<()> {
        let k_topics = self.config.topics;
        let mut prior_plus_psi = vec![0.0; k_topics];
        for ti in 0..self.corpus.time_steps(n) {
            let prior = if ti == 0 {
                vec![0.0; k_topics]
            } else {
                kalman_predict(&self.dynamics.mu[n][ti - 1], &self.params.x_post[n][ti - 1])
            };

            let tokens = self.corpus.tokens(n, ti + 1);
            for (pos, &w) in tokens.iter().enumerate() {
                let m = w as usize;
                let old = self.state.z[n][ti][pos] as usize;
                self.state.psi[n][ti][old] -= 1;
                self.state.xi.decrement(old, m);

                for (k, slot) in prior_plus_psi.iter_mut().enumerate() {
                    *slot = prior[k] + f64::from(self.state.psi[n][ti][k]);
                }
                let new = sample_topic(m, &prior_plus_psi, &self.state.xi, params, weights, &mut self.rng)?;

                self.state.psi[n][ti][new] += 1;
                self.state.xi.increment(new, m);
                self.state.z[n][ti][pos] = new as u32;
            }

            let psi: Vec<f64> = self.state.psi[n][ti].iter().map(|&c| f64::from(c)).collect();
            self.params.x_post[n][ti] = kalman_update(&prior, &psi)?;
            self.params.x_prior[n][ti] = prior;
        }
        Ok(())
    }

    fn update_user_dynamics(&mut self, n: usize) {
        for ti in 1..self.corpus.time_steps(n) {
            let ctx = KlContext::new(
                self.params.x_post[n][ti - 1].clone(),
                self.state.psi[n][ti].iter().map(|&c| f64::from(c)).collect(),
                self.config.alpha,
                self.dynamics.mu[n][ti - 1].clone(),
            );
            self.dynamics.mu[n][ti - 1] = update_dynamics(&ctx, &self.config.descent).mu;
        }
    }

    /// Recomputes priors and posteriors from the current counts and decays
    /// without resampling.
    pub fn refresh_filter(&mut self) {
        for n in 0..self.corpus.num_users() {
            for ti in 0..self.corpus.time_steps(n) {
                let prior = if ti == 0 {
                    vec![0.0; self.config.topics]
                } else {
                    kalman_predict(&self.dynamics.mu[n][ti - 1], &self.params.x_post[n][ti - 1])
                };
                let post = prior
                    .iter()
                    .zip(&self.state.psi[n][ti])
                    .map(|(x, &c)| x + f64::from(c))
                    .collect();
                self.params.x_prior[n][ti] = prior;
                self.params.x_post[n][ti] = post;
            }
        }
    }

    pub fn topic_series(&self) -> TopicSeries {
        TopicSeries::from_posteriors(&self.params.x_post, self.config.alpha)
    }

    pub fn phi(&self) -> PhiMatrix {
        PhiMatrix::from_counts(&self.state.xi, self.config.beta)
    }

    /// `sum_{n,t,m} log sum_k theta[n][t][k] phi[k][m]` over training tokens.
    pub fn log_likelihood(&self) -> f64 {
        let theta = self.topic_series();
        let phi = self.phi();
        let mut ll = 0.0;
        for (n, user) in self.corpus.users().iter().enumerate() {
            for (ti, toks) in user.steps.iter().enumerate() {
                let th = &theta.theta[n][ti];
                ll += toks.iter().map(|&w| phi.mixture(th, w as usize).ln()).sum::<f64>();
            }
        }
        ll
    }

    /// Final filter pass with the last decays, then packages the model.
    pub fn finish(mut self) -> Model {
        self.refresh_filter();
        Model {
            vocabulary_fingerprint: self.corpus.vocabulary().fingerprint(),
            users: self.corpus.users().iter().map(|u| u.id.clone()).collect(),
            step_tokens: self
                .corpus
                .users()
                .iter()
                .map(|u| u.steps.iter().map(|s| s.len() as u32).collect())
                .collect(),
            config: self.config,
            params: self.params,
            dynamics: self.dynamics,
            topic_items: self.state.xi,
            trace: self.trace,
        }
    }
}

/// Runs `config.iterations` sweeps and returns the trained model.
pub fn run_inference(corpus: &Corpus, config: &ModelConfig) -> Result<Model> {
    run_inference_with(corpus, config, |_| {})
}

/// Like [`run_inference`], calling `observe` after every sweep.
pub fn run_inference_with<F>(corpus: &Corpus, config: &ModelConfig, mut observe: F) -> Result<Model>
where
    F: FnMut(&Inference<'_>),
{
    let mut inf = Inference::new(corpus, config.clone())?;
    for _ in 0..config.iterations {
        inf.sweep()?;
        observe(&inf);
    }
    Ok(inf.finish())
}
