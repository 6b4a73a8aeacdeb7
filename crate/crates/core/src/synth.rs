//! Generative oracles: corpora sampled from planted model parameters, and
//! lag-coupled series pairs with a known causal direction.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, UserTokens, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Planted parameters of the generative process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Topic-item distributions, `K x M`.
    pub phi_true: Vec<Vec<f64>>,
    /// Decays `[n][t - 1][k]` of transition `t -> t + 1`.
    pub mu_true: Vec<Vec<Vec<f64>>>,
    /// Initial topic mix of each user.
    pub theta_seed: Vec<Vec<f64>>,
    pub tokens_per_step: usize,
    /// Concentration placed on `theta_seed` as the first prior.
    pub seed_concentration: f64,
    /// Smoothing added to every Dirichlet draw.
    pub alpha: f64,
}

fn is_probability(v: &[f64]) -> bool {
    v.iter().all(|&p| p >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

impl GroundTruth {
    pub fn topics(&self) -> usize {
        self.phi_true.len()
    }

    pub fn items(&self) -> usize {
        self.phi_true.first().map_or(0, Vec::len)
    }

    pub fn users(&self) -> usize {
        self.theta_seed.len()
    }

    pub fn validate(&self, users: usize, steps: usize) -> Result<()> {
        let k = self.topics();
        let fail = |m: &str| Err(Error::InvalidConfig(format!("ground truth: {m}")));
        if k == 0 || self.items() == 0 {
            return fail("empty topic-item matrix");
        }
        if !self
            .phi_true
            .iter()
            .all(|r| r.len() == self.items() && is_probability(r))
        {
            return fail("phi rows must be probability vectors");
        }
        if self.theta_seed.len() != users || !self.theta_seed.iter().all(|t| t.len() == k && is_probability(t)) {
            return fail("theta_seed must hold one probability vector per user");
        }
        if self.mu_true.len() != users
            || self.mu_true.iter().any(|u| {
                u.len() != steps.saturating_sub(1)
                    || u.iter()
                        .any(|m| m.len() != k || m.iter().any(|v| !(0.0..=1.0).contains(v)))
            })
        {
            return fail("mu_true must be [users][steps - 1][topics] within [0, 1]");
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return fail("alpha must be > 0");
        }
        Ok(())
    }
}

/// Topic `k` spreads its mass uniformly over its own block of `items / topics`
/// consecutive items; blocks are disjoint.
pub fn block_phi(topics: usize, items: usize) -> Vec<Vec<f64>> {
    let width = (items / topics).max(1);
    (0..topics)
        .map(|k| {
            let lo = k * width;
            let hi = if k + 1 == topics { items } else { lo + width };
            (0..items)
                .map(|m| {
                    if (lo..hi).contains(&m) {
                        1.0 / (hi - lo) as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Draws a Dirichlet vector with concentrations `conc` via normalized gammas.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, conc: &[f64]) -> Vec<f64> {
    let mut draws: Vec<f64> = conc
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|d| *d /= total);
        draws
    } else {
        // every shape tiny enough to underflow; fall back to the mode-free mean
        let s: f64 = conc.iter().sum();
        conc.iter().map(|a| a / s).collect()
    }
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Desk-scale ground truth with block topics, random seed mixes and a decay
/// chosen per user by `decay_of(user)`.
pub fn planted_truth<F>(
    users: usize,
    steps: usize,
    topics: usize,
    items: usize,
    tokens_per_step: usize,
    seed: u64,
    decay_of: F,
) -> GroundTruth
where
    F: Fn(usize) -> f64,
{
    let mut rng = rng::rng_for(seed, stream::SYNTH_TRUTH);
    let theta_seed = (0..users).map(|_| dirichlet(&mut rng, &vec![1.0; topics])).collect();
    let mu_true = (0..users)
        .map(|n| vec![vec![decay_of(n).clamp(0.0, 1.0); topics]; steps.saturating_sub(1)])
        .collect();
    GroundTruth {
        phi_true: block_phi(topics, items),
        mu_true,
        theta_seed,
        tokens_per_step,
        seed_concentration: tokens_per_step as f64,
        alpha: 0.5,
    }
}

/// Output of [`generate_corpus`].
#[derive(Clone, Debug)]
pub struct Generated {
    pub corpus: Corpus,
    pub truth: GroundTruth,
    /// Topic mix drawn for every user and step, `[n][t - 1]`.
    pub theta: Vec<Vec<Vec<f64>>>,
}

/// Forward simulation of the model: propagate Dirichlet parameters with the
/// planted decays, draw a topic mix, then draw topics and items.
///
/// Items are named `item{m}` and users `user{n}`; the vocabulary holds all
/// `M` items in index order.
pub fn generate_corpus(truth: &GroundTruth, users: usize, steps: usize, seed: u64) -> Result<Generated> {
    truth.validate(users, steps)?;
    let k = truth.topics();
    let mut rng = rng::rng_for(seed, stream::SYNTH_CORPUS);
    let mut out_users = Vec::with_capacity(users);
    let mut thetas = Vec::with_capacity(users);

    for n in 0..users {
        let mut prior: Vec<f64> = truth.theta_seed[n]
            .iter()
            .map(|p| p * truth.seed_concentration)
            .collect();
        let mut user_steps = Vec::with_capacity(steps);
        let mut user_theta = Vec::with_capacity(steps);
        for t in 0..steps {
            let conc: Vec<f64> = prior.iter().map(|x| x + truth.alpha).collect();
            let theta = dirichlet(&mut rng, &conc);
            let mut psi = vec![0.0; k];
            let tokens: Vec<u32> = (0..truth.tokens_per_step)
                .map(|_| {
                    let z = categorical(&mut rng, &theta);
                    psi[z] += 1.0;
                    categorical(&mut rng, &truth.phi_true[z]) as u32
                })
                .collect();
            let post: Vec<f64> = prior.iter().zip(&psi).map(|(x, p)| x + p).collect();
            if t + 1 < steps {
                prior = post.iter().zip(&truth.mu_true[n][t]).map(|(x, m)| x * m).collect();
            }
            user_steps.push(tokens);
            user_theta.push(theta);
        }
        out_users.push(UserTokens {
            id: format!("user{n}"),
            steps: user_steps,
        });
        thetas.push(user_theta);
    }

    let vocabulary = Vocabulary::from_items((0..truth.items()).map(|m| format!("item{m}")).collect())?;
    Ok(Generated {
        corpus: Corpus::from_parts(out_users, vocabulary)?,
        truth: truth.clone(),
        theta: thetas,
    })
}

/// Writes a corpus in the adoption-event format, one line per distinct
/// (user, step, item) with its count, items in first-use order per step.
pub fn write_corpus_events<W: Write>(mut out: W, corpus: &Corpus) -> Result<()> {
    for user in corpus.users() {
        for (ti, toks) in user.steps.iter().enumerate() {
            let mut order: Vec<u32> = Vec::new();
            let mut counts: Vec<u32> = Vec::new();
            for &w in toks {
                match order.iter().position(|&o| o == w) {
                    Some(i) => counts[i] += 1,
                    None => {
                        order.push(w);
                        counts.push(1);
                    }
                }
            }
            for (w, c) in order.iter().zip(counts) {
                let item = corpus.vocabulary().decode(*w).expect("index within vocabulary");
                writeln!(out, "{}\t{}\t{}\t{}", user.id, ti + 1, item, c)?;
            }
        }
    }
    Ok(())
}

/// Parameters of a planted `i -> j` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalPairSpec {
    pub lag: usize,
    /// Scale of the uniform perturbation added to `j` before renormalizing.
    pub noise: f64,
    /// Weight of `i_{t - lag}` in `j_t`; `1 - rho` goes to `j_{t - 1}`.
    pub rho: f64,
    /// Weight of `i_{t - 1}` in `i`'s own autoregression.
    pub persistence: f64,
    pub steps: usize,
    pub topics: usize,
}

impl Default for CausalPairSpec {
    fn default() -> Self {
        CausalPairSpec {
            lag: 1,
            noise: 0.1,
            rho: 0.8,
            persistence: 0.5,
            steps: 16,
            topics: 5,
        }
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.gen::<f64>()).collect()
}

/// Simplex-valued AR(1): `s_t = normalize(a s_{t-1} + (1 - a) u_t)`.
fn autonomous_series<R: Rng + ?Sized>(rng: &mut R, steps: usize, topics: usize, persistence: f64) -> Vec<Vec<f64>> {
    let mut s = vec![normalize(uniform_vec(rng, topics).iter().map(|u| u + 1e-3).collect())];
    while s.len() < steps {
        let u = uniform_vec(rng, topics);
        let prev = s.last().expect("nonempty");
        s.push(normalize(
            prev.iter()
                .zip(&u)
                .map(|(p, u)| persistence * p + (1.0 - persistence) * u)
                .collect(),
        ));
    }
    s
}

/// Two `[t][k]` topic series, influencer first.
pub type SeriesPair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Returns `(i, j)` where `i` is autonomous and
/// `j_t = normalize(rho i_{t-lag} + (1 - rho) j_{t-1} + noise e_t)`.
pub fn generate_causal_pair(spec: &CausalPairSpec, seed: u64) -> Result<SeriesPair> {
    if spec.lag < 1 || spec.steps <= spec.lag + 8 || spec.topics < 1 {
        return Err(Error::InvalidConfig(format!(
            "causal pair needs lag >= 1 and steps > lag + 8 (lag {}, steps {})",
            spec.lag, spec.steps
        )));
    }
    let mut rng = rng::rng_for(seed, stream::SYNTH_PAIR);
    let i = autonomous_series(&mut rng, spec.steps, spec.topics, spec.persistence);
    let mut j: Vec<Vec<f64>> = (0..spec.lag)
        .map(|_| normalize(uniform_vec(&mut rng, spec.topics).iter().map(|u| u + 1e-3).collect()))
        .collect();
    for t in spec.lag..spec.steps {
        let e = uniform_vec(&mut rng, spec.topics);
        let prev = &j[t - 1];
        let next: Vec<f64> = (0..spec.topics)
            .map(|c| spec.rho * i[t - spec.lag][c] + (1.0 - spec.rho) * prev[c] + spec.noise * e[c])
            .collect();
        j.push(if spec.noise == 0.0 && spec.rho == 1.0 {
            i[t - spec.lag].clone()
        } else {
            normalize(next)
        });
    }
    Ok((i, j))
}

/// Two independent series from the autonomous process, for null checks.
pub fn generate_independent_pair(spec: &CausalPairSpec, seed: u64) -> SeriesPair {
    let mut rng = rng::rng_for(seed, stream::SYNTH_PAIR);
    let a = autonomous_series(&mut rng, spec.steps, spec.topics, spec.persistence);
    let b = autonomous_series(&mut rng, spec.steps, spec.topics, spec.persistence);
    (a, b)
}
