use rand::Rng;

use crate::error::{Error, Result};

use super::state::TopicItemCounts;

/// Which smoothing mass normalizes the topic-item factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemNormalizer {
    /// `sum_m xi[k][m] + M beta`, the collapsed conditional.
    Vocabulary,
    /// `sum_m xi[k][m] + K beta`, as printed in the original kernel.
    Topics,
}

#[derive(Clone, Copy, Debug)]
pub struct SamplerParams {
    pub alpha: f64,
    pub beta: f64,
    pub normalizer: ItemNormalizer,
}

/// Unnormalized conditional weights for item `m`:
/// `(prior_k + psi_k + alpha) (xi[k][m] + beta) / (xi[k] + S beta)`.
pub fn topic_weights(m: usize, prior_plus_psi: &[f64], xi: &TopicItemCounts, params: &SamplerParams, out: &mut [f64]) {
    let smoothing = match params.normalizer {
        ItemNormalizer::Vocabulary => xi.items() as f64,
        ItemNormalizer::Topics => xi.topics() as f64,
    } * params.beta;
    for (k, w) in out.iter_mut().enumerate() {
        let item = (f64::from(xi.get(k, m)) + params.beta) / (xi.row_sum(k) as f64 + smoothing);
        *w = (prior_plus_psi[k] + params.alpha) * item;
    }
}

/// Draws a topic for item `m` from the normalized conditional. The current
/// token must already be removed from the counts.
pub fn sample_topic<R: Rng + ?Sized>(
    m: usize,
    prior_plus_psi: &[f64],
    xi: &TopicItemCounts,
    params: &SamplerParams,
    weights: &mut [f64],
    rng: &mut R,
) -> Result<usize> {
    topic_weights(m, prior_plus_psi, xi, params, weights);
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numeric(format!("degenerate sampling weights (sum {total})")));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in weights.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    // u landed in the rounding gap above the final partial sum
    Ok(weights.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}
