use crate::error::{Error, Result};

/// Prior for the next step: `x_{t|t-1} = diag(mu) x_{t-1|t-1}`.
pub fn kalman_predict(mu_prev: &[f64], x_post_prev: &[f64]) -> Vec<f64> {
    mu_prev.iter().zip(x_post_prev).map(|(m, x)| m * x).collect()
}

/// Posterior after absorbing the step's topic counts: `x_{t|t} = x_{t|t-1} + psi_t`.
pub fn kalman_update(x_prior: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
    if x_prior.len() != psi.len() {
        return Err(Error::Dimension {
            expected: x_prior.len(),
            got: psi.len(),
        });
    }
    Ok(x_prior.iter().zip(psi).map(|(x, p)| x + p).collect())
}

/// `(v_k + alpha) / (sum(v) + K alpha)`.
pub fn smoothed_distribution(v: &[f64], alpha: f64) -> Vec<f64> {
    let denom = v.iter().sum::<f64>() + v.len() as f64 * alpha;
    v.iter().map(|x| (x + alpha) / denom).collect()
}

/// Expected topic distribution under the posterior concentration.
pub fn expected_posterior(x_post: &[f64], alpha: f64) -> Vec<f64> {
    smoothed_distribution(x_post, alpha)
}

/// Expected topic distribution under the prior concentration.
pub fn expected_prior(x_prior: &[f64], alpha: f64) -> Vec<f64> {
    smoothed_distribution(x_prior, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_cases() {
        assert_eq!(kalman_predict(&[1.0, 1.0], &[3.0, 5.0]), vec![3.0, 5.0]);
        assert_eq!(kalman_predict(&[0.0, 0.0], &[3.0, 5.0]), vec![0.0, 0.0]);
        assert_eq!(kalman_predict(&[0.5, 0.5], &[2.0, 4.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn update_cases() {
        assert_eq!(kalman_update(&[1.0, 2.0], &[3.0, 0.0]).unwrap(), vec![4.0, 2.0]);
        assert_eq!(kalman_update(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(
            kalman_update(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn identity_filter_telescopes() {
        let psi = [[2.0, 0.0, 1.0], [0.0, 0.0, 0.0], [4.0, 1.0, 3.0], [1.0, 1.0, 1.0]];
        let mut post = vec![0.0; 3];
        for (t, p) in psi.iter().enumerate() {
            post = kalman_update(&kalman_predict(&[1.0; 3], &post), p).unwrap();
            let direct: Vec<f64> = (0..3).map(|k| psi[..=t].iter().map(|s| s[k]).sum()).collect();
            assert_eq!(post, direct);
        }
    }

    #[test]
    fn expectations() {
        let u = expected_posterior(&[0.0; 3], 0.5);
        assert!(u.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(expected_prior(&[1.0, 1.0], 1.0), vec![0.5, 0.5]);
        let v = expected_posterior(&[3.0, 1.0], 0.5);
        assert!((v[0] - 0.7).abs() < 1e-15 && (v[1] - 0.3).abs() < 1e-15);
    }
}
