//! Decay estimation for the diagonal dynamics matrix.
//!
//! For one user and one transition `t-1 -> t`, the decay vector `mu` maps
//! the previous posterior concentration to the current prior. The fitted
//! `mu` minimizes
//!
//! ```text
//! L(mu) = sum_k p_k (log p_k - log q_k)
//! p_k   = (mu_k x_k + psi_k + alpha) / (sum(mu * x) + sum(psi) + K alpha)
//! q_k   = (mu_k x_k + alpha)          / (sum(mu * x) + K alpha)
//! ```
//!
//! over the box `[0, 1]^K` by projected gradient descent with a backtracking
//! line search.

use serde::{Deserialize, Serialize};

/// Inputs of one transition's objective.
#[derive(Clone, Debug, PartialEq)]
pub struct KlContext {
    /// Posterior concentration at the previous step, `x_{t-1|t-1}`.
    pub x_post_prev: Vec<f64>,
    /// Topic counts at the current step.
    pub psi: Vec<f64>,
    pub alpha: f64,
    /// Current decay entries, one per topic.
    pub mu: Vec<f64>,
}

impl KlContext {
    pub fn new(x_post_prev: Vec<f64>, psi: Vec<f64>, alpha: f64, mu: Vec<f64>) -> Self {
        debug_assert_eq!(x_post_prev.len(), psi.len());
        debug_assert_eq!(x_post_prev.len(), mu.len());
        KlContext {
            x_post_prev,
            psi,
            alpha,
            mu,
        }
    }

    pub fn topics(&self) -> usize {
        self.mu.len()
    }

    pub fn with_mu(&self, mu: Vec<f64>) -> Self {
        KlContext { mu, ..self.clone() }
    }

    fn propagated(&self) -> impl Iterator<Item = f64> + '_ {
        self.mu.iter().zip(&self.x_post_prev).map(|(m, x)| m * x)
    }

    /// Expected posterior topic distribution `E(theta_{t|t})`.
    pub fn expected_posterior(&self) -> Vec<f64> {
        let k = self.topics() as f64;
        let denom = self.propagated().sum::<f64>() + self.psi.iter().sum::<f64>() + k * self.alpha;
        self.propagated()
            .zip(&self.psi)
            .map(|(a, p)| (a + p + self.alpha) / denom)
            .collect()
    }

    /// Expected prior topic distribution `E(theta_{t|t-1})`.
    pub fn expected_prior(&self) -> Vec<f64> {
        let k = self.topics() as f64;
        let denom = self.propagated().sum::<f64>() + k * self.alpha;
        self.propagated().map(|a| (a + self.alpha) / denom).collect()
    }
}

/// Divergence of the expected prior from the expected posterior.
pub fn kl_objective(ctx: &KlContext) -> f64 {
    let p = ctx.expected_posterior();
    let q = ctx.expected_prior();
    let kl: f64 = p.iter().zip(&q).map(|(p, q)| p * (p.ln() - q.ln())).sum();
    // rounding can leave -1e-17 when p == q
    kl.max(0.0)
}

/// Exact partial derivatives of [`kl_objective`] with respect to each `mu_k`.
///
/// With `a = mu * x`, `D_p` and `D_q` the posterior and prior normalizers
/// and `r_k = log(p_k / q_k)`:
///
/// ```text
/// dL/dmu_k = x_k * [ (r_k - L - 1 - psi_k / (a_k + alpha)) / D_p + 1 / D_q ]
/// ```
///
/// with `p_k / (a_k + alpha)` expanded so that `psi = 0` gives exactly zero.
/// The term `-L / D_p` and the `1 / D_q` term come from every topic's
/// probabilities sharing the normalizers.
pub fn kl_gradient(ctx: &KlContext) -> Vec<f64> {
    let k = ctx.topics() as f64;
    let a: Vec<f64> = ctx.propagated().collect();
    let sum_a: f64 = a.iter().sum();
    let d_post = sum_a + ctx.psi.iter().sum::<f64>() + k * ctx.alpha;
    let d_prior = sum_a + k * ctx.alpha;
    let p = ctx.expected_posterior();
    let q = ctx.expected_prior();
    let r: Vec<f64> = p.iter().zip(&q).map(|(p, q)| p.ln() - q.ln()).collect();
    let kl: f64 = p.iter().zip(&r).map(|(p, r)| p * r).sum();

    ctx.x_post_prev
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let own = ctx.psi[j] / (a[j] + ctx.alpha);
            x * ((r[j] - kl - 1.0 - own) / d_post + 1.0 / d_prior)
        })
        .collect()
}

/// Per-topic terms of the published closed-form gradient, evaluated verbatim.
///
/// Each component treats the decay as a single scalar shared by all topics
/// (`A = mu I`), so the vector is not the gradient with respect to
/// independent `mu_k`. When every `mu_k` is equal, the sum of the components
/// equals the directional derivative of [`kl_objective`] along the all-ones
/// direction, which is how the tests pin it down. Inference uses
/// [`kl_gradient`].
pub fn appendix_gradient(ctx: &KlContext) -> Vec<f64> {
    let k = ctx.topics() as f64;
    let sum_x: f64 = ctx.x_post_prev.iter().sum();
    let sum_psi: f64 = ctx.psi.iter().sum();
    let sum_a: f64 = ctx.propagated().sum();
    let d_post = sum_a + sum_psi + k * ctx.alpha;
    let d_prior = sum_a + k * ctx.alpha;
    let p = ctx.expected_posterior();
    let q = ctx.expected_prior();

    (0..ctx.topics())
        .map(|j| {
            let x = ctx.x_post_prev[j];
            let dp = (x * (sum_psi + k * ctx.alpha) - sum_x * (ctx.psi[j] + ctx.alpha)) / (d_post * d_post);
            let dlog_p = dp / p[j];
            let dlog_q = x / (ctx.mu[j] * x + ctx.alpha) - sum_x / d_prior;
            dp * (p[j] / q[j]).ln() + p[j] * (dlog_p - dlog_q)
        })
        .collect()
}

/// Controls for [`update_dynamics`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    /// Initial step of every line search (or the fixed step without it).
    pub learn_rate: f64,
    pub max_steps: usize,
    /// Stop once the largest coordinate change falls below this.
    pub tolerance: f64,
    pub backtracking: bool,
    /// Constant starting points tried in addition to the warm start. The
    /// objective is not convex in `mu` and typically has a local minimum on
    /// the `mu = 1` face, so a run started there alone never discovers decay.
    #[serde(default = "default_extra_starts")]
    pub extra_starts: Vec<f64>,
}

fn default_extra_starts() -> Vec<f64> {
    vec![0.0]
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            learn_rate: 0.1,
            max_steps: 100,
            tolerance: 1e-6,
            backtracking: true,
            extra_starts: default_extra_starts(),
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DescentOutcome {
    pub mu: Vec<f64>,
    /// Objective before the first step and after each accepted step.
    pub objective: Vec<f64>,
    pub steps: usize,
}

fn project(mu: &[f64], grad: &[f64], step: f64) -> Vec<f64> {
    mu.iter()
        .zip(grad)
        .map(|(m, g)| (m - step * g).clamp(0.0, 1.0))
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Minimizes [`kl_objective`] over `[0, 1]^K`.
///
/// Runs [`projected_descent`] from `ctx.mu` and from each constant vector in
/// `opts.extra_starts`, keeping the run with the lowest final objective
/// (the warm start wins ties). The result is never worse than `ctx.mu`.
pub fn update_dynamics(ctx: &KlContext, opts: &DescentOptions) -> DescentOutcome {
    let mut best = projected_descent(ctx, opts);
    for &start in &opts.extra_starts {
        let run = projected_descent(&ctx.with_mu(vec![start; ctx.topics()]), opts);
        if run.final_objective() < best.final_objective() {
            best = run;
        }
    }
    best
}

impl DescentOutcome {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("trace holds the starting value")
    }
}

/// Projected gradient descent on [`kl_objective`] from `ctx.mu`.
///
/// With backtracking, each step halves the trial step size until the
/// projected Armijo condition `f(mu+) <= f(mu) - c * g . (mu - mu+)` holds,
/// so the objective never increases. The returned `mu` always lies in
/// `[0, 1]^K`.
pub fn projected_descent(ctx: &KlContext, opts: &DescentOptions) -> DescentOutcome {
    let mut mu: Vec<f64> = ctx.mu.iter().map(|m| m.clamp(0.0, 1.0)).collect();
    let mut current = ctx.with_mu(mu.clone());
    let mut f = kl_objective(&current);
    let mut trace = vec![f];
    let mut steps = 0;

    while steps < opts.max_steps {
        let grad = kl_gradient(&current);
        let next = if opts.backtracking {
            let mut step = opts.learn_rate;
            let mut accepted = None;
            while step >= MIN_STEP {
                let cand = project(&mu, &grad, step);
                let decrease: f64 = grad
                    .iter()
                    .zip(mu.iter().zip(&cand))
                    .map(|(g, (m, c))| g * (m - c))
                    .sum();
                let f_cand = kl_objective(&current.with_mu(cand.clone()));
                if f_cand <= f - ARMIJO_C * decrease {
                    accepted = Some((cand, f_cand));
                    break;
                }
                step *= 0.5;
            }
            accepted
        } else {
            let cand = project(&mu, &grad, opts.learn_rate);
            let f_cand = kl_objective(&current.with_mu(cand.clone()));
            Some((cand, f_cand))
        };

        let Some((cand, f_cand)) = next else { break };
        let change = max_abs_diff(&mu, &cand);
        mu = cand;
        current = ctx.with_mu(mu.clone());
        f = f_cand;
        trace.push(f);
        steps += 1;
        if change < opts.tolerance {
            break;
        }
    }

    DescentOutcome {
        mu,
        objective: trace,
        steps,
    }
}

/// Sum of per-transition objectives for one user.
///
/// `x_post[t]` and `psi[t]` are indexed by 0-based time step; `mu[t]` is the
/// decay of transition `t -> t + 1`. Transitions run over `t = 2..=T`; with
/// fewer than two steps the sum is empty.
pub fn total_objective(x_post: &[Vec<f64>], psi: &[Vec<f64>], mu: &[Vec<f64>], alpha: f64) -> f64 {
    let steps = x_post.len().min(psi.len());
    (1..steps)
        .map(|t| {
            kl_objective(&KlContext::new(
                x_post[t - 1].clone(),
                psi[t].clone(),
                alpha,
                mu[t - 1].clone(),
            ))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent evaluation: central differences of the objective.
    fn fd_gradient(ctx: &KlContext, h: f64) -> Vec<f64> {
        (0..ctx.topics())
            .map(|k| {
                let mut up = ctx.mu.clone();
                let mut dn = ctx.mu.clone();
                up[k] += h;
                dn[k] -= h;
                (kl_objective(&ctx.with_mu(up)) - kl_objective(&ctx.with_mu(dn))) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn fixture_value() {
        // p = (6.5/9, 2.5/9), q = (1/2, 1/2), evaluated by hand
        let ctx = KlContext::new(vec![2.0, 2.0], vec![4.0, 0.0], 0.5, vec![1.0, 1.0]);
        assert!((kl_objective(&ctx) - 0.10230493428436283).abs() < 1e-15);
    }

    #[test]
    fn zero_counts_give_zero_objective_and_gradient() {
        let ctx = KlContext::new(vec![3.0, 1.0, 7.0], vec![0.0; 3], 0.5, vec![0.3, 0.9, 1.0]);
        assert_eq!(kl_objective(&ctx), 0.0);
        assert!(kl_gradient(&ctx).iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn empty_history_gives_zero_gradient() {
        let ctx = KlContext::new(vec![0.0; 3], vec![5.0, 0.0, 1.0], 0.1, vec![0.5; 3]);
        assert_eq!(kl_gradient(&ctx), vec![0.0; 3]);
    }

    #[test]
    fn appendix_sum_is_shared_decay_derivative() {
        let ctx = KlContext::new(vec![4.0, 1.0, 2.0], vec![0.0, 6.0, 1.0], 0.5, vec![0.6; 3]);
        let h = 1e-6;
        let shifted = |d: f64| kl_objective(&ctx.with_mu(vec![0.6 + d; 3]));
        let directional = (shifted(h) - shifted(-h)) / (2.0 * h);
        let appendix: f64 = appendix_gradient(&ctx).iter().sum();
        assert!((appendix - directional).abs() < 1e-8, "{appendix} vs {directional}");
        let exact: f64 = kl_gradient(&ctx).iter().sum();
        assert!((exact - directional).abs() < 1e-8);
    }

    #[test]
    fn appendix_differs_from_per_topic_gradient() {
        let ctx = KlContext::new(vec![4.0, 1.0, 2.0], vec![0.0, 6.0, 1.0], 0.5, vec![0.6; 3]);
        let a = appendix_gradient(&ctx);
        let e = kl_gradient(&ctx);
        assert!(a.iter().zip(&e).any(|(a, e)| (a - e).abs() > 1e-3));
    }

    #[test]
    fn zero_gradient_leaves_mu() {
        let ctx = KlContext::new(vec![2.0, 5.0], vec![0.0, 0.0], 0.5, vec![1.0, 1.0]);
        let out = update_dynamics(&ctx, &DescentOptions::default());
        assert_eq!(out.mu, vec![1.0, 1.0]);
    }

    #[test]
    fn stale_topics_decay_monotonically() {
        // flat history, new activity concentrated on topic 0
        let ctx = KlContext::new(vec![5.0, 5.0, 5.0], vec![6.0, 0.0, 0.0], 0.5, vec![1.0; 3]);
        let out = update_dynamics(&ctx, &DescentOptions::default());
        assert!(out.mu[1] < 1.0 && out.mu[2] < 1.0, "{:?}", out.mu);
        assert!(out.objective.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.final_objective() < kl_objective(&ctx));
    }

    #[test]
    fn warm_start_alone_stays_on_the_unit_face() {
        let ctx = KlContext::new(vec![5.0, 5.0, 5.0], vec![6.0, 0.0, 0.0], 0.5, vec![1.0; 3]);
        let opts = DescentOptions {
            extra_starts: vec![],
            ..DescentOptions::default()
        };
        assert_eq!(update_dynamics(&ctx, &opts).mu, vec![1.0; 3]);
    }

    #[test]
    fn projection_clamps_to_zero() {
        // large step pushes mu_0 far below zero
        let ctx = KlContext::new(vec![6.0, 0.5], vec![0.0, 30.0], 0.5, vec![0.01, 1.0]);
        let g = kl_gradient(&ctx);
        assert!(g[0] > 0.0);
        let opts = DescentOptions {
            learn_rate: 10.0,
            max_steps: 1,
            backtracking: false,
            ..DescentOptions::default()
        };
        assert_eq!(update_dynamics(&ctx, &opts).mu[0], 0.0);
    }

    #[test]
    fn total_objective_cases() {
        let x = vec![vec![2.0, 1.0], vec![3.0, 4.0], vec![1.0, 1.0]];
        let psi = vec![vec![2.0, 1.0], vec![1.0, 3.0], vec![0.0, 0.0]];
        let mu = vec![vec![0.5, 0.7], vec![0.2, 0.9]];
        assert_eq!(total_objective(&x[..1], &psi[..1], &[], 0.5), 0.0);
        let first = kl_objective(&KlContext::new(x[0].clone(), psi[1].clone(), 0.5, mu[0].clone()));
        assert_eq!(total_objective(&x, &psi, &mu, 0.5), first);
    }

    fn context_strategy() -> impl Strategy<Value = KlContext> {
        (2usize..=5).prop_flat_map(|k| {
            (
                proptest::collection::vec(0u32..8, k),
                proptest::collection::vec(0u32..8, k),
                proptest::sample::select(vec![0.1, 0.5, 1.0]),
                proptest::collection::vec(0.05f64..0.95, k),
            )
                .prop_map(|(x, psi, alpha, mu)| {
                    KlContext::new(
                        x.into_iter().map(f64::from).collect(),
                        psi.into_iter().map(f64::from).collect(),
                        alpha,
                        mu,
                    )
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn objective_nonnegative(ctx in context_strategy()) {
            prop_assert!(kl_objective(&ctx) >= 0.0);
        }

        #[test]
        fn gradient_matches_finite_differences(ctx in context_strategy()) {
            let g = kl_gradient(&ctx);
            let fd = fd_gradient(&ctx, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                let err = (a - b).abs();
                prop_assert!(err <= 1e-9 || err / b.abs().max(a.abs()) < 1e-5, "{:?} vs {:?}", g, fd);
            }
        }

        #[test]
        fn descent_stays_in_box_and_never_increases(ctx in context_strategy()) {
            let out = update_dynamics(&ctx, &DescentOptions::default());
            prop_assert!(out.mu.iter().all(|m| (0.0..=1.0).contains(m)));
            prop_assert!(out.objective.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(out.final_objective() <= kl_objective(&ctx));
        }

        #[test]
        fn total_is_sum_of_transitions(a in context_strategy(), b in context_strategy()) {
            let k = a.topics().min(b.topics());
            let cut = |v: &[f64]| v[..k].to_vec();
            let x = vec![cut(&a.x_post_prev), cut(&b.x_post_prev), vec![0.0; k]];
            let psi = vec![vec![0.0; k], cut(&a.psi), cut(&b.psi)];
            let mu = vec![cut(&a.mu), cut(&b.mu)];
            let parts = kl_objective(&KlContext::new(x[0].clone(), psi[1].clone(), a.alpha, mu[0].clone()))
                + kl_objective(&KlContext::new(x[1].clone(), psi[2].clone(), a.alpha, mu[1].clone()));
            prop_assert_eq!(total_objective(&x, &psi, &mu, a.alpha), parts);
        }
    }
}
