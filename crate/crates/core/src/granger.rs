//! Temporal social correlation between two users' topic series.
//!
//! For a pivot `tau`, the window `[tau - W, tau + L]` supplies `L + 1`
//! regression targets `j_t`, `t = tau..=tau + L`, each a K-vector. The
//! restricted model predicts `j_t` from `j`'s own lags,
//!
//! ```text
//! j_t ~ eta_0 + sum_w eta_w j_{t-w}
//! ```
//!
//! with a vector intercept and one scalar per lag. The unrestricted model
//! keeps the restricted `eta` fixed and adds `sum_w lambda_w i_{t-w}`. Both
//! are fitted by cyclic coordinate descent with exact one-dimensional
//! updates; the F statistic compares their residual sums of squares.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: usize = 4;
pub const DEFAULT_LOOKAHEAD: usize = 4;

const CD_TOLERANCE: f64 = 1e-10;
const CD_MAX_CYCLES: usize = 10_000;
const TIE_EPS: f64 = 1e-12;

/// The `W + L + 1` steps of both series around a pivot, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesWindow {
    pub i_series: Vec<Vec<f64>>,
    pub j_series: Vec<Vec<f64>>,
    pub tau: usize,
    pub width: usize,
    pub lookahead: usize,
}

impl SeriesWindow {
    /// Cuts the window out of full series where `series[t - 1]` is step `t`.
    pub fn from_series(
        i_full: &[Vec<f64>],
        j_full: &[Vec<f64>],
        tau: usize,
        width: usize,
        lookahead: usize,
    ) -> Result<Self> {
        if width < 1 || lookahead < 1 {
            return Err(Error::InvalidConfig("width and lookahead must be >= 1".into()));
        }
        let needed = width + lookahead + 1;
        let available = i_full.len().min(j_full.len());
        if tau <= width || tau + lookahead > available {
            return Err(Error::InsufficientHistory { needed, available });
        }
        let range = (tau - width - 1)..(tau + lookahead);
        SeriesWindow::new(
            i_full[range.clone()].to_vec(),
            j_full[range].to_vec(),
            tau,
            width,
            lookahead,
        )
    }

    pub fn new(
        i_series: Vec<Vec<f64>>,
        j_series: Vec<Vec<f64>>,
        tau: usize,
        width: usize,
        lookahead: usize,
    ) -> Result<Self> {
        let needed = width + lookahead + 1;
        let available = i_series.len().min(j_series.len());
        if width < 1 || lookahead < 1 {
            return Err(Error::InvalidConfig("width and lookahead must be >= 1".into()));
        }
        if available < needed {
            return Err(Error::InsufficientHistory { needed, available });
        }
        let k = j_series[0].len();
        if let Some(bad) = i_series.iter().chain(&j_series).find(|v| v.len() != k) {
            return Err(Error::Dimension {
                expected: k,
                got: bad.len(),
            });
        }
        Ok(SeriesWindow {
            i_series: i_series[..needed].to_vec(),
            j_series: j_series[..needed].to_vec(),
            tau,
            width,
            lookahead,
        })
    }

    pub fn topics(&self) -> usize {
        self.j_series[0].len()
    }

    /// Same window with the roles of the two users exchanged.
    pub fn swapped(&self) -> Self {
        SeriesWindow {
            i_series: self.j_series.clone(),
            j_series: self.i_series.clone(),
            ..self.clone()
        }
    }

    fn targets(&self) -> std::ops::RangeInclusive<usize> {
        self.width..=self.width + self.lookahead
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionFit {
    /// `eta_0`, one entry per topic.
    pub intercept: Vec<f64>,
    /// `eta_1..eta_W`.
    pub eta: Vec<f64>,
    /// `lambda_1..lambda_W`; empty for the restricted model.
    pub lambda: Vec<f64>,
    pub rss: f64,
    pub cycles: usize,
}

impl RegressionFit {
    /// Prediction for window offset `t` (an index into the window).
    pub fn predict(&self, window: &SeriesWindow, t: usize) -> Vec<f64> {
        (0..window.topics())
            .map(|c| {
                let mut v = self.intercept[c];
                for w in 1..=window.width {
                    v += self.eta[w - 1] * window.j_series[t - w][c];
                    if let Some(l) = self.lambda.get(w - 1) {
                        v += l * window.i_series[t - w][c];
                    }
                }
                v
            })
            .collect()
    }
}

struct Residuals {
    r: Vec<Vec<f64>>,
}

impl Residuals {
    /// Exact coordinate step for a scalar coefficient multiplying the lagged
    /// vectors of `regressor`; returns the new coefficient.
    fn scalar_step(&mut self, regressor: &[Vec<f64>], lag: usize, start: usize, old: f64) -> f64 {
        let mut xx = 0.0;
        let mut xr = 0.0;
        for (o, res) in self.r.iter().enumerate() {
            for (x, e) in regressor[start + o - lag].iter().zip(res) {
                xx += x * x;
                xr += x * e;
            }
        }
        if xx == 0.0 {
            return old;
        }
        let new = old + xr / xx;
        let delta = new - old;
        for (o, res) in self.r.iter_mut().enumerate() {
            for (x, e) in regressor[start + o - lag].iter().zip(res.iter_mut()) {
                *e -= delta * x;
            }
        }
        new
    }
}

/// Fits `eta_0, eta_1..eta_W` to `j`'s own history.
pub fn fit_restricted(window: &SeriesWindow) -> RegressionFit {
    let k = window.topics();
    let start = window.width;
    let mut res = Residuals {
        r: window.targets().map(|t| window.j_series[t].clone()).collect(),
    };
    let rows = res.r.len() as f64;
    let mut intercept = vec![0.0; k];
    let mut eta = vec![0.0; window.width];

    let mut cycles = 0;
    while cycles < CD_MAX_CYCLES {
        cycles += 1;
        let mut change: f64 = 0.0;
        for (c, b) in intercept.iter_mut().enumerate() {
            let delta = res.r.iter().map(|e| e[c]).sum::<f64>() / rows;
            *b += delta;
            for e in res.r.iter_mut() {
                e[c] -= delta;
            }
            change = change.max(delta.abs());
        }
        for w in 1..=window.width {
            let new = res.scalar_step(&window.j_series, w, start, eta[w - 1]);
            change = change.max((new - eta[w - 1]).abs());
            eta[w - 1] = new;
        }
        if change < CD_TOLERANCE {
            break;
        }
    }

    let mut fit = RegressionFit {
        intercept,
        eta,
        lambda: Vec::new(),
        rss: 0.0,
        cycles,
    };
    fit.rss = residual_sum(window, &fit);
    fit
}

/// Residual sum of squares recomputed from scratch.
pub fn residual_sum(window: &SeriesWindow, fit: &RegressionFit) -> f64 {
    window
        .targets()
        .map(|t| {
            let pred = fit.predict(window, t);
            window.j_series[t]
                .iter()
                .zip(pred)
                .map(|(y, p)| (y - p).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Fits only `lambda_1..lambda_W` on top of a fixed restricted fit, starting
/// from `lambda = 0`. The result satisfies `rss <= restricted.rss`.
pub fn fit_unrestricted(window: &SeriesWindow, restricted: &RegressionFit) -> RegressionFit {
    let start = window.width;
    let mut res = Residuals {
        r: window
            .targets()
            .map(|t| {
                let pred = restricted.predict(window, t);
                window.j_series[t].iter().zip(pred).map(|(y, p)| y - p).collect()
            })
            .collect(),
    };
    let mut lambda = vec![0.0; window.width];

    let mut cycles = 0;
    while cycles < CD_MAX_CYCLES {
        cycles += 1;
        let mut change: f64 = 0.0;
        for w in 1..=window.width {
            let new = res.scalar_step(&window.i_series, w, start, lambda[w - 1]);
            change = change.max((new - lambda[w - 1]).abs());
            lambda[w - 1] = new;
        }
        if change < CD_TOLERANCE {
            break;
        }
    }

    let mut fit = RegressionFit {
        intercept: restricted.intercept.clone(),
        eta: restricted.eta.clone(),
        lambda,
        rss: 0.0,
        cycles,
    };
    fit.rss = residual_sum(window, &fit);
    if fit.lambda.iter().all(|&l| l == 0.0) || fit.rss > restricted.rss {
        // lambda = 0 attains the restricted residual exactly
        fit.lambda.iter_mut().for_each(|l| *l = 0.0);
        fit.rss = restricted.rss;
    }
    fit
}

/// Which degrees-of-freedom factor the F statistic uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FStatForm {
    /// `((R1 - R2) / R2) * ((2L - 1) / W)`.
    #[default]
    Compact,
    /// `((R1 - R2) / W) / (R2 / (n - 2W - 1))`, `n` the number of scalar
    /// observations `(L + 1) K`.
    Classical,
}

impl std::str::FromStr for FStatForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(FStatForm::Compact),
            "classical" => Ok(FStatForm::Classical),
            _ => Err(Error::InvalidConfig(format!("unknown F statistic form `{s}`"))),
        }
    }
}

/// `((r1 - r2) / r2) * ((2L - 1) / W)`.
///
/// A perfect unrestricted fit (`r2 == 0`) with `r1 > 0` yields `+inf`;
/// `r1 == r2` yields 0.
pub fn f_stat(r1: f64, r2: f64, width: usize, lookahead: usize) -> f64 {
    let gain = r1 - r2;
    if gain <= 0.0 {
        return 0.0;
    }
    if r2 <= 0.0 {
        return f64::INFINITY;
    }
    (gain / r2) * ((2 * lookahead) as f64 - 1.0) / width as f64
}

pub fn f_stat_classical(r1: f64, r2: f64, width: usize, observations: usize) -> f64 {
    let gain = r1 - r2;
    if gain <= 0.0 {
        return 0.0;
    }
    if r2 <= 0.0 {
        return f64::INFINITY;
    }
    let dof = observations.saturating_sub(2 * width + 1).max(1) as f64;
    (gain / width as f64) / (r2 / dof)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    IToJ,
    JToI,
    Tie,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::IToJ => "i_to_j",
            Direction::JToI => "j_to_i",
            Direction::Tie => "tie",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TscResult {
    /// `TSC(i -> j, tau)`.
    pub f_forward: f64,
    /// `TSC(j -> i, tau)`.
    pub f_backward: f64,
    pub direction: Direction,
}

impl TscResult {
    pub fn from_stats(f_forward: f64, f_backward: f64) -> Self {
        let direction = if f_forward == f_backward || (f_forward - f_backward).abs() < TIE_EPS {
            Direction::Tie
        } else if f_forward > f_backward {
            Direction::IToJ
        } else {
            Direction::JToI
        };
        TscResult {
            f_forward,
            f_backward,
            direction,
        }
    }

    pub fn perfect_fit(&self) -> bool {
        self.f_forward.is_infinite() || self.f_backward.is_infinite()
    }
}

/// F statistic for "the window's `i` helps predict its `j`".
pub fn directed_stat(window: &SeriesWindow, form: FStatForm) -> f64 {
    let restricted = fit_restricted(window);
    let unrestricted = fit_unrestricted(window, &restricted);
    assert!(unrestricted.rss <= restricted.rss, "nested fit increased the residual");
    match form {
        FStatForm::Compact => f_stat(restricted.rss, unrestricted.rss, window.width, window.lookahead),
        FStatForm::Classical => f_stat_classical(
            restricted.rss,
            unrestricted.rss,
            window.width,
            (window.lookahead + 1) * window.topics(),
        ),
    }
}

/// Both directions of temporal social correlation at one pivot.
pub fn tsc_window(window: &SeriesWindow, form: FStatForm) -> TscResult {
    let forward = directed_stat(window, form);
    let backward = directed_stat(&window.swapped(), form);
    TscResult::from_stats(forward, backward)
}

/// [`tsc_window`] on full series (`series[t - 1]` is step `t`).
pub fn tsc_pair(
    i_full: &[Vec<f64>],
    j_full: &[Vec<f64>],
    tau: usize,
    width: usize,
    lookahead: usize,
    form: FStatForm,
) -> Result<TscResult> {
    let window = SeriesWindow::from_series(i_full, j_full, tau, width, lookahead)?;
    Ok(tsc_window(&window, form))
}

/// A user's topic series with gaps filled from the last active step.
#[derive(Clone, Debug, PartialEq)]
pub struct FilledSeries {
    /// `values[t - 1]`; `None` before the first active step.
    pub values: Vec<Option<Vec<f64>>>,
    pub carried: Vec<bool>,
}

impl FilledSeries {
    /// `theta[t - 1]` and `active[t - 1]` cover the user's own steps; steps up
    /// to `horizon` beyond them are carried forward as well.
    pub fn build(theta: &[Vec<f64>], active: &[bool], horizon: usize) -> Self {
        let mut values = Vec::with_capacity(horizon);
        let mut carried = Vec::with_capacity(horizon);
        let mut last: Option<Vec<f64>> = None;
        for t in 0..horizon.max(theta.len()) {
            if t < theta.len() && active.get(t).copied().unwrap_or(false) {
                last = Some(theta[t].clone());
                values.push(last.clone());
                carried.push(false);
            } else {
                values.push(last.clone());
                carried.push(last.is_some());
            }
        }
        FilledSeries { values, carried }
    }

    /// Window `[tau - W, tau + L]` as dense vectors, plus whether any step in
    /// it was carried forward.
    pub fn window(&self, tau: usize, width: usize, lookahead: usize) -> Result<(Vec<Vec<f64>>, bool)> {
        let needed = width + lookahead + 1;
        if tau <= width || tau + lookahead > self.values.len() {
            return Err(Error::InsufficientHistory {
                needed,
                available: self.values.len(),
            });
        }
        let range = (tau - width - 1)..(tau + lookahead);
        let mut out = Vec::with_capacity(needed);
        for v in &self.values[range.clone()] {
            match v {
                Some(v) => out.push(v.clone()),
                None => {
                    return Err(Error::InsufficientHistory {
                        needed,
                        available: self.values.iter().filter(|v| v.is_some()).count(),
                    })
                }
            }
        }
        Ok((out, self.carried[range].iter().any(|&c| c)))
    }
}

/// One output row of a TSC run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TscRow {
    pub i: String,
    pub j: String,
    pub tau: usize,
    pub result: TscResult,
    pub carried_forward: bool,
}

impl TscRow {
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if self.carried_forward {
            flags.push("carried_forward");
        }
        if self.result.perfect_fit() {
            flags.push("perfect_fit");
        }
        if flags.is_empty() {
            "-".to_string()
        } else {
            flags.join(",")
        }
    }
}

pub const TSC_HEADER: &str = "i\tj\ttau\tf_forward\tf_backward\tdirection\tflags";

pub fn write_tsc_rows<W: Write>(mut out: W, rows: &[TscRow]) -> Result<()> {
    writeln!(out, "{TSC_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.i,
            r.j,
            r.tau,
            r.result.f_forward,
            r.result.f_backward,
            r.result.direction,
            r.flags()
        )?;
    }
    Ok(())
}

/// Parses rows written by [`write_tsc_rows`].
pub fn read_tsc_rows(text: &str) -> Result<Vec<TscRow>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && line.starts_with("i\t") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Snapshot(format!("malformed TSC row {}", idx + 1));
        if f.len() != 7 {
            return Err(bad());
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad());
        rows.push(TscRow {
            i: f[0].to_string(),
            j: f[1].to_string(),
            tau: f[2].parse().map_err(|_| bad())?,
            result: TscResult::from_stats(parse(f[3])?, parse(f[4])?),
            carried_forward: f[6].split(',').any(|x| x == "carried_forward"),
        });
    }
    Ok(rows)
}
