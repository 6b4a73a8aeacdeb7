//! Held-out likelihood, Ratio analysis and plot-ready CSV tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::HeldOutToken;
use crate::error::{Error, Result};
use crate::granger::TscResult;
use crate::ldtm::{Model, PhiMatrix, TopicSeries};

/// Bins with fewer pairs than this are left out of Ratio reports.
pub const RATIO_MIN_SUPPORT: usize = 90;

/// Average held-out log-likelihood per token at one time step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllAtT {
    pub t: usize,
    pub value: f64,
    pub support: usize,
}

/// `ALL@t` for every step that has at least one held-out token.
///
/// Each token is scored under `sum_k theta[n][t][k] phi[k][m]`, using the
/// filtered topic distribution of its own user and step.
pub fn all_at_t(theta: &TopicSeries, phi: &PhiMatrix, held: &[HeldOutToken]) -> Result<Vec<AllAtT>> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for tok in held {
        let th = theta
            .at(tok.user, tok.time)
            .ok_or_else(|| Error::HoldoutMismatch(format!("no fitted step {} for user {}", tok.time, tok.user)))?;
        if th.len() != phi.topics() {
            return Err(Error::Dimension {
                expected: phi.topics(),
                got: th.len(),
            });
        }
        let m = tok.item as usize;
        if m >= phi.items() {
            return Err(Error::HoldoutMismatch(format!(
                "item {m} outside vocabulary of {}",
                phi.items()
            )));
        }
        let e = acc.entry(tok.time).or_insert((0.0, 0));
        e.0 += phi.mixture(th, m).ln();
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(t, (sum, count))| AllAtT {
            t,
            value: sum / count as f64,
            support: count,
        })
        .collect())
}

pub fn model_all_at_t(model: &Model, held: &[HeldOutToken]) -> Result<Vec<AllAtT>> {
    all_at_t(&model.theta(), &model.phi(), held)
}

/// Unweighted mean of the points with `t >= from`, or `None` if there are none.
pub fn mean_from(points: &[AllAtT], from: usize) -> Option<f64> {
    let vals: Vec<f64> = points.iter().filter(|p| p.t >= from).map(|p| p.value).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub bin: usize,
    pub ratio: f64,
    pub support: usize,
}

/// Fraction of pairs per bin whose forward statistic strictly beats the
/// backward one. Ties count against the hypothesis.
///
/// `results` pairs each TSC outcome with its sustained-steps bin. Bins with
/// support below `min_support` are dropped from the output.
pub fn ratio(results: &[(usize, TscResult)], min_support: usize) -> Result<Vec<RatioPoint>> {
    if results.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let mut bins: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (bin, r) in results {
        let e = bins.entry(*bin).or_insert((0, 0));
        if r.f_forward > r.f_backward {
            e.0 += 1;
        }
        e.1 += 1;
    }
    Ok(bins
        .into_iter()
        .filter(|&(_, (_, n))| n >= min_support)
        .map(|(bin, (wins, n))| RatioPoint {
            bin,
            ratio: wins as f64 / n as f64,
            support: n,
        })
        .collect())
}

/// `(iteration, log-likelihood)` with 1-based iterations.
pub fn convergence_trace(trace: &[f64]) -> Vec<(usize, f64)> {
    trace.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect()
}

pub const TRACE_HEADER: &str = "iteration,log_likelihood";

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[f64]) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (i, v) in convergence_trace(trace) {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

/// One row of a long-form metric table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub mode: String,
    pub key: usize,
    pub value: f64,
    pub support: usize,
}

impl MetricRow {
    pub fn from_all(model: &str, mode: &str, p: &AllAtT) -> Self {
        MetricRow {
            model: model.to_string(),
            mode: mode.to_string(),
            key: p.t,
            value: p.value,
            support: p.support,
        }
    }

    pub fn from_ratio(model: &str, mode: &str, p: &RatioPoint) -> Self {
        MetricRow {
            model: model.to_string(),
            mode: mode.to_string(),
            key: p.bin,
            value: p.ratio,
            support: p.support,
        }
    }
}

/// Writes `model,mode,<key_name>,value,support`. Names containing commas,
/// quotes or newlines are rejected.
pub fn write_metric_csv<W: Write>(mut w: W, key_name: &str, rows: &[MetricRow]) -> Result<()> {
    writeln!(w, "model,mode,{key_name},value,support")?;
    for r in rows {
        for name in [&r.model, &r.mode] {
            if name.contains([',', '"', '\n', '\r']) {
                return Err(Error::InvalidConfig(format!("label {name:?} is not CSV-safe")));
            }
        }
        writeln!(w, "{},{},{},{},{}", r.model, r.mode, r.key, r.value, r.support)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granger::{tsc_pair, Direction, FStatForm};
    use crate::synth::{generate_causal_pair, CausalPairSpec};

    fn tok(user: usize, time: usize, item: u32) -> HeldOutToken {
        HeldOutToken { user, time, item }
    }

    fn series(theta: Vec<Vec<Vec<f64>>>) -> TopicSeries {
        TopicSeries { theta }
    }

    #[test]
    fn perfect_prediction_scores_zero() {
        let theta = series(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
        let phi = PhiMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let pts = all_at_t(&theta, &phi, &[tok(0, 1, 0), tok(0, 2, 2), tok(0, 2, 2)]).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| p.value == 0.0));
        assert_eq!(pts[1].support, 2);
    }

    #[test]
    fn uniform_model_scores_minus_log_m() {
        let m = 7;
        let theta = series(vec![vec![vec![1.0 / 3.0; 3]; 4]; 2]);
        let phi = PhiMatrix::from_rows(&vec![vec![1.0 / m as f64; m]; 3]);
        let held: Vec<_> = (0..20).map(|i| tok(i % 2, 1 + i % 4, (i % m) as u32)).collect();
        for p in all_at_t(&theta, &phi, &held).unwrap() {
            assert!((p.value + (m as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn toy_corpus_matches_hand_computation() {
        let theta = series(vec![
            vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.5, 0.5]],
            vec![vec![0.1, 0.9], vec![0.6, 0.4], vec![0.3, 0.7]],
        ]);
        let phi = PhiMatrix::from_rows(&[vec![0.4, 0.3, 0.2, 0.1], vec![0.05, 0.15, 0.3, 0.5]]);
        let held = [
            tok(0, 1, 0),
            tok(1, 1, 3),
            tok(0, 2, 2),
            tok(0, 2, 2),
            tok(1, 3, 1),
            tok(0, 3, 3),
            tok(1, 3, 0),
        ];
        let pts = all_at_t(&theta, &phi, &held).unwrap();
        let want = [
            (1, -0.9986543560706568, 2),
            (2, -1.2729656758128873, 2),
            (3, -1.567686228935739, 3),
        ];
        assert_eq!(pts.len(), 3);
        for (p, (t, v, s)) in pts.iter().zip(want) {
            assert_eq!((p.t, p.support), (t, s));
            assert!((p.value - v).abs() < 1e-12, "t={t}: {} vs {v}", p.value);
        }
    }

    #[test]
    fn steps_without_tokens_are_omitted() {
        let theta = series(vec![vec![vec![0.5, 0.5]; 3]]);
        let phi = PhiMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let pts = all_at_t(&theta, &phi, &[tok(0, 3, 1)]).unwrap();
        assert_eq!(pts.iter().map(|p| p.t).collect::<Vec<_>>(), vec![3]);
        assert!(all_at_t(&theta, &phi, &[]).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_tokens_are_rejected() {
        let theta = series(vec![vec![vec![0.5, 0.5]; 2]]);
        let phi = PhiMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(all_at_t(&theta, &phi, &[tok(0, 3, 0)]).is_err());
        assert!(all_at_t(&theta, &phi, &[tok(1, 1, 0)]).is_err());
        assert!(all_at_t(&theta, &phi, &[tok(0, 1, 2)]).is_err());
    }

    #[test]
    fn mean_from_skips_early_steps() {
        let pts = [
            AllAtT {
                t: 1,
                value: -9.0,
                support: 1,
            },
            AllAtT {
                t: 3,
                value: -1.0,
                support: 1,
            },
            AllAtT {
                t: 4,
                value: -2.0,
                support: 5,
            },
        ];
        assert_eq!(mean_from(&pts, 3), Some(-1.5));
        assert_eq!(mean_from(&pts, 5), None);
    }

    fn res(f: f64, b: f64) -> TscResult {
        TscResult::from_stats(f, b)
    }

    #[test]
    fn ties_count_as_losses() {
        let rs: Vec<_> = (0..100).map(|i| (i % 2 + 1, res(1.5, 1.5))).collect();
        let pts = ratio(&rs, 10).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| p.ratio == 0.0 && p.support == 50));
    }

    #[test]
    fn ratio_suppresses_thin_bins_and_rejects_empty() {
        assert!(matches!(ratio(&[], 1), Err(Error::EmptyPairSet)));
        let mut rs: Vec<_> = (0..90).map(|i| (2, res(i as f64, 45.0))).collect();
        rs.extend((0..89).map(|_| (3, res(2.0, 1.0))));
        let pts = ratio(&rs, RATIO_MIN_SUPPORT).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].bin, 2);
        assert!((pts[0].ratio - 44.0 / 90.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_transforms_leave_ratio_unchanged() {
        let rs: Vec<_> = (0..120)
            .map(|i| (i % 3, res((i * 37 % 11) as f64 * 0.3, (i * 53 % 7) as f64 * 0.5)))
            .collect();
        let warped: Vec<_> = rs
            .iter()
            .map(|(b, r)| (*b, res((r.f_forward + 1.0).ln() * 5.0, (r.f_backward + 1.0).ln() * 5.0)))
            .collect();
        assert_eq!(ratio(&rs, 1).unwrap(), ratio(&warped, 1).unwrap());
    }

    #[test]
    fn later_author_driven_by_first_gives_low_ab_ratio() {
        let spec = CausalPairSpec::default();
        let rs: Vec<_> = (0..200)
            .map(|seed| {
                let (first, later) = generate_causal_pair(&spec, seed).unwrap();
                // AB tests the later-listed author as the influencer.
                let r = tsc_pair(&later, &first, 8, 4, 4, FStatForm::Compact).unwrap();
                (1, r)
            })
            .collect();
        let pts = ratio(&rs, RATIO_MIN_SUPPORT).unwrap();
        assert!(pts[0].ratio < 0.5, "ratio {}", pts[0].ratio);
        assert!(rs.iter().filter(|(_, r)| r.direction == Direction::JToI).count() > 150);
    }

    #[test]
    fn trace_csv_is_numbered_from_one() {
        let mut out = Vec::new();
        write_trace_csv(&mut out, &[-10.0, -8.5]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "iteration,log_likelihood\n1,-10\n2,-8.5\n"
        );
    }

    #[test]
    fn metric_csv_is_long_form() {
        let rows = [
            MetricRow::from_all(
                "ldtm",
                "learned",
                &AllAtT {
                    t: 3,
                    value: -2.25,
                    support: 8,
                },
            ),
            MetricRow::from_ratio(
                "ab",
                "learned",
                &RatioPoint {
                    bin: 2,
                    ratio: 0.25,
                    support: 91,
                },
            ),
        ];
        let mut out = Vec::new();
        write_metric_csv(&mut out, "t", &rows).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "model,mode,t,value,support\nldtm,learned,3,-2.25,8\nab,learned,2,0.25,91\n"
        );
        let bad = [MetricRow {
            model: "a,b".into(),
            ..rows[0].clone()
        }];
        assert!(write_metric_csv(Vec::new(), "t", &bad).is_err());
    }
}
