//! Summary statistics for Monte Carlo experiments.

use serde::{Deserialize, Serialize};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval at 95% confidence.
pub fn wilson(successes: usize, trials: usize) -> Proportion {
    if trials == 0 {
        return Proportion {
            successes,
            trials,
            rate: f64::NAN,
            lo: 0.0,
            hi: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        successes,
        trials,
        rate: p,
        lo: if successes == 0 {
            0.0
        } else {
            (center - half).max(0.0)
        },
        hi: if successes == trials {
            1.0
        } else {
            (center + half).min(1.0)
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub count: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
}

pub fn mean_estimate<I: IntoIterator<Item = f64>>(values: I) -> Option<MeanEstimate> {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(MeanEstimate {
        count: v.len(),
        mean,
        std_error: (var / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvLowerBound {
    /// Holds with probability at least `1 − alpha`.
    pub lower_bound: f64,
    /// Held-out estimate of `P_q(T ≥ t) − P_p(T ≥ t)`.
    pub estimate: f64,
    pub threshold: f64,
}

fn tail_fraction(values: &[f64], t: f64) -> f64 {
    values.iter().filter(|&&v| v >= t).count() as f64 / values.len() as f64
}

/// Lower confidence bound on `d_TV(P, Q)` from draws of a scalar statistic
/// `T` under each distribution.
///
/// The first half of each sample picks the threshold `t` maximizing
/// `P̂_q(T ≥ t) − P̂_p(T ≥ t)`; the second half evaluates it, and a
/// Hoeffding margin at level `alpha/2` per side is subtracted. Since
/// `{T ≥ t}` is a fixed event given the first half, the result bounds the
/// TV distance from below with probability `≥ 1 − alpha`.
pub fn monte_carlo_tv_lower_bound(under_p: &[f64], under_q: &[f64], alpha: f64) -> TvLowerBound {
    assert!(
        under_p.len() >= 2 && under_q.len() >= 2,
        "need at least two draws per side"
    );
    let (p_fit, p_eval) = under_p.split_at(under_p.len() / 2);
    let (q_fit, q_eval) = under_q.split_at(under_q.len() / 2);
    let mut candidates: Vec<f64> = p_fit.iter().chain(q_fit).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut threshold = candidates[0];
    let mut best = f64::NEG_INFINITY;
    for &t in &candidates {
        let gap = tail_fraction(q_fit, t) - tail_fraction(p_fit, t);
        if gap > best {
            best = gap;
            threshold = t;
        }
    }
    let estimate = tail_fraction(q_eval, threshold) - tail_fraction(p_eval, threshold);
    let margin = |n: usize| ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt();
    TvLowerBound {
        lower_bound: estimate - margin(p_eval.len()) - margin(q_eval.len()),
        estimate,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let w = wilson(90, 100);
        assert!((w.lo - 0.825_63).abs() < 1e-4, "{}", w.lo);
        assert!((w.hi - 0.944_77).abs() < 1e-4, "{}", w.hi);
        let w = wilson(0, 200);
        assert_eq!(w.lo, 0.0);
        assert!(w.hi > 0.0 && w.hi < 0.02);
    }

    #[test]
    fn mean_and_error() {
        let m = mean_estimate([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_estimate(std::iter::empty()).is_none());
    }

    #[test]
    fn tv_bound_separated_samples() {
        let p: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let q: Vec<f64> = (0..1000).map(|i| 100.0 + (i % 10) as f64).collect();
        let b = monte_carlo_tv_lower_bound(&p, &q, 0.01);
        assert_eq!(b.estimate, 1.0);
        assert!(b.lower_bound > 0.85);
        let same = monte_carlo_tv_lower_bound(&p, &p, 0.01);
        assert!(same.lower_bound < 0.0);
    }
}
