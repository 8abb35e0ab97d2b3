//! Tester for a known single Poisson `Poi(mu)` against an unknown Poisson
//! mixture: scan every interval `[a, b] ⊆ [0, x_max]` and reject as soon as
//! the empirical mass of some interval is `tau`-far (squared
//! Bernoulli-Hellinger) from its null mass.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::distances::{check_rate, log_pmf_unchecked};
use crate::sum::CompensatedSum;
use crate::{Error, IntervalWitness, Result, Verdict, Witness};

/// Resolved interval tester parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IntervalTesterParams {
    /// Null Poisson rate.
    pub mu: f64,
    /// Rejection threshold on squared Bernoulli-Hellinger distance.
    pub tau: f64,
    /// Largest interval endpoint considered.
    pub x_max: u64,
    /// Number of samples.
    pub m: usize,
}

impl IntervalTesterParams {
    pub fn validate(&self) -> Result<()> {
        check_rate("mu", self.mu)?;
        if !(self.tau > 0.0 && self.tau <= 2.0) {
            return Err(Error::param("tau", format!("{} not in (0, 2]", self.tau)));
        }
        if self.m == 0 {
            return Err(Error::param("m", "need at least one sample"));
        }
        Ok(())
    }
}

/// Constants behind the asymptotic parameter choices.
///
/// With the defaults, `2·exp(−m·tau) ≤ delta / (4·(x_max+1)²)`, so a union
/// bound over all `(x_max+1)(x_max+2)/2` intervals keeps the false-reject
/// probability under `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IntervalTesterConstants {
    /// `tau = eps / (tau_divisor · ln(4/eps))`
    pub tau_divisor: f64,
    /// `m = ceil(sample_factor · ln(8 (x_max+1)² / delta) / tau)`
    pub sample_factor: f64,
    /// Multiplier on `ln(1/δ_tail)` in the Poisson tail cut-off.
    pub tail_factor: f64,
    /// `δ_tail = eps / (tail_budget_divisor · ln(4/eps))`
    pub tail_budget_divisor: f64,
}

impl Default for IntervalTesterConstants {
    fn default() -> Self {
        Self {
            tau_divisor: 64.0,
            sample_factor: 8.0,
            tail_factor: 6.0,
            tail_budget_divisor: 200.0,
        }
    }
}

pub fn derive_interval_params(mu: f64, eps: f64, delta: f64) -> Result<IntervalTesterParams> {
    derive_interval_params_with(mu, eps, delta, &IntervalTesterConstants::default())
}

pub fn derive_interval_params_with(
    mu: f64,
    eps: f64,
    delta: f64,
    c: &IntervalTesterConstants,
) -> Result<IntervalTesterParams> {
    check_rate("mu", mu)?;
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::param("eps", format!("{eps} not in (0, 2]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    let log_term = libm::log(4.0 / eps);
    let x_max =
        libm::ceil(2.0 * mu + c.tail_factor * libm::log(c.tail_budget_divisor * log_term / eps))
            + 1.0;
    let x_max = x_max.max(0.0) as u64;
    let tau = eps / (c.tau_divisor * log_term);
    let cells = (x_max + 1) as f64;
    let m = libm::ceil(c.sample_factor * libm::log(8.0 * cells * cells / delta) / tau);
    let params = IntervalTesterParams {
        mu,
        tau,
        x_max,
        m: m as usize,
    };
    params.validate()?;
    Ok(params)
}

/// Null masses `Poi(mu)([a, b])` for every `0 ≤ a ≤ b ≤ x_max`, in
/// lexicographic `(a, b)` order, together with the square roots the
/// Hellinger evaluation needs.
#[derive(Debug, Clone)]
pub struct IntervalTable {
    x_max: u64,
    mass: Vec<f64>,
    sqrt_mass: Vec<f64>,
    sqrt_rest: Vec<f64>,
}

impl IntervalTable {
    /// Each row `a` is a running direct sum in increasing `x`, so entries
    /// agree exactly with [`crate::distances::poisson_interval_mass`].
    pub fn new(mu: f64, x_max: u64) -> Result<Self> {
        check_rate("mu", mu)?;
        let width = x_max as usize + 1;
        let pmf: Vec<f64> = (0..=x_max)
            .map(|x| libm::exp(log_pmf_unchecked(mu, x)))
            .collect();
        let len = width * (width + 1) / 2;
        let mut mass = Vec::with_capacity(len);
        for a in 0..width {
            let mut acc = CompensatedSum::new();
            for &p in &pmf[a..] {
                acc.add(p);
                mass.push(acc.value().clamp(0.0, 1.0));
            }
        }
        let sqrt_mass = mass.iter().map(|&m| libm::sqrt(m)).collect();
        let sqrt_rest = mass.iter().map(|&m| libm::sqrt(1.0 - m)).collect();
        Ok(Self {
            x_max,
            mass,
            sqrt_mass,
            sqrt_rest,
        })
    }

    pub fn x_max(&self) -> u64 {
        self.x_max
    }

    /// Number of intervals, `(x_max+1)(x_max+2)/2`.
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn index(&self, a: u64, b: u64) -> usize {
        let w = self.x_max as usize + 1;
        let a = a as usize;
        // rows 0..a hold w, w-1, ..., w-a+1 entries
        a * w - a * (a.saturating_sub(1)) / 2 + (b as usize - a)
    }

    pub fn mass(&self, a: u64, b: u64) -> f64 {
        self.mass[self.index(a, b)]
    }

    #[inline]
    pub(crate) fn hellinger_at(&self, idx: usize, estimate: f64) -> f64 {
        let d1 = self.sqrt_mass[idx] - libm::sqrt(estimate);
        let d2 = self.sqrt_rest[idx] - libm::sqrt(1.0 - estimate);
        d1 * d1 + d2 * d2
    }

    #[inline]
    pub(crate) fn mass_at(&self, idx: usize) -> f64 {
        self.mass[idx]
    }
}

/// Histogram of `samples` over `[0, x_max]` plus the number of samples above `x_max`.
pub fn clamped_histogram(samples: &[u64], x_max: u64) -> (Vec<u64>, u64) {
    let mut hist = vec![0u64; x_max as usize + 1];
    let mut overflow = 0;
    for &x in samples {
        if x <= x_max {
            hist[x as usize] += 1;
        } else {
            overflow += 1;
        }
    }
    (hist, overflow)
}

/// Verdict plus the number of interval evaluations performed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalScan {
    pub verdict: Verdict,
    pub evaluations: u64,
}

/// Scans `[a, b]` in lexicographic order against `threshold`, where the
/// empirical count of an interval comes from `prefix` (length `x_max + 2`)
/// and is divided by `denominator`.
pub(crate) fn scan_intervals(
    table: &IntervalTable,
    prefix: &[u64],
    denominator: f64,
    threshold: f64,
    evaluations: &mut u64,
) -> Option<IntervalWitness> {
    let w = table.x_max as usize + 1;
    let inv = 1.0 / denominator;
    let mut idx = 0;
    for a in 0..w {
        let base = prefix[a];
        for b in a..w {
            let estimate = ((prefix[b + 1] - base) as f64 * inv).min(1.0);
            let h = table.hellinger_at(idx, estimate);
            *evaluations += 1;
            if h >= threshold {
                return Some(IntervalWitness {
                    a: a as u64,
                    b: b as u64,
                    mu_mass: table.mass_at(idx),
                    estimate,
                    hellinger_sq: h,
                    threshold,
                    repeat: None,
                    subset_size: None,
                });
            }
            idx += 1;
        }
    }
    None
}

pub(crate) fn prefix_sums(hist: &[u64], out: &mut Vec<u64>) {
    out.clear();
    out.push(0);
    let mut acc = 0;
    for &h in hist {
        acc += h;
        out.push(acc);
    }
}

#[derive(Debug, Clone)]
pub struct IntervalTester {
    params: IntervalTesterParams,
    table: IntervalTable,
}

impl IntervalTester {
    pub fn new(params: IntervalTesterParams) -> Result<Self> {
        params.validate()?;
        let table = IntervalTable::new(params.mu, params.x_max)?;
        Ok(Self { params, table })
    }

    pub fn params(&self) -> &IntervalTesterParams {
        &self.params
    }

    /// Runs the scan on exactly `m` samples. Samples above `x_max` fall
    /// outside every interval. O(m + x_max²).
    pub fn run(&self, samples: &[u64]) -> Result<IntervalScan> {
        if samples.len() != self.params.m {
            return Err(Error::SampleCountMismatch {
                expected: self.params.m,
                actual: samples.len(),
            });
        }
        let (hist, _) = clamped_histogram(samples, self.params.x_max);
        let mut prefix = Vec::with_capacity(hist.len() + 1);
        prefix_sums(&hist, &mut prefix);
        let mut evaluations = 0;
        let witness = scan_intervals(
            &self.table,
            &prefix,
            self.params.m as f64,
            self.params.tau,
            &mut evaluations,
        );
        let verdict = match witness {
            Some(w) => Verdict::Reject {
                witness: Witness::Interval(w),
            },
            None => Verdict::Accept,
        };
        Ok(IntervalScan {
            verdict,
            evaluations,
        })
    }
}

pub fn run_interval_tester(params: &IntervalTesterParams, samples: &[u64]) -> Result<Verdict> {
    Ok(IntervalTester::new(*params)?.run(samples)?.verdict)
}
