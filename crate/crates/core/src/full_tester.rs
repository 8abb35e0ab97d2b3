//! Tester for `Poi(s·mu)^n` against a permuted product of Poissons
//! `Perm(Poi(s·λ_1), ..., Poi(s·λ_n))`.
//!
//! Each frequency is split into `s` draws, and interval tests at threshold
//! `tau / k` are run on the pooled draws of random `k`-subsets of the
//! coordinates, for every `k ∈ [1, n]`.
//!
//! By default one uniform permutation is drawn per repeat and its prefixes
//! serve as the subsets for every `k` and every interval
//! ([`SubsetStrategy::SharedPrefix`]). Every prefix is marginally a uniform
//! without-replacement sample, and the false-reject union bound only needs
//! per-test marginals, so both guarantees carry over while the cost drops to
//! `O(r·n·x_max² + n·s)`. [`SubsetStrategy::LiteralResampling`] draws a
//! fresh subset for every `(k, interval, repeat)` triple and is only
//! practical for tiny `n`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::distances::check_rate;
use crate::interval_tester::{prefix_sums, scan_intervals, IntervalTable};
use crate::poisson::poisson_split_each;
use crate::{Error, FrequencyVector, IntervalWitness, Result, Verdict, Witness};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FullTesterParams {
    /// Domain size.
    pub n: usize,
    /// Null rate of each split draw.
    pub mu: f64,
    pub tau: f64,
    /// Split factor.
    pub s: usize,
    /// Repeats per subset size.
    pub r: usize,
    pub x_max: u64,
}

impl FullTesterParams {
    pub fn validate(&self) -> Result<()> {
        check_rate("mu", self.mu)?;
        if self.n == 0 {
            return Err(Error::param("n", "domain must be nonempty"));
        }
        if self.s == 0 {
            return Err(Error::param("s", "split factor must be at least 1"));
        }
        if self.r == 0 {
            return Err(Error::param("r", "need at least one repeat"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param(
                "tau",
                format!("{} must be positive", self.tau),
            ));
        }
        Ok(())
    }

    /// Upper bound on the false-reject probability from the union bound,
    /// `n · r · (x_max+1)² · 2e^{−s·tau}`.
    pub fn false_reject_bound(&self) -> f64 {
        let cells = (self.x_max + 1) as f64;
        self.n as f64 * self.r as f64 * cells * cells * 2.0 * libm::exp(-(self.s as f64) * self.tau)
    }

    /// Number of `(repeat, k, interval)` tests in a full accepting scan.
    pub fn max_evaluations(&self) -> u64 {
        let w = self.x_max + 1;
        self.r as u64 * self.n as u64 * (w * (w + 1) / 2)
    }
}

/// Constants behind the asymptotic parameter choices. With `L = ln(max(n, 3))`:
///
/// * `x_max = ceil(2·mu + tail_factor·(L + ln(tail_budget/delta)))`
/// * `tau = 1 / (tau_divisor · L²)`
/// * `r = ceil(repeat_factor · ln(2/delta) · n · L)`, or `repeats_override`
/// * `s = ceil(ln(split_union_factor · (x_max+1)² · n · r / delta) / tau)`
///
/// `s` is computed from the `r` actually used, which keeps the union bound
/// `n·r·(x_max+1)²·2e^{−s·tau} ≤ delta/4` over the tests that are run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FullTesterConstants {
    pub tau_divisor: f64,
    pub repeat_factor: f64,
    pub tail_factor: f64,
    pub tail_budget: f64,
    pub split_union_factor: f64,
    pub repeats_override: Option<usize>,
}

impl Default for FullTesterConstants {
    fn default() -> Self {
        Self {
            tau_divisor: 16.0,
            repeat_factor: 8.0,
            tail_factor: 6.0,
            tail_budget: 20.0,
            split_union_factor: 8.0,
            repeats_override: None,
        }
    }
}

pub fn derive_full_params(n: usize, mu: f64, delta: f64) -> Result<FullTesterParams> {
    derive_full_params_with(n, mu, delta, &FullTesterConstants::default())
}

pub fn derive_full_params_with(
    n: usize,
    mu: f64,
    delta: f64,
    c: &FullTesterConstants,
) -> Result<FullTesterParams> {
    if n < 2 {
        return Err(Error::param("n", format!("{n} < 2")));
    }
    check_rate("mu", mu)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    let l = libm::log(n.max(3) as f64);
    let x_max =
        libm::ceil(2.0 * mu + c.tail_factor * (l + libm::log(c.tail_budget / delta))) as u64;
    let tau = 1.0 / (c.tau_divisor * l * l);
    let r = match c.repeats_override {
        Some(0) => return Err(Error::param("repeats_override", "must be at least 1")),
        Some(r) => r,
        None => libm::ceil(c.repeat_factor * libm::log(2.0 / delta) * n as f64 * l) as usize,
    };
    let cells = (x_max + 1) as f64;
    let s = libm::ceil(
        libm::log(c.split_union_factor * cells * cells * n as f64 * r as f64 / delta) / tau,
    );
    let params = FullTesterParams {
        n,
        mu,
        tau,
        s: (s as usize).max(1),
        r,
        x_max,
    };
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SubsetStrategy {
    /// One permutation per repeat; its prefixes serve every `k` and interval.
    #[default]
    SharedPrefix,
    /// A fresh without-replacement subset for every `(k, interval, repeat)`.
    LiteralResampling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullScan {
    pub verdict: Verdict,
    pub evaluations: u64,
}

/// Splits every frequency into `s` draws and histograms them over
/// `[0, x_max]`; draws above `x_max` land in the overflow bucket, which no
/// interval covers. Returns one histogram of length `x_max + 2` per index
/// (last cell is the overflow).
pub fn split_histograms<R: Rng + ?Sized>(
    freq: &FrequencyVector,
    s: usize,
    x_max: u64,
    rng: &mut R,
) -> Result<Vec<Vec<u64>>> {
    let width = x_max as usize + 1;
    freq.counts()
        .iter()
        .map(|&y| {
            let mut hist = vec![0u64; width + 1];
            poisson_split_each(y, s, rng, |c| {
                let cell = if c <= x_max { c as usize } else { width };
                hist[cell] += 1;
            })?;
            Ok(hist)
        })
        .collect()
}

pub(crate) fn draw_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

pub fn run_full_tester<R: Rng + ?Sized>(
    params: &FullTesterParams,
    freq: &FrequencyVector,
    rng: &mut R,
) -> Result<Verdict> {
    Ok(run_full_tester_with(params, freq, rng, SubsetStrategy::SharedPrefix)?.verdict)
}

pub fn run_full_tester_with<R: Rng + ?Sized>(
    params: &FullTesterParams,
    freq: &FrequencyVector,
    rng: &mut R,
    strategy: SubsetStrategy,
) -> Result<FullScan> {
    params.validate()?;
    if freq.len() != params.n {
        return Err(Error::DomainMismatch {
            left: params.n,
            right: freq.len(),
        });
    }
    let table = IntervalTable::new(params.mu, params.x_max)?;
    let hists = split_histograms(freq, params.s, params.x_max, rng)?;
    match strategy {
        SubsetStrategy::SharedPrefix => Ok(shared_prefix_scan(params, &table, &hists, rng)),
        SubsetStrategy::LiteralResampling => Ok(literal_scan(params, &table, &hists, rng)),
    }
}

fn reject(mut w: IntervalWitness, repeat: usize, k: usize) -> Verdict {
    w.repeat = Some(repeat);
    w.subset_size = Some(k);
    Verdict::Reject {
        witness: Witness::Interval(w),
    }
}

fn shared_prefix_scan<R: Rng + ?Sized>(
    params: &FullTesterParams,
    table: &IntervalTable,
    hists: &[Vec<u64>],
    rng: &mut R,
) -> FullScan {
    let width = params.x_max as usize + 1;
    let mut evaluations = 0;
    let mut combined = vec![0u64; width];
    let mut prefix = Vec::with_capacity(width + 1);
    for repeat in 0..params.r {
        let perm = draw_permutation(params.n, rng);
        combined.iter_mut().for_each(|c| *c = 0);
        for (j, &i) in perm.iter().enumerate() {
            let k = j + 1;
            for (c, h) in combined.iter_mut().zip(&hists[i][..width]) {
                *c += h;
            }
            prefix_sums(&combined, &mut prefix);
            let denominator = params.s as f64 * k as f64;
            let threshold = params.tau / k as f64;
            if let Some(w) =
                scan_intervals(table, &prefix, denominator, threshold, &mut evaluations)
            {
                return FullScan {
                    verdict: reject(w, repeat, k),
                    evaluations,
                };
            }
        }
    }
    FullScan {
        verdict: Verdict::Accept,
        evaluations,
    }
}

fn literal_scan<R: Rng + ?Sized>(
    params: &FullTesterParams,
    table: &IntervalTable,
    hists: &[Vec<u64>],
    rng: &mut R,
) -> FullScan {
    let width = params.x_max as usize + 1;
    let prefixes: Vec<Vec<u64>> = hists
        .iter()
        .map(|h| {
            let mut p = Vec::with_capacity(width + 1);
            prefix_sums(&h[..width], &mut p);
            p
        })
        .collect();
    let mut evaluations = 0;
    for k in 1..=params.n {
        let denominator = params.s as f64 * k as f64;
        let threshold = params.tau / k as f64;
        let mut idx = 0;
        for a in 0..width {
            for b in a..width {
                for repeat in 0..params.r {
                    let count: u64 = index::sample(rng, params.n, k)
                        .into_iter()
                        .map(|i| prefixes[i][b + 1] - prefixes[i][a])
                        .sum();
                    let estimate = (count as f64 / denominator).min(1.0);
                    let h = table.hellinger_at(idx, estimate);
                    evaluations += 1;
                    if h >= threshold {
                        let w = IntervalWitness {
                            a: a as u64,
                            b: b as u64,
                            mu_mass: table.mass_at(idx),
                            estimate,
                            hellinger_sq: h,
                            threshold,
                            repeat: None,
                            subset_size: None,
                        };
                        return FullScan {
                            verdict: reject(w, repeat, k),
                            evaluations,
                        };
                    }
                }
                idx += 1;
            }
        }
    }
    FullScan {
        verdict: Verdict::Accept,
        evaluations,
    }
}
