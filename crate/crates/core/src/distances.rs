//! Probability masses, ratios and distances over discrete distributions,
//! Poissons and uniform Poisson mixtures.
//!
//! Poisson masses are evaluated in log space (`ln x!` via log-gamma) and only
//! exponentiated at the end, so rates up to ~1e6 and supports of a few
//! hundred points never overflow. All distance routines are accurate to
//! 1e-10 absolute for domains up to 1e6 points.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::sum::{compensated, CompensatedSum};
use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;
const PROB_SLACK: f64 = 1e-12;

/// Explicit probability vector over the domain `[1, n]` (stored 0-based).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {} is {p}",
                i + 1
            )));
        }
        let total = compensated(probs.iter().copied());
        if libm::fabs(total - 1.0) > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        Ok(Self {
            probs: alloc::vec![1.0 / n as f64; n],
        })
    }

    /// All mass on `symbol` (1-based).
    pub fn point_mass(n: usize, symbol: usize) -> Result<Self> {
        if symbol == 0 || symbol > n {
            return Err(Error::SymbolOutOfRange { symbol, n });
        }
        let mut probs = alloc::vec![0.0; n];
        probs[symbol - 1] = 1.0;
        Ok(Self { probs })
    }

    pub fn domain_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the 1-based `symbol`.
    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs[symbol - 1]
    }
}

/// Uniform mixture `(Poi(λ_1) + ... + Poi(λ_k)) / k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PoissonMixture {
    rates: Vec<f64>,
}

impl PoissonMixture {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::param(
                "rates",
                "mixture needs at least one component",
            ));
        }
        if let Some(r) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::param(
                "rates",
                format!("rate {r} is not a finite nonnegative number"),
            ));
        }
        Ok(Self { rates })
    }

    pub fn single(rate: f64) -> Result<Self> {
        Self::new(alloc::vec![rate])
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }
}

/// Mass of `Poi(mu)` on the integer interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IntervalMass {
    pub a: u64,
    pub b: u64,
    pub mass: f64,
}

pub(crate) fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("{rate} is not a finite nonnegative rate"),
        ))
    }
}

/// `ln(x!)` through log-gamma.
#[inline]
pub fn ln_factorial(x: u64) -> f64 {
    if x < 2 {
        0.0
    } else {
        libm::lgamma(x as f64 + 1.0)
    }
}

#[inline]
pub(crate) fn log_pmf_unchecked(rate: f64, x: u64) -> f64 {
    if rate == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0 {
        return -rate;
    }
    -rate + x as f64 * libm::log(rate) - ln_factorial(x)
}

/// Natural log of `Poi(rate)(x)`. `Poi(0)` is the point mass at 0.
pub fn poisson_log_pmf(rate: f64, x: u64) -> Result<f64> {
    check_rate("rate", rate)?;
    Ok(log_pmf_unchecked(rate, x))
}

pub fn poisson_pmf(rate: f64, x: u64) -> Result<f64> {
    poisson_log_pmf(rate, x).map(libm::exp)
}

/// Mixture mass at `x`: the arithmetic mean of the component masses.
pub fn mixture_pmf(mix: &PoissonMixture, x: u64) -> f64 {
    let total = compensated(
        mix.rates
            .iter()
            .map(|&r| libm::exp(log_pmf_unchecked(r, x))),
    );
    total / mix.len() as f64
}

/// `ln(mix(x) / Poi(mu)(x))`, computed by factoring out the shared `x!` and
/// combining components with log-sum-exp.
pub fn log_pmf_ratio(mix: &PoissonMixture, mu: f64, x: u64) -> Result<f64> {
    check_rate("mu", mu)?;
    if mu == 0.0 {
        if x > 0 {
            return Err(Error::ZeroDenominator { x });
        }
        // Poi(0)(0) = 1, so the ratio is the mixture mass at 0.
        return Ok(libm::log(mixture_pmf(mix, 0)));
    }
    let ln_mu = libm::log(mu);
    let xf = x as f64;
    let exponent = |lambda: f64| -> f64 {
        if lambda == 0.0 {
            if x == 0 {
                mu
            } else {
                f64::NEG_INFINITY
            }
        } else {
            mu - lambda + xf * (libm::log(lambda) - ln_mu)
        }
    };
    let peak = mix
        .rates
        .iter()
        .map(|&l| exponent(l))
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let scaled = compensated(mix.rates.iter().map(|&l| libm::exp(exponent(l) - peak)));
    Ok(peak + libm::log(scaled / mix.len() as f64))
}

/// `mix(x) / Poi(mu)(x)`. Convex in `x` for every mixture.
pub fn pmf_ratio(mix: &PoissonMixture, mu: f64, x: u64) -> Result<f64> {
    log_pmf_ratio(mix, mu, x).map(libm::exp)
}

/// Direct summation of `Poi(mu)` masses over `[a, b]` in increasing `x`.
pub fn poisson_interval_mass(mu: f64, a: u64, b: u64) -> Result<IntervalMass> {
    check_rate("mu", mu)?;
    if a > b {
        return Err(Error::param(
            "a",
            format!("interval start {a} exceeds end {b}"),
        ));
    }
    let mut acc = CompensatedSum::new();
    let mut x = a;
    loop {
        let term = libm::exp(log_pmf_unchecked(mu, x));
        acc.add(term);
        // Beyond the mode the masses only shrink; once they underflow the rest is zero.
        if x == b || (term == 0.0 && x as f64 > mu) {
            break;
        }
        x += 1;
    }
    Ok(IntervalMass {
        a,
        b,
        mass: acc.value().clamp(0.0, 1.0),
    })
}

fn check_probability(name: &'static str, p: f64) -> Result<f64> {
    if p.is_finite() && (-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
        Ok(p.clamp(0.0, 1.0))
    } else {
        Err(Error::param(name, format!("{p} is not a probability")))
    }
}

/// `(√p − √q)²`.
#[inline]
pub fn sqrt_gap_sq(p: f64, q: f64) -> f64 {
    let d = libm::sqrt(p) - libm::sqrt(q);
    d * d
}

#[inline]
pub(crate) fn bernoulli_hellinger_unchecked(p: f64, q: f64) -> f64 {
    sqrt_gap_sq(p, q) + sqrt_gap_sq(1.0 - p, 1.0 - q)
}

/// Squared Hellinger distance between `Ber(p)` and `Ber(q)`, in `[0, 2]`.
pub fn hellinger_sq_bernoulli(p: f64, q: f64) -> Result<f64> {
    let p = check_probability("p", p)?;
    let q = check_probability("q", q)?;
    Ok(bernoulli_hellinger_unchecked(p, q))
}

fn check_same_domain(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.domain_size() == q.domain_size() {
        Ok(())
    } else {
        Err(Error::DomainMismatch {
            left: p.domain_size(),
            right: q.domain_size(),
        })
    }
}

pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_same_domain(p, q)?;
    let l1 = compensated(p.probs.iter().zip(&q.probs).map(|(a, b)| libm::fabs(a - b)));
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

pub fn hellinger_sq(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_same_domain(p, q)?;
    let h = compensated(
        p.probs
            .iter()
            .zip(&q.probs)
            .map(|(&a, &b)| sqrt_gap_sq(a, b)),
    );
    Ok(h.clamp(0.0, 2.0))
}

/// `KL(p ‖ q)` in nats; `+∞` when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_same_domain(p, q)?;
    let mut acc = CompensatedSum::new();
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc.add(a * libm::log(a / b));
    }
    Ok(acc.value().max(0.0))
}

/// Which set the tail-elimination argument keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum EliminationChoice {
    /// `S ∖ T`
    SetMinusTail,
    /// `T̄`
    TailComplement,
}

/// Masses of `S`, `S ∖ T` and `T` under two distributions `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetMasses {
    pub p_s: f64,
    pub q_s: f64,
    pub p_s_minus_t: f64,
    pub q_s_minus_t: f64,
    pub p_t: f64,
    pub q_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationWitness {
    pub choice: EliminationChoice,
    /// Squared Bernoulli-Hellinger distance of the kept set.
    pub value: f64,
}

/// Replaces a separating set `S` by one avoiding a light tail `T`.
///
/// Given `H²(Ber(p(S)), Ber(q(S))) ≥ delta` and `q(T) ≤ delta/20`, either
/// `S ∖ T` (when `p(T) < delta/10`) or `T̄` (otherwise) keeps a squared
/// Bernoulli-Hellinger distance of at least `delta/120`. Test utility only;
/// the testers never call it.
pub fn eliminate_large_witness(masses: SetMasses, delta: f64) -> Result<EliminationWitness> {
    let SetMasses {
        p_s,
        q_s,
        p_s_minus_t,
        q_s_minus_t,
        p_t,
        q_t,
    } = masses;
    for (name, v) in [
        ("p_s", p_s),
        ("q_s", q_s),
        ("p_s_minus_t", p_s_minus_t),
        ("q_s_minus_t", q_s_minus_t),
        ("p_t", p_t),
        ("q_t", q_t),
    ] {
        check_probability(name, v)?;
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("{delta} must be positive")));
    }
    let slack = 1e-12;
    // S ∖ T ⊆ S and S ∩ T ⊆ T.
    if p_s_minus_t > p_s + slack || p_s - p_s_minus_t > p_t + slack {
        return Err(Error::param("p_s_minus_t", "inconsistent with p_s and p_t"));
    }
    if q_s_minus_t > q_s + slack || q_s - q_s_minus_t > q_t + slack {
        return Err(Error::param("q_s_minus_t", "inconsistent with q_s and q_t"));
    }
    let base = bernoulli_hellinger_unchecked(p_s, q_s);
    if base < delta {
        return Err(Error::param(
            "delta",
            format!("H²(S) = {base} is below delta = {delta}"),
        ));
    }
    if q_t > delta / 20.0 + slack {
        return Err(Error::param("q_t", format!("{q_t} exceeds delta/20")));
    }

    let kept_minus = EliminationWitness {
        choice: EliminationChoice::SetMinusTail,
        value: bernoulli_hellinger_unchecked(p_s_minus_t, q_s_minus_t),
    };
    let kept_complement = EliminationWitness {
        choice: EliminationChoice::TailComplement,
        value: bernoulli_hellinger_unchecked(1.0 - p_t, 1.0 - q_t),
    };
    let (first, second) = if p_t >= delta / 10.0 {
        (kept_complement, kept_minus)
    } else {
        (kept_minus, kept_complement)
    };
    let floor = delta / 120.0;
    if first.value >= floor {
        Ok(first)
    } else if second.value >= floor {
        Ok(second)
    } else {
        Err(Error::Violation(format!(
            "neither S∖T ({}) nor T̄ ({}) reaches delta/120 = {floor}",
            kept_minus.value, kept_complement.value
        )))
    }
}
