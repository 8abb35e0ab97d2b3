//! Brute-force oracles, deliberately independent of the fast paths in
//! [`crate::distances`] and the testers.
//!
//! Poisson masses here come from an explicit `ln x!` table accumulated with
//! compensated summation (no log-gamma), distances are summed over an
//! explicit truncation window with a certified tail bound, and ratios are
//! formed from their `x!`-free closed form. Every distance carries an error
//! bound covering both truncation and floating-point rounding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::distances::check_rate;
use crate::sum::{compensated, CompensatedSum};
use crate::{DiscreteDistribution, Error, PoissonMixture, Result};

/// Largest number of sequences [`brute_force_tv_product`] will enumerate.
pub const PRODUCT_ENUMERATION_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TruncationWindow {
    /// Sums run over `0..=cutoff`.
    pub cutoff: u64,
    /// Upper bound on the mass beyond `cutoff` under either distribution.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OracleValue {
    pub value: f64,
    /// Bound on `|value − exact|`: truncation plus rounding.
    pub error_bound: f64,
    pub window: TruncationWindow,
}

/// `ln k!` for `k = 0..=len-1`, each entry a compensated sum of `ln j`.
struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn up_to(x: u64) -> Self {
        let mut table = Vec::with_capacity(x as usize + 1);
        let mut acc = CompensatedSum::new();
        table.push(0.0);
        for j in 1..=x {
            acc.add(libm::log(j as f64));
            table.push(acc.value());
        }
        Self(table)
    }

    fn pmf(&self, rate: f64, x: u64) -> f64 {
        if rate == 0.0 {
            return if x == 0 { 1.0 } else { 0.0 };
        }
        let ln = if x == 0 {
            -rate
        } else {
            x as f64 * libm::log(rate) - rate - self.0[x as usize]
        };
        libm::exp(ln)
    }

    fn mixture(&self, mix: &PoissonMixture, x: u64) -> f64 {
        compensated(mix.rates().iter().map(|&r| self.pmf(r, x))) / mix.len() as f64
    }
}

/// Chernoff bound on `P[Poi(rate) > cutoff]`, valid for `cutoff ≥ rate`.
fn upper_tail_bound(rate: f64, cutoff: u64) -> f64 {
    let t = cutoff as f64 + 1.0 - rate;
    if t <= 0.0 {
        return 1.0;
    }
    libm::exp(-t * t / (2.0 * (rate + t))).min(1.0)
}

fn window_for(rates: &[f64], tol: f64) -> TruncationWindow {
    let top = rates.iter().copied().fold(0.0, f64::max);
    let cutoff = libm::ceil(2.0 * top + 6.0 * libm::log(4.0 / tol)) as u64;
    let tail_bound = rates
        .iter()
        .map(|&r| upper_tail_bound(r, cutoff))
        .fold(0.0, f64::max);
    TruncationWindow { cutoff, tail_bound }
}

/// Relative rounding error of one mass from [`LnFactorials::pmf`].
fn mass_rounding(cutoff: u64, top_rate: f64) -> f64 {
    let scale = cutoff as f64 + top_rate + 2.0;
    64.0 * f64::EPSILON * scale * (2.0 + libm::log(scale))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Error::param("tol", format!("{tol} not in (0, 1)")))
    }
}

fn check_inputs(mu: f64, mix: &PoissonMixture) -> Result<Vec<f64>> {
    check_rate("mu", mu)?;
    let mut rates = mix.rates().to_vec();
    rates.push(mu);
    Ok(rates)
}

/// `Σ_x (√Poi(mu)(x) − √mix(x))²` to within `tol`.
pub fn exact_hellinger_poisson_vs_mixture(
    mu: f64,
    mix: &PoissonMixture,
    tol: f64,
) -> Result<OracleValue> {
    check_tol(tol)?;
    let rates = check_inputs(mu, mix)?;
    let window = window_for(&rates, tol);
    let table = LnFactorials::up_to(window.cutoff);
    let mut acc = CompensatedSum::new();
    for x in 0..=window.cutoff {
        let d = libm::sqrt(table.pmf(mu, x)) - libm::sqrt(table.mixture(mix, x));
        acc.add(d * d);
    }
    let rho = mass_rounding(window.cutoff, mix.max_rate().max(mu));
    Ok(OracleValue {
        value: acc.value().clamp(0.0, 2.0),
        error_bound: 2.0 * window.tail_bound + 4.0 * rho,
        window,
    })
}

/// `½ Σ_x |Poi(mu)(x) − mix(x)|` to within `tol`.
pub fn exact_tv_poisson_vs_mixture(mu: f64, mix: &PoissonMixture, tol: f64) -> Result<OracleValue> {
    check_tol(tol)?;
    let rates = check_inputs(mu, mix)?;
    let window = window_for(&rates, tol);
    let table = LnFactorials::up_to(window.cutoff);
    let mut acc = CompensatedSum::new();
    for x in 0..=window.cutoff {
        acc.add(libm::fabs(table.pmf(mu, x) - table.mixture(mix, x)));
    }
    let rho = mass_rounding(window.cutoff, mix.max_rate().max(mu));
    Ok(OracleValue {
        value: (0.5 * acc.value()).clamp(0.0, 1.0),
        error_bound: window.tail_bound + rho,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BestInterval {
    pub a: u64,
    pub b: u64,
    /// `Poi(mu)([a, b])`.
    pub mu_mass: f64,
    /// `mix([a, b])`.
    pub mix_mass: f64,
    /// Squared Bernoulli Hellinger distance between the two masses.
    pub value: f64,
}

/// Interval masses and their complements for one distribution, with the
/// complement assembled from a left prefix and a right suffix so no mass
/// is ever obtained by subtracting from 1.
struct IntervalMasses {
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    points: Vec<f64>,
}

impl IntervalMasses {
    fn new(points: Vec<f64>, x_max: u64, tail: f64) -> Self {
        let len = x_max as usize + 1;
        let mut prefix = vec![0.0; len + 1];
        let mut acc = CompensatedSum::new();
        for x in 0..len {
            acc.add(points[x]);
            prefix[x + 1] = acc.value();
        }
        // suffix[b] = mass strictly above b
        let mut suffix = vec![0.0; len];
        let mut acc = CompensatedSum::new();
        acc.add(tail);
        for x in (len..points.len()).rev() {
            acc.add(points[x]);
        }
        for b in (0..len).rev() {
            suffix[b] = acc.value();
            acc.add(points[b]);
        }
        Self {
            prefix,
            suffix,
            points,
        }
    }

    fn bernoulli_sqrt(&self, a: usize, inside: f64, b: usize) -> (f64, f64) {
        let outside = self.prefix[a] + self.suffix[b];
        (libm::sqrt(inside.max(0.0)), libm::sqrt(outside.max(0.0)))
    }
}

/// Exhaustive maximum of the squared Bernoulli Hellinger distance between
/// `mix([a,b])` and `Poi(mu)([a,b])` over `0 ≤ a ≤ b ≤ x_max`. Ties go to the
/// lexicographically smallest `(a, b)`.
pub fn best_interval(mu: f64, mix: &PoissonMixture, x_max: u64) -> Result<BestInterval> {
    let rates = check_inputs(mu, mix)?;
    let window = window_for(&rates, 1e-18);
    let cutoff = window.cutoff.max(x_max);
    let table = LnFactorials::up_to(cutoff);
    let p_pts: Vec<f64> = (0..=cutoff).map(|x| table.pmf(mu, x)).collect();
    let q_pts: Vec<f64> = (0..=cutoff).map(|x| table.mixture(mix, x)).collect();
    let p = IntervalMasses::new(p_pts, x_max, 0.0);
    let q = IntervalMasses::new(q_pts, x_max, 0.0);

    let mut best = BestInterval {
        a: 0,
        b: 0,
        mu_mass: 0.0,
        mix_mass: 0.0,
        value: -1.0,
    };
    for a in 0..=x_max as usize {
        let mut pin = CompensatedSum::new();
        let mut qin = CompensatedSum::new();
        for b in a..=x_max as usize {
            pin.add(p.points[b]);
            qin.add(q.points[b]);
            let (pi, po) = p.bernoulli_sqrt(a, pin.value(), b);
            let (qi, qo) = q.bernoulli_sqrt(a, qin.value(), b);
            let value = (pi - qi) * (pi - qi) + (po - qo) * (po - qo);
            if value > best.value {
                best = BestInterval {
                    a: a as u64,
                    b: b as u64,
                    mu_mass: pin.value(),
                    mix_mass: qin.value(),
                    value,
                };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ThresholdSet {
    Empty,
    Full,
    /// The set is `[a, b]`.
    Interval {
        a: u64,
        b: u64,
    },
    /// The complement within `[0, X]` is `[a, b]`.
    ComplementInterval {
        a: u64,
        b: u64,
    },
}

/// `ln(mix(x)/Poi(mu)(x)) = ln mean_i exp(mu − λ_i + x ln(λ_i/mu))`, which
/// needs no factorials.
fn log_ratio(mu: f64, rates: &[f64], x: u64) -> f64 {
    let xf = x as f64;
    let terms: Vec<f64> = rates
        .iter()
        .map(|&l| {
            if l == 0.0 {
                if x == 0 {
                    mu
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                mu - l + xf * libm::log(l / mu)
            }
        })
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + libm::log(compensated(terms.iter().map(|&t| libm::exp(t - peak))) / rates.len() as f64)
}

/// Classifies `S = {x ≤ X : mix(x)/Poi(mu)(x) ≥ r}`.
///
/// `X` must lie where the ratio is already monotone: either every rate is at
/// most `mu` (ratio non-increasing everywhere) or the ratio increases from
/// `X` to `X + 1` (it then keeps increasing, by convexity of the log-ratio).
/// Returns [`Error::Violation`] if `S` is neither an interval nor the
/// complement of one.
pub fn threshold_set_structure(
    mu: f64,
    mix: &PoissonMixture,
    r: f64,
    x_cap: u64,
) -> Result<ThresholdSet> {
    check_rate("mu", mu)?;
    if mu == 0.0 {
        return Err(Error::param("mu", "ratio undefined for Poi(0)"));
    }
    if !r.is_finite() || r < 0.0 {
        return Err(Error::param(
            "r",
            format!("{r} is not a finite nonnegative threshold"),
        ));
    }
    let rates = mix.rates();
    let monotone = rates.iter().all(|&l| l <= mu)
        || log_ratio(mu, rates, x_cap + 1) >= log_ratio(mu, rates, x_cap);
    if !monotone {
        return Err(Error::param(
            "x_cap",
            format!("ratio is not yet monotone at {x_cap}"),
        ));
    }
    let ln_r = libm::log(r);
    let member: Vec<bool> = (0..=x_cap)
        .map(|x| log_ratio(mu, rates, x) >= ln_r)
        .collect();
    classify(&member)
}

fn single_run(flags: &[bool], target: bool) -> Option<(u64, u64)> {
    let first = flags.iter().position(|&f| f == target)?;
    let last = flags.iter().rposition(|&f| f == target)?;
    flags[first..=last]
        .iter()
        .all(|&f| f == target)
        .then_some((first as u64, last as u64))
}

fn classify(member: &[bool]) -> Result<ThresholdSet> {
    if member.iter().all(|&m| !m) {
        return Ok(ThresholdSet::Empty);
    }
    if member.iter().all(|&m| m) {
        return Ok(ThresholdSet::Full);
    }
    if let Some((a, b)) = single_run(member, true) {
        return Ok(ThresholdSet::Interval { a, b });
    }
    if let Some((a, b)) = single_run(member, false) {
        return Ok(ThresholdSet::ComplementInterval { a, b });
    }
    Err(Error::Violation(format!(
        "threshold set has pattern {member:?}"
    )))
}

/// Exact `d_TV(p^m, q^m)` by enumerating all `n^m` sequences.
pub fn brute_force_tv_product(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    m: u32,
) -> Result<f64> {
    let n = p.domain_size();
    if q.domain_size() != n {
        return Err(Error::DomainMismatch {
            left: n,
            right: q.domain_size(),
        });
    }
    if m == 0 {
        return Ok(0.0);
    }
    let size = libm::pow(n as f64, m as f64);
    if size > PRODUCT_ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: PRODUCT_ENUMERATION_LIMIT,
        });
    }
    let (pp, qp) = (p.probs(), q.probs());
    let mut digits = vec![0usize; m as usize];
    let mut acc = CompensatedSum::new();
    loop {
        let mut a = 1.0;
        let mut b = 1.0;
        for &d in &digits {
            a *= pp[d];
            b *= qp[d];
        }
        acc.add(libm::fabs(a - b));
        // odometer increment
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok((0.5 * acc.value()).clamp(0.0, 1.0));
            }
            digits[i] += 1;
            if digits[i] < n {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// `ceil(1/ε)` for a squared Hellinger distance `ε`: a constant-factor proxy
/// for the number of samples needed to tell the two distributions apart.
pub fn opt_proxy_from_hellinger(eps: f64) -> Result<u64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(libm::ceil(1.0 / eps) as u64)
}

/// Sample-count proxy for distinguishing `Poi(mu)` from `mix`. Not the
/// optimum itself; see [`opt_proxy_from_hellinger`].
pub fn estimate_opt_samples(mu: f64, mix: &PoissonMixture) -> Result<u64> {
    let h = exact_hellinger_poisson_vs_mixture(mu, mix, 1e-12)?;
    if h.value <= h.error_bound {
        return Err(Error::ZeroDistance);
    }
    opt_proxy_from_hellinger(h.value)
}

/// One instance of the interval-calibration corpus.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CalibrationInstance {
    pub mu: f64,
    pub rates: Vec<f64>,
    pub hellinger: f64,
    pub best_interval: f64,
    /// `ε / (best · ln(4/ε))`; the calibrated constant is the maximum.
    pub ratio: f64,
}

/// Random `(mu, mixture)` pair: `mu ∈ [0.5, 40]`, one to four components
/// with rates uniform on `[0, 2·mu + 5]`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> (f64, PoissonMixture) {
    let mu = rng.random_range(0.5..40.0);
    let k = rng.random_range(1..=4);
    let rates = (0..k)
        .map(|_| rng.random_range(0.0..2.0 * mu + 5.0))
        .collect();
    (
        mu,
        PoissonMixture::new(rates).expect("rates are finite and nonnegative"),
    )
}

/// Evaluates the constant `C` in `best ≥ ε / (C · ln(4/ε))` on one instance.
/// Instances with `ε` below `min_eps` are skipped (returns `None`).
pub fn calibrate_instance(
    mu: f64,
    mix: &PoissonMixture,
    min_eps: f64,
) -> Result<Option<CalibrationInstance>> {
    let h = exact_hellinger_poisson_vs_mixture(mu, mix, 1e-12)?;
    if h.value < min_eps {
        return Ok(None);
    }
    let best = best_interval(mu, mix, h.window.cutoff)?;
    let ratio = h.value / (best.value * libm::log(4.0 / h.value));
    Ok(Some(CalibrationInstance {
        mu,
        rates: mix.rates().to_vec(),
        hellinger: h.value,
        best_interval: best.value,
        ratio,
    }))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::distances::{hellinger_sq_bernoulli, poisson_interval_mass, poisson_pmf};
    use crate::SeededRng;

    const EPS_STAR: f64 = 0.294091124216176256573;
    const TV_STAR: f64 = 0.438594059854164603;

    fn pair() -> PoissonMixture {
        PoissonMixture::new(vec![5.0, 15.0]).unwrap()
    }

    #[test]
    fn hellinger_reference_pair() {
        let h = exact_hellinger_poisson_vs_mixture(10.0, &pair(), 1e-9).unwrap();
        assert!((h.value - EPS_STAR).abs() < 1e-12);
        assert!(h.error_bound <= 1e-9);
        assert!(h.window.tail_bound <= 1e-9 / 4.0);
    }

    #[test]
    fn tv_reference_pair_and_sandwich() {
        let tv = exact_tv_poisson_vs_mixture(10.0, &pair(), 1e-9).unwrap();
        assert!((tv.value - TV_STAR).abs() < 1e-12);
        assert!(0.5 * EPS_STAR <= tv.value && tv.value <= libm::sqrt(EPS_STAR));
    }

    #[test]
    fn identical_pair_is_zero() {
        for lambda in [0.0, 0.3, 7.0, 250.0] {
            let mix = PoissonMixture::single(lambda).unwrap();
            let h = exact_hellinger_poisson_vs_mixture(lambda, &mix, 1e-9).unwrap();
            let t = exact_tv_poisson_vs_mixture(lambda, &mix, 1e-9).unwrap();
            assert!(h.value <= 1e-9 && t.value <= 1e-9);
            assert_eq!(best_interval(lambda, &mix, 20).unwrap().value, 0.0);
        }
    }

    #[test]
    fn independent_pmf_agrees_with_log_gamma() {
        let t = LnFactorials::up_to(300);
        for (rate, x) in [(10.0, 10u64), (5.0, 10), (0.1, 0), (120.0, 250), (3.0, 40)] {
            let a = t.pmf(rate, x);
            let b = poisson_pmf(rate, x).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "{rate} {x}");
        }
        assert!((t.pmf(10.0, 10) - 0.125110035721).abs() < 1e-12);
    }

    #[test]
    fn best_interval_matches_fast_masses() {
        let mix = pair();
        let best = best_interval(10.0, &mix, 60).unwrap();
        assert!(best.a <= best.b && best.b <= 60);
        let p = poisson_interval_mass(10.0, best.a, best.b).unwrap().mass;
        assert!((p - best.mu_mass).abs() < 1e-13);
        let direct = hellinger_sq_bernoulli(best.mix_mass, best.mu_mass).unwrap();
        assert!((direct - best.value).abs() < 1e-12);
        assert!(best.value > 0.0);
    }

    #[test]
    fn threshold_set_reference_pair() {
        let s = threshold_set_structure(10.0, &pair(), 1.0, 60).unwrap();
        assert_eq!(s, ThresholdSet::ComplementInterval { a: 7, b: 14 });
        let at = |x| libm::exp(log_ratio(10.0, &[5.0, 15.0], x));
        assert!((at(7) - 0.63730).abs() < 5e-6);
        assert!((at(14) - 0.98803).abs() < 5e-6);
        assert!((at(15) - 1.47752).abs() < 5e-6);
        assert_eq!(
            threshold_set_structure(10.0, &pair(), 0.0, 60).unwrap(),
            ThresholdSet::Full
        );
    }

    #[test]
    fn threshold_set_window_precondition() {
        // ratio still decreasing at 3 for this pair
        assert!(threshold_set_structure(10.0, &pair(), 1.0, 3).is_err());
        // all rates below mu: any window is fine
        let low = PoissonMixture::new(vec![1.0, 4.0]).unwrap();
        let s = threshold_set_structure(10.0, &low, 1.0, 30).unwrap();
        assert!(matches!(s, ThresholdSet::Interval { a: 0, .. }));
    }

    #[test]
    fn classify_patterns() {
        assert_eq!(classify(&[false, false]).unwrap(), ThresholdSet::Empty);
        assert_eq!(
            classify(&[false, true, true, false]).unwrap(),
            ThresholdSet::Interval { a: 1, b: 2 }
        );
        assert_eq!(
            classify(&[true, false, true]).unwrap(),
            ThresholdSet::ComplementInterval { a: 1, b: 1 }
        );
        assert!(matches!(
            classify(&[true, false, true, false]),
            Err(Error::Violation(_))
        ));
    }

    #[test]
    fn random_threshold_sets_never_violate() {
        let mut rng = SeededRng::new(2024);
        for _ in 0..1000 {
            let (mu, mix) = random_instance(&mut rng);
            let r = rng.random_range(0.0..3.0);
            let mut x_cap = libm::ceil(2.0 * mix.max_rate().max(mu)) as u64 + 10;
            while threshold_set_structure(mu, &mix, r, x_cap)
                .is_err_and(|e| matches!(e, Error::InvalidParameter { .. }))
            {
                x_cap *= 2;
            }
            threshold_set_structure(mu, &mix, r, x_cap).unwrap();
        }
    }

    #[test]
    fn product_tv_basics() {
        let p = DiscreteDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let q = DiscreteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(brute_force_tv_product(&p, &p, 4).unwrap(), 0.0);
        let tv1 = crate::distances::tv_distance(&p, &q).unwrap();
        assert!((brute_force_tv_product(&p, &q, 1).unwrap() - tv1).abs() < 1e-15);
        let mut prev = 0.0;
        for m in 1..=4 {
            let v = brute_force_tv_product(&p, &q, m).unwrap();
            assert!(v <= m as f64 * tv1 + 1e-12);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        let big = DiscreteDistribution::uniform(100).unwrap();
        assert!(matches!(
            brute_force_tv_product(&big, &big, 4),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn opt_proxy() {
        assert!(matches!(
            estimate_opt_samples(10.0, &PoissonMixture::single(10.0).unwrap()),
            Err(Error::ZeroDistance)
        ));
        assert_eq!(estimate_opt_samples(10.0, &pair()).unwrap(), 4);
        assert_eq!(opt_proxy_from_hellinger(0.01).unwrap(), 100);
        assert_eq!(opt_proxy_from_hellinger(0.04).unwrap(), 25);
    }

    #[test]
    fn calibration_instances_are_finite() {
        let mut rng = SeededRng::new(5);
        let mut seen = 0;
        for _ in 0..20 {
            let (mu, mix) = random_instance(&mut rng);
            if let Some(c) = calibrate_instance(mu, &mix, 1e-6).unwrap() {
                assert!(c.ratio.is_finite() && c.ratio > 0.0);
                seen += 1;
            }
        }
        assert!(seen > 10);
    }
}
