//! End-to-end uniformity tester against a sample budget `m`.
//!
//! For `m ≤ √n/2` the tester runs majority-vote collision groups. Otherwise
//! it Poissonizes: draws `Z ~ Poi(s·m')`, reads `Z` samples, permutes the
//! resulting frequency vector and hands it to the full tester with null
//! rate `m'/n`, where `m' = max(2m, 20)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::full_tester::{
    derive_full_params_with, run_full_tester, FullTesterConstants, FullTesterParams,
};
use crate::poisson::{poissonize, sample_poisson};
use crate::{Error, Result, Verdict, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Branch {
    Collision,
    Poissonized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SampleBudgetReport {
    pub samples_requested: u64,
    pub samples_consumed: u64,
    pub branch: Branch,
}

/// Result of a uniformity test. `BudgetExceeded` is the rare event that
/// the Poisson sample-size draw overshoots its hard cap; it is charged to
/// the failure budget and reported separately from accept and reject.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum UniformityVerdict {
    Accept,
    Reject { witness: Witness },
    BudgetExceeded { drawn: u64, cap: u64 },
}

impl UniformityVerdict {
    pub fn is_reject(&self) -> bool {
        matches!(self, UniformityVerdict::Reject { .. })
    }

    pub fn is_accept(&self) -> bool {
        matches!(self, UniformityVerdict::Accept)
    }
}

impl From<Verdict> for UniformityVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Accept => UniformityVerdict::Accept,
            Verdict::Reject { witness } => UniformityVerdict::Reject { witness },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct UniformityConstants {
    /// Collision groups: smallest odd integer `≥ group_factor · ln(2/delta)`.
    ///
    /// Per-group collision probability is `≤ 1/4` under uniform and `≥ 2/3`
    /// when the budget is adequate; by the KL Chernoff bound a majority vote
    /// over `g` groups errs with probability at most `e^{−g·KL(½‖⅔)}`
    /// `≈ e^{−0.0589 g}`, and `0.0589 · 48 > 2`, so `g ≥ 48 ln(2/δ)` gives
    /// error `≤ (δ/2)²`.
    pub group_factor: f64,
    /// Floor on the Poissonized budget `m' = max(2m, min_poisson_budget)`.
    pub min_poisson_budget: u64,
    pub full: FullTesterConstants,
}

impl Default for UniformityConstants {
    fn default() -> Self {
        Self {
            group_factor: 48.0,
            min_poisson_budget: 20,
            full: FullTesterConstants::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct UniformityTestConfig {
    pub n: usize,
    /// Sample budget the test must be competitive with.
    pub m: u64,
    pub delta: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub constants: UniformityConstants,
}

impl UniformityTestConfig {
    pub fn new(n: usize, m: u64, delta: f64) -> Self {
        Self {
            n,
            m,
            delta,
            constants: UniformityConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("{} < 2", self.n)));
        }
        if self.m == 0 {
            return Err(Error::param("m", "budget must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(
                "delta",
                format!("{} not in (0, 1)", self.delta),
            ));
        }
        Ok(())
    }

    pub fn branch(&self) -> Branch {
        if uses_collision_branch(self.n, self.m) {
            Branch::Collision
        } else {
            Branch::Poissonized
        }
    }
}

/// `m ≤ √n / 2`, evaluated exactly as `4m² ≤ n`.
pub fn uses_collision_branch(n: usize, m: u64) -> bool {
    4 * (m as u128) * (m as u128) <= n as u128
}

/// Smallest odd integer `≥ factor · ln(2/delta)`.
pub fn collision_group_count(delta: f64, factor: f64) -> usize {
    let g = libm::ceil(factor * libm::log(2.0 / delta)).max(1.0) as usize;
    if g.is_multiple_of(2) {
        g + 1
    } else {
        g
    }
}

/// Sample plan fixed before any sample is read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestPlan {
    Collision {
        groups: usize,
        group_size: usize,
    },
    Poissonized {
        params: FullTesterParams,
        budget: u64,
        /// `Z ~ Poi(s · budget)`.
        draw: u64,
        /// `floor(2·s·budget + 6·ln(2/delta))`.
        cap: u64,
    },
}

/// A uniformity test whose sample requirement is known up front, so the
/// caller can feed samples incrementally (the tracker does this).
#[derive(Debug, Clone)]
pub struct UniformityTester {
    config: UniformityTestConfig,
    plan: TestPlan,
}

impl UniformityTester {
    /// Fixes the plan. The Poissonized branch draws its sample size here.
    pub fn plan<R: Rng + ?Sized>(config: UniformityTestConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let plan = match config.branch() {
            Branch::Collision => TestPlan::Collision {
                groups: collision_group_count(config.delta, config.constants.group_factor),
                group_size: config.m as usize,
            },
            Branch::Poissonized => {
                let budget = (2 * config.m).max(config.constants.min_poisson_budget);
                let mu = budget as f64 / config.n as f64;
                let params =
                    derive_full_params_with(config.n, mu, config.delta, &config.constants.full)?;
                let mean = params.s as f64 * budget as f64;
                let cap = libm::floor(2.0 * mean + 6.0 * libm::log(2.0 / config.delta)) as u64;
                let draw = sample_poisson(mean, rng)?;
                TestPlan::Poissonized {
                    params,
                    budget,
                    draw,
                    cap,
                }
            }
        };
        Ok(Self { config, plan })
    }

    pub fn config(&self) -> &UniformityTestConfig {
        &self.config
    }

    pub fn plan_details(&self) -> &TestPlan {
        &self.plan
    }

    pub fn branch(&self) -> Branch {
        match self.plan {
            TestPlan::Collision { .. } => Branch::Collision,
            TestPlan::Poissonized { .. } => Branch::Poissonized,
        }
    }

    /// True when the Poisson draw overshot its cap; no samples are read then.
    pub fn budget_exceeded(&self) -> bool {
        matches!(self.plan, TestPlan::Poissonized { draw, cap, .. } if draw > cap)
    }

    /// Number of samples [`Self::decide`] expects.
    pub fn samples_required(&self) -> u64 {
        match self.plan {
            TestPlan::Collision { groups, group_size } => (groups * group_size) as u64,
            TestPlan::Poissonized { draw, cap, .. } => {
                if draw > cap {
                    0
                } else {
                    draw
                }
            }
        }
    }

    /// Largest number of samples this test could ever read.
    pub fn samples_requested(&self) -> u64 {
        match self.plan {
            TestPlan::Collision { groups, group_size } => (groups * group_size) as u64,
            TestPlan::Poissonized { cap, .. } => cap,
        }
    }

    pub fn report(&self, consumed: u64) -> SampleBudgetReport {
        SampleBudgetReport {
            samples_requested: self.samples_requested(),
            samples_consumed: consumed,
            branch: self.branch(),
        }
    }

    /// Decides on exactly [`Self::samples_required`] 1-based symbols.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        samples: &[usize],
        rng: &mut R,
    ) -> Result<UniformityVerdict> {
        let required = self.samples_required() as usize;
        if samples.len() != required {
            return Err(Error::SampleCountMismatch {
                expected: required,
                actual: samples.len(),
            });
        }
        match self.plan {
            TestPlan::Collision { groups, group_size } => {
                Ok(collision_majority(self.config.n, groups, group_size, samples)?.into())
            }
            TestPlan::Poissonized { draw, cap, .. } if draw > cap => {
                Ok(UniformityVerdict::BudgetExceeded { drawn: draw, cap })
            }
            TestPlan::Poissonized { params, .. } => {
                let mut freq = poissonize(samples, self.config.n)?;
                freq.permute(rng);
                Ok(run_full_tester(&params, &freq, rng)?.into())
            }
        }
    }
}

fn take_samples<I: Iterator<Item = usize>>(stream: &mut I, count: u64) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(count as usize);
    out.extend(stream.take(count as usize));
    if (out.len() as u64) < count {
        return Err(Error::StreamExhausted {
            needed: count,
            got: out.len() as u64,
        });
    }
    Ok(out)
}

/// Tests `stream` for uniformity at budget `config.m`, reading no more than
/// the plan's cap.
pub fn test_uniformity<I, R>(
    config: UniformityTestConfig,
    stream: I,
    rng: &mut R,
) -> Result<(UniformityVerdict, SampleBudgetReport)>
where
    I: IntoIterator<Item = usize>,
    R: Rng + ?Sized,
{
    let tester = UniformityTester::plan(config, rng)?;
    let mut stream = stream.into_iter();
    let samples = take_samples(&mut stream, tester.samples_required())?;
    let verdict = tester.decide(&samples, rng)?;
    Ok((verdict, tester.report(samples.len() as u64)))
}

fn collision_majority(
    n: usize,
    groups: usize,
    group_size: usize,
    samples: &[usize],
) -> Result<Verdict> {
    // stamp[i] == g + 1 when symbol i + 1 has been seen in group g
    let mut stamp = vec![0u32; n];
    let mut colliding = 0;
    for (g, group) in samples.chunks(group_size).enumerate() {
        let mark = g as u32 + 1;
        let mut hit = false;
        for &symbol in group {
            if symbol == 0 || symbol > n {
                return Err(Error::SymbolOutOfRange { symbol, n });
            }
            let slot = &mut stamp[symbol - 1];
            if *slot == mark {
                hit = true;
            }
            *slot = mark;
        }
        if hit {
            colliding += 1;
        }
    }
    if 2 * colliding > groups {
        Ok(Verdict::Reject {
            witness: Witness::CollisionGroups { colliding, groups },
        })
    } else {
        Ok(Verdict::Accept)
    }
}

/// Majority vote over `g` groups of `m` fresh samples; rejects iff more
/// than half of the groups contain a repeated symbol. Requires `m ≤ √n/2`.
pub fn collision_group_test<I>(
    n: usize,
    m: u64,
    delta: f64,
    stream: I,
) -> Result<(Verdict, SampleBudgetReport)>
where
    I: IntoIterator<Item = usize>,
{
    let config = UniformityTestConfig::new(n, m, delta);
    config.validate()?;
    if !uses_collision_branch(n, m) {
        return Err(Error::param("m", format!("{m} exceeds √n/2 for n = {n}")));
    }
    let groups = collision_group_count(delta, config.constants.group_factor);
    let needed = groups as u64 * m;
    let samples = take_samples(&mut stream.into_iter(), needed)?;
    let verdict = collision_majority(n, groups, m as usize, &samples)?;
    Ok((
        verdict,
        SampleBudgetReport {
            samples_requested: needed,
            samples_consumed: needed,
            branch: Branch::Collision,
        },
    ))
}

/// Pairwise-collision fraction `Σ_i C(f_i, 2) / C(m, 2)` of a sample.
pub fn collision_fraction(counts: &[u64], m: u64) -> f64 {
    let pairs: u128 = counts
        .iter()
        .map(|&f| (f as u128) * (f as u128).saturating_sub(1) / 2)
        .sum();
    let total = (m as u128) * (m as u128 - 1) / 2;
    pairs as f64 / total as f64
}

/// Classical collision tester: accepts iff the pairwise-collision fraction
/// of `m` samples is at most `1/n + 2/(m·√n)`.
pub fn collision_count_baseline<I>(n: usize, m: u64, stream: I) -> Result<Verdict>
where
    I: IntoIterator<Item = usize>,
{
    if n < 1 {
        return Err(Error::param("n", "domain must be nonempty"));
    }
    if m < 2 {
        return Err(Error::param("m", "need at least two samples"));
    }
    let samples = take_samples(&mut stream.into_iter(), m)?;
    let freq = poissonize(&samples, n)?;
    let fraction = collision_fraction(freq.counts(), m);
    let threshold = 1.0 / n as f64 + 2.0 / (m as f64 * libm::sqrt(n as f64));
    if fraction <= threshold {
        Ok(Verdict::Accept)
    } else {
        Ok(Verdict::Reject {
            witness: Witness::CollisionFraction {
                fraction,
                threshold,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SeededRng;
    use core::iter;

    fn uniform_stream(n: usize, rng: &mut SeededRng) -> impl Iterator<Item = usize> + '_ {
        iter::repeat_with(move || rng.random_range(1..=n))
    }

    #[test]
    fn branch_predicate_is_exact() {
        assert!(uses_collision_branch(10_000, 40));
        assert!(uses_collision_branch(10_000, 50));
        assert!(!uses_collision_branch(10_000, 51));
        assert!(uses_collision_branch(64, 4));
        assert!(!uses_collision_branch(64, 5));
        assert_eq!(
            UniformityTestConfig::new(10_000, 40, 0.1).branch(),
            Branch::Collision
        );
    }

    #[test]
    fn group_count_is_smallest_odd() {
        let g = collision_group_count(0.1, 48.0);
        assert!(g % 2 == 1);
        assert!(g as f64 >= 48.0 * libm::log(20.0));
        assert!((g as f64 - 2.0) < 48.0 * libm::log(20.0));
    }

    #[test]
    fn point_mass_always_collides() {
        let (v, report) = collision_group_test(100, 2, 0.1, iter::repeat(7)).unwrap();
        match v {
            Verdict::Reject {
                witness: Witness::CollisionGroups { colliding, groups },
            } => assert_eq!(colliding, groups),
            other => panic!("{other:?}"),
        }
        assert_eq!(report.samples_consumed, report.samples_requested);
        assert_eq!(report.branch, Branch::Collision);
    }

    #[test]
    fn collision_group_test_preconditions() {
        assert!(collision_group_test(100, 6, 0.1, iter::repeat(1)).is_err());
        assert!(matches!(
            collision_group_test(100, 5, 0.1, [1usize, 2, 3]),
            Err(Error::StreamExhausted { .. })
        ));
        assert!(matches!(
            collision_group_test(100, 2, 0.1, iter::repeat(101)),
            Err(Error::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn uniform_mostly_accepted_by_groups() {
        let mut rng = SeededRng::new(1);
        let mut accepts = 0;
        for t in 0..50 {
            let mut child = rng.child(t);
            let (v, _) =
                collision_group_test(10_000, 40, 0.1, uniform_stream(10_000, &mut child)).unwrap();
            if v.is_accept() {
                accepts += 1;
            }
        }
        let _ = rng.random::<u64>();
        assert!(accepts >= 45);
    }

    #[test]
    fn baseline_point_mass_rejects() {
        let v = collision_count_baseline(50, 10, iter::repeat(3)).unwrap();
        match v {
            Verdict::Reject {
                witness: Witness::CollisionFraction { fraction, .. },
            } => assert_eq!(fraction, 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collision_fraction_counts_pairs() {
        // counts (2, 0, 1) over m = 3: one colliding pair out of three
        assert!((collision_fraction(&[2, 0, 1], 3) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(collision_fraction(&[1, 1, 1, 1], 4), 0.0);
    }

    #[test]
    fn poissonized_plan_respects_cap() {
        let mut rng = SeededRng::new(4);
        let config = UniformityTestConfig::new(64, 32, 0.1);
        let tester = UniformityTester::plan(config, &mut rng).unwrap();
        assert_eq!(tester.branch(), Branch::Poissonized);
        let TestPlan::Poissonized {
            params,
            budget,
            draw,
            cap,
        } = *tester.plan_details()
        else {
            panic!()
        };
        assert_eq!(budget, 64);
        assert!((params.mu - 1.0).abs() < 1e-15);
        let expected_cap = libm::floor(2.0 * params.s as f64 * 64.0 + 6.0 * libm::log(20.0)) as u64;
        assert_eq!(cap, expected_cap);
        assert!(draw <= cap);
        assert_eq!(tester.samples_required(), draw);
        assert!(tester.samples_required() <= tester.samples_requested());
    }

    #[test]
    fn small_budget_uses_floor_of_twenty() {
        let mut rng = SeededRng::new(4);
        let tester =
            UniformityTester::plan(UniformityTestConfig::new(16, 3, 0.1), &mut rng).unwrap();
        let TestPlan::Poissonized { budget, .. } = *tester.plan_details() else {
            panic!()
        };
        assert_eq!(budget, 20);
    }

    #[test]
    fn budget_exceeded_reads_nothing() {
        let config = UniformityTestConfig::new(16, 3, 0.1);
        let mut tester = UniformityTester::plan(config, &mut SeededRng::new(1)).unwrap();
        if let TestPlan::Poissonized {
            ref mut draw, cap, ..
        } = tester.plan
        {
            *draw = cap + 1;
        }
        assert!(tester.budget_exceeded());
        assert_eq!(tester.samples_required(), 0);
        let v = tester.decide(&[], &mut SeededRng::new(2)).unwrap();
        assert!(matches!(v, UniformityVerdict::BudgetExceeded { .. }));
    }

    #[test]
    fn decide_checks_sample_count() {
        let tester = UniformityTester::plan(
            UniformityTestConfig::new(100, 2, 0.1),
            &mut SeededRng::new(1),
        )
        .unwrap();
        assert!(tester.decide(&[1, 2, 3], &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut rng = SeededRng::new(0);
        for c in [
            UniformityTestConfig::new(1, 2, 0.1),
            UniformityTestConfig::new(10, 0, 0.1),
            UniformityTestConfig::new(10, 2, 1.0),
        ] {
            assert!(test_uniformity(c, iter::repeat(1), &mut rng).is_err());
        }
    }

    #[test]
    fn stream_exhaustion_reported() {
        let mut rng = SeededRng::new(0);
        let r = test_uniformity(
            UniformityTestConfig::new(16, 8, 0.1),
            [1usize; 10],
            &mut rng,
        );
        assert!(matches!(r, Err(Error::StreamExhausted { got: 10, .. })));
    }
}
