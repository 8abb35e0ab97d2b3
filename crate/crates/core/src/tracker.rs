//! Anytime uniformity tracking by repeated doubling of a test budget.
//!
//! Stage `h` runs a fresh uniformity test with budget `m = 2^h` and failure
//! probability `min(delta/2^(h+1), 1/10)`. An accepting stage emits
//! `plausible` and doubles `m`; a rejecting stage emits `reject` and the
//! tracker stops for good.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::uniformity::{Branch, UniformityConstants, UniformityTestConfig, UniformityTester};
use crate::{Error, Result, SeededRng, UniformityVerdict, Witness};

/// Largest per-stage failure probability; keeps stage soundness at 9/10.
pub const MAX_STAGE_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Signal {
    Plausible,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrackerStatus {
    Plausible,
    Rejected,
    /// The configured last stage accepted. Not an accept.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StageOutcome {
    Accept,
    Reject,
    /// The stage's Poisson sample-size draw exceeded its cap; the stage is
    /// counted as a failure-budget event and the tracker moves on.
    BudgetExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StageRecord {
    pub stage: u32,
    pub m: u64,
    pub delta: f64,
    pub branch: Branch,
    pub samples_target: u64,
    pub samples_consumed: u64,
    /// Sample index (1-based, cumulative) at which the stage resolved.
    pub resolved_at: u64,
    pub outcome: StageOutcome,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrackerConfig {
    pub n: usize,
    pub delta: f64,
    /// Index of the last stage to run, if any.
    pub max_stage: Option<u32>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub constants: UniformityConstants,
}

impl TrackerConfig {
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            n,
            delta,
            max_stage: None,
            constants: UniformityConstants::default(),
        }
    }

    pub fn with_max_stage(mut self, h: u32) -> Self {
        self.max_stage = Some(h);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("{} < 2", self.n)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::param(
                "delta",
                format!("{} not in (0, 1]", self.delta),
            ));
        }
        if matches!(self.max_stage, Some(h) if h > 62) {
            return Err(Error::param("max_stage", "budget 2^h must fit in 63 bits"));
        }
        Ok(())
    }

    /// Failure budget `delta / 2^(h+1)` charged to stage `h`.
    pub fn stage_budget(&self, h: u32) -> f64 {
        self.delta / libm::exp2(h as f64 + 1.0)
    }

    /// Failure probability the stage-`h` tester is actually run with.
    pub fn stage_delta(&self, h: u32) -> f64 {
        self.stage_budget(h).min(MAX_STAGE_DELTA)
    }
}

struct Stage {
    tester: UniformityTester,
    rng: SeededRng,
    buffer: Vec<usize>,
}

/// Single-stream tracker. Feed symbols one at a time with [`Tracker::feed`].
pub struct Tracker {
    config: TrackerConfig,
    rng: SeededRng,
    h: u32,
    stage: Option<Stage>,
    consumed: u64,
    status: TrackerStatus,
    history: Vec<StageRecord>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut t = Self {
            config,
            rng: SeededRng::new(seed),
            h: 0,
            stage: None,
            consumed: 0,
            status: TrackerStatus::Plausible,
            history: Vec::new(),
        };
        t.open_stage()?;
        Ok(t)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn status(&self) -> TrackerStatus {
        self.status
    }

    /// Current stage index `h`.
    pub fn stage(&self) -> u32 {
        self.h
    }

    /// Current budget `m = 2^h`.
    pub fn budget(&self) -> u64 {
        1u64 << self.h
    }

    pub fn samples_consumed(&self) -> u64 {
        self.consumed
    }

    /// Samples the current stage still needs before it resolves.
    pub fn samples_until_resolution(&self) -> Option<u64> {
        self.stage
            .as_ref()
            .map(|s| s.tester.samples_required() - s.buffer.len() as u64)
    }

    /// Resolved stages, oldest first.
    pub fn history(&self) -> &[StageRecord] {
        &self.history
    }

    /// Sum of failure budgets of the stages resolved so far; always `< delta`.
    pub fn failure_budget_spent(&self) -> f64 {
        self.history
            .iter()
            .map(|r| self.config.stage_budget(r.stage))
            .sum()
    }

    pub fn feed(&mut self, symbol: usize) -> Result<Signal> {
        if self.status != TrackerStatus::Plausible {
            return Err(Error::TrackerFinished);
        }
        if symbol == 0 || symbol > self.config.n {
            return Err(Error::SymbolOutOfRange {
                symbol,
                n: self.config.n,
            });
        }
        let stage = self.stage.as_mut().expect("open stage while plausible");
        stage.buffer.push(symbol);
        self.consumed += 1;
        if stage.buffer.len() as u64 == stage.tester.samples_required() {
            self.resolve()?;
        }
        Ok(match self.status {
            TrackerStatus::Rejected => Signal::Reject,
            _ => Signal::Plausible,
        })
    }

    /// Feeds symbols until the tracker stops or the stream ends.
    pub fn run<I: IntoIterator<Item = usize>>(&mut self, stream: I) -> Result<TrackerStatus> {
        for symbol in stream {
            self.feed(symbol)?;
            if self.status != TrackerStatus::Plausible {
                break;
            }
        }
        Ok(self.status)
    }

    fn open_stage(&mut self) -> Result<()> {
        let config = UniformityTestConfig {
            n: self.config.n,
            m: 1u64 << self.h,
            delta: self.config.stage_delta(self.h),
            constants: self.config.constants,
        };
        let mut rng = self.rng.child(self.h as u64);
        let tester = UniformityTester::plan(config, &mut rng)?;
        let required = tester.samples_required() as usize;
        self.stage = Some(Stage {
            tester,
            rng,
            buffer: Vec::with_capacity(required.min(1 << 20)),
        });
        if required == 0 {
            self.resolve()?;
        }
        Ok(())
    }

    fn resolve(&mut self) -> Result<()> {
        let Stage {
            tester,
            mut rng,
            buffer,
        } = self.stage.take().expect("stage to resolve");
        let verdict = tester.decide(&buffer, &mut rng)?;
        let (outcome, witness) = match verdict {
            UniformityVerdict::Accept => (StageOutcome::Accept, None),
            UniformityVerdict::Reject { witness } => (StageOutcome::Reject, Some(witness)),
            UniformityVerdict::BudgetExceeded { .. } => (StageOutcome::BudgetExceeded, None),
        };
        let cfg = tester.config();
        self.history.push(StageRecord {
            stage: self.h,
            m: cfg.m,
            delta: cfg.delta,
            branch: tester.branch(),
            samples_target: tester.samples_required(),
            samples_consumed: buffer.len() as u64,
            resolved_at: self.consumed,
            outcome,
            witness,
        });
        if outcome == StageOutcome::Reject {
            self.status = TrackerStatus::Rejected;
            return Ok(());
        }
        if self.config.max_stage.is_some_and(|last| self.h >= last) || self.h >= 62 {
            self.status = TrackerStatus::BudgetExhausted;
            return Ok(());
        }
        self.h += 1;
        self.open_stage()
    }
}

/// Expected-sample bound `Σ_{l<h} s(2^l) + Σ_{h'≥h} 10^{-(h'-h)} s(2^{h'})`
/// for a source first rejected with probability ≥ 9/10 at stage `h`.
///
/// The tail series is summed until a term drops below `1e-12` of the total.
/// Returns infinity if it has not converged by the time `2^{h'}` would
/// overflow.
pub fn expected_samples_bound<F: Fn(u64) -> f64>(stage_samples: F, h: u32) -> f64 {
    let mut total = 0.0;
    for l in 0..h.min(63) {
        total += stage_samples(1u64 << l);
    }
    let mut weight = 1.0;
    for hp in h..64 {
        let term = weight * stage_samples(1u64 << hp);
        if !term.is_finite() {
            return f64::INFINITY;
        }
        total += term;
        if hp > h && term <= 1e-12 * total {
            return total;
        }
        weight *= 0.1;
    }
    f64::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::full_tester::FullTesterConstants;
    use core::iter;
    use rand::Rng;

    fn quick(n: usize, delta: f64) -> TrackerConfig {
        TrackerConfig {
            constants: UniformityConstants {
                full: FullTesterConstants {
                    repeats_override: Some(4),
                    ..FullTesterConstants::default()
                },
                ..UniformityConstants::default()
            },
            ..TrackerConfig::new(n, delta)
        }
    }

    #[test]
    fn constructor_and_budgets() {
        let t = Tracker::new(TrackerConfig::new(10, 0.1), 0).unwrap();
        assert_eq!(t.budget(), 1);
        assert_eq!(t.stage(), 0);
        assert_eq!(t.status(), TrackerStatus::Plausible);
        let c = t.config();
        assert!((c.stage_budget(0) - 0.05).abs() < 1e-15);
        assert!((c.stage_budget(3) - 0.1 / 16.0).abs() < 1e-15);
        let total: f64 = (0..40).map(|h| c.stage_budget(h)).sum();
        assert!(total < 0.1);
        assert_eq!(TrackerConfig::new(10, 1.0).stage_delta(0), MAX_STAGE_DELTA);
    }

    #[test]
    fn invalid_configs() {
        assert!(Tracker::new(TrackerConfig::new(1, 0.1), 0).is_err());
        assert!(Tracker::new(TrackerConfig::new(10, 0.0), 0).is_err());
        assert!(Tracker::new(TrackerConfig::new(10, 1.5), 0).is_err());
        assert!(Tracker::new(TrackerConfig::new(10, 0.1).with_max_stage(70), 0).is_err());
    }

    #[test]
    fn point_mass_rejects_and_freezes() {
        let mut t = Tracker::new(quick(64, 0.2), 3).unwrap();
        let status = t.run(iter::repeat(5)).unwrap();
        assert_eq!(status, TrackerStatus::Rejected);
        assert!(matches!(t.feed(5), Err(Error::TrackerFinished)));
        let last = t.history().last().unwrap();
        assert_eq!(last.outcome, StageOutcome::Reject);
        assert_eq!(last.resolved_at, t.samples_consumed());
    }

    #[test]
    fn stage_budgets_double_and_accounting_adds_up() {
        let mut rng = SeededRng::new(11);
        let mut t = Tracker::new(quick(64, 0.2).with_max_stage(4), 5).unwrap();
        let status = t
            .run(iter::repeat_with(|| rng.random_range(1..=64)))
            .unwrap();
        let h = t.history();
        for (i, r) in h.iter().enumerate() {
            assert_eq!(r.stage as usize, i);
            assert_eq!(r.m, 1 << i);
        }
        let sum: u64 = h.iter().map(|r| r.samples_consumed).sum();
        assert_eq!(sum, t.samples_consumed());
        assert!(t.failure_budget_spent() < 0.2);
        if status == TrackerStatus::BudgetExhausted {
            assert_eq!(h.len(), 5);
            assert!(matches!(t.feed(1), Err(Error::TrackerFinished)));
        }
    }

    #[test]
    fn signals_are_plausible_until_reject() {
        let mut t = Tracker::new(quick(16, 0.2), 9).unwrap();
        let mut signals = Vec::new();
        while t.status() == TrackerStatus::Plausible {
            signals.push(t.feed(2).unwrap());
        }
        let (last, rest) = signals.split_last().unwrap();
        assert_eq!(*last, Signal::Reject);
        assert!(rest.iter().all(|s| *s == Signal::Plausible));
    }

    #[test]
    fn out_of_range_symbol() {
        let mut t = Tracker::new(TrackerConfig::new(10, 0.1), 0).unwrap();
        assert!(matches!(t.feed(0), Err(Error::SymbolOutOfRange { .. })));
        assert!(matches!(t.feed(11), Err(Error::SymbolOutOfRange { .. })));
        assert_eq!(t.samples_consumed(), 0);
    }

    #[test]
    fn reproducible_given_seed() {
        let run = |seed| {
            let mut rng = SeededRng::new(42);
            let mut t = Tracker::new(quick(64, 0.2).with_max_stage(3), seed).unwrap();
            t.run(iter::repeat_with(|| rng.random_range(1..=64)))
                .unwrap();
            (t.status(), t.samples_consumed())
        };
        assert_eq!(run(1), run(1));
    }

    #[test]
    fn bound_linear_stage_cost() {
        assert!((expected_samples_bound(|m| m as f64, 3) - 17.0).abs() < 1e-9);
        let a = expected_samples_bound(|m| m as f64, 5);
        let b = expected_samples_bound(|m| 3.5 * m as f64, 5);
        assert!((b - 3.5 * a).abs() < 1e-9 * b);
    }

    #[test]
    fn bound_polylog_stage_cost() {
        let s = |m: u64| {
            let l = libm::log(m as f64 + 2.0);
            m as f64 * l * l
        };
        // direct summation: 0.2-geometric tail, 200 terms are far past 1e-9
        let mut direct = 0.0;
        for l in 0..4 {
            direct += s(1 << l);
        }
        let mut w = 1.0;
        for hp in 4..63u32 {
            direct += w * s(1u64 << hp);
            w *= 0.1;
        }
        assert!((expected_samples_bound(s, 4) - direct).abs() < 1e-9 * direct);
    }
}
