//! Seeded Monte Carlo experiments over distribution families.
//!
//! Trial `i` uses the generator `child(master_seed, i)`; its symbol stream
//! draws from that generator's child 0 and the tester's own randomness from
//! child 1. Trials run on the rayon pool and are returned in index order.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unifwatch_core::full_tester::{derive_full_params_with, run_full_tester_with};
use unifwatch_core::poisson::sample_perm_poisson;
use unifwatch_core::tracker::StageOutcome;
use unifwatch_core::uniformity::{collision_count_baseline, test_uniformity, UniformityConstants};
use unifwatch_core::{
    Branch, DiscreteDistribution, SeededRng, SubsetStrategy, Tracker, TrackerConfig, TrackerStatus,
    UniformityTestConfig, UniformityVerdict, Verdict, Witness,
};

use crate::error::{HarnessError, Result};
use crate::families::{poisson_rates, realize_family, DistributionFamilySpec, Sampler};
use crate::stats::{mean_estimate, wilson, MeanEstimate, Proportion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageTester {
    Uniformity,
    CollisionBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tester", rename_all = "snake_case")]
pub enum TesterSpec {
    /// One uniformity test at budget `m`.
    Uniformity { m: u64, delta: f64 },
    /// One pairwise-collision test on `m` samples.
    CollisionBaseline { m: u64 },
    /// Anytime tracker run until it rejects or finishes stage `max_stage`.
    Tracker { delta: f64, max_stage: u32 },
    /// Runs `stage_tester` at budgets `1, 2, 4, …` on fresh samples until it
    /// rejects; reports the total samples consumed. Every stage uses the
    /// same `delta`. The baseline starts at budget 2.
    SamplesToReject {
        stage_tester: StageTester,
        delta: f64,
        max_stage: u32,
    },
    /// Full tester on a permuted Poissonized frequency vector with rates
    /// `s · n · mu · p(i)`.
    FullTester { mu: f64, delta: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    /// Replaces the derived full-tester repeat count `r`.
    pub repeats: Option<usize>,
    /// Replaces the collision-group factor.
    pub group_factor: Option<f64>,
    pub subset_strategy: Option<SubsetStrategy>,
}

impl Overrides {
    pub fn constants(&self) -> UniformityConstants {
        let mut c = UniformityConstants::default();
        if let Some(r) = self.repeats {
            c.full.repeats_override = Some(r);
        }
        if let Some(g) = self.group_factor {
            c.group_factor = g;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: DistributionFamilySpec,
    pub tester: TesterSpec,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(HarnessError::config("trials must be at least 1"));
        }
        realize_family(&self.family)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept,
    Reject,
    /// Poisson sample-size draw exceeded its cap.
    BudgetExceeded,
    /// Tracker or doubling search hit its last stage without rejecting.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub branch: Option<Branch>,
    pub samples_consumed: u64,
    /// Stages run (tracker and doubling search only).
    pub stages: Option<u32>,
    pub witness: Option<Witness>,
    /// Informative only; excluded from reproducibility comparisons.
    pub wall_time_ms: f64,
}

impl TrialRecord {
    /// The record with its wall time zeroed, for comparisons across runs.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_ms: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub accept: Proportion,
    pub reject: Proportion,
    pub budget_exceeded: usize,
    pub budget_exhausted: usize,
    pub samples_consumed: Option<MeanEstimate>,
    /// Mean samples consumed over rejecting trials.
    pub samples_to_reject: Option<MeanEstimate>,
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let count = |o| records.iter().filter(|r| r.outcome == o).count();
    Summary {
        trials: records.len(),
        accept: wilson(count(Outcome::Accept), records.len()),
        reject: wilson(count(Outcome::Reject), records.len()),
        budget_exceeded: count(Outcome::BudgetExceeded),
        budget_exhausted: count(Outcome::BudgetExhausted),
        samples_consumed: mean_estimate(records.iter().map(|r| r.samples_consumed as f64)),
        samples_to_reject: mean_estimate(
            records
                .iter()
                .filter(|r| r.outcome == Outcome::Reject)
                .map(|r| r.samples_consumed as f64),
        ),
    }
}

struct Prepared {
    dist: DiscreteDistribution,
    sampler: Sampler,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Summary)> {
    config.validate()?;
    let dist = realize_family(&config.family)?;
    let prepared = Prepared {
        sampler: Sampler::new(&dist)?,
        dist,
    };
    let master = SeededRng::new(config.seed);
    let records = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, &prepared, master.child(i as u64), i))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records);
    Ok((records, summary))
}

fn verdict_parts(v: Verdict) -> (Outcome, Option<Witness>) {
    match v {
        Verdict::Accept => (Outcome::Accept, None),
        Verdict::Reject { witness } => (Outcome::Reject, Some(witness)),
    }
}

fn uniformity_parts(v: UniformityVerdict) -> (Outcome, Option<Witness>) {
    match v {
        UniformityVerdict::Accept => (Outcome::Accept, None),
        UniformityVerdict::Reject { witness } => (Outcome::Reject, Some(witness)),
        UniformityVerdict::BudgetExceeded { .. } => (Outcome::BudgetExceeded, None),
    }
}

fn run_trial(
    config: &ExperimentConfig,
    prep: &Prepared,
    rng: SeededRng,
    trial: usize,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = rng.seed();
    let mut stream_rng = rng.child(0);
    let mut test_rng = rng.child(1);
    let n = prep.dist.domain_size();
    let constants = config.overrides.constants();
    let mut stream = prep.sampler.stream(&mut stream_rng);

    let mut stages = None;
    let mut branch = None;
    let (outcome, witness, consumed) = match config.tester {
        TesterSpec::Uniformity { m, delta } => {
            let cfg = UniformityTestConfig {
                constants,
                ..UniformityTestConfig::new(n, m, delta)
            };
            let (v, report) = test_uniformity(cfg, &mut stream, &mut test_rng)?;
            branch = Some(report.branch);
            let (o, w) = uniformity_parts(v);
            (o, w, report.samples_consumed)
        }
        TesterSpec::CollisionBaseline { m } => {
            let (o, w) = verdict_parts(collision_count_baseline(n, m, &mut stream)?);
            (o, w, m)
        }
        TesterSpec::Tracker { delta, max_stage } => {
            let tc = TrackerConfig {
                constants,
                ..TrackerConfig::new(n, delta).with_max_stage(max_stage)
            };
            let mut tracker = Tracker::new(tc, test_rng.seed())?;
            let status = tracker.run(&mut stream)?;
            let last = tracker.history().last();
            stages = Some(tracker.history().len() as u32);
            branch = last.map(|r| r.branch);
            let outcome = match status {
                TrackerStatus::Rejected => Outcome::Reject,
                TrackerStatus::BudgetExhausted => Outcome::BudgetExhausted,
                TrackerStatus::Plausible => {
                    unreachable!("infinite stream ends only on termination")
                }
            };
            let witness = last
                .filter(|r| r.outcome == StageOutcome::Reject)
                .and_then(|r| r.witness);
            (outcome, witness, tracker.samples_consumed())
        }
        TesterSpec::SamplesToReject {
            stage_tester,
            delta,
            max_stage,
        } => {
            let mut consumed = 0;
            let mut result = (Outcome::BudgetExhausted, None);
            let first = match stage_tester {
                StageTester::Uniformity => 0,
                StageTester::CollisionBaseline => 1,
            };
            let mut ran = 0;
            for h in first..=max_stage {
                let m = 1u64 << h;
                ran += 1;
                let (o, w) = match stage_tester {
                    StageTester::Uniformity => {
                        let cfg = UniformityTestConfig {
                            constants,
                            ..UniformityTestConfig::new(n, m, delta)
                        };
                        let mut stage_rng = test_rng.child(h as u64);
                        let (v, report) = test_uniformity(cfg, &mut stream, &mut stage_rng)?;
                        consumed += report.samples_consumed;
                        branch = Some(report.branch);
                        uniformity_parts(v)
                    }
                    StageTester::CollisionBaseline => {
                        consumed += m;
                        verdict_parts(collision_count_baseline(n, m, &mut stream)?)
                    }
                };
                if o == Outcome::Reject {
                    result = (o, w);
                    break;
                }
            }
            stages = Some(ran);
            (result.0, result.1, consumed)
        }
        TesterSpec::FullTester { mu, delta } => {
            let params = derive_full_params_with(n, mu, delta, &constants.full)?;
            let rates = poisson_rates(&prep.dist, params.s as f64 * n as f64 * mu);
            // drawn from its own child so the symbol-stream generator is untouched
            let freq = sample_perm_poisson(&rates, &mut rng.child(2))?;
            let strategy = config.overrides.subset_strategy.unwrap_or_default();
            let scan = run_full_tester_with(&params, &freq, &mut test_rng, strategy)?;
            let (o, w) = verdict_parts(scan.verdict);
            (o, w, freq.total())
        }
    };
    Ok(TrialRecord {
        trial,
        seed,
        outcome,
        branch,
        samples_consumed: consumed,
        stages,
        witness,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Flat CSV row; the witness is embedded as a JSON string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CsvRow {
    trial: usize,
    seed: u64,
    outcome: Outcome,
    branch: Option<Branch>,
    samples_consumed: u64,
    stages: Option<u32>,
    witness: Option<String>,
    wall_time_ms: f64,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "trial",
    "seed",
    "outcome",
    "branch",
    "samples_consumed",
    "stages",
    "witness",
    "wall_time_ms",
];

pub fn write_jsonl<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    serde_json::Deserializer::from_reader(r)
        .into_iter()
        .map(|x| x.map_err(HarnessError::from))
        .collect()
}

pub fn write_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(CsvRow {
            trial: r.trial,
            seed: r.seed,
            outcome: r.outcome,
            branch: r.branch,
            samples_consumed: r.samples_consumed,
            stages: r.stages,
            witness: r.witness.map(|w| serde_json::to_string(&w)).transpose()?,
            wall_time_ms: r.wall_time_ms,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(TrialRecord {
                trial: row.trial,
                seed: row.seed,
                outcome: row.outcome,
                branch: row.branch,
                samples_consumed: row.samples_consumed,
                stages: row.stages,
                witness: row
                    .witness
                    .as_deref()
                    .map(serde_json::from_str)
                    .transpose()?,
                wall_time_ms: row.wall_time_ms,
            })
        })
        .collect()
}
