//! Instance-optimal uniformity testing and uniformity tracking.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! and algorithmic pieces: probability distances over Poissons and Poisson
//! mixtures, Poissonization and Poisson splitting, the interval tester, the
//! permutation-distribution ("full") tester, the end-to-end uniformity tester,
//! the anytime tracker built on top of it, and brute-force oracles used to
//! ground-truth the structural facts everything else relies on.
//!
//! File formats, the experiment harness and the CLI live in the `unifwatch`
//! crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod distances;
mod error;
pub mod full_tester;
pub mod interval_tester;
pub mod oracle;
pub mod poisson;
mod rng;
mod sum;
pub mod tracker;
pub mod uniformity;
mod verdict;

pub use distances::{DiscreteDistribution, IntervalMass, PoissonMixture};
pub use error::{Error, Result};
pub use full_tester::{FullTesterConstants, FullTesterParams, SubsetStrategy};
pub use interval_tester::{IntervalTesterConstants, IntervalTesterParams};
pub use poisson::FrequencyVector;
pub use rng::SeededRng;
pub use tracker::{Signal, Tracker, TrackerConfig, TrackerStatus};
pub use uniformity::{Branch, SampleBudgetReport, UniformityTestConfig, UniformityVerdict};
pub use verdict::{IntervalWitness, Verdict, Witness};
