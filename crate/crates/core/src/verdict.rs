#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Interval on which the empirical mass disagreed with the null mass.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IntervalWitness {
    pub a: u64,
    pub b: u64,
    /// Null Poisson mass of `[a, b]`.
    pub mu_mass: f64,
    /// Empirical fraction of samples in `[a, b]`.
    pub estimate: f64,
    /// Squared Bernoulli-Hellinger distance between the two masses.
    pub hellinger_sq: f64,
    /// Threshold the distance was compared against.
    pub threshold: f64,
    /// Repeat index (full tester only).
    pub repeat: Option<usize>,
    /// Subset size `k` (full tester only).
    pub subset_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Witness {
    Interval(IntervalWitness),
    /// Majority of collision groups contained a repeated symbol.
    CollisionGroups {
        colliding: usize,
        groups: usize,
    },
    /// Pairwise-collision fraction exceeded the baseline threshold.
    CollisionFraction {
        fraction: f64,
        threshold: f64,
    },
}

/// Outcome of a single-shot test. A witness is carried exactly when rejecting.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum Verdict {
    Accept,
    Reject { witness: Witness },
}

impl Verdict {
    pub fn is_reject(&self) -> bool {
        matches!(self, Verdict::Reject { .. })
    }

    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Accept => None,
            Verdict::Reject { witness } => Some(witness),
        }
    }
}
