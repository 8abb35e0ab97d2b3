//! Benchmark distribution families and samplers over `[1, n]`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use unifwatch_core::{DiscreteDistribution, SeededRng};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform,
    /// Uniform except the last element, which gets an extra `beta`.
    HeavyElement {
        beta: f64,
    },
    /// Uniform on a random subset of `round(fraction · n)` elements.
    UniformSubset {
        fraction: f64,
    },
    /// `mass_split` spread evenly over the first `round(support_split · n)`
    /// elements, the rest spread evenly over the others.
    TwoLevel {
        mass_split: f64,
        support_split: f64,
    },
    Explicit {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFamilySpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
    /// Seed for the family's own randomness (subset choice).
    #[serde(default)]
    pub seed: u64,
}

impl DistributionFamilySpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self { family, n, seed: 0 }
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(Family::Uniform, n)
    }

    pub fn heavy_element(n: usize, beta: f64) -> Self {
        Self::new(Family::HeavyElement { beta }, n)
    }
}

fn unit(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite() && v <= 1.0 && (v > 0.0 || (allow_zero && v == 0.0));
    if ok {
        Ok(())
    } else {
        Err(HarnessError::config(format!("{name} = {v} out of range")))
    }
}

pub fn realize_family(spec: &DistributionFamilySpec) -> Result<DiscreteDistribution> {
    let n = spec.n;
    if n == 0 {
        return Err(HarnessError::config("n must be positive"));
    }
    let nf = n as f64;
    let probs = match &spec.family {
        Family::Uniform => vec![1.0 / nf; n],
        Family::HeavyElement { beta } => {
            unit("beta", *beta, true)?;
            let mut p = vec![(1.0 - beta) / nf; n];
            p[n - 1] += beta;
            p
        }
        Family::UniformSubset { fraction } => {
            unit("fraction", *fraction, false)?;
            let k = ((fraction * nf).round() as usize).clamp(1, n);
            let mut rng = SeededRng::new(spec.seed);
            let mut p = vec![0.0; n];
            for i in index::sample(&mut rng, n, k) {
                p[i] = 1.0 / k as f64;
            }
            p
        }
        Family::TwoLevel {
            mass_split,
            support_split,
        } => {
            unit("mass_split", *mass_split, true)?;
            unit("support_split", *support_split, false)?;
            let k = (support_split * nf).round() as usize;
            if k == 0 || (k == n && *mass_split < 1.0) {
                return Err(HarnessError::config(format!(
                    "support_split {support_split} leaves an empty level for n = {n}"
                )));
            }
            let mut p = vec![0.0; n];
            for (i, v) in p.iter_mut().enumerate() {
                *v = if i < k {
                    mass_split / k as f64
                } else {
                    (1.0 - mass_split) / (n - k) as f64
                };
            }
            p
        }
        Family::Explicit { probs } => {
            if probs.len() != n {
                return Err(HarnessError::config(format!(
                    "explicit family has {} entries but n = {n}",
                    probs.len()
                )));
            }
            probs.clone()
        }
    };
    DiscreteDistribution::new(probs).map_err(|e| HarnessError::config(e.to_string()))
}

/// Draws 1-based symbols from a realized distribution.
#[derive(Debug, Clone)]
pub enum Sampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl Sampler {
    pub fn new(dist: &DiscreteDistribution) -> Result<Self> {
        let p = dist.probs();
        let first = p[0];
        if p.iter().all(|&x| x == first) {
            return Ok(Sampler::Uniform(p.len()));
        }
        WeightedIndex::new(p)
            .map(Sampler::Weighted)
            .map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Sampler::Uniform(n) => rng.random_range(1..=*n),
            Sampler::Weighted(w) => w.sample(rng) + 1,
        }
    }

    pub fn stream<'a, R: Rng + ?Sized>(
        &'a self,
        rng: &'a mut R,
    ) -> impl Iterator<Item = usize> + 'a {
        std::iter::repeat_with(move || self.sample(rng))
    }
}

/// Rates `m · p(i)` of the Poissonized frequency vector of `p` at budget `m`.
pub fn poisson_rates(dist: &DiscreteDistribution, m: f64) -> Vec<f64> {
    dist.probs().iter().map(|&p| m * p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavy_element_examples() {
        let d = realize_family(&DistributionFamilySpec::heavy_element(4, 0.0)).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let d = realize_family(&DistributionFamilySpec::heavy_element(1000, 0.2)).unwrap();
        assert!((d.probs()[999] - 0.2008).abs() < 1e-12);
        assert!((d.probs()[0] - 0.0008).abs() < 1e-15);
        assert!(realize_family(&DistributionFamilySpec::heavy_element(4, 1.5)).is_err());
    }

    #[test]
    fn uniform_subset_example() {
        let spec = DistributionFamilySpec {
            seed: 17,
            ..DistributionFamilySpec::new(Family::UniformSubset { fraction: 0.5 }, 10)
        };
        let d = realize_family(&spec).unwrap();
        assert_eq!(d.probs().iter().filter(|&&p| p == 0.2).count(), 5);
        assert_eq!(d.probs().iter().filter(|&&p| p == 0.0).count(), 5);
        assert_eq!(realize_family(&spec).unwrap(), d);
        let bad = DistributionFamilySpec::new(Family::UniformSubset { fraction: 0.0 }, 10);
        assert!(realize_family(&bad).is_err());
    }

    #[test]
    fn two_level_and_explicit() {
        let spec = DistributionFamilySpec::new(
            Family::TwoLevel {
                mass_split: 0.5,
                support_split: 0.25,
            },
            8,
        );
        let d = realize_family(&spec).unwrap();
        assert_eq!(d.probs()[0], 0.25);
        assert!((d.probs()[7] - 0.5 / 6.0).abs() < 1e-15);
        let e = DistributionFamilySpec::new(
            Family::Explicit {
                probs: vec![0.5, 0.5],
            },
            3,
        );
        assert!(realize_family(&e).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec: DistributionFamilySpec =
            serde_json::from_str(r#"{"family":"heavy_element","beta":0.2,"n":1000}"#).unwrap();
        assert_eq!(spec, DistributionFamilySpec::heavy_element(1000, 0.2));
    }

    #[test]
    fn sampler_frequencies() {
        let d = realize_family(&DistributionFamilySpec::heavy_element(4, 0.6)).unwrap();
        let s = Sampler::new(&d).unwrap();
        let mut rng = SeededRng::new(3);
        let mut counts = [0usize; 4];
        for x in s.stream(&mut rng).take(100_000) {
            counts[x - 1] += 1;
        }
        assert!((counts[3] as f64 / 1e5 - 0.7).abs() < 0.01);
    }
}
