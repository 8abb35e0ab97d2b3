//! Poisson sampling, Poissonization and Poisson splitting.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-symbol counts; entry `i` is the count of symbol `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FrequencyVector {
    counts: Vec<u64>,
}

impl FrequencyVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Uniformly shuffles the coordinates in place.
    pub fn permute<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.counts.shuffle(rng);
    }
}

impl From<Vec<u64>> for FrequencyVector {
    fn from(counts: Vec<u64>) -> Self {
        Self::new(counts)
    }
}

/// Exact draw from `Poi(rate)`.
pub fn sample_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::param(
            "rate",
            format!("{rate} is not a finite nonnegative rate"),
        ));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(rate).map_err(|e| Error::param("rate", format!("{e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Calls `emit` with the occupancy of each of `s` bins after throwing `y`
/// balls uniformly at random. Bin `j` receives
/// `Binomial(remaining, 1/(s − j))`; for `y ≤ s` the balls are thrown
/// one by one instead. Both give the same multinomial law.
pub fn poisson_split_each<R, F>(y: u64, s: usize, rng: &mut R, mut emit: F) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(u64),
{
    if s == 0 {
        return Err(Error::param("s", "split factor must be at least 1"));
    }
    if y <= s as u64 {
        let mut bins = vec![0u64; s];
        for _ in 0..y {
            bins[rng.random_range(0..s)] += 1;
        }
        bins.into_iter().for_each(emit);
        return Ok(());
    }
    let mut remaining = y;
    for j in 0..s {
        let left = (s - j) as u64;
        let take = if remaining == 0 {
            0
        } else if left == 1 {
            remaining
        } else {
            Binomial::new(remaining, 1.0 / left as f64)
                .map_err(|e| Error::param("s", format!("{e}")))?
                .sample(rng)
        };
        remaining -= take;
        emit(take);
    }
    debug_assert_eq!(remaining, 0);
    Ok(())
}

/// Splits one draw of `Poi(s·λ)` into `s` independent draws of `Poi(λ)`.
pub fn poisson_split<R: Rng + ?Sized>(y: u64, s: usize, rng: &mut R) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(s);
    poisson_split_each(y, s, rng, |c| out.push(c))?;
    Ok(out)
}

/// Counts occurrences of each 1-based symbol.
pub fn poissonize(samples: &[usize], n: usize) -> Result<FrequencyVector> {
    let mut counts = vec![0u64; n];
    for &symbol in samples {
        if symbol == 0 || symbol > n {
            return Err(Error::SymbolOutOfRange { symbol, n });
        }
        counts[symbol - 1] += 1;
    }
    Ok(FrequencyVector { counts })
}

/// A uniformly shuffled sequence containing symbol `i` exactly `counts[i-1]` times.
pub fn depoissonize<R: Rng + ?Sized>(freq: &FrequencyVector, rng: &mut R) -> Vec<usize> {
    let total = freq.total() as usize;
    let mut out = Vec::with_capacity(total);
    for (i, &c) in freq.counts.iter().enumerate() {
        out.extend(core::iter::repeat_n(i + 1, c as usize));
    }
    out.shuffle(rng);
    out
}

/// One draw of `Perm(Poi(rates[0]), ..., Poi(rates[n-1]))`.
pub fn sample_perm_poisson<R: Rng + ?Sized>(rates: &[f64], rng: &mut R) -> Result<FrequencyVector> {
    if rates.is_empty() {
        return Err(Error::param("rates", "need at least one rate"));
    }
    let mut permuted = rates.to_vec();
    permuted.shuffle(rng);
    let counts = permuted
        .into_iter()
        .map(|r| sample_poisson(r, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyVector { counts })
}

/// One draw of the product `Poi(rates[0]) × ... × Poi(rates[n-1])`, unpermuted.
pub fn sample_product_poisson<R: Rng + ?Sized>(
    rates: &[f64],
    rng: &mut R,
) -> Result<FrequencyVector> {
    let counts = rates
        .iter()
        .map(|&r| sample_poisson(r, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyVector { counts })
}
