//! Calibration of the constant `C` in `best_interval ≥ ε / (C · ln(4/ε))`
//! over a seeded corpus of random `(mu, mixture)` instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unifwatch_core::oracle::{calibrate_instance, random_instance, CalibrationInstance};
use unifwatch_core::SeededRng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub instances: usize,
    /// Instances with squared Hellinger distance below this are skipped.
    pub min_eps: f64,
    pub evaluated: usize,
    /// Worst-case ratio over the corpus.
    pub constant: f64,
    pub worst: CalibrationInstance,
}

/// Instance `i` of the corpus is drawn from `child(seed, i)`.
pub fn calibrate_interval_constant(
    seed: u64,
    instances: usize,
    min_eps: f64,
) -> Result<CalibrationReport> {
    let master = SeededRng::new(seed);
    let evaluated: Vec<CalibrationInstance> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (mu, mix) = random_instance(&mut master.child(i as u64));
            calibrate_instance(mu, &mix, min_eps)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let worst = evaluated
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .cloned()
        .ok_or_else(|| crate::HarnessError::config("no instance above min_eps"))?;
    Ok(CalibrationReport {
        seed,
        instances,
        min_eps,
        evaluated: evaluated.len(),
        constant: worst.ratio,
        worst,
    })
}
