//! Selection accuracy measures.
//!
//! Two families of rates compare a selected model with the true one:
//! counts of satisfied elementary constraints (TPR/FDR), and dimensions of
//! the model spaces (TPR*/FDR*). The latter weigh every parameter equally,
//! while constraint counts grow quadratically with the number of levels.

use std::collections::HashSet;

use crate::constraints::{model_intersection_dim, FeasibleModel};
use crate::error::Result;
use crate::model_matrix::DesignShape;

/// `(TPR, FDR)` over satisfied elementary constraints.
///
/// `TPR = |B ∩ B̂| / |B|`, `FDR = 1 − |B ∩ B̂| / |B̂|`. An empty `B̂` gives
/// FDR 0 and an empty `B` gives TPR 1.
pub fn elementary_rates(truth: &FeasibleModel, selected: &FeasibleModel) -> (f64, f64) {
    let b: HashSet<_> = truth.satisfied_constraints().into_iter().collect();
    let b_hat: HashSet<_> = selected.satisfied_constraints().into_iter().collect();
    let hits = b.intersection(&b_hat).count() as f64;
    let tpr = if b.is_empty() {
        1.0
    } else {
        hits / b.len() as f64
    };
    let fdr = if b_hat.is_empty() {
        0.0
    } else {
        1.0 - hits / b_hat.len() as f64
    };
    (tpr, fdr)
}

/// `(TPR*, FDR*) = (|T ∩ T̂| / |T|, 1 − |T ∩ T̂| / |T̂|)`.
pub fn star_rates(
    shape: &DesignShape,
    truth: &FeasibleModel,
    selected: &FeasibleModel,
) -> Result<(f64, f64)> {
    let common = model_intersection_dim(shape, truth, selected)? as f64;
    Ok((
        common / truth.size() as f64,
        1.0 - common / selected.size() as f64,
    ))
}

/// Wilson score interval at 95% for a binomial proportion.
pub fn binomial_ci95(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
