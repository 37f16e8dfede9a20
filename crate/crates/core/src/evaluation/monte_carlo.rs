//! Replicated simulation runs and aggregated accuracy metrics.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rayon::prelude::*;

use super::experiments::{generate_experiment_with, replication_rng, ExperimentSpec};
use super::metrics::{elementary_rates, star_rates};
use crate::constraints::FeasibleModel;
use crate::error::{DmrError, Result};
use crate::glm::{dmr_glm, Family};
use crate::model_matrix::DesignMatrix;
use crate::selection::{dmr, DmrConfig};

/// A selected model with its estimate in full-model coordinates.
#[derive(Debug, Clone)]
pub struct Selection {
    pub model: FeasibleModel,
    pub beta: DVector<f64>,
    /// Scale on which predictions are compared with new responses.
    pub family: Family,
}

pub trait Selector: Sync {
    fn name(&self) -> &str;
    fn select(&self, x: &DesignMatrix, y: &DVector<f64>) -> Result<Selection>;
}

#[derive(Debug, Clone, Default)]
pub struct DmrSelector {
    pub config: DmrConfig,
}

impl Selector for DmrSelector {
    fn name(&self) -> &str {
        "DMR"
    }

    fn select(&self, x: &DesignMatrix, y: &DVector<f64>) -> Result<Selection> {
        let res = dmr(x, y, &self.config)?;
        Ok(Selection {
            model: res.model,
            beta: res.beta,
            family: Family::Gaussian,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DmrGlmSelector {
    pub family: Family,
    pub config: DmrConfig,
}

impl Selector for DmrGlmSelector {
    fn name(&self) -> &str {
        "DMR-GLM"
    }

    fn select(&self, x: &DesignMatrix, y: &DVector<f64>) -> Result<Selection> {
        let res = dmr_glm(x, y, self.family, &self.config)?;
        Ok(Selection {
            model: res.model,
            beta: res.beta,
            family: self.family,
        })
    }
}

/// Per-replication outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub true_model: bool,
    pub correct_factors: Option<bool>,
    pub tpr: f64,
    pub fdr: f64,
    pub tpr_star: f64,
    pub fdr_star: f64,
    pub msep: f64,
    pub size: usize,
}

/// Aggregated metrics for one selector on one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorMetrics {
    pub experiment: u8,
    pub n: usize,
    pub selector: String,
    pub reps: usize,
    /// Replications in which selection returned an error.
    pub failures: usize,
    /// Number of replications that recovered the true model exactly.
    pub true_model_hits: usize,
    pub tm: f64,
    pub cf: Option<f64>,
    pub tpr: f64,
    pub fdr: f64,
    pub tpr_star: f64,
    pub fdr_star: f64,
    pub msep_mean: f64,
    pub msep_sd: f64,
    pub md_mean: f64,
    pub md_sd: f64,
}

pub const CSV_HEADER: &str =
    "experiment,n,selector,tm,cf,tpr,fdr,tpr_star,fdr_star,msep_mean,msep_sd,md_mean,md_sd,failures";

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl SelectorMetrics {
    /// One CSV record matching [`CSV_HEADER`]; floats carry 17 significant
    /// digits so values round-trip exactly.
    pub fn csv_row(&self) -> String {
        let mut s = format!("{},{},{},", self.experiment, self.n, self.selector);
        s.push_str(&fmt_float(self.tm));
        s.push(',');
        if let Some(cf) = self.cf {
            s.push_str(&fmt_float(cf));
        }
        for v in [
            self.tpr,
            self.fdr,
            self.tpr_star,
            self.fdr_star,
            self.msep_mean,
            self.msep_sd,
            self.md_mean,
            self.md_sd,
        ] {
            s.push(',');
            s.push_str(&fmt_float(v));
        }
        let _ = write!(s, ",{}", self.failures);
        s
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub metrics: SelectorMetrics,
    pub replications: Vec<Option<Replication>>,
    pub elapsed: Duration,
}

fn evaluate(
    spec: &ExperimentSpec,
    selector: &dyn Selector,
    seed: u64,
    rep: u64,
) -> Result<Replication> {
    let mut rng = replication_rng(seed, rep);
    let data = generate_experiment_with(spec, &mut rng)?;
    let sel = selector.select(&data.x, &data.y)?;
    let shape = data.x.shape();
    let truth = spec.true_model();
    let (tpr, fdr) = elementary_rates(&truth, &sel.model);
    let (tpr_star, fdr_star) = star_rates(shape, &truth, &sel.model)?;
    let eta = data.x.values() * &sel.beta;
    let n = eta.len() as f64;
    let msep = eta
        .iter()
        .zip(data.y_new.iter())
        .map(|(&e, &y)| {
            let pred = match sel.family {
                Family::Gaussian => e,
                Family::Binomial => 1.0 / (1.0 + (-e).exp()),
            };
            (y - pred).powi(2)
        })
        .sum::<f64>()
        / n;
    let correct_factors = spec.has_factor_screening().then(|| {
        let parts = &sel.model.partitions;
        parts[0].n_clusters() > 1 && parts[1..].iter().all(|p| p.n_clusters() == 1)
    });
    Ok(Replication {
        true_model: sel.model == truth,
        correct_factors,
        tpr,
        fdr,
        tpr_star,
        fdr_star,
        msep,
        size: sel.model.size(),
    })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Runs `reps` replications in parallel. Replication `r` draws from ChaCha
/// stream `r` of `seed`, and aggregation folds the outcomes in replication
/// order, so results do not depend on the thread count.
///
/// Rates average over successful replications; failed ones are counted.
pub fn run_monte_carlo(
    spec: &ExperimentSpec,
    selector: &dyn Selector,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if reps == 0 {
        return Err(DmrError::InvalidConfig(
            "at least one replication is required".into(),
        ));
    }
    let start = Instant::now();
    let outcomes: Vec<Option<Replication>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| evaluate(spec, selector, seed, rep).ok())
        .collect();
    let elapsed = start.elapsed();

    let ok: Vec<&Replication> = outcomes.iter().flatten().collect();
    let k = ok.len() as f64;
    let avg = |f: &dyn Fn(&Replication) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / k
        }
    };
    let true_model_hits = ok.iter().filter(|r| r.true_model).count();
    let cf = spec.has_factor_screening().then(|| {
        avg(&|r| {
            if r.correct_factors == Some(true) {
                1.0
            } else {
                0.0
            }
        })
    });
    let msep: Vec<f64> = ok.iter().map(|r| r.msep).collect();
    let md: Vec<f64> = ok.iter().map(|r| r.size as f64).collect();
    let (msep_mean, msep_sd) = mean_sd(&msep);
    let (md_mean, md_sd) = mean_sd(&md);

    let metrics = SelectorMetrics {
        experiment: spec.id(),
        n: spec.n(),
        selector: selector.name().to_string(),
        reps,
        failures: reps - ok.len(),
        true_model_hits,
        tm: avg(&|r| if r.true_model { 1.0 } else { 0.0 }),
        cf,
        tpr: avg(&|r| r.tpr),
        fdr: avg(&|r| r.fdr),
        tpr_star: avg(&|r| r.tpr_star),
        fdr_star: avg(&|r| r.fdr_star),
        msep_mean,
        msep_sd,
        md_mean,
        md_sd,
    };
    Ok(MonteCarloReport {
        metrics,
        replications: outcomes,
        elapsed,
    })
}
