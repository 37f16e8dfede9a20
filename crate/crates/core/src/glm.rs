//! Delete-or-merge selection for generalized linear models.
//!
//! Squared t-statistics are replaced by squared Wald statistics computed
//! from the full-model fit. Clustering and constraint ordering are
//! unchanged; the RSS recursion has no analogue for the deviance, so every
//! model on the path is refitted on its reduced design.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{reduced_design, regularize};
use crate::error::{DmrError, Result};
use crate::linalg::{sq_norm, ThinQr};
use crate::model_matrix::{DesignMatrix, DesignShape};
use crate::selection::{
    gaussian_gic, gic_select, order_constraints, CriterionInfo, DmrConfig, NestedPath,
    SelectionResult, TStatistics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Bernoulli response with logit link.
    Binomial,
    /// Normal response with identity link; reduces to ordinary least squares.
    Gaussian,
}

impl Family {
    /// Information criterion of a fitted model of dimension `size`.
    ///
    /// Binomial: `deviance + r_n·|M|`. Gaussian: the same −2·log-likelihood
    /// form as the linear-model path, so both routes select identically.
    pub fn gic(self, deviance: f64, n: usize, size: usize, r_n: f64) -> f64 {
        match self {
            Family::Binomial => deviance + r_n * size as f64,
            Family::Gaussian => gaussian_gic(deviance, n, size, r_n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Convergence threshold on `|Δdev| / (|dev| + 0.1)`.
    pub tol: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iter: 25,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlmFit {
    pub beta_hat: DVector<f64>,
    /// Inverse Fisher information at the last iterate (scaled by the
    /// residual variance for the Gaussian family).
    pub cov: DMatrix<f64>,
    pub deviance: f64,
    pub n: usize,
    pub p: usize,
    pub converged: bool,
    /// Fitted probabilities collapsed to 0 or 1: the data are (quasi-)
    /// separated and the coefficients diverge.
    pub separated: bool,
    pub iterations: usize,
}

/// Fitted probabilities closer than this to 0 or 1 flag separation.
const SEPARATION_EPS: f64 = 1e-8;
const MU_CLAMP: f64 = f64::EPSILON;

fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

fn binomial_deviance(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    -2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&yi, &m)| if yi > 0.5 { m.ln() } else { (1.0 - m).ln() })
        .sum::<f64>()
}

fn weighted_qr(x: &DMatrix<f64>, w: &DVector<f64>) -> Result<ThinQr> {
    let mut xw = x.clone();
    for (i, wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        xw.row_mut(i).scale_mut(s);
    }
    let qr = ThinQr::new(&xw);
    if let Some(c) = qr.first_deficient_column() {
        return Err(DmrError::RankDeficient {
            columns: vec![format!("column {c}")],
        });
    }
    Ok(qr)
}

/// Iteratively reweighted least squares.
///
/// Separation is flagged, not treated as an error; the returned fit then
/// carries the last iterate and its covariance.
pub fn irls_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: Family,
    opts: &IrlsOptions,
) -> Result<GlmFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(DmrError::DimensionMismatch(
            "response length differs from design rows".into(),
        ));
    }
    if n <= p {
        return Err(DmrError::TooFewRows { n, p });
    }
    match family {
        Family::Gaussian => gaussian_fit(x, y),
        Family::Binomial => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(DmrError::InvalidSpec(
                    "binomial response must be coded 0/1".into(),
                ));
            }
            logistic_fit(x, y, opts)
        }
    }
}

fn gaussian_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<GlmFit> {
    let (n, p) = x.shape();
    let qr = weighted_qr(x, &DVector::from_element(n, 1.0))?;
    let beta_hat = qr.solve(y);
    let deviance = sq_norm(&(y - x * &beta_hat));
    let r_inv = qr.r_inverse();
    let cov = (&r_inv * r_inv.transpose()) * (deviance / (n - p) as f64);
    Ok(GlmFit {
        beta_hat,
        cov,
        deviance,
        n,
        p,
        converged: true,
        separated: false,
        iterations: 1,
    })
}

fn logistic_fit(x: &DMatrix<f64>, y: &DVector<f64>, opts: &IrlsOptions) -> Result<GlmFit> {
    let (n, p) = x.shape();
    let mut mu = y.map(|v| (v + 0.5) / 2.0);
    let mut eta = mu.map(|m| (m / (1.0 - m)).ln());
    let mut deviance = binomial_deviance(y, &mu);
    let mut beta_hat = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let w = mu.map(|m| m * (1.0 - m));
        let working = DVector::from_fn(n, |i, _| (eta[i] + (y[i] - mu[i]) / w[i]) * w[i].sqrt());
        let qr = weighted_qr(x, &w)?;
        beta_hat = qr.solve(&working);
        eta = x * &beta_hat;
        mu = eta.map(|e| logistic(e).clamp(MU_CLAMP, 1.0 - MU_CLAMP));
        let dev_new = binomial_deviance(y, &mu);
        let change = (dev_new - deviance).abs() / (dev_new.abs() + 0.1);
        deviance = dev_new;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let w = mu.map(|m| m * (1.0 - m));
    let r_inv = weighted_qr(x, &w)?.r_inverse();
    let cov = &r_inv * r_inv.transpose();
    let separated = mu
        .iter()
        .any(|&m| m < SEPARATION_EPS || m > 1.0 - SEPARATION_EPS);
    Ok(GlmFit {
        beta_hat,
        cov,
        deviance,
        n,
        p,
        converged,
        separated,
        iterations,
    })
}

/// Squared Wald statistics `(aᵀβ̂)² / (aᵀ Σ̂ a)` for every elementary
/// constraint.
pub fn wald_statistics(fit: &GlmFit, shape: &DesignShape) -> Result<TStatistics> {
    if fit.p != shape.p() {
        return Err(DmrError::DimensionMismatch(
            "fit and shape disagree on p".into(),
        ));
    }
    let mut zero_variance = false;
    let stats = TStatistics::from_contrasts(shape, |a, b| {
        let (est, var) = match b {
            None => (fit.beta_hat[a], fit.cov[(a, a)]),
            Some(b) => (
                fit.beta_hat[a] - fit.beta_hat[b],
                fit.cov[(a, a)] + fit.cov[(b, b)] - 2.0 * fit.cov[(a, b)],
            ),
        };
        if !(var > f64::MIN_POSITIVE) {
            zero_variance = true;
            return 0.0;
        }
        est * est / var
    })?;
    if zero_variance {
        return Err(DmrError::ZeroVariance);
    }
    Ok(stats)
}

/// Selection for a generalized linear model.
pub fn dmr_glm(
    x: &DesignMatrix,
    y: &DVector<f64>,
    family: Family,
    config: &DmrConfig,
) -> Result<SelectionResult> {
    config.validate()?;
    let opts = IrlsOptions::default();
    let shape = x.shape();
    let (n, p) = (x.nrows(), x.p());
    let full = irls_fit(x.values(), y, family, &opts)?;
    let statistics = wald_statistics(&full, shape)?;
    let (dendrograms, order) = order_constraints(&statistics, config.linkage);

    let models = (0..p)
        .map(|m| crate::constraints::constraints_to_model(&order.constraints[..m], shape))
        .collect::<Result<Vec<_>>>()?;
    let refits = models
        .par_iter()
        .map(|model| {
            let sys = regularize(shape, model)?;
            let z1 = reduced_design(x, &sys);
            let fit = irls_fit(&z1, y, family, &opts)?;
            Ok((sys, fit))
        })
        .collect::<Result<Vec<_>>>()?;

    let r_n = config.penalty.r_n(n);
    let mut failed = Vec::new();
    let mut gic = Vec::with_capacity(p);
    for (m, (_, fit)) in refits.iter().enumerate() {
        if fit.converged {
            gic.push(family.gic(fit.deviance, n, p - m, r_n));
        } else {
            failed.push(m);
            gic.push(f64::INFINITY);
        }
    }
    let selected = gic_select(&gic);
    let (sys, fit) = &refits[selected];
    let beta = sys.expand(&fit.beta_hat);
    let path = NestedPath {
        heights: order.heights,
        constraints: order.constraints,
        rss: refits.iter().map(|(_, f)| f.deviance).collect(),
        gic,
        sizes: (0..p).map(|m| p - m).collect(),
        failed,
    };
    Ok(SelectionResult {
        model: models[selected].clone(),
        beta,
        selected,
        path,
        dendrograms,
        statistics,
        criterion: CriterionInfo {
            name: config.penalty.name().to_string(),
            penalty: r_n,
        },
    })
}
