//! The delete-or-merge selection procedure.
//!
//! 1. squared t-statistics for every elementary constraint, from a single
//!    QR factorization of the full design;
//! 2. per-factor agglomerative clustering with the statistics as
//!    dissimilarities;
//! 3. all cutting heights (continuous deletions included) sorted into one
//!    ordered list of `p − 1` constraints;
//! 4. RSS of every model on the resulting nested path by an `O(p³)`
//!    recursion on a second QR factorization;
//! 5. the path entry with minimal information criterion.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{
    constrained_fit, constraints_to_model, ElementaryConstraint, FeasibleModel,
};
use crate::error::{DmrError, Result};
use crate::linalg::ThinQr;
use crate::model_matrix::{fit_full_model, DesignMatrix, DesignShape, FullModelFit, Param};

/// Symmetric, non-negative level dissimilarities of one factor with zero
/// diagonal. Row/column 0 (the reference level) holds deletion statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    factor: usize,
    d: DMatrix<f64>,
}

impl DissimilarityMatrix {
    pub fn new(factor: usize, d: DMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(DmrError::DimensionMismatch(
                "dissimilarity matrix must be square".into(),
            ));
        }
        let n = d.nrows();
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(DmrError::InvalidConfig(
                    "dissimilarity diagonal must be zero".into(),
                ));
            }
            for j in 0..i {
                let (a, b) = (d[(i, j)], d[(j, i)]);
                if !(a >= 0.0) || a != b {
                    return Err(DmrError::InvalidConfig(format!(
                        "dissimilarities must be symmetric and non-negative (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(DissimilarityMatrix { factor, d })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn n_levels(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }
}

/// Squared test statistics for every elementary constraint of the full model.
#[derive(Debug, Clone, PartialEq)]
pub struct TStatistics {
    /// Deletion statistic of each continuous regressor.
    pub continuous: Vec<f64>,
    /// One dissimilarity matrix per factor.
    pub factors: Vec<DissimilarityMatrix>,
}

impl TStatistics {
    /// Statistic of a single elementary constraint.
    pub fn of(&self, c: &ElementaryConstraint) -> f64 {
        match *c {
            ElementaryConstraint::Delete(Param::Continuous(j)) => self.continuous[j],
            ElementaryConstraint::Delete(Param::Level { factor, level }) => {
                self.factors[factor].get(0, level)
            }
            ElementaryConstraint::Merge { factor, i, j } => self.factors[factor].get(i, j),
            ElementaryConstraint::Delete(Param::Intercept) => f64::NAN,
        }
    }

    /// Assembles statistics from a function of a contrast `e_a − e_b`
    /// between design columns (`b = None` for a single coefficient).
    pub(crate) fn from_contrasts(
        shape: &DesignShape,
        mut stat: impl FnMut(usize, Option<usize>) -> f64,
    ) -> Result<Self> {
        let continuous = (0..shape.p0())
            .map(|j| stat(shape.column(Param::Continuous(j)).expect("valid"), None))
            .collect();
        let mut factors = Vec::with_capacity(shape.n_factors());
        for factor in 0..shape.n_factors() {
            let n = shape.level_count(factor);
            let col = |level| shape.column(Param::Level { factor, level }).expect("valid");
            let mut d = DMatrix::zeros(n, n);
            for j in 1..n {
                let v = stat(col(j), None);
                d[(0, j)] = v;
                d[(j, 0)] = v;
                for i in 1..j {
                    let v = stat(col(i), Some(col(j)));
                    d[(i, j)] = v;
                    d[(j, i)] = v;
                }
            }
            factors.push(DissimilarityMatrix::new(factor, d)?);
        }
        Ok(TStatistics {
            continuous,
            factors,
        })
    }
}

/// Relative residual size below which the full model is taken as an
/// exact fit.
const ZERO_VARIANCE_TOL: f64 = 1e-24;

/// Squared t-statistics `(r_aᵀz)² / (σ̂² ‖r_a‖²)` with `r_a` the contrast of
/// rows of `R⁻¹`.
pub fn t_statistics(fit: &FullModelFit, shape: &DesignShape) -> Result<TStatistics> {
    if fit.p != shape.p() {
        return Err(DmrError::DimensionMismatch(
            "fit and shape disagree on p".into(),
        ));
    }
    if !(fit.rss > ZERO_VARIANCE_TOL * fit.y_sq_norm) {
        return Err(DmrError::ZeroVariance);
    }
    let row = |c: usize| fit.r_inv.row(c).transpose();
    TStatistics::from_contrasts(shape, |a, b| {
        let r = match b {
            None => row(a),
            Some(b) => row(a) - row(b),
        };
        let est = r.dot(&fit.z);
        est * est / (fit.sigma2_hat * r.norm_squared())
    })
}

/// Inter-cluster distance update `b·min + (1 − b)·max`; `b = 0` is complete
/// linkage, `b = 1` single linkage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linkage(f64);

impl Linkage {
    pub const COMPLETE: Linkage = Linkage(0.0);
    pub const SINGLE: Linkage = Linkage(1.0);

    pub fn new(b: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&b) {
            Ok(Linkage(b))
        } else {
            Err(DmrError::InvalidConfig(format!(
                "linkage parameter {b} outside [0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    fn combine(self, d1: f64, d2: f64) -> f64 {
        self.0 * d1.min(d2) + (1.0 - self.0) * d1.max(d2)
    }
}

impl Default for Linkage {
    fn default() -> Self {
        Linkage::COMPLETE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeStep {
    /// Members of the cluster with the smaller minimum.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub height: f64,
    /// Constraint between the two cluster minima.
    pub constraint: ElementaryConstraint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DendrogramTrace {
    pub factor: usize,
    pub merges: Vec<MergeStep>,
}

/// Agglomerative clustering of one factor's levels.
///
/// At each step the closest pair of clusters is merged; ties go to the pair
/// whose minima are lexicographically smallest.
pub fn cluster_factor(d: &DissimilarityMatrix, linkage: Linkage) -> DendrogramTrace {
    let n = d.n_levels();
    // Slot `s` holds the cluster whose minimum member is `s`.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|l| Some(vec![l])).collect();
    let mut dist = d.matrix().clone();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let active: Vec<usize> = (0..n).filter(|&s| members[s].is_some()).collect();
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                if dist[(a, b)] < best.0 || best.1 == usize::MAX {
                    best = (dist[(a, b)], a, b);
                }
            }
        }
        let (height, a, b) = best;
        let right = members[b].take().expect("active");
        let left = members[a].clone().expect("active");
        for &o in &active {
            if o != a && o != b {
                let v = linkage.combine(dist[(a, o)], dist[(b, o)]);
                dist[(a, o)] = v;
                dist[(o, a)] = v;
            }
        }
        let mut merged = left.clone();
        merged.extend(&right);
        merged.sort_unstable();
        members[a] = Some(merged);
        merges.push(MergeStep {
            constraint: ElementaryConstraint::merge_levels(d.factor(), a, b),
            left,
            right,
            height,
        });
    }
    DendrogramTrace {
        factor: d.factor(),
        merges,
    }
}

/// Sorted cutting heights and the matching constraint order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOrder {
    /// Length `p`, starting with 0 for the full model.
    pub heights: Vec<f64>,
    /// Length `p − 1`: the constraint accepted at each height after the first.
    pub constraints: Vec<ElementaryConstraint>,
}

/// Merges continuous deletion statistics and dendrogram heights into one
/// ascending order. Ties are broken by block (continuous first, then
/// factors in order), then by position within the block.
pub fn assemble_path(stats: &TStatistics, dendrograms: &[DendrogramTrace]) -> PathOrder {
    let mut entries: Vec<(f64, usize, usize, ElementaryConstraint)> = stats
        .continuous
        .iter()
        .enumerate()
        .map(|(j, &t2)| (t2, 0, j, ElementaryConstraint::delete_continuous(j)))
        .collect();
    for dendro in dendrograms {
        for (s, m) in dendro.merges.iter().enumerate() {
            entries.push((m.height, dendro.factor + 1, s, m.constraint));
        }
    }
    entries.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut heights = Vec::with_capacity(entries.len() + 1);
    heights.push(0.0);
    heights.extend(entries.iter().map(|e| e.0));
    PathOrder {
        heights,
        constraints: entries.into_iter().map(|e| e.3).collect(),
    }
}

/// RSS of every model on the nested path, `RSS_{M_0..M_{p-1}}`.
pub fn rss_path(
    fit: &FullModelFit,
    shape: &DesignShape,
    constraints: &[ElementaryConstraint],
) -> Result<Vec<f64>> {
    rss_path_prefix(fit, shape, constraints, constraints.len())
}

/// Like [`rss_path`] but only for the first `len` constraints; returns
/// `len + 1` values.
///
/// With `S = R⁻ᵀA₀ᵀ = WU`, `RSS_{M_m} = RSS_{M_{m−1}} + (w_mᵀz)²`. Since
/// the QR of a column prefix is the prefix of the QR, only the first `len`
/// columns of `S` are ever formed.
pub fn rss_path_prefix(
    fit: &FullModelFit,
    shape: &DesignShape,
    constraints: &[ElementaryConstraint],
    len: usize,
) -> Result<Vec<f64>> {
    let p = shape.p();
    if fit.p != p {
        return Err(DmrError::DimensionMismatch(
            "fit and shape disagree on p".into(),
        ));
    }
    if len > constraints.len() || len >= p {
        return Err(DmrError::DimensionMismatch(format!(
            "cannot impose {len} constraints on {p} parameters"
        )));
    }
    let mut s = DMatrix::zeros(p, len);
    for (m, c) in constraints[..len].iter().enumerate() {
        c.validate(shape)?;
        // R⁻ᵀa is a signed sum of rows of R⁻¹.
        let a = c.row(shape);
        for (col, &coef) in a.iter().enumerate() {
            if coef != 0.0 {
                let mut target = s.column_mut(m);
                target.axpy(coef, &fit.r_inv.row(col).transpose(), 1.0);
            }
        }
    }
    let qr = ThinQr::new(&s);
    if let Some(i) = qr.first_deficient_column() {
        return Err(DmrError::DegenerateConstraints { step: i + 1 });
    }
    let wz = qr.q.tr_mul(&fit.z);
    let mut rss = Vec::with_capacity(len + 1);
    rss.push(fit.rss);
    for m in 0..len {
        let prev = rss[m];
        rss.push(prev + wz[m] * wz[m]);
    }
    Ok(rss)
}

/// Size penalty `r_n` of the information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    /// `r_n = log n`.
    Bic,
    /// Fixed `r_n ≥ 0` (`2` gives AIC).
    Fixed(f64),
}

impl Penalty {
    pub fn r_n(self, n: usize) -> f64 {
        match self {
            Penalty::Bic => (n as f64).ln(),
            Penalty::Fixed(r) => r,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::Bic => "BIC",
            Penalty::Fixed(_) => "GIC",
        }
    }
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Bic
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DmrConfig {
    pub linkage: Linkage,
    pub penalty: Penalty,
}

impl DmrConfig {
    pub fn validate(&self) -> Result<()> {
        Linkage::new(self.linkage.value())?;
        match self.penalty {
            Penalty::Fixed(r) if !(r >= 0.0 && r.is_finite()) => Err(DmrError::InvalidConfig(
                format!("penalty must be a finite non-negative number, got {r}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Gaussian criterion on the −2·log-likelihood scale,
/// `n·log(RSS/n) + n(1 + log 2π) + r_n(|M| + 1)`, where the extra parameter
/// is the error variance. It differs from `n·log RSS + r_n|M|` by a term
/// that does not depend on the model, so both select the same entry.
pub fn gaussian_gic(rss: f64, n: usize, size: usize, r_n: f64) -> f64 {
    let nf = n as f64;
    nf * (rss / nf).ln() + nf * (1.0 + (2.0 * PI).ln()) + r_n * (size + 1) as f64
}

/// Criterion values along a path of RSS values for models of size
/// `p, p − 1, …`.
pub fn gic_values(rss: &[f64], n: usize, p: usize, r_n: f64) -> Result<Vec<f64>> {
    rss.iter()
        .enumerate()
        .map(|(m, &r)| {
            if r > 0.0 {
                Ok(gaussian_gic(r, n, p - m, r_n))
            } else {
                Err(DmrError::ZeroRss { step: m })
            }
        })
        .collect()
}

/// Index of the smallest criterion value, preferring the later (smaller)
/// model on ties. Non-finite values never win unless nothing is finite, in
/// which case 0 is returned.
pub fn gic_select(gic: &[f64]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (m, &g) in gic.iter().enumerate() {
        if g.is_finite() && best.map_or(true, |(_, b)| g <= b) {
            best = Some((m, g));
        }
    }
    best.map_or(0, |(m, _)| m)
}

/// The nested family of models visited by the procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedPath {
    pub heights: Vec<f64>,
    pub constraints: Vec<ElementaryConstraint>,
    /// Residual sum of squares per step (deviance for GLM paths).
    pub rss: Vec<f64>,
    pub gic: Vec<f64>,
    /// `|M_m| = p − m`.
    pub sizes: Vec<usize>,
    /// Steps whose refit did not converge (GLM only); their criterion is +∞.
    pub failed: Vec<usize>,
}

impl NestedPath {
    pub fn len(&self) -> usize {
        self.rss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss.is_empty()
    }

    /// Model `M_m`, defined by the first `m` constraints.
    pub fn model_at(&self, shape: &DesignShape, m: usize) -> Result<FeasibleModel> {
        constraints_to_model(&self.constraints[..m], shape)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionInfo {
    pub name: String,
    pub penalty: f64,
}

/// Outcome of a selection run.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub model: FeasibleModel,
    /// Constrained estimate at the selected model, in full-model coordinates.
    pub beta: DVector<f64>,
    /// Index `m*` of the selected model on the path.
    pub selected: usize,
    pub path: NestedPath,
    pub dendrograms: Vec<DendrogramTrace>,
    pub statistics: TStatistics,
    pub criterion: CriterionInfo,
}

/// Steps 2–3: clustering of every factor and the sorted constraint order.
pub fn order_constraints(
    stats: &TStatistics,
    linkage: Linkage,
) -> (Vec<DendrogramTrace>, PathOrder) {
    let dendrograms: Vec<_> = stats
        .factors
        .iter()
        .map(|d| cluster_factor(d, linkage))
        .collect();
    let order = assemble_path(stats, &dendrograms);
    (dendrograms, order)
}

/// Runs the full procedure for a Gaussian linear model.
pub fn dmr(x: &DesignMatrix, y: &DVector<f64>, config: &DmrConfig) -> Result<SelectionResult> {
    config.validate()?;
    let shape = x.shape();
    let fit = fit_full_model(x, y)?;
    let statistics = t_statistics(&fit, shape)?;
    let (dendrograms, order) = order_constraints(&statistics, config.linkage);
    let rss = rss_path(&fit, shape, &order.constraints)?;
    let r_n = config.penalty.r_n(fit.n);
    let gic = gic_values(&rss, fit.n, fit.p, r_n)?;
    let selected = gic_select(&gic);
    let path = NestedPath {
        heights: order.heights,
        constraints: order.constraints,
        sizes: (0..rss.len()).map(|m| fit.p - m).collect(),
        rss,
        gic,
        failed: Vec::new(),
    };
    let model = path.model_at(shape, selected)?;
    let beta = constrained_fit(x, y, &model)?.beta;
    Ok(SelectionResult {
        model,
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
