//! Feasible models as sets of elementary constraints.
//!
//! A feasible model keeps a subset of the continuous regressors and
//! partitions the levels of every factor. The cluster holding the reference
//! level (level 0) is the zero-coefficient cluster, so "delete level j" and
//! "merge level j with the reference" are the same constraint.
//!
//! Constrained least squares never multiplies by the constraint matrices:
//! in regular form the reduced design `Z₁ = X A¹` is the full design with
//! some columns dropped and some columns summed.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DmrError, Result};
use crate::linalg::{self, sq_norm, ThinQr};
use crate::model_matrix::{DesignMatrix, DesignShape, Param};

/// A single linear restriction on the full-model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementaryConstraint {
    /// `β = 0` for a continuous regressor or a non-reference factor level.
    Delete(Param),
    /// `β_ik = β_jk` for two non-reference levels with `i < j`.
    Merge { factor: usize, i: usize, j: usize },
}

impl ElementaryConstraint {
    pub fn delete_continuous(j: usize) -> Self {
        ElementaryConstraint::Delete(Param::Continuous(j))
    }

    /// Equality between levels `a` and `b` of `factor` (0-based, reference
    /// = 0). A merge involving the reference becomes a deletion.
    pub fn merge_levels(factor: usize, a: usize, b: usize) -> Self {
        assert_ne!(a, b, "a level cannot be merged with itself");
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if i == 0 {
            ElementaryConstraint::Delete(Param::Level { factor, level: j })
        } else {
            ElementaryConstraint::Merge { factor, i, j }
        }
    }

    /// Block index of the constraint: 0 for continuous, `k + 1` for factor `k`.
    pub fn block(&self) -> usize {
        match *self {
            ElementaryConstraint::Delete(Param::Level { factor, .. })
            | ElementaryConstraint::Merge { factor, .. } => factor + 1,
            ElementaryConstraint::Delete(_) => 0,
        }
    }

    /// `(lower, upper)` level/variable indices; a delete has lower index 0.
    pub fn indices(&self) -> (usize, usize) {
        match *self {
            ElementaryConstraint::Delete(Param::Continuous(j)) => (0, j),
            ElementaryConstraint::Delete(Param::Level { level, .. }) => (0, level),
            ElementaryConstraint::Delete(Param::Intercept) => (0, 0),
            ElementaryConstraint::Merge { i, j, .. } => (i, j),
        }
    }

    pub fn validate(&self, shape: &DesignShape) -> Result<()> {
        let ok = match *self {
            ElementaryConstraint::Delete(Param::Intercept) => false,
            ElementaryConstraint::Delete(param) => shape.column(param).is_some(),
            ElementaryConstraint::Merge { factor, i, j } => {
                factor < shape.n_factors() && 1 <= i && i < j && j < shape.level_count(factor)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(DmrError::InvalidConstraint(format!(
                "{self:?} does not fit the design"
            )))
        }
    }

    /// Row of the constraint matrix in original parameter order: `e_j` for a
    /// deletion and `e_j − e_i` for a merge.
    pub fn row(&self, shape: &DesignShape) -> DVector<f64> {
        let mut a = DVector::zeros(shape.p());
        match *self {
            ElementaryConstraint::Delete(param) => {
                a[shape.column(param).expect("valid constraint")] = 1.0;
            }
            ElementaryConstraint::Merge { factor, i, j } => {
                a[shape
                    .column(Param::Level { factor, level: j })
                    .expect("valid constraint")] = 1.0;
                a[shape
                    .column(Param::Level { factor, level: i })
                    .expect("valid constraint")] = -1.0;
            }
        }
        a
    }
}

impl fmt::Display for ElementaryConstraint {
    /// Compact notation with 1-based indices, e.g. `b41 = 0`, `b21 = b31`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ElementaryConstraint::Delete(Param::Intercept) => write!(f, "b00 = 0"),
            ElementaryConstraint::Delete(Param::Continuous(j)) => write!(f, "b{}0 = 0", j + 1),
            ElementaryConstraint::Delete(Param::Level { factor, level }) => {
                write!(f, "b{}{} = 0", level + 1, factor + 1)
            }
            ElementaryConstraint::Merge { factor, i, j } => {
                write!(f, "b{}{} = b{}{}", i + 1, factor + 1, j + 1, factor + 1)
            }
        }
    }
}

/// Constraint matrix with one row per constraint, in the given order.
pub fn constraint_matrix(
    shape: &DesignShape,
    constraints: &[ElementaryConstraint],
) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(constraints.len(), shape.p());
    for (r, c) in constraints.iter().enumerate() {
        a.set_row(r, &c.row(shape).transpose());
    }
    a
}

/// A set partition of factor levels `{0, …, n−1}` in canonical form:
/// members sorted within clusters, clusters sorted by their minimum. The
/// first cluster always holds the reference level 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn singletons(n_levels: usize) -> Self {
        Partition {
            clusters: (0..n_levels).map(|l| vec![l]).collect(),
        }
    }

    /// Validates that `clusters` are non-empty, disjoint and cover `0..n_levels`.
    pub fn from_clusters(mut clusters: Vec<Vec<usize>>, n_levels: usize) -> Result<Self> {
        let mut seen = vec![false; n_levels];
        for c in &mut clusters {
            if c.is_empty() {
                return Err(DmrError::InvalidConstraint("empty cluster".into()));
            }
            c.sort_unstable();
            for &l in c.iter() {
                if l >= n_levels || seen[l] {
                    return Err(DmrError::InvalidConstraint(format!(
                        "level {l} is out of range or repeated"
                    )));
                }
                seen[l] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(DmrError::InvalidConstraint(
                "clusters do not cover all levels".into(),
            ));
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Ok(Partition { clusters })
    }

    /// Builds the partition from a representative label per level.
    fn from_labels(labels: &[usize]) -> Self {
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut index_of = vec![usize::MAX; labels.len()];
        for (level, &label) in labels.iter().enumerate() {
            if index_of[label] == usize::MAX {
                index_of[label] = clusters.len();
                clusters.push(Vec::new());
            }
            clusters[index_of[label]].push(level);
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Partition { clusters }
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn n_levels(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Index of the cluster containing `level`.
    pub fn cluster_of(&self, level: usize) -> usize {
        self.clusters
            .iter()
            .position(|c| c.contains(&level))
            .expect("level within range")
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        self.cluster_of(a) == self.cluster_of(b)
    }

    /// `self` is at least as coarse as `other` (every cluster of `other`
    /// lies inside one cluster of `self`).
    pub fn coarsens(&self, other: &Partition) -> bool {
        other
            .clusters
            .iter()
            .all(|c| c.iter().all(|&l| self.same_cluster(c[0], l)))
    }
}

/// A subset of continuous regressors plus one level partition per factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeasibleModel {
    /// `retained[j]` is true when continuous regressor `j` stays in the model.
    pub retained: Vec<bool>,
    pub partitions: Vec<Partition>,
}

impl FeasibleModel {
    /// The unconstrained model `F`.
    pub fn full(shape: &DesignShape) -> Self {
        FeasibleModel {
            retained: vec![true; shape.p0()],
            partitions: shape
                .level_counts()
                .into_iter()
                .map(Partition::singletons)
                .collect(),
        }
    }

    /// The intercept-only model.
    pub fn null(shape: &DesignShape) -> Self {
        FeasibleModel {
            retained: vec![false; shape.p0()],
            partitions: shape
                .level_counts()
                .into_iter()
                .map(|n| Partition {
                    clusters: vec![(0..n).collect()],
                })
                .collect(),
        }
    }

    pub fn check_shape(&self, shape: &DesignShape) -> Result<()> {
        let fits = self.retained.len() == shape.p0()
            && self.partitions.len() == shape.n_factors()
            && self
                .partitions
                .iter()
                .zip(shape.level_counts())
                .all(|(part, n)| part.n_levels() == n);
        if fits {
            Ok(())
        } else {
            Err(DmrError::DimensionMismatch(
                "model does not match the design shape".into(),
            ))
        }
    }

    /// Dimension of the model's parameter space:
    /// `1 + |P₀| + Σ_k (clusters_k − 1)`.
    pub fn size(&self) -> usize {
        1 + self.retained.iter().filter(|&&r| r).count()
            + self
                .partitions
                .iter()
                .map(|p| p.n_clusters() - 1)
                .sum::<usize>()
    }

    /// Retained continuous regressors, as indices.
    pub fn retained_continuous(&self) -> Vec<usize> {
        (0..self.retained.len())
            .filter(|&j| self.retained[j])
            .collect()
    }

    /// A minimal generating set: each deleted regressor, and each
    /// non-minimal cluster member tied to its cluster minimum.
    pub fn constraints(&self) -> Vec<ElementaryConstraint> {
        let mut out: Vec<_> = (0..self.retained.len())
            .filter(|&j| !self.retained[j])
            .map(ElementaryConstraint::delete_continuous)
            .collect();
        for (k, part) in self.partitions.iter().enumerate() {
            for c in part.clusters() {
                for &j in &c[1..] {
                    out.push(ElementaryConstraint::merge_levels(k, c[0], j));
                }
            }
        }
        out
    }

    /// Every elementary constraint the model satisfies: deleted continuous
    /// regressors and all within-cluster pairs (pairs with the reference are
    /// deletions).
    pub fn satisfied_constraints(&self) -> Vec<ElementaryConstraint> {
        let mut out: Vec<_> = (0..self.retained.len())
            .filter(|&j| !self.retained[j])
            .map(ElementaryConstraint::delete_continuous)
            .collect();
        for (k, part) in self.partitions.iter().enumerate() {
            for c in part.clusters() {
                for (a, &i) in c.iter().enumerate() {
                    for &j in &c[a + 1..] {
                        out.push(ElementaryConstraint::merge_levels(k, i, j));
                    }
                }
            }
        }
        out
    }

    /// `L_self ⊆ L_other`.
    pub fn is_submodel_of(&self, other: &FeasibleModel) -> bool {
        self.retained
            .iter()
            .zip(&other.retained)
            .all(|(&a, &b)| !a || b)
            && self
                .partitions
                .iter()
                .zip(&other.partitions)
                .all(|(a, b)| a.coarsens(b))
    }
}

/// Model generated by a set of elementary constraints: deletions drop
/// continuous regressors, merges are closed transitively with union-find.
pub fn constraints_to_model(
    constraints: &[ElementaryConstraint],
    shape: &DesignShape,
) -> Result<FeasibleModel> {
    let mut retained = vec![true; shape.p0()];
    let mut parents: Vec<Vec<usize>> = shape
        .level_counts()
        .into_iter()
        .map(|n| (0..n).collect())
        .collect();
    for c in constraints {
        c.validate(shape)?;
        match *c {
            ElementaryConstraint::Delete(Param::Continuous(j)) => retained[j] = false,
            ElementaryConstraint::Delete(Param::Level { factor, level }) => {
                union(&mut parents[factor], 0, level)
            }
            ElementaryConstraint::Merge { factor, i, j } => union(&mut parents[factor], i, j),
            ElementaryConstraint::Delete(Param::Intercept) => unreachable!("rejected by validate"),
        }
    }
    let partitions = parents
        .iter_mut()
        .map(|parent| {
            let labels: Vec<usize> = (0..parent.len()).map(|l| find(parent, l)).collect();
            Partition::from_labels(&labels)
        })
        .collect();
    Ok(FeasibleModel {
        retained,
        partitions,
    })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Union keeping the smaller root as representative.
fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// How a full-model coefficient is expressed in the free parameters `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// The coefficient is free parameter `ξ_i`.
    Free(usize),
    /// The coefficient is fixed at zero.
    Zero,
    /// The coefficient equals free parameter `ξ_i` (a non-minimal member of
    /// a merged cluster).
    Tied(usize),
}

/// Constraint matrix of a feasible model in regular form.
///
/// With parameters permuted by `perm`, `[A₁; A₀] = [[I, 0], [B, I]]` and
/// its inverse is `[[I, 0], [−B, I]] = [A¹ | A⁰]`. `a0` and `a1` are stored
/// in the original parameter order: `a0` is `(p − q) × p`, `a1` is `p × q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularConstraintSystem {
    /// `perm[pos]` is the original column at permuted position `pos`.
    pub perm: Vec<usize>,
    pub q: usize,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub basis: Vec<Basis>,
}

impl RegularConstraintSystem {
    /// `A₀` with columns in permuted order.
    pub fn a0_permuted(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.a0.nrows(), self.perm.len(), |r, c| {
            self.a0[(r, self.perm[c])]
        })
    }

    /// `A_M⁻¹ = [A¹ | A⁰]` with rows and columns in permuted order.
    pub fn inverse_permuted(&self) -> DMatrix<f64> {
        let p = self.perm.len();
        let mut inv = DMatrix::zeros(p, p);
        for (pos, &col) in self.perm.iter().enumerate() {
            for i in 0..self.q {
                inv[(pos, i)] = self.a1[(col, i)];
            }
            if pos >= self.q {
                inv[(pos, pos)] = 1.0;
            }
        }
        inv
    }

    /// `A_M = [A₁; A₀]` with rows and columns in permuted order.
    pub fn full_permuted(&self) -> DMatrix<f64> {
        let p = self.perm.len();
        let mut a = DMatrix::zeros(p, p);
        for i in 0..self.q {
            a[(i, i)] = 1.0;
        }
        let a0 = self.a0_permuted();
        for r in 0..a0.nrows() {
            a.set_row(self.q + r, &a0.row(r));
        }
        a
    }

    /// `β = A¹ ξ`, written out through the basis description.
    pub fn expand(&self, xi: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.basis.len(),
            self.basis.iter().map(|b| match *b {
                Basis::Free(i) | Basis::Tied(i) => xi[i],
                Basis::Zero => 0.0,
            }),
        )
    }
}

/// Permutes the parameters into regular order (intercept; retained
/// continuous; non-reference cluster minima; deleted continuous; non-minimal
/// cluster members) and emits one constraint row per trailing parameter.
pub fn regularize(shape: &DesignShape, model: &FeasibleModel) -> Result<RegularConstraintSystem> {
    model.check_shape(shape)?;
    let p = shape.p();
    let col = |param: Param| shape.column(param).expect("valid parameter");

    let mut free = vec![0];
    free.extend(
        model
            .retained_continuous()
            .into_iter()
            .map(|j| col(Param::Continuous(j))),
    );
    for (factor, part) in model.partitions.iter().enumerate() {
        for c in &part.clusters()[1..] {
            free.push(col(Param::Level {
                factor,
                level: c[0],
            }));
        }
    }
    let q = free.len();

    let mut basis = vec![Basis::Zero; p];
    for (i, &c) in free.iter().enumerate() {
        basis[c] = Basis::Free(i);
    }

    // Trailing parameters with the constraint they satisfy: `None` for
    // "= 0", `Some(column of the cluster minimum)` for a tie.
    let mut trailing: Vec<(usize, Option<usize>)> = (0..shape.p0())
        .filter(|&j| !model.retained[j])
        .map(|j| (col(Param::Continuous(j)), None))
        .collect();
    for (factor, part) in model.partitions.iter().enumerate() {
        for (ci, c) in part.clusters().iter().enumerate() {
            let anchor = (ci > 0).then(|| {
                col(Param::Level {
                    factor,
                    level: c[0],
                })
            });
            for &level in &c[1..] {
                trailing.push((col(Param::Level { factor, level }), anchor));
            }
        }
    }

    let mut a0 = DMatrix::zeros(trailing.len(), p);
    for (r, &(c, anchor)) in trailing.iter().enumerate() {
        a0[(r, c)] = 1.0;
        if let Some(m) = anchor {
            a0[(r, m)] = -1.0;
            let Basis::Free(i) = basis[m] else {
                unreachable!("cluster minimum is free")
            };
            basis[c] = Basis::Tied(i);
        }
    }

    let mut a1 = DMatrix::zeros(p, q);
    for (c, b) in basis.iter().enumerate() {
        if let Basis::Free(i) | Basis::Tied(i) = *b {
            a1[(c, i)] = 1.0;
        }
    }

    let mut perm = free;
    perm.extend(trailing.iter().map(|&(c, _)| c));
    Ok(RegularConstraintSystem {
        perm,
        q,
        a0,
        a1,
        basis,
    })
}

/// `Z₁ = X A¹` built by selecting and summing columns of `X`.
pub fn reduced_design(x: &DesignMatrix, sys: &RegularConstraintSystem) -> DMatrix<f64> {
    let values = x.values();
    let mut z = DMatrix::zeros(values.nrows(), sys.q);
    for (c, b) in sys.basis.iter().enumerate() {
        if let Basis::Free(i) | Basis::Tied(i) = *b {
            let mut target = z.column_mut(i);
            target += values.column(c);
        }
    }
    z
}

/// Least-squares fit restricted to a feasible model.
#[derive(Debug, Clone)]
pub struct ConstrainedFit {
    pub system: RegularConstraintSystem,
    pub xi: DVector<f64>,
    /// `β̂_M = A¹ ξ̂`: merged entries are copies, deleted entries exact zeros.
    pub beta: DVector<f64>,
    pub rss: f64,
}

pub fn constrained_fit(
    x: &DesignMatrix,
    y: &DVector<f64>,
    model: &FeasibleModel,
) -> Result<ConstrainedFit> {
    if y.len() != x.nrows() {
        return Err(DmrError::DimensionMismatch(
            "response length differs from design rows".into(),
        ));
    }
    let system = regularize(x.shape(), model)?;
    let z1 = reduced_design(x, &system);
    let qr = ThinQr::new(&z1);
    if let Some(i) = qr.first_deficient_column() {
        return Err(DmrError::RankDeficient {
            columns: vec![free_column_label(x.shape(), &system, i)],
        });
    }
    let xi = qr.solve(y);
    let rss = sq_norm(&(y - &z1 * &xi));
    let beta = system.expand(&xi);
    Ok(ConstrainedFit {
        system,
        xi,
        beta,
        rss,
    })
}

/// Label of free parameter `i`: its leading column, with tied members.
fn free_column_label(shape: &DesignShape, sys: &RegularConstraintSystem, i: usize) -> String {
    let members: Vec<String> = sys
        .basis
        .iter()
        .enumerate()
        .filter(|(_, b)| matches!(b, Basis::Free(j) | Basis::Tied(j) if *j == i))
        .map(|(c, _)| shape.column_label(c))
        .collect();
    members.join("+")
}

/// `dim(L_{M1} ∩ L_{M2}) = p − rank([A₀M1; A₀M2])`.
pub fn model_intersection_dim(
    shape: &DesignShape,
    m1: &FeasibleModel,
    m2: &FeasibleModel,
) -> Result<usize> {
    let a = regularize(shape, m1)?.a0;
    let b = regularize(shape, m2)?.a0;
    let mut stacked = DMatrix::zeros(a.nrows() + b.nrows(), shape.p());
    stacked.rows_mut(0, a.nrows()).copy_from(&a);
    stacked.rows_mut(a.nrows(), b.nrows()).copy_from(&b);
    Ok(shape.p() - linalg::rank(&stacked))
}
