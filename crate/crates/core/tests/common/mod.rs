//! Fixtures and independent reference implementations shared by the
//! integration tests. Nothing here calls into the code under test except to
//! construct inputs.
#![allow(dead_code)]

use dmr::{DesignMatrix, DesignShape, FeasibleModel, Partition};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const EX_X0: [f64; 8] = [-0.96, -0.29, 0.26, -1.15, 0.2, 0.03, 0.09, 1.12];
pub const EX_EPS: [f64; 8] = [-1.22, 1.27, -0.74, -1.13, -0.72, 0.25, 0.15, -0.31];
pub const EX_BETA: [f64; 5] = [1.0, 2.0, -2.0, -2.0, 0.0];

/// The illustrative 8-row example: one continuous column and a 4-level
/// factor with two rows per level.
pub fn small_example() -> (DesignMatrix, DVector<f64>) {
    let mut x = DMatrix::zeros(8, 5);
    for i in 0..8 {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = EX_X0[i];
        let level = i / 2;
        if level > 0 {
            x[(i, 1 + level)] = 1.0;
        }
    }
    let beta = DVector::from_row_slice(&EX_BETA);
    let y = &x * beta + DVector::from_row_slice(&EX_EPS);
    let x = DesignMatrix::new(x, DesignShape::anonymous(1, &[4])).unwrap();
    (x, y)
}

/// True model of the illustrative example: levels {1,4} and {2,3} (0-based
/// {0,3} and {1,2}), continuous variable kept.
pub fn small_example_truth() -> FeasibleModel {
    FeasibleModel {
        retained: vec![true],
        partitions: vec![Partition::from_clusters(vec![vec![0, 3], vec![1, 2]], 4).unwrap()],
    }
}

/// Random design with Gaussian continuous columns and factor levels that
/// each occur at least twice.
pub fn random_design<R: Rng>(rng: &mut R, n: usize, p0: usize, levels: &[usize]) -> DesignMatrix {
    let shape = DesignShape::anonymous(p0, levels);
    let mut x = DMatrix::zeros(n, shape.p());
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 0..p0 {
            x[(i, 1 + j)] = rng.sample(StandardNormal);
        }
    }
    for (k, &pk) in levels.iter().enumerate() {
        assert!(n >= 2 * pk);
        let mut assign: Vec<usize> = (0..n)
            .map(|i| {
                if i < 2 * pk {
                    i % pk
                } else {
                    rng.random_range(0..pk)
                }
            })
            .collect();
        assign.shuffle(rng);
        for (i, &l) in assign.iter().enumerate() {
            if l > 0 {
                x[(i, shape.factor_offset(k) + l - 1)] = 1.0;
            }
        }
    }
    DesignMatrix::new(x, shape).unwrap()
}

pub fn random_model<R: Rng>(rng: &mut R, shape: &DesignShape) -> FeasibleModel {
    let retained = (0..shape.p0()).map(|_| rng.random_bool(0.5)).collect();
    let partitions = shape
        .level_counts()
        .iter()
        .map(|&pk| {
            let labels: Vec<usize> = (0..pk).map(|_| rng.random_range(0..pk)).collect();
            partition_from_labels(&labels)
        })
        .collect();
    FeasibleModel {
        retained,
        partitions,
    }
}

pub fn partition_from_labels(labels: &[usize]) -> Partition {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for (level, &lab) in labels.iter().enumerate() {
        match seen.iter().find(|(l, _)| *l == lab) {
            Some(&(_, c)) => clusters[c].push(level),
            None => {
                seen.push((lab, clusters.len()));
                clusters.push(vec![level]);
            }
        }
    }
    Partition::from_clusters(clusters, labels.len()).unwrap()
}

/// Explicit basis of the model space `L_M ⊂ R^p`: one column per free
/// parameter, written directly from the partition definition.
pub fn model_basis(shape: &DesignShape, model: &FeasibleModel) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let unit = |c: usize| {
        let mut v = DVector::zeros(shape.p());
        v[c] = 1.0;
        v
    };
    cols.push(unit(0));
    for j in 0..shape.p0() {
        if model.retained[j] {
            cols.push(unit(1 + j));
        }
    }
    for (k, part) in model.partitions.iter().enumerate() {
        for cluster in part.clusters() {
            if cluster.contains(&0) {
                continue;
            }
            let mut v = DVector::zeros(shape.p());
            for &l in cluster {
                v[shape.factor_offset(k) + l - 1] = 1.0;
            }
            cols.push(v);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Orthogonal projection onto the column space of `z`, via the SVD.
pub fn projection(z: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = z.clone().svd(true, false);
    let u = svd.u.unwrap();
    let tol = 1e-10 * svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let u = u.select_columns(&keep);
    &u * u.transpose()
}

pub fn svd_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let tol = 1e-10 * s.max().max(1.0);
    s.iter().filter(|&&v| v > tol).count()
}

/// All set partitions of `0..k`, as canonical cluster lists.
pub fn all_partitions(k: usize) -> Vec<Partition> {
    fn rec(i: usize, k: usize, labels: &mut Vec<usize>, max: usize, out: &mut Vec<Partition>) {
        if i == k {
            out.push(partition_from_labels(labels));
            return;
        }
        for l in 0..=max {
            labels.push(l);
            rec(i + 1, k, labels, if l == max { max + 1 } else { max }, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), 0, &mut out);
    out
}

/// Every feasible model on a shape: `2^p0 · Π B(p_k)` of them.
pub fn all_models(shape: &DesignShape) -> Vec<FeasibleModel> {
    let mut models = vec![FeasibleModel {
        retained: vec![],
        partitions: vec![],
    }];
    for _ in 0..shape.p0() {
        models = models
            .into_iter()
            .flat_map(|m| {
                [false, true].map(|b| {
                    let mut m = m.clone();
                    m.retained.push(b);
                    m
                })
            })
            .collect();
    }
    for pk in shape.level_counts() {
        let parts = all_partitions(pk);
        models = models
            .into_iter()
            .flat_map(|m| {
                parts.iter().map(move |p| {
                    let mut m = m.clone();
                    m.partitions.push(p.clone());
                    m
                })
            })
            .collect();
    }
    models
}

/// Textbook agglomerative clustering that recomputes every inter-cluster
/// distance from the original matrix (max over pairs for complete, min for
/// single). Returns the merge heights in order.
pub fn textbook_linkage(d: &DMatrix<f64>, complete: bool) -> Vec<f64> {
    let mut clusters: Vec<Vec<usize>> = (0..d.nrows()).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let pairs = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| d[(i, j)]));
                let dist = if complete {
                    pairs.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    pairs.fold(f64::INFINITY, f64::min)
                };
                if dist < best.0 {
                    best = (dist, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        heights.push(h);
    }
    heights
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A uniformly chosen elementary constraint on `shape` (which must have at
/// least one continuous variable or factor).
pub fn random_constraint<R: Rng>(rng: &mut R, shape: &DesignShape) -> dmr::ElementaryConstraint {
    let blocks = shape.p0() + shape.n_factors();
    let b = rng.random_range(0..blocks);
    if b < shape.p0() {
        return dmr::ElementaryConstraint::delete_continuous(b);
    }
    let k = b - shape.p0();
    let pk = shape.level_count(k);
    let a = rng.random_range(0..pk);
    let mut c = rng.random_range(0..pk - 1);
    if c >= a {
        c += 1;
    }
    dmr::ElementaryConstraint::merge_levels(k, a, c)
}
