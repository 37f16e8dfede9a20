//! Cross-checks against independent reference computations.

mod common;

use std::collections::HashSet;

use common::*;
use dmr::evaluation::{elementary_rates, star_rates};
use dmr::selection::{gaussian_gic, order_constraints};
use dmr::{
    assemble_path, cluster_factor, constrained_fit, constraints_to_model, dmr, dmr_glm,
    fit_full_model, irls_fit, model_intersection_dim, reduced_design, regularize, rss_path,
    t_statistics, wald_statistics, DesignMatrix, DesignShape, DissimilarityMatrix, DmrConfig,
    ElementaryConstraint, Family, FeasibleModel, IrlsOptions, Linkage, Param, Partition,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn noisy_response<R: Rng>(rng: &mut R, x: &DesignMatrix, scale: f64) -> DVector<f64> {
    let beta = DVector::from_fn(x.p(), |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    x.values() * beta + DVector::from_fn(x.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn fitted_values_match_normal_equations() {
    let mut rng = rng(1);
    let x = random_design(&mut rng, 50, 2, &[4]);
    assert_eq!(x.p(), 6);
    let y = noisy_response(&mut rng, &x, 1.0);
    let fit = fit_full_model(&x, &y).unwrap();
    let xv = x.values();
    let xtx = (xv.transpose() * xv).cholesky().unwrap();
    let beta_ne = xtx.solve(&(xv.transpose() * &y));
    let a = xv * &fit.beta_hat;
    let b = xv * beta_ne;
    assert!((&a - &b).norm() <= 1e-10 * b.norm());

    let resid = &y - &a;
    assert!(rel_diff(fit.rss, resid.norm_squared()) < 1e-10);
    assert!(rel_diff(fit.y_sq_norm - fit.z.norm_squared(), fit.rss) < 1e-10);
    let eye = &fit.r_inv * &fit.r;
    assert!((eye - DMatrix::identity(6, 6)).amax() < 1e-12);
}

#[test]
fn t_squared_equals_scaled_rss_gap() {
    let mut rng = rng(2);
    for _ in 0..20 {
        let x = random_design(&mut rng, 60, 2, &[4, 3]);
        let y = noisy_response(&mut rng, &x, 0.5);
        let shape = x.shape();
        let fit = fit_full_model(&x, &y).unwrap();
        let stats = t_statistics(&fit, shape).unwrap();
        let full = FeasibleModel::full(shape);
        let mut all = full.clone();
        for p in &mut all.partitions {
            *p = Partition::from_clusters(vec![(0..p.n_levels()).collect()], p.n_levels()).unwrap();
        }
        all.retained.iter_mut().for_each(|r| *r = false);
        for c in all.satisfied_constraints() {
            let m = constraints_to_model(&[c], shape).unwrap();
            let rss_m = constrained_fit(&x, &y, &m).unwrap().rss;
            let gap = (fit.n - fit.p) as f64 * (rss_m - fit.rss) / fit.rss;
            let t2 = stats.of(&c);
            assert!(rel_diff(t2, gap) < 1e-8, "{c}: {t2} vs {gap}");
        }
    }
}

#[test]
fn complete_and_single_linkage_match_textbook_clustering() {
    let mut rng = rng(3);
    for _ in 0..200 {
        let n = 5;
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.random_range(0.0..10.0);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let dm = DissimilarityMatrix::new(0, d.clone()).unwrap();
        for (linkage, complete) in [(Linkage::COMPLETE, true), (Linkage::SINGLE, false)] {
            let ours: Vec<f64> = cluster_factor(&dm, linkage)
                .merges
                .iter()
                .map(|m| m.height)
                .collect();
            assert_eq!(ours, textbook_linkage(&d, complete));
        }
    }
}

#[test]
fn merge_constraints_join_cluster_minima() {
    let mut rng = rng(4);
    let mut d = DMatrix::zeros(6, 6);
    for i in 0..6 {
        for j in i + 1..6 {
            let v: f64 = rng.random_range(0.0..10.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let trace = cluster_factor(&DissimilarityMatrix::new(2, d).unwrap(), Linkage::COMPLETE);
    assert_eq!(trace.merges.len(), 5);
    for m in &trace.merges {
        let a = *m.left.iter().min().unwrap();
        let b = *m.right.iter().min().unwrap();
        assert_eq!(m.constraint, ElementaryConstraint::merge_levels(2, a, b));
    }
}

#[test]
fn path_constraints_are_dendrogram_constraints_plus_deletions() {
    let mut rng = rng(5);
    for _ in 0..20 {
        let x = random_design(&mut rng, 80, 3, &[5, 4]);
        let y = noisy_response(&mut rng, &x, 0.3);
        let fit = fit_full_model(&x, &y).unwrap();
        let stats = t_statistics(&fit, x.shape()).unwrap();
        let (dendrograms, order) = order_constraints(&stats, Linkage::COMPLETE);
        let mut expected: HashSet<ElementaryConstraint> = (0..3)
            .map(ElementaryConstraint::delete_continuous)
            .collect();
        for d in &dendrograms {
            expected.extend(d.merges.iter().map(|m| m.constraint));
        }
        let emitted: HashSet<_> = order.constraints.iter().copied().collect();
        assert_eq!(emitted.len(), order.constraints.len(), "no duplicates");
        assert_eq!(emitted, expected);
        assert_eq!(order, assemble_path(&stats, &dendrograms));
        assert_eq!(order.heights.len(), x.p());
        assert!(order.heights.windows(2).all(|w| w[0] <= w[1]));
    }
}

/// Transitive closure of the "same cluster" relation by repeated squaring
/// of a boolean adjacency matrix.
fn closure_partition(pk: usize, pairs: &[(usize, usize)]) -> Partition {
    let mut adj = vec![vec![false; pk]; pk];
    for i in 0..pk {
        adj[i][i] = true;
    }
    for &(a, b) in pairs {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    for m in 0..pk {
        for i in 0..pk {
            for j in 0..pk {
                adj[i][j] |= adj[i][m] && adj[m][j];
            }
        }
    }
    let labels: Vec<usize> = (0..pk)
        .map(|i| (0..pk).find(|&j| adj[i][j]).unwrap())
        .collect();
    partition_from_labels(&labels)
}

#[test]
fn merge_closure_matches_transitive_closure() {
    let shape = DesignShape::anonymous(0, &[4]);
    let m = constraints_to_model(
        &[
            ElementaryConstraint::merge_levels(0, 1, 2),
            ElementaryConstraint::merge_levels(0, 2, 3),
        ],
        &shape,
    )
    .unwrap();
    assert_eq!(m.partitions[0].clusters(), &[vec![0], vec![1, 2, 3]]);

    let mut rng = rng(6);
    let shape = DesignShape::anonymous(2, &[6, 5]);
    for _ in 0..300 {
        let cs: Vec<_> = (0..rng.random_range(0..8))
            .map(|_| random_constraint(&mut rng, &shape))
            .collect();
        let model = constraints_to_model(&cs, &shape).unwrap();
        for k in 0..2 {
            let pairs: Vec<_> = cs
                .iter()
                .filter(|c| c.block() == k + 1)
                .map(|c| c.indices())
                .collect();
            assert_eq!(
                model.partitions[k],
                closure_partition(shape.level_count(k), &pairs)
            );
        }
        for j in 0..2 {
            assert_eq!(
                model.retained[j],
                !cs.contains(&ElementaryConstraint::delete_continuous(j))
            );
        }
    }
}

#[test]
fn reduced_design_matches_dense_product() {
    let mut rng = rng(7);
    for _ in 0..100 {
        let x = random_design(&mut rng, 40, 2, &[4, 3]);
        let model = random_model(&mut rng, x.shape());
        let sys = regularize(x.shape(), &model).unwrap();
        let dense = x.values() * &sys.a1;
        assert_eq!(reduced_design(&x, &sys), dense);
        // The model space spanned by A¹ is the one written out from the partition.
        let basis = model_basis(x.shape(), &model);
        assert_eq!(sys.q, basis.ncols());
        let mut both = sys.a1.clone().insert_columns(sys.q, basis.ncols(), 0.0);
        both.columns_mut(sys.q, basis.ncols()).copy_from(&basis);
        assert_eq!(svd_rank(&both), sys.q);
    }
}

#[test]
fn regular_form_inverts() {
    let mut rng = rng(8);
    let shape = DesignShape::anonymous(2, &[4, 3]);
    for _ in 0..100 {
        let model = random_model(&mut rng, &shape);
        let sys = regularize(&shape, &model).unwrap();
        let prod = sys.full_permuted() * sys.inverse_permuted();
        assert_eq!(prod, DMatrix::identity(shape.p(), shape.p()));
        assert_eq!(sys.a0.nrows() + sys.q, shape.p());
        assert!((&sys.a0 * &sys.a1).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn constrained_rss_matches_projection() {
    let mut rng = rng(9);
    for _ in 0..50 {
        let x = random_design(&mut rng, 50, 2, &[4, 3]);
        let y = noisy_response(&mut rng, &x, 1.0);
        let model = random_model(&mut rng, x.shape());
        let fit = constrained_fit(&x, &y, &model).unwrap();
        let z = x.values() * model_basis(x.shape(), &model);
        let h = projection(&z);
        let resid = &y - &h * &y;
        assert!(rel_diff(fit.rss, resid.norm_squared()) < 1e-9);
        // Structural constraint satisfaction.
        for c in model.constraints() {
            assert_eq!(c.row(x.shape()).dot(&fit.beta), 0.0);
        }
    }
}

#[test]
fn full_model_refit_and_reduced_design() {
    let (x, y) = small_example();
    let full = FeasibleModel::full(x.shape());
    let sys = regularize(x.shape(), &full).unwrap();
    assert_eq!(reduced_design(&x, &sys), *x.values());
    let f = constrained_fit(&x, &y, &full).unwrap();
    assert!(rel_diff(f.rss, fit_full_model(&x, &y).unwrap().rss) < 1e-12);
}

#[test]
fn small_example_reduced_design() {
    let (x, _) = small_example();
    let sys = regularize(x.shape(), &small_example_truth()).unwrap();
    let z1 = reduced_design(&x, &sys);
    assert_eq!(z1.ncols(), 3);
    assert!(z1.column(0).iter().all(|&v| v == 1.0));
    assert_eq!(z1.column(1).as_slice(), &EX_X0);
    assert_eq!(
        z1.column(2).as_slice(),
        &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]
    );
}

#[test]
fn intersection_dim_matches_nullspace_oracle() {
    let (x, _) = small_example();
    let t = small_example_truth();
    assert_eq!(model_intersection_dim(x.shape(), &t, &t).unwrap(), 3);

    let mut rng = rng(10);
    let shape = DesignShape::anonymous(1, &[3, 3]);
    assert_eq!(shape.p(), 6);
    for _ in 0..300 {
        let m1 = random_model(&mut rng, &shape);
        let m2 = random_model(&mut rng, &shape);
        let b1 = model_basis(&shape, &m1);
        let b2 = model_basis(&shape, &m2);
        let mut joined = DMatrix::zeros(6, b1.ncols() + b2.ncols());
        joined.columns_mut(0, b1.ncols()).copy_from(&b1);
        joined.columns_mut(b1.ncols(), b2.ncols()).copy_from(&b2);
        let expected = b1.ncols() + b2.ncols() - svd_rank(&joined);
        assert_eq!(model_intersection_dim(&shape, &m1, &m2).unwrap(), expected);
        let full = FeasibleModel::full(&shape);
        assert_eq!(
            model_intersection_dim(&shape, &full, &m1).unwrap(),
            m1.size()
        );
    }
}

#[test]
fn rss_recursion_matches_refits() {
    let mut rng = rng(11);
    for _ in 0..50 {
        let x = random_design(&mut rng, 70, 3, &[4, 3]);
        let y = noisy_response(&mut rng, &x, 0.5);
        let shape = x.shape();
        let fit = fit_full_model(&x, &y).unwrap();
        let stats = t_statistics(&fit, shape).unwrap();
        let (_, order) = order_constraints(&stats, Linkage::COMPLETE);
        let rss = rss_path(&fit, shape, &order.constraints).unwrap();
        assert_eq!(rss.len(), x.p());
        for m in 0..rss.len() {
            let model = constraints_to_model(&order.constraints[..m], shape).unwrap();
            assert_eq!(model.size(), x.p() - m);
            let direct = constrained_fit(&x, &y, &model).unwrap().rss;
            assert!(rel_diff(rss[m], direct) < 1e-8);
        }
    }
}

/// Minimum Gaussian GIC over every feasible model.
fn exhaustive_min_gic(x: &DesignMatrix, y: &DVector<f64>, r_n: f64) -> (f64, FeasibleModel) {
    all_models(x.shape())
        .into_iter()
        .map(|m| {
            let rss = constrained_fit(x, y, &m).unwrap().rss;
            (gaussian_gic(rss, x.nrows(), m.size(), r_n), m)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

#[test]
fn strong_signal_path_reaches_exhaustive_minimum() {
    let mut rng = rng(12);
    let shape = DesignShape::anonymous(1, &[3]);
    assert_eq!(all_models(&shape).len(), 10);
    for _ in 0..50 {
        let x = random_design(&mut rng, 30, 1, &[3]);
        // Level 2 tied to level 1 (index 1 and 2), x kept.
        let beta = DVector::from_row_slice(&[0.0, 2.0, 3.0, 3.0]);
        let y = x.values() * beta
            + DVector::from_fn(30, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let res = dmr(&x, &y, &DmrConfig::default()).unwrap();
        let (best, _) = exhaustive_min_gic(&x, &y, (30f64).ln());
        let path_min = res.path.gic.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(rel_diff(path_min, best) < 1e-10, "{path_min} vs {best}");
    }
}

#[test]
fn wald_statistics_reduce_to_t_statistics_for_gaussian_fits() {
    let mut rng = rng(13);
    for _ in 0..20 {
        let x = random_design(&mut rng, 60, 2, &[4, 3]);
        let y = noisy_response(&mut rng, &x, 0.5);
        let ols = t_statistics(&fit_full_model(&x, &y).unwrap(), x.shape()).unwrap();
        let glm = irls_fit(x.values(), &y, Family::Gaussian, &IrlsOptions::default()).unwrap();
        let wald = wald_statistics(&glm, x.shape()).unwrap();
        for (a, b) in ols.continuous.iter().zip(&wald.continuous) {
            assert!(rel_diff(*a, *b) < 1e-8);
        }
        for (da, db) in ols.factors.iter().zip(&wald.factors) {
            assert!(da
                .matrix()
                .iter()
                .zip(db.matrix().iter())
                .all(|(a, b)| (a - b).abs() <= 1e-8 * a.abs().max(1e-300)));
        }
    }
}

#[test]
fn gaussian_glm_path_equals_linear_path() {
    let mut rng = rng(14);
    for _ in 0..10 {
        let x = random_design(&mut rng, 80, 2, &[5]);
        let y = noisy_response(&mut rng, &x, 0.4);
        let a = dmr(&x, &y, &DmrConfig::default()).unwrap();
        let b = dmr_glm(&x, &y, Family::Gaussian, &DmrConfig::default()).unwrap();
        assert_eq!(a.path.constraints, b.path.constraints);
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.model, b.model);
        for (u, v) in a.path.gic.iter().zip(&b.path.gic) {
            assert!(rel_diff(*u, *v) < 1e-8);
        }
    }
}

#[test]
fn logistic_path_reaches_exhaustive_minimum() {
    let mut rng = rng(15);
    let shape = DesignShape::anonymous(0, &[3]);
    for _ in 0..10 {
        let x = random_design(&mut rng, 200, 0, &[3]);
        let beta = DVector::from_row_slice(&[-1.5, 0.0, 3.0]);
        let eta = x.values() * beta;
        let y = eta.map(|e| {
            if rng.random_bool(1.0 / (1.0 + (-e).exp())) {
                1.0
            } else {
                0.0
            }
        });
        let res = dmr_glm(&x, &y, Family::Binomial, &DmrConfig::default()).unwrap();
        let r_n = (200f64).ln();
        let best = all_models(&shape)
            .iter()
            .map(|m| {
                let sys = regularize(&shape, m).unwrap();
                let z1 = reduced_design(&x, &sys);
                let fit = irls_fit(&z1, &y, Family::Binomial, &IrlsOptions::default()).unwrap();
                fit.deviance + r_n * m.size() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let path_min = res.path.gic.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(rel_diff(path_min, best) < 1e-8, "{path_min} vs {best}");
    }
}

#[test]
fn elementary_rates_by_pair_enumeration() {
    let shape = DesignShape::anonymous(0, &[5]);
    let t = FeasibleModel {
        retained: vec![],
        partitions: vec![Partition::from_clusters(vec![vec![0, 1], vec![2, 3, 4]], 5).unwrap()],
    };
    let t_hat = FeasibleModel {
        retained: vec![],
        partitions: vec![Partition::from_clusters(vec![vec![0, 1, 2], vec![3, 4]], 5).unwrap()],
    };
    // Enumerate level pairs directly.
    let same =
        |c: &[Vec<usize>], a: usize, b: usize| c.iter().any(|g| g.contains(&a) && g.contains(&b));
    let (ct, ch) = (
        vec![vec![0, 1], vec![2, 3, 4]],
        vec![vec![0, 1, 2], vec![3, 4]],
    );
    let (mut b, mut bh, mut both) = (0, 0, 0);
    for a in 0..5 {
        for c in a + 1..5 {
            let (x, y) = (same(&ct, a, c), same(&ch, a, c));
            b += x as usize;
            bh += y as usize;
            both += (x && y) as usize;
        }
    }
    assert_eq!((b, bh, both), (4, 4, 2));
    let (tpr, fdr) = elementary_rates(&t, &t_hat);
    assert_eq!(tpr, both as f64 / b as f64);
    assert_eq!(fdr, 1.0 - both as f64 / bh as f64);

    let f = FeasibleModel::full(&shape);
    assert_eq!(elementary_rates(&t, &f), (0.0, 0.0));
}

#[test]
fn small_example_star_rates_against_full_model() {
    let (x, _) = small_example();
    let t = small_example_truth();
    let (tpr, fdr) = star_rates(x.shape(), &t, &FeasibleModel::full(x.shape())).unwrap();
    assert_eq!(tpr, 1.0);
    assert!((fdr - 0.4).abs() < 1e-15);
}

#[test]
fn small_example_model_from_constraints() {
    let (x, _) = small_example();
    let m = constraints_to_model(
        &[
            ElementaryConstraint::Delete(Param::Level {
                factor: 0,
                level: 3,
            }),
            ElementaryConstraint::merge_levels(0, 1, 2),
        ],
        x.shape(),
    )
    .unwrap();
    assert_eq!(m, small_example_truth());
    assert_eq!(
        constraints_to_model(&[], x.shape()).unwrap(),
        FeasibleModel::full(x.shape())
    );
}
