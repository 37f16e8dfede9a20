//! Synthetic data generators for the three simulation experiments.
//!
//! * Experiment 1: three factors with 8, 4 and 3 levels, balanced full
//!   factorial with `c` observations per cell (`n = 96c`). Only the first
//!   factor matters, with level partition `{1,2}, {3,4,5,6}, {7,8}`.
//! * Experiment 2: one 8-level factor and eight AR(0.8)-correlated
//!   continuous regressors whose means follow the true level partition
//!   (`n = 128c`). Regressors 1, 3, 5, 7 are active.
//! * Experiment 3: the Experiment 1 design with a Bernoulli response on the
//!   logit scale.
//!
//! Every generator also draws an independent response on the same design
//! for out-of-sample prediction error.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::constraints::{FeasibleModel, Partition};
use crate::error::{DmrError, Result};
use crate::glm::Family;
use crate::model_matrix::{DesignMatrix, DesignShape};

const EXP1_LEVELS: [usize; 3] = [8, 4, 3];
const EXP1_INTERCEPT: f64 = 2.0;
const EXP1_FACTOR1: [f64; 7] = [0.0, -3.0, -3.0, -3.0, -3.0, -2.0, -2.0];
const EXP2_CONTINUOUS: [f64; 8] = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
const EXP2_FACTOR: [f64; 7] = [0.0, -2.0, -2.0, -2.0, -2.0, 4.0, 4.0];
const EXP2_RHO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSpec {
    id: u8,
    c: usize,
}

impl ExperimentSpec {
    pub fn new(id: u8, c: usize) -> Result<Self> {
        if !(1..=3).contains(&id) {
            return Err(DmrError::InvalidConfig(format!("unknown experiment {id}")));
        }
        if c == 0 {
            return Err(DmrError::InvalidConfig(
                "replication multiplier c must be positive".into(),
            ));
        }
        Ok(ExperimentSpec { id, c })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn n(&self) -> usize {
        match self.id {
            2 => 128 * self.c,
            _ => 96 * self.c,
        }
    }

    pub fn family(&self) -> Family {
        if self.id == 3 {
            Family::Binomial
        } else {
            Family::Gaussian
        }
    }

    /// Whether the correct-factors rate applies (several factors, one signal).
    pub fn has_factor_screening(&self) -> bool {
        self.id != 2
    }

    pub fn shape(&self) -> DesignShape {
        match self.id {
            2 => DesignShape::anonymous(8, &[8]),
            _ => DesignShape::anonymous(0, &EXP1_LEVELS),
        }
    }

    pub fn true_model(&self) -> FeasibleModel {
        let signal = Partition::from_clusters(vec![vec![0, 1], vec![2, 3, 4, 5], vec![6, 7]], 8)
            .expect("valid partition");
        match self.id {
            2 => FeasibleModel {
                retained: EXP2_CONTINUOUS.iter().map(|&a| a != 0.0).collect(),
                partitions: vec![signal],
            },
            _ => FeasibleModel {
                retained: vec![],
                partitions: vec![
                    signal,
                    Partition::from_clusters(vec![(0..4).collect()], 4).expect("valid"),
                    Partition::from_clusters(vec![(0..3).collect()], 3).expect("valid"),
                ],
            },
        }
    }

    /// True coefficients in design-column order.
    pub fn beta_star(&self) -> DVector<f64> {
        let mut beta = Vec::with_capacity(self.shape().p());
        match self.id {
            2 => {
                beta.push(0.0);
                beta.extend(EXP2_CONTINUOUS);
                beta.extend(EXP2_FACTOR);
            }
            _ => {
                beta.push(EXP1_INTERCEPT);
                beta.extend(EXP1_FACTOR1);
                beta.extend([0.0; 3 + 2]);
            }
        }
        DVector::from_vec(beta)
    }
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub x: DesignMatrix,
    pub y: DVector<f64>,
    /// Independent response on the same design.
    pub y_new: DVector<f64>,
    /// Linear predictor `Xβ*`.
    pub mu: DVector<f64>,
}

/// Generator for replication `rep` of a run seeded with `seed`: the ChaCha
/// stream number is the replication index, so replications are independent
/// of each other and of the order they are executed in.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

pub fn generate_experiment(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentData> {
    generate_experiment_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_experiment_with<R: Rng + ?Sized>(
    spec: &ExperimentSpec,
    rng: &mut R,
) -> Result<ExperimentData> {
    let shape = spec.shape();
    let values = match spec.id {
        2 => experiment2_design(spec.c, rng),
        _ => factorial_design(&shape, spec.c),
    };
    let x = DesignMatrix::new(values, shape)?;
    let mu = x.values() * spec.beta_star();
    let (y, y_new) = match spec.family() {
        Family::Gaussian => (gaussian_response(&mu, rng), gaussian_response(&mu, rng)),
        Family::Binomial => (bernoulli_response(&mu, rng), bernoulli_response(&mu, rng)),
    };
    Ok(ExperimentData { x, y, y_new, mu })
}

/// Balanced full factorial, first factor varying slowest, `c` consecutive
/// replicates per cell.
fn factorial_design(shape: &DesignShape, c: usize) -> DMatrix<f64> {
    let counts = shape.level_counts();
    let cells: usize = counts.iter().product();
    let n = cells * c;
    let mut x = DMatrix::zeros(n, shape.p());
    x.column_mut(0).fill(1.0);
    for cell in 0..cells {
        let mut rem = cell;
        let mut levels = vec![0; counts.len()];
        for k in (0..counts.len()).rev() {
            levels[k] = rem % counts[k];
            rem /= counts[k];
        }
        for r in 0..c {
            let row = cell * c + r;
            for (k, &level) in levels.iter().enumerate() {
                if level > 0 {
                    x[(row, shape.factor_offset(k) + level - 1)] = 1.0;
                }
            }
        }
    }
    x
}

/// Level `l` of the factor occupies rows `16c·l .. 16c·(l + 1)`; the
/// continuous block has AR(ρ) correlation and a mean vector that follows
/// the true level clusters.
fn experiment2_design<R: Rng + ?Sized>(c: usize, rng: &mut R) -> DMatrix<f64> {
    let per_level = 16 * c;
    let n = 8 * per_level;
    let p = 1 + 8 + 7;
    let mut x = DMatrix::zeros(n, p);
    let innovation_sd = (1.0 - EXP2_RHO * EXP2_RHO).sqrt();
    for row in 0..n {
        let level = row / per_level;
        let mean_block = match level {
            0 | 1 => 0..2,
            2..=5 => 2..6,
            _ => 6..8,
        };
        x[(row, 0)] = 1.0;
        let mut prev = 0.0;
        for j in 0..8 {
            let e: f64 = rng.sample(StandardNormal);
            let v = if j == 0 {
                e
            } else {
                EXP2_RHO * prev + innovation_sd * e
            };
            prev = v;
            let mean = if mean_block.contains(&j) { 1.0 } else { 0.0 };
            x[(row, 1 + j)] = v + mean;
        }
        if level > 0 {
            x[(row, 8 + level)] = 1.0;
        }
    }
    x
}

fn gaussian_response<R: Rng + ?Sized>(mu: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    mu.map(|m| m + rng.sample::<f64, _>(StandardNormal))
}

fn bernoulli_response<R: Rng + ?Sized>(mu: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    mu.map(|m| {
        let prob = 1.0 / (1.0 + (-m).exp());
        let draw = Bernoulli::new(prob)
            .expect("probability in [0, 1]")
            .sample(rng);
        if draw {
            1.0
        } else {
            0.0
        }
    })
}
