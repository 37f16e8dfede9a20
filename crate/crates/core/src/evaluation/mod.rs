//! Simulation experiments and selection accuracy metrics.

pub mod experiments;
pub mod metrics;
pub mod monte_carlo;

pub use experiments::{
    generate_experiment, generate_experiment_with, replication_rng, ExperimentData, ExperimentSpec,
};
pub use metrics::{binomial_ci95, elementary_rates, star_rates};
pub use monte_carlo::{
    run_monte_carlo, DmrGlmSelector, DmrSelector, MonteCarloReport, Replication, Selection,
    Selector, SelectorMetrics, CSV_HEADER,
};
