//! Delete-or-merge regressors (DMR): model selection that deletes
//! continuous predictors and merges factor levels at the same time.
//!
//! The entry points are [`dmr`] for Gaussian linear models and
//! [`dmr_glm`] for logistic regression. Both build a nested path of
//! `p` models from one set of test statistics and pick the path entry with
//! the smallest generalized information criterion.
//!
//! ```
//! use dmr::{build_design_matrix, dmr, ColumnData, ColumnSpec, Dataset, DmrConfig};
//!
//! let levels = ["a", "a", "b", "b", "c", "c", "d", "d"].repeat(4);
//! let y: Vec<f64> = levels
//!     .iter()
//!     .enumerate()
//!     .map(|(i, l)| if *l == "a" || *l == "b" { 0.0 } else { 5.0 } + 0.1 * ((i * 7 % 11) as f64 - 5.0))
//!     .collect();
//! let data = Dataset::new()
//!     .with_column("y", ColumnData::Numeric(y))
//!     .with_column("f", ColumnData::Categorical(levels.iter().map(|s| s.to_string()).collect()));
//! let specs = [ColumnSpec::response("y"), ColumnSpec::factor("f", ["a", "b", "c", "d"])];
//! let (x, y) = build_design_matrix(&data, &specs).unwrap();
//! let result = dmr(&x, &y, &DmrConfig::default()).unwrap();
//! assert_eq!(result.model.partitions[0].clusters(), &[vec![0, 1], vec![2, 3]]);
//! ```

pub mod constraints;
pub mod error;
pub mod evaluation;
pub mod glm;
pub mod linalg;
pub mod model_matrix;
pub mod selection;

pub use constraints::{
    constrained_fit, constraints_to_model, model_intersection_dim, reduced_design, regularize,
    ConstrainedFit, ElementaryConstraint, FeasibleModel, Partition, RegularConstraintSystem,
};
pub use error::{DmrError, Result};
pub use glm::{dmr_glm, irls_fit, wald_statistics, Family, GlmFit, IrlsOptions};
pub use model_matrix::{
    build_design_matrix, fit_full_model, ColumnData, ColumnKind, ColumnSpec, Dataset, DesignMatrix,
    DesignShape, FullModelFit, Param,
};
pub use selection::{
    assemble_path, cluster_factor, dmr, gic_select, gic_values, rss_path, t_statistics,
    DendrogramTrace, DissimilarityMatrix, DmrConfig, Linkage, NestedPath, Penalty, SelectionResult,
    TStatistics,
};
