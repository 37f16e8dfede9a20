//! Design matrix construction and the full-model least-squares fit.
//!
//! Columns are laid out as `[1 | X₀ | X₁ | … | X_l]`: the intercept, then
//! continuous regressors in declaration order, then one dummy block per
//! factor. Factor `k` with `p_k` levels contributes `p_k − 1` zero-one
//! columns; its first declared level is the reference and has no column.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DmrError, Result};
use crate::linalg::{sq_norm, ThinQr};

/// Role of a dataset column in the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Response,
    Continuous,
    /// Ordered level labels; the first one is the reference level.
    Factor {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn response(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Response,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn factor<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Factor {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        }
    }
}

/// Column payload of a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A complete (no missing cells) column-oriented table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<ColumnData>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_column(mut self, name: impl Into<String>, data: ColumnData) -> Self {
        self.push(name, data);
        self
    }

    pub fn push(&mut self, name: impl Into<String>, data: ColumnData) {
        self.names.push(name.into());
        self.columns.push(data);
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, ColumnData::len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorLevels {
    pub name: String,
    pub levels: Vec<String>,
}

/// Block structure of a design: names of continuous regressors and the
/// level labels of every factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignShape {
    pub continuous: Vec<String>,
    pub factors: Vec<FactorLevels>,
}

/// Identifies one coefficient of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    Intercept,
    Continuous(usize),
    /// Non-reference level `level ≥ 1` of factor `factor` (both 0-based).
    Level {
        factor: usize,
        level: usize,
    },
}

impl DesignShape {
    /// Shape with generated names: `x1..`, factors `f1..` with levels `1..p_k`.
    pub fn anonymous(p0: usize, level_counts: &[usize]) -> Self {
        DesignShape {
            continuous: (1..=p0).map(|j| format!("x{j}")).collect(),
            factors: level_counts
                .iter()
                .enumerate()
                .map(|(k, &pk)| FactorLevels {
                    name: format!("f{}", k + 1),
                    levels: (1..=pk).map(|l| l.to_string()).collect(),
                })
                .collect(),
        }
    }

    pub fn p0(&self) -> usize {
        self.continuous.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn level_count(&self, factor: usize) -> usize {
        self.factors[factor].levels.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.levels.len()).collect()
    }

    /// Number of parameters `p = 1 + p₀ + Σ (p_k − 1)`.
    pub fn p(&self) -> usize {
        1 + self.p0()
            + self
                .factors
                .iter()
                .map(|f| f.levels.len() - 1)
                .sum::<usize>()
    }

    /// First design column of factor `factor`.
    pub fn factor_offset(&self, factor: usize) -> usize {
        1 + self.p0()
            + self.factors[..factor]
                .iter()
                .map(|f| f.levels.len() - 1)
                .sum::<usize>()
    }

    pub fn column(&self, param: Param) -> Option<usize> {
        match param {
            Param::Intercept => Some(0),
            Param::Continuous(j) if j < self.p0() => Some(1 + j),
            Param::Level { factor, level }
                if factor < self.n_factors() && level >= 1 && level < self.level_count(factor) =>
            {
                Some(self.factor_offset(factor) + level - 1)
            }
            _ => None,
        }
    }

    pub fn param(&self, column: usize) -> Param {
        assert!(column < self.p(), "column {column} out of range");
        if column == 0 {
            return Param::Intercept;
        }
        if column <= self.p0() {
            return Param::Continuous(column - 1);
        }
        let mut offset = 1 + self.p0();
        for (factor, f) in self.factors.iter().enumerate() {
            let width = f.levels.len() - 1;
            if column < offset + width {
                return Param::Level {
                    factor,
                    level: column - offset + 1,
                };
            }
            offset += width;
        }
        unreachable!()
    }

    pub fn column_label(&self, column: usize) -> String {
        match self.param(column) {
            Param::Intercept => "(Intercept)".to_string(),
            Param::Continuous(j) => self.continuous[j].clone(),
            Param::Level { factor, level } => {
                let f = &self.factors[factor];
                format!("{}{}", f.name, f.levels[level])
            }
        }
    }
}

/// Full-rank model matrix with its block bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    shape: DesignShape,
}

impl DesignMatrix {
    /// Validates column count, intercept column, `n > p` and full column rank.
    pub fn new(values: DMatrix<f64>, shape: DesignShape) -> Result<Self> {
        let (n, p) = values.shape();
        if p != shape.p() {
            return Err(DmrError::DimensionMismatch(format!(
                "matrix has {p} columns, shape implies {}",
                shape.p()
            )));
        }
        if values.column(0).iter().any(|&v| v != 1.0) {
            return Err(DmrError::InvalidSpec(
                "first design column must be the all-ones intercept".into(),
            ));
        }
        if n <= p {
            return Err(DmrError::TooFewRows { n, p });
        }
        let design = DesignMatrix { values, shape };
        if let Some(col) = ThinQr::new(&design.values).first_deficient_column() {
            return Err(design.rank_error(col));
        }
        Ok(design)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn shape(&self) -> &DesignShape {
        &self.shape
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Block index `(k, j)` of every column (block k, index j within the block):
    /// `k = 0` for intercept/continuous, `k ≥ 1` for factors; `j` is the
    /// 1-based level (reference = 1) or the continuous index (intercept = 0).
    pub fn block_index(&self) -> Vec<(usize, usize)> {
        (0..self.p())
            .map(|c| match self.shape.param(c) {
                Param::Intercept => (0, 0),
                Param::Continuous(j) => (0, j + 1),
                Param::Level { factor, level } => (factor + 1, level + 1),
            })
            .collect()
    }

    fn rank_error(&self, column: usize) -> DmrError {
        // Report the dependent column along with the one preceding it,
        // which usually names the collinear pair.
        let mut columns = vec![self.shape.column_label(column)];
        if column > 0 {
            columns.insert(0, self.shape.column_label(column - 1));
        }
        DmrError::RankDeficient { columns }
    }
}

/// Builds the design matrix and response vector from a typed table.
///
/// Exactly one spec must be the response. Columns of the dataset that no
/// spec mentions are ignored.
pub fn build_design_matrix(
    dataset: &Dataset,
    specs: &[ColumnSpec],
) -> Result<(DesignMatrix, DVector<f64>)> {
    let responses: Vec<_> = specs
        .iter()
        .filter(|s| s.kind == ColumnKind::Response)
        .collect();
    let response = match responses.as_slice() {
        [r] => *r,
        [] => return Err(DmrError::InvalidSpec("no response column declared".into())),
        _ => {
            return Err(DmrError::InvalidSpec(
                "more than one response column declared".into(),
            ))
        }
    };
    let n = dataset.nrows();
    let numeric = |name: &str| -> Result<&Vec<f64>> {
        match dataset.column(name) {
            Some(ColumnData::Numeric(v)) => Ok(v),
            Some(ColumnData::Categorical(_)) => Err(DmrError::InvalidSpec(format!(
                "column {name:?} must be numeric"
            ))),
            None => Err(DmrError::InvalidSpec(format!("column {name:?} not found"))),
        }
    };
    let y = numeric(&response.name)?;
    if y.len() != n {
        return Err(DmrError::DimensionMismatch("ragged dataset".into()));
    }

    let mut shape = DesignShape {
        continuous: Vec::new(),
        factors: Vec::new(),
    };
    let mut continuous_cols = Vec::new();
    let mut factor_codes: Vec<Vec<usize>> = Vec::new();
    for spec in specs {
        match &spec.kind {
            ColumnKind::Response => {}
            ColumnKind::Continuous => {
                let v = numeric(&spec.name)?;
                if v.len() != n {
                    return Err(DmrError::DimensionMismatch("ragged dataset".into()));
                }
                shape.continuous.push(spec.name.clone());
                continuous_cols.push(v);
            }
            ColumnKind::Factor { levels } => {
                check_levels(&spec.name, levels)?;
                let values = match dataset.column(&spec.name) {
                    Some(ColumnData::Categorical(v)) => v,
                    Some(ColumnData::Numeric(_)) => {
                        return Err(DmrError::InvalidSpec(format!(
                            "factor column {:?} must be categorical",
                            spec.name
                        )))
                    }
                    None => {
                        return Err(DmrError::InvalidSpec(format!(
                            "column {:?} not found",
                            spec.name
                        )))
                    }
                };
                let codes = values
                    .iter()
                    .enumerate()
                    .map(|(row, v)| {
                        levels
                            .iter()
                            .position(|l| l == v)
                            .ok_or_else(|| DmrError::UnknownLevel {
                                column: spec.name.clone(),
                                level: v.clone(),
                                row,
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape.factors.push(FactorLevels {
                    name: spec.name.clone(),
                    levels: levels.clone(),
                });
                factor_codes.push(codes);
            }
        }
    }

    let p = shape.p();
    if n <= p {
        return Err(DmrError::TooFewRows { n, p });
    }
    let mut values = DMatrix::zeros(n, p);
    values.column_mut(0).fill(1.0);
    for (j, col) in continuous_cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            values[(i, 1 + j)] = v;
        }
    }
    for (k, codes) in factor_codes.iter().enumerate() {
        let offset = shape.factor_offset(k);
        for (i, &level) in codes.iter().enumerate() {
            if level > 0 {
                values[(i, offset + level - 1)] = 1.0;
            }
        }
    }
    let design = DesignMatrix::new(values, shape)?;
    Ok((design, DVector::from_vec(y.clone())))
}

fn check_levels(name: &str, levels: &[String]) -> Result<()> {
    if levels.is_empty() {
        return Err(DmrError::InvalidSpec(format!(
            "factor {name:?} declares no levels"
        )));
    }
    for (i, l) in levels.iter().enumerate() {
        if levels[..i].contains(l) {
            return Err(DmrError::InvalidSpec(format!(
                "factor {name:?} declares level {l:?} twice"
            )));
        }
    }
    Ok(())
}

/// QR-derived quantities of the unconstrained least-squares fit.
#[derive(Debug, Clone)]
pub struct FullModelFit {
    /// Upper-triangular factor with positive diagonal.
    pub r: DMatrix<f64>,
    pub r_inv: DMatrix<f64>,
    /// `Qᵀy`.
    pub z: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub sigma2_hat: f64,
    pub y_sq_norm: f64,
    /// Residual sum of squares of the full model, `‖y‖² − ‖z‖²`.
    pub rss: f64,
    pub n: usize,
    pub p: usize,
}

pub fn fit_full_model(x: &DesignMatrix, y: &DVector<f64>) -> Result<FullModelFit> {
    let (n, p) = x.values().shape();
    if y.len() != n {
        return Err(DmrError::DimensionMismatch(format!(
            "response has length {}, design has {n} rows",
            y.len()
        )));
    }
    if n <= p {
        return Err(DmrError::TooFewRows { n, p });
    }
    let qr = ThinQr::new(x.values());
    if let Some(col) = qr.first_deficient_column() {
        return Err(x.rank_error(col));
    }
    let z = qr.q.tr_mul(y);
    let r_inv = qr.r_inverse();
    let beta_hat = &r_inv * &z;
    // ‖y‖² − ‖z‖² evaluated as ‖y − Qz‖², which avoids cancellation.
    let rss = sq_norm(&(y - &qr.q * &z));
    Ok(FullModelFit {
        r: qr.r,
        r_inv,
        z,
        beta_hat,
        sigma2_hat: rss / (n - p) as f64,
        y_sq_norm: sq_norm(y),
        rss,
        n,
        p,
    })
}
