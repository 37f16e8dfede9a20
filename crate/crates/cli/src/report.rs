//! Rendering a selection result as JSON or CSV, and the name-based
//! constraint encoding used in the JSON report.

use dmr::{DesignShape, ElementaryConstraint, Family, Param, SelectionResult};
use serde_json::{json, Map, Number, Value};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: &str = "1";

/// Run settings echoed into the report.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub response: String,
    pub family: Family,
    pub linkage: f64,
    pub n: usize,
}

/// 17 significant digits, so every float round-trips exactly; non-finite
/// values become `null`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(
            format!("{v:.16e}")
                .parse::<Number>()
                .expect("valid JSON number"),
        )
    } else {
        Value::Null
    }
}

fn level_label(shape: &DesignShape, factor: usize, level: usize) -> &str {
    &shape.factors[factor].levels[level]
}

/// Human-readable form using coefficient labels, e.g. `xB = 0`, `fB = fC`.
pub fn constraint_text(shape: &DesignShape, c: &ElementaryConstraint) -> String {
    match *c {
        ElementaryConstraint::Delete(param) => {
            let col = shape.column(param).expect("constraint fits the design");
            format!("{} = 0", shape.column_label(col))
        }
        ElementaryConstraint::Merge { factor, i, j } => {
            let a = shape
                .column(Param::Level { factor, level: i })
                .expect("valid level");
            let b = shape
                .column(Param::Level { factor, level: j })
                .expect("valid level");
            format!("{} = {}", shape.column_label(a), shape.column_label(b))
        }
    }
}

/// Name-based encoding: `{"delete": "x"}` for a continuous regressor and
/// `{"factor": "f", "merge": ["A", "B"]}` for two levels of a factor (a
/// merge with the reference level is a deletion of the other level).
pub fn constraint_to_json(shape: &DesignShape, c: &ElementaryConstraint) -> Value {
    match *c {
        ElementaryConstraint::Delete(Param::Continuous(j)) => {
            json!({ "delete": shape.continuous[j] })
        }
        ElementaryConstraint::Delete(Param::Level { factor, level }) => json!({
            "factor": shape.factors[factor].name,
            "merge": [level_label(shape, factor, 0), level_label(shape, factor, level)],
        }),
        ElementaryConstraint::Delete(Param::Intercept) => {
            unreachable!("the intercept is never constrained")
        }
        ElementaryConstraint::Merge { factor, i, j } => json!({
            "factor": shape.factors[factor].name,
            "merge": [level_label(shape, factor, i), level_label(shape, factor, j)],
        }),
    }
}

/// Inverse of [`constraint_to_json`].
pub fn constraint_from_json(shape: &DesignShape, v: &Value) -> Result<ElementaryConstraint> {
    let bad = || CliError::input(format!("malformed constraint {v}"));
    if let Some(name) = v.get("delete").and_then(Value::as_str) {
        let j = shape
            .continuous
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::input(format!("unknown continuous variable {name:?}")))?;
        return Ok(ElementaryConstraint::delete_continuous(j));
    }
    let factor_name = v.get("factor").and_then(Value::as_str).ok_or_else(bad)?;
    let factor = shape
        .factors
        .iter()
        .position(|f| f.name == factor_name)
        .ok_or_else(|| CliError::input(format!("unknown factor {factor_name:?}")))?;
    let pair = v.get("merge").and_then(Value::as_array).ok_or_else(bad)?;
    if pair.len() != 2 {
        return Err(bad());
    }
    let mut idx = [0usize; 2];
    for (slot, label) in idx.iter_mut().zip(pair) {
        let label = label.as_str().ok_or_else(bad)?;
        *slot = shape.factors[factor]
            .levels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| {
                CliError::input(format!("unknown level {label:?} of factor {factor_name:?}"))
            })?;
    }
    if idx[0] == idx[1] {
        return Err(bad());
    }
    Ok(ElementaryConstraint::merge_levels(factor, idx[0], idx[1]))
}

fn labels(shape: &DesignShape, factor: usize, levels: &[usize]) -> Value {
    Value::Array(
        levels
            .iter()
            .map(|&l| Value::String(level_label(shape, factor, l).to_string()))
            .collect(),
    )
}

pub fn json_report(info: &RunInfo, shape: &DesignShape, res: &SelectionResult) -> Value {
    let family = match info.family {
        Family::Gaussian => "gaussian",
        Family::Binomial => "binomial",
    };
    let (retained, deleted): (Vec<_>, Vec<_>) = shape
        .continuous
        .iter()
        .zip(&res.model.retained)
        .partition(|(_, &keep)| keep);
    let names =
        |v: Vec<(&String, &bool)>| v.into_iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();

    let mut partitions = Map::new();
    for (k, part) in res.model.partitions.iter().enumerate() {
        let clusters = part
            .clusters()
            .iter()
            .map(|c| labels(shape, k, c))
            .collect();
        partitions.insert(shape.factors[k].name.clone(), Value::Array(clusters));
    }

    let mut coefficients = Map::new();
    for col in 0..shape.p() {
        coefficients.insert(shape.column_label(col), num(res.beta[col]));
    }

    let path = &res.path;
    let steps: Vec<Value> = (0..path.len())
        .map(|m| {
            json!({
                "step": m,
                "height": num(path.heights[m]),
                "constraint": if m == 0 { Value::Null } else { Value::String(constraint_text(shape, &path.constraints[m - 1])) },
                "rss": num(path.rss[m]),
                "gic": num(path.gic[m]),
                "size": path.sizes[m],
                "converged": !path.failed.contains(&m),
            })
        })
        .collect();

    let mut dendrograms = Map::new();
    for trace in &res.dendrograms {
        let merges = trace
            .merges
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "step": i + 1,
                    "left": labels(shape, trace.factor, &s.left),
                    "right": labels(shape, trace.factor, &s.right),
                    "height": num(s.height),
                })
            })
            .collect();
        dendrograms.insert(
            shape.factors[trace.factor].name.clone(),
            Value::Array(merges),
        );
    }

    json!({
        "format_version": FORMAT_VERSION,
        "response": info.response,
        "family": family,
        "criterion": { "name": res.criterion.name, "penalty": num(res.criterion.penalty) },
        "linkage": num(info.linkage),
        "n": info.n,
        "p": shape.p(),
        "selected_step": res.selected,
        "selected_size": path.sizes[res.selected],
        "retained_continuous": names(retained),
        "deleted_continuous": names(deleted),
        "partitions": partitions,
        "coefficients": coefficients,
        "selected_constraints": path.constraints[..res.selected]
            .iter()
            .map(|c| constraint_to_json(shape, c))
            .collect::<Vec<_>>(),
        "path": steps,
        "dendrograms": dendrograms,
    })
}

/// The nested path as a table, one row per step, with the selected row flagged.
pub fn csv_report(shape: &DesignShape, res: &SelectionResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "step",
        "height",
        "constraint",
        "rss",
        "gic",
        "size",
        "selected",
    ])
    .expect("in-memory write");
    let f = |v: f64| {
        if v.is_finite() {
            format!("{v:.16e}")
        } else {
            String::new()
        }
    };
    let path = &res.path;
    for m in 0..path.len() {
        let constraint = if m == 0 {
            String::new()
        } else {
            constraint_text(shape, &path.constraints[m - 1])
        };
        w.write_record([
            m.to_string(),
            f(path.heights[m]),
            constraint,
            f(path.rss[m]),
            f(path.gic[m]),
            path.sizes[m].to_string(),
            (m == res.selected).to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}
