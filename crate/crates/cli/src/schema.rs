//! Column roles: which column is the response, which are factors (and in
//! what level order). Everything else is continuous.

use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FactorDecl {
    pub name: String,
    /// Declared level order; the first is the reference. When absent, levels
    /// are taken in order of first appearance in the data.
    #[serde(default)]
    pub levels: Option<Vec<String>>,
}

/// Sidecar JSON schema file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub factors: Vec<FactorDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub response: String,
    pub factors: Vec<FactorDecl>,
}

/// Parses `NAME` or `NAME=lvl1,lvl2,...`.
pub fn parse_factor_flag(s: &str) -> Result<FactorDecl> {
    let (name, levels) = match s.split_once('=') {
        Some((name, levels)) => {
            let levels: Vec<String> = levels.split(',').map(str::to_string).collect();
            (name, Some(levels))
        }
        None => (s, None),
    };
    if name.is_empty() {
        return Err(CliError::input(format!(
            "--factor {s:?}: missing column name"
        )));
    }
    Ok(FactorDecl {
        name: name.to_string(),
        levels,
    })
}

impl Schema {
    /// Combines an optional sidecar file with command-line flags; flags win.
    pub fn resolve(
        sidecar: Option<&Path>,
        response: Option<String>,
        factor_flags: &[String],
    ) -> Result<Schema> {
        let mut file = match sidecar {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::input(format!("cannot read schema {}: {e}", path.display()))
                })?;
                serde_json::from_str::<SchemaFile>(&text)
                    .map_err(|e| CliError::input(format!("schema {}: {e}", path.display())))?
            }
            None => SchemaFile::default(),
        };
        for flag in factor_flags {
            let decl = parse_factor_flag(flag)?;
            match file.factors.iter_mut().find(|f| f.name == decl.name) {
                Some(existing) => *existing = decl,
                None => file.factors.push(decl),
            }
        }
        let response = response
            .or(file.response)
            .ok_or_else(|| CliError::input("no response column given (use --response)"))?;
        if file.factors.iter().any(|f| f.name == response) {
            return Err(CliError::input(format!(
                "column {response:?} cannot be both the response and a factor"
            )));
        }
        for (i, f) in file.factors.iter().enumerate() {
            if file.factors[..i].iter().any(|g| g.name == f.name) {
                return Err(CliError::input(format!(
                    "factor {:?} declared twice",
                    f.name
                )));
            }
        }
        Ok(Schema {
            response,
            factors: file.factors,
        })
    }

    pub fn factor(&self, name: &str) -> Option<&FactorDecl> {
        self.factors.iter().find(|f| f.name == name)
    }
}
