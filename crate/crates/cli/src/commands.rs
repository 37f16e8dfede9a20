use std::io::Write;
use std::path::PathBuf;

use dmr::evaluation::{
    run_monte_carlo, DmrGlmSelector, DmrSelector, ExperimentSpec, Selector, CSV_HEADER,
};
use dmr::{build_design_matrix, dmr, dmr_glm, DmrConfig, DmrError, Family, Linkage, Penalty};

use crate::error::{CliError, Result};
use crate::input::Table;
use crate::report::{csv_report, json_report, RunInfo};
use crate::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct SelectOptions {
    pub input: PathBuf,
    pub schema: Option<PathBuf>,
    pub response: Option<String>,
    pub factors: Vec<String>,
    pub family: Family,
    pub penalty: Penalty,
    pub linkage: f64,
    pub format: OutputFormat,
}

/// `bic` or a positive number.
pub fn parse_penalty(s: &str) -> std::result::Result<Penalty, String> {
    if s.eq_ignore_ascii_case("bic") {
        return Ok(Penalty::Bic);
    }
    match s.parse::<f64>() {
        Ok(r) if r.is_finite() && r > 0.0 => Ok(Penalty::Fixed(r)),
        _ => Err(format!("expected `bic` or a positive number, got {s:?}")),
    }
}

pub fn select(opts: &SelectOptions, out: &mut dyn Write) -> Result<()> {
    let linkage = Linkage::new(opts.linkage).map_err(CliError::from)?;
    let schema = Schema::resolve(opts.schema.as_deref(), opts.response.clone(), &opts.factors)?;
    let file = std::fs::File::open(&opts.input)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", opts.input.display())))?;
    let table = Table::read(std::io::BufReader::new(file))?;
    let (data, specs) = table.to_dataset(&schema)?;
    let (x, y) = build_design_matrix(&data, &specs).map_err(|e| table.locate(e))?;

    let config = DmrConfig {
        linkage,
        penalty: opts.penalty,
    };
    let result = match opts.family {
        Family::Gaussian => dmr(&x, &y, &config),
        Family::Binomial => dmr_glm(&x, &y, Family::Binomial, &config),
    }
    .map_err(|e| match e {
        DmrError::ZeroVariance => {
            CliError::Numerical(format!("{e} (response column {:?})", schema.response))
        }
        other => other.into(),
    })?;

    let info = RunInfo {
        response: schema.response.clone(),
        family: opts.family,
        linkage: opts.linkage,
        n: x.nrows(),
    };
    let text = match opts.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&json_report(&info, x.shape(), &result))
                .expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => csv_report(x.shape(), &result),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub experiment: u8,
    pub c: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Runs the Monte Carlo study and writes one CSV row per selector. Timings
/// go to `log` so that `out` is reproducible byte for byte.
pub fn simulate(opts: &SimulateOptions, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    if !(1..=3).contains(&opts.experiment) {
        return Err(CliError::input(format!(
            "unknown experiment {}",
            opts.experiment
        )));
    }
    if opts.c == 0 || opts.reps == 0 {
        return Err(CliError::input("--c and --reps must be positive"));
    }
    let spec = ExperimentSpec::new(opts.experiment, opts.c)?;
    let mut selectors: Vec<Box<dyn Selector>> = vec![Box::new(DmrSelector::default())];
    if spec.family() == Family::Binomial {
        selectors.push(Box::new(DmrGlmSelector {
            family: Family::Binomial,
            config: DmrConfig::default(),
        }));
    }
    let io = |e: std::io::Error| CliError::input(format!("cannot write output: {e}"));
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    for sel in &selectors {
        let report = run_monte_carlo(&spec, sel.as_ref(), opts.reps, opts.seed)?;
        writeln!(out, "{}", report.metrics.csv_row()).map_err(io)?;
        writeln!(
            log,
            "{} experiment {} n={}: {} reps in {:.3} s",
            sel.name(),
            opts.experiment,
            spec.n(),
            opts.reps,
            report.elapsed.as_secs_f64()
        )
        .map_err(io)?;
    }
    Ok(())
}
