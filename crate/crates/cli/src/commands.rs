use std::fmt::Write as _;

use dirmoment::cmono::fit_pair;
use dirmoment::dirichlet::certify_nonnegative;
use dirmoment::helson::{boundedness_criterion, cm_criterion, norm_table};
use dirmoment::logmoment::{default_s_grid, membership, recover_measure, Evidence};
use dirmoment::{Certification, Error, MeasureFamily, MembershipConfig, MomentSequence, Verdict};
use serde::Serialize;
use thiserror::Error;

use crate::io::{read_polynomial, read_sequence, to_json};
use crate::{Family, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

/// Text for stdout and the process exit code.
pub struct Outcome {
    pub output: String,
    pub code: u8,
}

impl Outcome {
    fn ok(output: String) -> Self {
        Self { output, code: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub tol: f64,
    pub grid_size: usize,
    pub grid_max: f64,
    pub max_order: usize,
    pub index_cap: u64,
    pub seed: u64,
    pub start_index: Option<u64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        if self.grid_size < 8 {
            return Err(CliError::Config(format!(
                "--grid-size must be at least 8, got {}",
                self.grid_size
            )));
        }
        if !(self.grid_max > 0.0 && self.grid_max.is_finite()) {
            return Err(CliError::Config(format!(
                "--grid-max must be positive, got {}",
                self.grid_max
            )));
        }
        if self.index_cap < 2 {
            return Err(CliError::Config(format!(
                "--index-cap must be at least 2, got {}",
                self.index_cap
            )));
        }
        Ok(())
    }

    fn s_grid(&self) -> Vec<f64> {
        default_s_grid(self.grid_size, self.grid_max)
    }

    fn membership(&self) -> MembershipConfig {
        MembershipConfig {
            tol: self.tol,
            s_grid: self.s_grid(),
            max_order: self.max_order,
            index_cap: self.index_cap,
            ..MembershipConfig::default()
        }
    }
}

/// CSV rows of a measure: the atom at `n = 1` first, then the half-line atoms.
fn measure_csv(atom: f64, atoms: &[(f64, f64)]) -> String {
    let mut out = String::from("component,s,weight\n");
    let _ = writeln!(out, "atom,,{atom:e}");
    for &(s, w) in atoms {
        let _ = writeln!(out, "measure,{s:e},{w:e}");
    }
    out
}

fn csv_opt<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn check(path: &str, config: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let w = read_sequence(path, config.start_index)?;
    let report = membership(&w, &config.membership())?;
    let code = match report.verdict {
        Verdict::Member => 0,
        Verdict::Rejected => 1,
        Verdict::Inconclusive => 2,
    };
    let output = match format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let verdict = serde_json::to_value(report.verdict)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let evidence = report.rejection_evidence.as_ref().map(|e| match e {
                Evidence::Monotonicity { .. } => "monotonicity",
                Evidence::Psd(_) => "psd",
                Evidence::CompleteMonotonicity(_) => "complete_monotonicity",
                Evidence::Dual(_) => "dual",
            });
            format!(
                "verdict,residual,evidence\n{},{:e},{}\n",
                verdict.as_str().unwrap_or_default(),
                report.residual,
                csv_opt(evidence)
            )
        }
    };
    Ok(Outcome { output, code })
}

pub fn recover(path: &str, config: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let w = read_sequence(path, config.start_index)?;
    let rec = recover_measure(&w, &config.s_grid(), config.tol)?;
    let output = match format {
        Format::Json => to_json(&rec)?,
        Format::Csv => measure_csv(rec.atom, rec.measure.atoms()),
    };
    Ok(Outcome::ok(output))
}

pub fn certify(
    path: &str,
    grid_step: f64,
    cert_tol: f64,
    format: Format,
) -> Result<Outcome, CliError> {
    let q = read_polynomial(path)?;
    let cert = certify_nonnegative(&q, grid_step, cert_tol)?;
    let (code, row) = match &cert {
        Certification::Certified(c) => (0, format!("certified,,{:e}", c.margin)),
        Certification::Witness(w) => (1, format!("witness,{:e},{:e}", w.s, w.value)),
        Certification::Undecided { s, lower_bound } => {
            (2, format!("undecided,{s:e},{lower_bound:e}"))
        }
    };
    let output = match format {
        Format::Json => to_json(&cert)?,
        Format::Csv => format!("outcome,s,value\n{row}\n"),
    };
    Ok(Outcome { output, code })
}

pub fn examples(
    family: Family,
    alpha: f64,
    count: u64,
    quadrature: bool,
    nodes: usize,
    format: Format,
) -> Result<Outcome, CliError> {
    let kind = match family {
        Family::A => dirmoment::FamilyKind::LogGamma { alpha },
        Family::B => dirmoment::FamilyKind::PowerDensity { alpha },
        Family::C => dirmoment::FamilyKind::PointMass { alpha },
    };
    let fam = MeasureFamily::new(kind, nodes)?;
    let start = fam.start_index();
    if count < start {
        return Err(CliError::Config(format!(
            "--count must be at least {start} for this family"
        )));
    }
    let values = (start..=count)
        .map(|n| {
            if quadrature {
                fam.log_moment(n)
            } else {
                fam.closed_form(n)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let w = MomentSequence::new(start, values)?;
    let output = match format {
        Format::Json => to_json(&w)?,
        Format::Csv => {
            let mut out = String::from("n,w\n");
            for (n, v) in w.iter() {
                let _ = writeln!(out, "{n},{v:e}");
            }
            out
        }
    };
    Ok(Outcome::ok(output))
}

#[derive(Serialize)]
struct HelsonRow {
    size: usize,
    norm: f64,
    /// Size criterion on the indices the section touches.
    size_criterion: bool,
}

#[derive(Serialize)]
struct HelsonReport {
    constant: f64,
    rows: Vec<HelsonRow>,
    /// Null when no atom-free completely monotone generator fits within `tol`.
    cm_criterion: Option<bool>,
}

pub fn helson(
    path: &str,
    sizes: &[usize],
    constant: f64,
    iters: usize,
    config: &RunConfig,
    format: Format,
) -> Result<Outcome, CliError> {
    let w = read_sequence(path, config.start_index)?;
    let table = norm_table(&w, sizes, iters, config.seed)?;
    let rows = table
        .into_iter()
        .map(|(size, norm)| {
            let last = (size as u64 * size as u64).min(w.end());
            let prefix = MomentSequence::new(
                w.start(),
                w.values()[..=(last - w.start()) as usize].to_vec(),
            )?;
            Ok(HelsonRow {
                size,
                norm,
                size_criterion: boundedness_criterion(&prefix, constant).passed,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let cm = helson_cm_criterion(&w, constant, config)?;
    let output = match format {
        Format::Json => to_json(&HelsonReport {
            constant,
            rows,
            cm_criterion: cm,
        })?,
        Format::Csv => {
            let mut out = String::from("N,norm,size_criterion,cm_criterion\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{:e},{},{}",
                    r.size,
                    r.norm,
                    r.size_criterion,
                    csv_opt(cm)
                );
            }
            out
        }
    };
    Ok(Outcome::ok(output))
}

/// Terms used to fit the generator for the criterion of `helson`.
const CM_FIT_TERMS: usize = 64;

/// Fits the generator on a prefix and applies the criterion; an atom below
/// `tol` counts as no atom.
fn helson_cm_criterion(
    w: &MomentSequence,
    constant: f64,
    config: &RunConfig,
) -> Result<Option<bool>, CliError> {
    if w.start() != 1 {
        return Ok(None);
    }
    let prefix = MomentSequence::new(1, w.values()[..w.len().min(CM_FIT_TERMS)].to_vec())?;
    let mut pair = match fit_pair(&prefix, &config.s_grid(), config.tol) {
        Ok(pair) => pair,
        Err(Error::FitFailed { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if pair.atom.abs() > config.tol {
        return Ok(None);
    }
    pair.atom = 0.0;
    Ok(Some(cm_criterion(&pair, constant)?))
}

pub fn decompose(path: &str, config: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let w = read_sequence(path, config.start_index)?;
    let pair = match fit_pair(&w, &config.s_grid(), config.tol) {
        Ok(pair) => pair,
        Err(e @ Error::FitFailed { .. }) => {
            eprintln!("no completely monotone generator: {e}");
            return Ok(Outcome {
                output: String::new(),
                code: 2,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let output = match format {
        Format::Json => to_json(&pair)?,
        Format::Csv => measure_csv(pair.atom, pair.rep_measure.atoms()),
    };
    Ok(Outcome::ok(output))
}
