use std::io::Read;

use dirmoment::{DirichletPolynomial, MomentSequence};
use serde::Deserialize;

use crate::commands::CliError;

/// Reads a path, or stdin for `-`.
pub fn read_input(path: &str) -> Result<String, CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_string(),
        source,
    };
    if path == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).map_err(io_err)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(io_err)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SequenceInput {
    Full(MomentSequence),
    Bare(Vec<f64>),
}

/// A `{"start", "values"}` object, or a bare array starting at `start_index`
/// (default 1).
pub fn read_sequence(path: &str, start_index: Option<u64>) -> Result<MomentSequence, CliError> {
    let text = read_input(path)?;
    let parsed: SequenceInput = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    match parsed {
        SequenceInput::Full(w) => match start_index {
            Some(j) if j != w.start() => Err(CliError::Config(format!(
                "--start-index {j} contradicts the start {} stored in {path}",
                w.start()
            ))),
            _ => Ok(w),
        },
        SequenceInput::Bare(values) => Ok(MomentSequence::new(start_index.unwrap_or(1), values)?),
    }
}

pub fn read_polynomial(path: &str) -> Result<DirichletPolynomial, CliError> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_string(),
        message: e.to_string(),
    })
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut out =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    out.push('\n');
    Ok(out)
}
