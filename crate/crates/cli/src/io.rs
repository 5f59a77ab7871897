//! File formats: state-set input files and self-describing result documents.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use usd_core::families::FamilySpec;
use usd_core::{CMatrix, Priors, StateSet, C64};

use crate::exit::Failure;

pub const TOOL: &str = "usd";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A complex entry as `[re, im]`.
pub type Entry = [f64; 2];

/// States as a list of column vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub states: Vec<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_pm: Option<f64>,
}

/// Output of every command except `gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: MatrixFile,
    pub input_sha256: String,
    pub config: Value,
    pub seed: u64,
    pub result: Value,
}

pub fn encode_matrix(m: &CMatrix) -> Vec<Vec<Entry>> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn decode_matrix(cols: &[Vec<Entry>], rows: usize, field: &str) -> Result<CMatrix, Failure> {
    for (j, col) in cols.iter().enumerate() {
        if col.len() != rows {
            return Err(Failure::parse(format!(
                "{field}[{j}]: expected {rows} entries, got {}",
                col.len()
            )));
        }
        if let Some(i) = col.iter().position(|e| !e[0].is_finite() || !e[1].is_finite()) {
            return Err(Failure::parse(format!("{field}[{j}][{i}]: non-finite entry")));
        }
    }
    Ok(CMatrix::from_fn(rows, cols.len(), |i, j| {
        C64::new(cols[j][i][0], cols[j][i][1])
    }))
}

impl MatrixFile {
    pub fn from_states(states: &StateSet, priors: Option<&Priors>) -> Self {
        MatrixFile {
            n: states.n(),
            states: encode_matrix(states.psi()),
            priors: priors.map(|p| p.values().to_vec()),
            family: None,
            known_pm: None,
        }
    }

    pub fn matrix(&self) -> Result<CMatrix, Failure> {
        if self.states.len() != self.n {
            return Err(Failure::parse(format!(
                "states: expected {} column vectors, got {}",
                self.n,
                self.states.len()
            )));
        }
        decode_matrix(&self.states, self.n, "states")
    }

    pub fn state_set(&self, normalize: bool) -> Result<StateSet, Failure> {
        let m = self.matrix()?;
        let res = if normalize {
            StateSet::normalized(m)
        } else {
            StateSet::new(m)
        };
        res.map_err(|e| {
            if e.is_singular() {
                Failure::singular(e.to_string())
            } else {
                Failure::parse(format!("states: {e} (pass --normalize to rescale)"))
            }
        })
    }

    pub fn priors(&self, override_: Option<&[f64]>) -> Result<Priors, Failure> {
        let raw = override_.map(|p| p.to_vec()).or_else(|| self.priors.clone());
        match raw {
            None => Ok(Priors::uniform(self.n)),
            Some(p) => {
                if p.len() != self.n {
                    return Err(Failure::mismatch(format!(
                        "priors: expected {} values, got {}",
                        self.n,
                        p.len()
                    )));
                }
                Priors::new(p).map_err(|e| Failure::parse(format!("priors: {e}")))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("plain data serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Either kind of file accepted on input.
pub enum Loaded {
    Matrix(MatrixFile),
    Document(Box<Document>),
}

impl Loaded {
    pub fn matrix_file(&self) -> &MatrixFile {
        match self {
            Loaded::Matrix(m) => m,
            Loaded::Document(d) => &d.input,
        }
    }

    /// Weights carried by an earlier result, if any.
    pub fn weights(&self) -> Option<Vec<f64>> {
        match self {
            Loaded::Matrix(_) => None,
            Loaded::Document(d) => d.result.get("weights").and_then(|w| {
                serde_json::from_value::<Vec<f64>>(w.clone()).ok()
            }),
        }
    }
}

pub fn parse_str(text: &str) -> Result<Loaded, Failure> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Failure::parse(format!("invalid JSON: {e}")))?;
    if value.get("command").is_some() {
        let doc: Document = serde_json::from_value(value)
            .map_err(|e| Failure::parse(format!("result document: {e}")))?;
        Ok(Loaded::Document(Box::new(doc)))
    } else {
        // Re-parse from text so that diagnostics carry line and column.
        let m: MatrixFile =
            serde_json::from_str(text).map_err(|e| Failure::parse(format!("state file: {e}")))?;
        Ok(Loaded::Matrix(m))
    }
}

pub fn read(path: &str) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {path}: {e}")))?;
    parse_str(&text)
}

/// Rounds to 12 significant digits.
pub fn sig12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

pub fn document(
    command: &str,
    input: &MatrixFile,
    config: Value,
    seed: u64,
    result: Value,
) -> Document {
    Document {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: command.into(),
        input: input.clone(),
        input_sha256: input.sha256(),
        config,
        seed,
        result,
    }
}

pub fn write_output(text: &str, path: Option<&str>) -> Result<(), Failure> {
    match path {
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                // A closed pipe (e.g. `| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Failure::parse(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
        Some(p) => std::fs::write(p, format!("{text}\n"))
            .map_err(|e| Failure::parse(format!("cannot write {p}: {e}"))),
    }
}
