//! JSON model files.
//!
//! ```json
//! {"format_version": 1, "n_qubits": 1, "basis": "pauli",
//!  "c": [0.0, 0.0, 0.0], "G": [[[0.1, 0.0], ...], ...]}
//! ```
//!
//! `basis` is either the string `"pauli"` or `{"coeffs": [[[re, im], ...], ...]}`.
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces every bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LindbladModel, OperatorBasis};
use crate::{c64, CMatrix, Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(String),
    Coeffs { coeffs: Vec<Vec<[f64; 2]>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub n_qubits: usize,
    pub basis: BasisSpec,
    pub c: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<[f64; 2]>>,
}

pub fn matrix_to_nested(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn nested_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::dim("ragged matrix rows"));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

impl ModelFile {
    pub fn from_model(model: &LindbladModel) -> Self {
        let basis = if model.basis().is_pauli() {
            BasisSpec::Named("pauli".into())
        } else {
            BasisSpec::Coeffs {
                coeffs: matrix_to_nested(model.basis().coeffs()),
            }
        };
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            n_qubits: model.n_qubits(),
            basis,
            c: model.c().to_vec(),
            g: matrix_to_nested(model.g()),
        }
    }

    pub fn into_model(self) -> Result<LindbladModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let basis = match self.basis {
            BasisSpec::Named(name) if name == "pauli" => OperatorBasis::pauli(self.n_qubits)?,
            BasisSpec::Named(name) => return Err(Error::invalid(format!("unknown basis {name:?}"))),
            BasisSpec::Coeffs { coeffs } => OperatorBasis::new(self.n_qubits, nested_to_matrix(&coeffs)?)?,
        };
        LindbladModel::with_basis(basis, self.c, nested_to_matrix(&self.g)?)
    }
}

pub fn write_model(path: &Path, model: &LindbladModel) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelFile::from_model(model))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<LindbladModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.into_model()
}
