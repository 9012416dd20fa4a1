//! JSON file formats. Every document carries `"schema": "dieroll/1"`.
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.

use std::path::Path;

use dieroll::bounds::QsdEnsemble;
use dieroll::cheating::{AliceCertificate, BobCertificate, CertificateForm};
use dieroll::matlin::{BipartiteDims, CMatrix, CVector};
use dieroll::protocol::DricProtocol;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA: &str = "dieroll/1";

pub type Entry = [f64; 2];
pub type MatrixJson = Vec<Vec<Entry>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!("matrix must be square, got {n} rows of unequal length")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

fn vector_to_json(v: &CVector) -> Vec<Entry> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn check_schema(found: &str) -> Result<(), CliError> {
    if found == SCHEMA {
        Ok(())
    } else {
        Err(CliError::Usage(format!("unsupported schema {found:?}, expected {SCHEMA:?}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProtocolJson {
    pub schema: String,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "dimA")]
    pub dim_a: usize,
    #[serde(rename = "dimB")]
    pub dim_b: usize,
    /// One amplitude list per state, indexed `iA·dimB + iB`.
    pub states: Vec<Vec<Entry>>,
    pub label: String,
}

impl ProtocolJson {
    pub fn from_protocol(p: &DricProtocol) -> Self {
        let dims = p.dims();
        Self {
            schema: SCHEMA.into(),
            d: p.outcomes(),
            dim_a: dims.dim_a,
            dim_b: dims.dim_b,
            states: p.states().iter().map(vector_to_json).collect(),
            label: p.label().to_string(),
        }
    }

    pub fn to_protocol(&self) -> Result<DricProtocol, CliError> {
        check_schema(&self.schema)?;
        let dims = BipartiteDims::new(self.dim_a, self.dim_b).map_err(|e| CliError::Usage(e.to_string()))?;
        let states = self
            .states
            .iter()
            .map(|s| CVector::from_iterator(s.len(), s.iter().map(|z| Complex64::new(z[0], z[1]))))
            .collect();
        DricProtocol::new(self.d, dims, states, self.label.clone()).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FormJson {
    Operator,
    Inverse,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertificateJson {
    pub schema: String,
    pub party: Party,
    pub form: FormJson,
    /// Alice only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Inverse form only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    /// `[X]` for Bob, `[Z_1, …, Z_D]` for Alice.
    pub matrices: Vec<MatrixJson>,
}

pub enum Certificate {
    Bob(BobCertificate),
    Alice(AliceCertificate),
}

impl CertificateJson {
    pub fn from_bob(cert: &BobCertificate) -> Self {
        Self {
            schema: SCHEMA.into(),
            party: Party::Bob,
            form: FormJson::Operator,
            s: None,
            eps: None,
            slack: None,
            matrices: vec![matrix_to_json(&cert.x)],
        }
    }

    pub fn from_alice(cert: &AliceCertificate) -> Self {
        let (form, eps) = match cert.form {
            CertificateForm::Operator => (FormJson::Operator, None),
            CertificateForm::Inverse { eps } => (FormJson::Inverse, Some(eps)),
        };
        Self {
            schema: SCHEMA.into(),
            party: Party::Alice,
            form,
            s: Some(cert.s),
            eps,
            slack: Some(cert.slack),
            matrices: cert.z.iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_certificate(&self) -> Result<Certificate, CliError> {
        check_schema(&self.schema)?;
        let matrices = self.matrices.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
        match self.party {
            Party::Bob => {
                if self.form != FormJson::Operator {
                    return Err(CliError::Usage("Bob certificates only have an operator form".into()));
                }
                let [x]: [CMatrix; 1] = matrices
                    .try_into()
                    .map_err(|_| CliError::Usage("Bob certificate needs exactly one matrix".into()))?;
                Ok(Certificate::Bob(BobCertificate { x }))
            }
            Party::Alice => {
                let s = self.s.ok_or_else(|| CliError::Usage("Alice certificate needs \"s\"".into()))?;
                let form = match self.form {
                    FormJson::Operator => CertificateForm::Operator,
                    FormJson::Inverse => CertificateForm::Inverse { eps: self.eps.unwrap_or(0.0) },
                };
                Ok(Certificate::Alice(AliceCertificate { s, z: matrices, form, slack: self.slack.unwrap_or(0.0) }))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleJson {
    pub schema: String,
    pub states: Vec<MatrixJson>,
    /// Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    /// Seeded random witnesses are drawn when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<MatrixJson>>,
}

impl EnsembleJson {
    pub fn from_ensemble(e: &QsdEnsemble) -> Self {
        Self {
            schema: SCHEMA.into(),
            states: e.states().iter().map(matrix_to_json).collect(),
            priors: Some(e.priors().to_vec()),
            witnesses: None,
        }
    }

    pub fn to_ensemble(&self) -> Result<(QsdEnsemble, Option<Vec<CMatrix>>), CliError> {
        check_schema(&self.schema)?;
        let states = self.states.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
        let ensemble = match &self.priors {
            Some(p) => QsdEnsemble::new(states, p.clone()),
            None => QsdEnsemble::uniform(states),
        }
        .map_err(|e| CliError::Usage(e.to_string()))?;
        let witnesses = match &self.witnesses {
            Some(w) => Some(w.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        Ok((ensemble, witnesses))
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
