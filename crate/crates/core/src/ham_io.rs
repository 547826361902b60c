//! JSON problem documents: a qubit Hamiltonian, its reference state and an
//! optional operator pool. See `docs/problem-format.md` for the schema.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::pool::{OperatorPool, PoolSource};
use crate::statevector::StateVector;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub molecule: Option<String>,
    pub basis: Option<String>,
    /// Å.
    pub bond_length: Option<f64>,
    /// Ha.
    pub fci_energy: Option<f64>,
    /// Ha.
    pub hf_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDocument {
    pub n_qubits: usize,
    /// Character `q` is the occupation of qubit `q`.
    pub reference_state: String,
    pub constant: f64,
    /// Canonical, duplicate-free, no identity terms.
    pub terms: Vec<(f64, PauliString)>,
    pub pool: Option<Vec<PauliString>>,
    pub metadata: Metadata,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| schema(path, format!("missing field `{key}`")))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| schema(path, format!("expected a number, found {v}")))?;
    if !x.is_finite() {
        return Err(schema(path, "number is not finite"));
    }
    Ok(x)
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| schema(path, format!("expected a string, found {v}")))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| schema(path, format!("expected an array, found {v}")))
}

fn opt_f64(obj: &Map<String, Value>, path: &str, key: &str) -> Result<Option<f64>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => as_f64(v, &format!("{path}.{key}")).map(Some),
    }
}

fn opt_string(obj: &Map<String, Value>, path: &str, key: &str) -> Result<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => as_str(v, &format!("{path}.{key}")).map(|s| Some(s.to_string())),
    }
}

fn parse_pauli(text: &str, n_qubits: usize, path: &str) -> Result<PauliString> {
    PauliString::parse(text, n_qubits).map_err(|e| schema(path, e.to_string()))
}

const TOP_LEVEL: [&str; 7] = [
    "format_version",
    "n_qubits",
    "reference_state",
    "constant",
    "terms",
    "pool",
    "metadata",
];

impl ProblemDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| {
            schema(
                &format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        let obj = root
            .as_object()
            .ok_or_else(|| schema("$", "document must be a JSON object"))?;
        if let Some(k) = obj.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
            return Err(schema(&format!("$.{k}"), "unknown field"));
        }
        let version = field(obj, "$", "format_version")?
            .as_u64()
            .ok_or_else(|| schema("$.format_version", "expected an integer"))?;
        if version != FORMAT_VERSION {
            return Err(schema(
                "$.format_version",
                format!("unsupported version {version}, expected {FORMAT_VERSION}"),
            ));
        }
        let n_qubits = field(obj, "$", "n_qubits")?
            .as_u64()
            .ok_or_else(|| schema("$.n_qubits", "expected a positive integer"))?
            as usize;
        if n_qubits == 0 || n_qubits > 64 {
            return Err(schema(
                "$.n_qubits",
                format!("{n_qubits} is outside 1..=64"),
            ));
        }
        let reference_state =
            as_str(field(obj, "$", "reference_state")?, "$.reference_state")?.to_string();
        if reference_state.chars().count() != n_qubits {
            return Err(schema(
                "$.reference_state",
                format!(
                    "length {} does not match n_qubits = {n_qubits}",
                    reference_state.chars().count()
                ),
            ));
        }
        if let Some(ch) = reference_state.chars().find(|c| *c != '0' && *c != '1') {
            return Err(schema(
                "$.reference_state",
                format!("invalid character `{ch}`"),
            ));
        }
        let mut constant = as_f64(field(obj, "$", "constant")?, "$.constant")?;

        let mut terms: Vec<(f64, PauliString)> = Vec::new();
        let raw_terms = as_array(field(obj, "$", "terms")?, "$.terms")?;
        for (i, t) in raw_terms.iter().enumerate() {
            let path = format!("$.terms[{i}]");
            let t = t
                .as_object()
                .ok_or_else(|| schema(&path, "expected an object with `coeff` and `pauli`"))?;
            let coeff = as_f64(field(t, &path, "coeff")?, &format!("{path}.coeff"))?;
            let ppath = format!("{path}.pauli");
            let p = parse_pauli(as_str(field(t, &path, "pauli")?, &ppath)?, n_qubits, &ppath)?;
            let coeff = match p.phase_exp() {
                0 => coeff,
                2 => -coeff,
                k => return Err(schema(&ppath, Error::NonHermitian(k).to_string())),
            };
            let p = p.without_phase();
            if p.is_identity() {
                constant += coeff;
            } else if let Some(slot) = terms.iter_mut().find(|(_, q)| *q == p) {
                slot.0 += coeff;
            } else {
                terms.push((coeff, p));
            }
        }

        let pool = match obj.get("pool") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let arr = as_array(v, "$.pool")?;
                let mut out = Vec::with_capacity(arr.len());
                for (i, s) in arr.iter().enumerate() {
                    let path = format!("$.pool[{i}]");
                    let p = parse_pauli(as_str(s, &path)?, n_qubits, &path)?;
                    if p.phase_exp() != 0 || p.is_identity() {
                        return Err(schema(
                            &path,
                            "pool strings must be non-identity and phase-free",
                        ));
                    }
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
                if out.is_empty() {
                    return Err(schema("$.pool", "pool is empty"));
                }
                Some(out)
            }
        };

        let metadata = match obj.get("metadata") {
            None | Some(Value::Null) => Metadata::default(),
            Some(v) => {
                let m = v
                    .as_object()
                    .ok_or_else(|| schema("$.metadata", "expected an object"))?;
                let p = "$.metadata";
                Metadata {
                    molecule: opt_string(m, p, "molecule")?,
                    basis: opt_string(m, p, "basis")?,
                    bond_length: opt_f64(m, p, "bond_length")?,
                    fci_energy: opt_f64(m, p, "fci_energy")?,
                    hf_energy: opt_f64(m, p, "hf_energy")?,
                }
            }
        };

        Ok(Self {
            n_qubits,
            reference_state,
            constant,
            terms,
            pool,
            metadata,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Schema { path: p, message } => Error::Schema {
                path: format!("{}: {p}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Canonical text: fixed key order, coefficients with 17 significant digits.
    pub fn serialize(&self) -> String {
        let num = |x: f64| format!("{x:.16e}");
        let quote = |s: &str| serde_json::to_string(s).expect("strings always serialise");
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"format_version\": {FORMAT_VERSION},");
        let _ = writeln!(out, "  \"n_qubits\": {},", self.n_qubits);
        let _ = writeln!(
            out,
            "  \"reference_state\": {},",
            quote(&self.reference_state)
        );
        let _ = writeln!(out, "  \"constant\": {},", num(self.constant));
        out.push_str("  \"terms\": [");
        for (i, (c, p)) in self.terms.iter().enumerate() {
            let sep = if i == 0 { "\n" } else { ",\n" };
            let _ = write!(
                out,
                "{sep}    {{\"coeff\": {}, \"pauli\": {}}}",
                num(*c),
                quote(&p.to_string())
            );
        }
        out.push_str(if self.terms.is_empty() { "]" } else { "\n  ]" });
        if let Some(pool) = &self.pool {
            out.push_str(",\n  \"pool\": [");
            for (i, p) in pool.iter().enumerate() {
                let sep = if i == 0 { "\n" } else { ",\n" };
                let _ = write!(out, "{sep}    {}", quote(&p.to_string()));
            }
            out.push_str("\n  ]");
        }
        let m = &self.metadata;
        let mut meta = Vec::new();
        if let Some(s) = &m.molecule {
            meta.push(format!("\"molecule\": {}", quote(s)));
        }
        if let Some(s) = &m.basis {
            meta.push(format!("\"basis\": {}", quote(s)));
        }
        for (k, v) in [
            ("bond_length", m.bond_length),
            ("fci_energy", m.fci_energy),
            ("hf_energy", m.hf_energy),
        ] {
            if let Some(v) = v {
                meta.push(format!("\"{k}\": {}", num(v)));
            }
        }
        if !meta.is_empty() {
            out.push_str(",\n  \"metadata\": {\n    ");
            out.push_str(&meta.join(",\n    "));
            out.push_str("\n  }");
        }
        out.push_str("\n}\n");
        out
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        PauliSum::from_terms(self.n_qubits, self.constant, self.terms.iter().copied())
    }

    pub fn pool(&self) -> Result<Option<OperatorPool>> {
        self.pool
            .as_ref()
            .map(|ps| OperatorPool::new(self.n_qubits, ps.clone(), PoolSource::File))
            .transpose()
    }

    pub fn reference(&self) -> Result<StateVector> {
        StateVector::from_bitstring(&self.reference_state, self.n_qubits)
    }
}
