//! Affine Hamiltonian families `H(x) = sum_t c_t(x) A_t` loaded from JSON.
//!
//! ```json
//! {"dim": 2, "params": 1,
//!  "terms": [{"coeff": "1-x1", "matrix": [[1,0],[0,0],[0,0],[-1,0]]},
//!            {"coeff": "x1",   "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}]}
//! ```
//!
//! `matrix` is either a flat row-major list of `[re, im]` pairs or a list of rows.
//! Coefficients are affine expressions in `x1..xM` (1-based) or plain numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ham::{HamiltonianModel, ModelMetadata};
use crate::linalg::{self, c, cr, CMat};

/// `constant + sum_i linear[i] x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoeff {
    pub constant: f64,
    pub linear: Vec<f64>,
}

impl AffineCoeff {
    pub fn constant(value: f64, params: usize) -> Self {
        AffineCoeff { constant: value, linear: vec![0.0; params] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Parse expressions such as `x1`, `1-x1`, `0.5*x2 - 2 + x1`.
    pub fn parse(expr: &str, params: usize) -> Result<Self> {
        let bad = |why: &str| Error::InvalidModel(format!("coefficient '{expr}': {why}"));
        let src: String = expr.chars().filter(|ch| !ch.is_whitespace()).collect();
        if src.is_empty() {
            return Err(bad("empty expression"));
        }
        if !src.is_ascii() {
            return Err(bad("non-ASCII characters"));
        }
        let mut out = AffineCoeff::constant(0.0, params);
        // split into signed terms, keeping exponent signs such as 1e-3 attached
        let bytes: Vec<char> = src.chars().collect();
        let mut terms = Vec::new();
        let mut start = 0;
        for i in 1..bytes.len() {
            if (bytes[i] == '+' || bytes[i] == '-') && !matches!(bytes[i - 1], 'e' | 'E' | '*' | '+' | '-') {
                terms.push(&src[start..i]);
                start = i;
            }
        }
        terms.push(&src[start..]);

        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(rest) => (-1.0, rest),
                None => (1.0, term.strip_prefix('+').unwrap_or(term)),
            };
            if body.is_empty() {
                return Err(bad("dangling sign"));
            }
            let (num, var) = match body.find('x') {
                None => (Some(body), None),
                Some(0) => (None, Some(&body[1..])),
                Some(pos) => {
                    let num = body[..pos].strip_suffix('*').unwrap_or(&body[..pos]);
                    (Some(num), Some(&body[pos + 1..]))
                }
            };
            let factor = match num {
                Some(n) => n.parse::<f64>().map_err(|_| bad(&format!("bad number '{n}'")))?,
                None => 1.0,
            };
            if !factor.is_finite() {
                return Err(bad("non-finite number"));
            }
            match var {
                None => out.constant += sign * factor,
                Some(idx) => {
                    let k: usize = idx.parse().map_err(|_| bad(&format!("bad variable 'x{idx}'")))?;
                    if k == 0 || k > params {
                        return Err(bad(&format!("variable x{k} outside x1..x{params}")));
                    }
                    out.linear[k - 1] += sign * factor;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub coeff: AffineCoeff,
    pub matrix: CMat,
}

/// `H(x) = sum_t c_t(x) A_t` with Hermitian `A_t`.
#[derive(Debug, Clone)]
pub struct AffineModel {
    name: String,
    dim: usize,
    params: usize,
    terms: Vec<AffineTerm>,
}

impl AffineModel {
    pub fn new(name: impl Into<String>, dim: usize, params: usize, terms: Vec<AffineTerm>) -> Result<Self> {
        if dim == 0 || params == 0 {
            return Err(Error::InvalidModel("dim and params must be positive".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidModel("model needs at least one term".into()));
        }
        for (t, term) in terms.iter().enumerate() {
            if term.matrix.nrows() != dim || term.matrix.ncols() != dim {
                return Err(Error::InvalidModel(format!("term {t} matrix is not {dim}x{dim}")));
            }
            if term.coeff.linear.len() != params {
                return Err(Error::InvalidModel(format!("term {t} coefficient has wrong arity")));
            }
            if !linalg::is_finite(&term.matrix) {
                return Err(Error::InvalidModel(format!("term {t} matrix has non-finite entries")));
            }
            let defect = linalg::hermitian_defect(&term.matrix);
            if defect > 1e-12 {
                return Err(Error::InvalidModel(format!("term {t} matrix is not Hermitian (defect {defect:.3e})")));
            }
        }
        Ok(AffineModel { name: name.into(), dim, params, terms })
    }

    pub fn terms(&self) -> &[AffineTerm] {
        &self.terms
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: CustomModelDoc = serde_json::from_str(text)?;
        doc.build()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

impl HamiltonianModel for AffineModel {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new(self.name.clone())
            .with("dim", self.dim)
            .with("params", self.params)
            .with("terms", self.terms.len())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.params
    }

    fn evaluate(&self, x: &[f64]) -> CMat {
        let mut h = CMat::zeros(self.dim, self.dim);
        for t in &self.terms {
            h += &t.matrix * cr(t.coeff.eval(x));
        }
        h
    }

    fn partial(&self, _x: &[f64], i: usize) -> CMat {
        let mut h = CMat::zeros(self.dim, self.dim);
        for t in &self.terms {
            let a = t.coeff.linear[i];
            if a != 0.0 {
                h += &t.matrix * cr(a);
            }
        }
        h
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// On-disk schema of a custom model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModelDoc {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    pub params: usize,
    pub terms: Vec<CustomTermDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTermDoc {
    pub coeff: Value,
    pub matrix: Value,
}

impl CustomModelDoc {
    pub fn build(&self) -> Result<AffineModel> {
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(t, term)| {
                let coeff = match &term.coeff {
                    Value::Number(n) => AffineCoeff::constant(
                        n.as_f64().ok_or_else(|| Error::InvalidModel(format!("term {t}: bad coefficient")))?,
                        self.params,
                    ),
                    Value::String(s) => AffineCoeff::parse(s, self.params)?,
                    _ => return Err(Error::InvalidModel(format!("term {t}: coeff must be a number or string"))),
                };
                let matrix = parse_matrix(&term.matrix, self.dim)
                    .map_err(|e| Error::InvalidModel(format!("term {t}: {e}")))?;
                Ok(AffineTerm { coeff, matrix })
            })
            .collect::<Result<Vec<_>>>()?;
        AffineModel::new(self.name.clone().unwrap_or_else(|| "custom".into()), self.dim, self.params, terms)
    }
}

fn parse_entry(v: &Value) -> std::result::Result<num_complex::Complex64, String> {
    match v {
        Value::Number(n) => Ok(cr(n.as_f64().ok_or("bad number")?)),
        Value::Array(pair) if pair.len() == 2 => {
            let re = pair[0].as_f64().ok_or("entry real part is not a number")?;
            let im = pair[1].as_f64().ok_or("entry imaginary part is not a number")?;
            Ok(c(re, im))
        }
        _ => Err(format!("matrix entry {v} is not [re, im]")),
    }
}

fn parse_matrix(v: &Value, dim: usize) -> std::result::Result<CMat, String> {
    let outer = v.as_array().ok_or("matrix must be an array")?;
    let entries: Vec<num_complex::Complex64> = if outer.len() == dim * dim && outer.iter().all(is_entry) {
        outer.iter().map(parse_entry).collect::<std::result::Result<_, _>>()?
    } else if outer.len() == dim {
        let mut flat = Vec::with_capacity(dim * dim);
        for row in outer {
            let row = row.as_array().ok_or("matrix row must be an array")?;
            if row.len() != dim {
                return Err(format!("matrix row has {} entries, expected {dim}", row.len()));
            }
            for e in row {
                flat.push(parse_entry(e)?);
            }
        }
        flat
    } else {
        return Err(format!("matrix must have {} entries or {dim} rows", dim * dim));
    };
    Ok(CMat::from_row_slice(dim, dim, &entries))
}

fn is_entry(v: &Value) -> bool {
    v.is_number() || v.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(Value::is_number))
}
