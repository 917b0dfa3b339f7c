//! Polytope files.
//!
//! ```json
//! {
//!   "name": "square",
//!   "dim": 2,
//!   "facets": [
//!     { "a": ["1", "0"], "b": "0" },
//!     { "a": ["-1", "0"], "b": "1" }
//!   ]
//! }
//! ```
//!
//! Each facet row is the inequality `a . x + b >= 0`. Entries may be decimal
//! strings or plain JSON numbers; strings are parsed exactly and are the
//! form the tool writes, so files round-trip without binary-to-decimal
//! noise and the exact-arithmetic oracle sees the same input as the float
//! pipeline.

use crate::error::{Error, Result};
use crate::exact::{self, Rat};
use crate::geometry::{validate_hrep, Polytope};
use crate::tol::Tolerances;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub name: String,
    pub dim: usize,
    pub facets: Vec<FacetRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FacetRow {
    pub a: Vec<Number>,
    pub b: Number,
}

/// A decimal string or a plain JSON number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Text(String),
    Float(f64),
}

impl Number {
    pub fn to_f64(&self) -> Result<f64> {
        match self {
            Number::Text(s) => exact::parse_decimal(s).map(|r| exact::to_f64(&r)),
            Number::Float(x) => Ok(*x),
        }
    }

    pub fn to_rat(&self) -> Result<Rat> {
        match self {
            Number::Text(s) => exact::parse_decimal(s),
            Number::Float(x) => Ok(exact::rat_of_f64(*x)),
        }
    }
}

impl PolytopeFile {
    pub fn parse(text: &str) -> Result<PolytopeFile> {
        let file: PolytopeFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("polytope json: {e}")))?;
        if file.facets.is_empty() {
            return Err(Error::Parse("polytope has no facets".into()));
        }
        for (i, row) in file.facets.iter().enumerate() {
            if row.a.len() != file.dim {
                return Err(Error::Parse(format!(
                    "facet {i} has {} coefficients, expected dim = {}",
                    row.a.len(),
                    file.dim
                )));
            }
        }
        Ok(file)
    }

    /// Validate into a polytope, running the full H-representation checks.
    pub fn build(&self, tols: &Tolerances) -> Result<Polytope> {
        let m = self.facets.len();
        let n = self.dim;
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (i, row) in self.facets.iter().enumerate() {
            for (j, v) in row.a.iter().enumerate() {
                a[(i, j)] = v.to_f64()?;
            }
            b[i] = row.b.to_f64()?;
        }
        validate_hrep(&self.name, a, b, tols)
    }

    /// The same rows as exact rationals, for the oracle path.
    pub fn exact_rows(&self) -> Result<(Vec<Vec<Rat>>, Vec<Rat>)> {
        let mut a = Vec::with_capacity(self.facets.len());
        let mut b = Vec::with_capacity(self.facets.len());
        for row in &self.facets {
            a.push(row.a.iter().map(Number::to_rat).collect::<Result<Vec<_>>>()?);
            b.push(row.b.to_rat()?);
        }
        Ok((a, b))
    }

    pub fn from_polytope(p: &Polytope) -> PolytopeFile {
        PolytopeFile {
            name: p.name.clone(),
            dim: p.n(),
            facets: (0..p.m())
                .map(|i| FacetRow {
                    a: (0..p.n()).map(|j| Number::Text(format!("{}", p.a()[(i, j)]))).collect(),
                    b: Number::Text(format!("{}", p.b()[i])),
                })
                .collect(),
        }
    }
}

pub fn parse_polytope(text: &str, tols: &Tolerances) -> Result<Polytope> {
    PolytopeFile::parse(text)?.build(tols)
}

pub fn load_polytope(path: &Path, tols: &Tolerances) -> Result<Polytope> {
    parse_polytope(&std::fs::read_to_string(path)?, tols)
}

pub fn load_polytope_file(path: &Path) -> Result<PolytopeFile> {
    PolytopeFile::parse(&std::fs::read_to_string(path)?)
}

pub fn polytope_to_json(p: &Polytope) -> String {
    serde_json::to_string_pretty(&PolytopeFile::from_polytope(p)).expect("polytope serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;

    #[test]
    fn decimal_strings_and_numbers_both_parse() {
        let text = r#"{
            "name": "segment",
            "dim": 1,
            "facets": [
                { "a": ["1"], "b": "0" },
                { "a": [-1.0], "b": 1 }
            ]
        }"#;
        let p = parse_polytope(text, &Tolerances::default()).unwrap();
        assert_eq!(p.m(), 2);
        assert_eq!(p.vertices().len(), 2);
    }

    #[test]
    fn round_trip_preserves_rows() {
        let p = fixtures::quadrilateral();
        let back = parse_polytope(&polytope_to_json(&p), &Tolerances::default()).unwrap();
        assert_eq!(back.a(), p.a());
        assert_eq!(back.b(), p.b());
        assert_eq!(back.name, p.name);
    }

    #[test]
    fn shape_errors_are_reported() {
        let text = r#"{ "name": "bad", "dim": 2, "facets": [ { "a": ["1"], "b": "0" } ] }"#;
        match PolytopeFile::parse(text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("expected dim")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn exact_rows_match_the_float_build() {
        let text = r#"{
            "name": "half",
            "dim": 1,
            "facets": [
                { "a": ["1"], "b": "0" },
                { "a": ["-1"], "b": "0.5" }
            ]
        }"#;
        let file = PolytopeFile::parse(text).unwrap();
        let p = file.build(&Tolerances::default()).unwrap();
        let (a, b) = file.exact_rows().unwrap();
        assert_eq!(exact::to_f64(&a[1][0]), p.a()[(1, 0)]);
        assert_eq!(exact::to_f64(&b[1]), 0.5);
    }
}
