//! JSON archives for rules and operators.
//!
//! Orbits are the source of truth; expanded nodes and weights are stored for
//! external consumers and checked on read. Floats are written with 17
//! significant digits so binary64 values round-trip exactly and a
//! write/read/write cycle is byte-identical.

use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::geometry::{Domain, FacetKind, OrbitKind, SymmetryOrbit};
use crate::rule::{Provenance, QuadratureRule};
use crate::sbp::{build_e, SbpOperator};

pub const RULE_SCHEMA: &str = "sbpquad-rule/1";
pub const OPERATOR_SCHEMA: &str = "sbpquad-operator/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest difference tolerated between stored and re-expanded nodes.
pub const NODE_MATCH_TOL: f64 = 1e-15;

/// An `f64` serialized with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom("non-finite value in archive"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for F17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(F17)
    }
}

fn f17(v: &[f64]) -> Vec<F17> {
    v.iter().copied().map(F17).collect()
}

fn plain(v: &[F17]) -> Vec<f64> {
    v.iter().map(|x| x.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub kind: OrbitKind,
    pub params: Vec<F17>,
    pub weight: F17,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub seed: Option<u64>,
    pub iterations: usize,
    pub residual: F17,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleArchive {
    pub schema: String,
    pub tool_version: String,
    pub domain: Domain,
    pub qv: usize,
    pub facet: FacetKind,
    pub orbits: Vec<OrbitRecord>,
    pub nodes: Vec<Vec<F17>>,
    pub weights: Vec<F17>,
    pub facet_rule: Option<Box<RuleArchive>>,
    pub provenance: ProvenanceRecord,
}

impl RuleArchive {
    pub fn from_rule(rule: &QuadratureRule<f64>) -> Self {
        let c = &rule.nodes.coords;
        RuleArchive {
            schema: RULE_SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            domain: rule.domain,
            qv: rule.qv,
            facet: rule.facet_kind,
            orbits: rule
                .orbits
                .iter()
                .map(|o| OrbitRecord {
                    kind: o.kind,
                    params: f17(&o.params),
                    weight: F17(o.weight),
                })
                .collect(),
            nodes: (0..c.nrows())
                .map(|i| c.row(i).iter().copied().map(F17).collect())
                .collect(),
            weights: f17(rule.weights()),
            facet_rule: rule.facet_rule.as_ref().map(|f| Box::new(Self::from_rule(f))),
            provenance: ProvenanceRecord {
                seed: rule.provenance.seed,
                iterations: rule.provenance.iterations,
                residual: F17(rule.provenance.residual),
            },
        }
    }

    /// Rebuilds the rule from its orbits and checks the stored expansion.
    pub fn to_rule(&self) -> Result<QuadratureRule<f64>> {
        let (rule, defect) = self.expand()?;
        if !(defect <= NODE_MATCH_TOL) {
            return Err(Error::Archive(format!("stored nodes differ from the orbits by {defect:.3e}")));
        }
        Ok(rule)
    }

    /// Rule rebuilt from the orbits alone, with the largest difference between
    /// the stored arrays and the re-expanded ones (`∞` on a shape mismatch).
    pub fn expand(&self) -> Result<(QuadratureRule<f64>, f64)> {
        if self.schema != RULE_SCHEMA {
            return Err(Error::Archive(format!("unknown schema {:?}", self.schema)));
        }
        let orbits = self
            .orbits
            .iter()
            .map(|o| SymmetryOrbit::new(o.kind, plain(&o.params), o.weight.0))
            .collect();
        let facet_rule = match &self.facet_rule {
            Some(f) => Some(Box::new(f.to_rule()?)),
            None => None,
        };
        let provenance = Provenance {
            seed: self.provenance.seed,
            iterations: self.provenance.iterations,
            residual: self.provenance.residual.0,
        };
        let rule = QuadratureRule::new(self.domain, self.qv, orbits, self.facet, facet_rule, provenance)?;
        let d = self.domain.dim();
        if self.nodes.len() != rule.n_p() || self.weights.len() != rule.n_p() || self.nodes.iter().any(|r| r.len() != d) {
            return Ok((rule, f64::INFINITY));
        }
        let mut defect: f64 = 0.0;
        for i in 0..rule.n_p() {
            defect = defect.max((self.weights[i].0 - rule.nodes.weights[i]).abs());
            for k in 0..d {
                defect = defect.max((self.nodes[i][k].0 - rule.nodes.coords[(i, k)]).abs());
            }
        }
        Ok((rule, defect))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorArchive {
    pub schema: String,
    pub tool_version: String,
    pub p: usize,
    pub rule: RuleArchive,
    pub h: Vec<F17>,
    /// Diagonals of `E_i`.
    pub e: Vec<Vec<F17>>,
    /// Dense `Q_i`, row-major.
    pub q: Vec<Vec<Vec<F17>>>,
    /// Dense `D_i`, row-major.
    pub d: Vec<Vec<Vec<F17>>>,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<F17>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().map(F17).collect()).collect()
}

fn from_rows(r: &[Vec<F17>], n: usize) -> Result<nalgebra::DMatrix<f64>> {
    if r.len() != n || r.iter().any(|row| row.len() != n) {
        return Err(Error::Archive("operator matrix has the wrong shape".into()));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| r[i][j].0))
}

impl OperatorArchive {
    pub fn from_operator(op: &SbpOperator<f64>) -> Self {
        OperatorArchive {
            schema: OPERATOR_SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            p: op.p,
            rule: RuleArchive::from_rule(&op.rule),
            h: f17(op.h.as_slice()),
            e: op.e.iter().map(|e| f17(e.as_slice())).collect(),
            q: op.q.iter().map(rows).collect(),
            d: op.d.iter().map(rows).collect(),
        }
    }

    /// Operator with the stored matrices; facet data is rebuilt from the rule.
    pub fn to_operator(&self) -> Result<SbpOperator<f64>> {
        if self.schema != OPERATOR_SCHEMA {
            return Err(Error::Archive(format!("unknown schema {:?}", self.schema)));
        }
        let rule = self.rule.to_rule()?;
        let n = rule.n_p();
        let dim = rule.domain.dim();
        if self.h.len() != n || self.e.len() != dim || self.q.len() != dim || self.d.len() != dim {
            return Err(Error::Archive("operator arrays do not match the rule".into()));
        }
        let (_, facets) = build_e(&rule, self.p)?;
        Ok(SbpOperator {
            p: self.p,
            h: nalgebra::DVector::from_vec(plain(&self.h)),
            e: self
                .e
                .iter()
                .map(|e| {
                    if e.len() == n {
                        Ok(nalgebra::DVector::from_vec(plain(e)))
                    } else {
                        Err(Error::Archive("boundary diagonal has the wrong length".into()))
                    }
                })
                .collect::<Result<_>>()?,
            q: self.q.iter().map(|q| from_rows(q, n)).collect::<Result<_>>()?,
            d: self.d.iter().map(|d| from_rows(d, n)).collect::<Result<_>>()?,
            facets,
            rule,
        })
    }
}

fn to_text<S: Serialize>(v: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Archive(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_rule(rule: &QuadratureRule<f64>) -> Result<String> {
    to_text(&RuleArchive::from_rule(rule))
}

pub fn read_rule(text: &str) -> Result<QuadratureRule<f64>> {
    let a: RuleArchive = serde_json::from_str(text).map_err(|e| Error::Archive(e.to_string()))?;
    a.to_rule()
}

pub fn write_operator(op: &SbpOperator<f64>) -> Result<String> {
    to_text(&OperatorArchive::from_operator(op))
}

pub fn read_operator(text: &str) -> Result<SbpOperator<f64>> {
    let a: OperatorArchive = serde_json::from_str(text).map_err(|e| Error::Archive(e.to_string()))?;
    a.to_operator()
}
