use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{affine_rank, ConvexDomain};
use crate::{Error, Result};

/// JSON description of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Simplex {
        dim: usize,
    },
    Ellipsoid {
        dim: usize,
        /// Symmetric (d+1)×(d+1) form of signature (1, d); defaults to
        /// z² − x_1² − … − x_d².
        #[serde(default, skip_serializing_if = "Option::is_none")]
        form: Option<Vec<Vec<f64>>>,
    },
    Polytope {
        vertices: Vec<Vec<f64>>,
    },
    Product {
        factors: Vec<DomainSpec>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<String>,
}

impl ValidationReport {
    fn push(&mut self, msg: String) {
        self.valid = false;
        self.violations.push(msg);
    }
}

impl DomainSpec {
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport {
            valid: true,
            violations: Vec::new(),
        };
        self.check(&mut r, "");
        r
    }

    fn check(&self, r: &mut ValidationReport, path: &str) {
        match self {
            DomainSpec::Simplex { dim } => {
                if *dim == 0 && path.is_empty() {
                    r.push(format!("{path}simplex: dimension must be at least 1"));
                }
            }
            DomainSpec::Ellipsoid { dim, form } => {
                if *dim == 0 {
                    r.push(format!("{path}ellipsoid: dimension must be at least 1"));
                }
                if let Some(rows) = form {
                    let n = dim + 1;
                    if rows.len() != n || rows.iter().any(|row| row.len() != n) {
                        r.push(format!("{path}ellipsoid: form must be {n}x{n}"));
                        return;
                    }
                    let q = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                    if q.iter().any(|x| !x.is_finite()) {
                        r.push(format!("{path}ellipsoid: form has non-finite entries"));
                        return;
                    }
                    if let Err(Error::InvalidDomain(msg)) = ConvexDomain::ellipsoid_with_form(q) {
                        r.push(format!("{path}ellipsoid: {msg}"));
                    }
                }
            }
            DomainSpec::Polytope { vertices } => {
                let Some(d) = vertices.first().map(|v| v.len()) else {
                    r.push(format!("{path}polytope: no vertices"));
                    return;
                };
                if d == 0 {
                    r.push(format!(
                        "{path}polytope: vertices must have at least one coordinate"
                    ));
                    return;
                }
                if vertices.iter().any(|v| v.len() != d) {
                    r.push(format!("{path}polytope: vertices have mixed dimensions"));
                    return;
                }
                if vertices.iter().flatten().any(|x| !x.is_finite()) {
                    r.push(format!("{path}polytope: non-finite coordinate"));
                    return;
                }
                if vertices.len() < d + 1 {
                    r.push(format!(
                        "{path}polytope: {} vertices cannot span dimension {d}",
                        vertices.len()
                    ));
                }
                let pts: Vec<DVector<f64>> = vertices
                    .iter()
                    .map(|v| DVector::from_column_slice(v))
                    .collect();
                let rank = affine_rank(&pts);
                if rank < d {
                    r.push(format!(
                        "{path}polytope: not full-dimensional (affine rank {rank} < {d})"
                    ));
                }
            }
            DomainSpec::Product { factors } => {
                if factors.len() < 2 {
                    r.push(format!("{path}product: needs at least two factors"));
                }
                for (i, f) in factors.iter().enumerate() {
                    f.check(r, &format!("{path}factors[{i}]."));
                }
            }
        }
    }

    pub fn build(&self) -> Result<ConvexDomain> {
        let report = self.validate();
        if !report.valid {
            return Err(Error::InvalidDomain(report.violations.join("; ")));
        }
        self.build_unchecked()
    }

    fn build_unchecked(&self) -> Result<ConvexDomain> {
        Ok(match self {
            DomainSpec::Simplex { dim } => ConvexDomain::simplex(*dim),
            DomainSpec::Ellipsoid { dim, form: None } => ConvexDomain::ellipsoid(*dim),
            DomainSpec::Ellipsoid {
                dim,
                form: Some(rows),
            } => {
                let n = dim + 1;
                ConvexDomain::ellipsoid_with_form(DMatrix::from_fn(n, n, |i, j| rows[i][j]))?
            }
            DomainSpec::Polytope { vertices } => ConvexDomain::polytope(vertices)?,
            DomainSpec::Product { factors } => {
                let mut it = factors.iter();
                let mut acc = it.next().expect("validated").build_unchecked()?;
                for f in it {
                    acc = ConvexDomain::product(acc, f.build_unchecked()?);
                }
                acc
            }
        })
    }
}
