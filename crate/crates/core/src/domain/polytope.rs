//! Convex polytopes given by vertices in the chart x_{d+1} = 1.

use std::collections::BTreeSet;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

/// Half-space n·c ≤ h with unit normal.
#[derive(Clone, Debug)]
pub struct Facet {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Facet {
    /// Homogeneous slack h·v_n − n·v_{1..d}; nonnegative on the cone.
    pub fn slack(&self, v: &[f64]) -> f64 {
        let d = self.normal.len();
        self.offset * v[d] - self.normal.iter().zip(v).map(|(n, x)| n * x).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<DVector<f64>>,
    facets: Vec<Facet>,
    /// Indices into `vertices` of the extreme points.
    extreme: Vec<usize>,
    /// Facets through each extreme point, parallel to `extreme`.
    incidence: Vec<BTreeSet<usize>>,
    scale: f64,
}

impl Polytope {
    /// Builds the facet list by enumerating d-subsets of the vertices. Fine
    /// for the handful of vertices used here; degenerate input yields an
    /// empty facet list, which `affine_rank` and validation report.
    pub fn new(vertices: Vec<DVector<f64>>) -> Self {
        let dim = vertices.first().map_or(0, |v| v.len());
        let scale = 1.0 + vertices.iter().map(|v| v.amax()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;
        let mut uniq: Vec<DVector<f64>> = Vec::new();
        for v in vertices {
            if !uniq.iter().any(|u| (u - &v).amax() <= tol) {
                uniq.push(v);
            }
        }
        let vertices = uniq;
        let mut facets: Vec<Facet> = Vec::new();
        if dim >= 1 && vertices.len() > dim && affine_rank(&vertices) == dim {
            for subset in (0..vertices.len()).combinations(dim) {
                let Some(f) = hyperplane(&subset.iter().map(|&i| &vertices[i]).collect::<Vec<_>>())
                else {
                    continue;
                };
                let sides: Vec<f64> = vertices
                    .iter()
                    .map(|v| f.offset - f.normal.dot(v))
                    .collect();
                let f = if sides.iter().all(|&s| s >= -tol) {
                    f
                } else if sides.iter().all(|&s| s <= tol) {
                    Facet {
                        normal: -f.normal,
                        offset: -f.offset,
                    }
                } else {
                    continue;
                };
                let dup = facets.iter().any(|g| {
                    (&g.normal - &f.normal).amax() <= 1e-9 && (g.offset - f.offset).abs() <= tol
                });
                if !dup {
                    facets.push(f);
                }
            }
        }
        let mut extreme = Vec::new();
        let mut incidence = Vec::new();
        for (i, v) in vertices.iter().enumerate() {
            let inc: BTreeSet<usize> = facets
                .iter()
                .enumerate()
                .filter(|(_, f)| (f.offset - f.normal.dot(v)).abs() <= tol)
                .map(|(k, _)| k)
                .collect();
            if inc.len() >= dim && normals_rank(&facets, &inc, dim) == dim {
                extreme.push(i);
                incidence.push(inc);
            }
        }
        Polytope {
            dim,
            vertices,
            facets,
            extreme,
            incidence,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn extreme_vertices(&self) -> impl Iterator<Item = (&DVector<f64>, &BTreeSet<usize>)> {
        self.extreme
            .iter()
            .map(|&i| &self.vertices[i])
            .zip(self.incidence.iter())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lifted(c: &DVector<f64>) -> DVector<f64> {
        let d = c.len();
        DVector::from_fn(d + 1, |i, _| if i < d { c[i] } else { 1.0 })
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for &i in &self.extreme {
            c += &self.vertices[i];
        }
        c / self.extreme.len().max(1) as f64
    }

    /// Dimension of the cone over the face cut out by `active`.
    pub fn face_cone_dim(&self, active: &BTreeSet<usize>) -> usize {
        if active.is_empty() {
            return self.dim + 1;
        }
        let pts: Vec<DVector<f64>> = self
            .extreme_vertices()
            .filter(|(_, inc)| active.is_subset(inc))
            .map(|(v, _)| Self::lifted(v))
            .collect();
        if pts.is_empty() {
            return 0;
        }
        DMatrix::from_columns(&pts).rank(1e-9 * self.scale)
    }
}

/// Dimension of the affine span of the points.
pub fn affine_rank(pts: &[DVector<f64>]) -> usize {
    if pts.len() < 2 {
        return 0;
    }
    let cols: Vec<DVector<f64>> = pts[1..].iter().map(|p| p - &pts[0]).collect();
    let scale = 1.0 + pts.iter().map(|v| v.amax()).fold(0.0, f64::max);
    DMatrix::from_columns(&cols).rank(1e-9 * scale)
}

fn normals_rank(facets: &[Facet], set: &BTreeSet<usize>, dim: usize) -> usize {
    if set.is_empty() {
        return 0;
    }
    let cols: Vec<DVector<f64>> = set.iter().map(|&k| facets[k].normal.clone()).collect();
    DMatrix::from_columns(&cols).rank(1e-9).min(dim)
}

/// The hyperplane n·c = h through d affinely independent points in R^d,
/// from the generalized cross product of the rows (p_i, -1).
fn hyperplane(pts: &[&DVector<f64>]) -> Option<Facet> {
    let d = pts.len();
    let m = DMatrix::from_fn(d, d + 1, |i, j| if j < d { pts[i][j] } else { -1.0 });
    let mut null = DVector::zeros(d + 1);
    for j in 0..=d {
        let minor = m.clone().remove_column(j);
        let det = if d == 0 { 1.0 } else { minor.determinant() };
        null[j] = if j % 2 == 0 { det } else { -det };
    }
    let normal = null.rows(0, d).into_owned();
    let nn = normal.norm();
    let scale = 1.0 + pts.iter().map(|v| v.amax()).fold(0.0, f64::max);
    if nn <= 1e-12 * scale.powi(d as i32 - 1).max(1.0) {
        return None;
    }
    Some(Facet {
        normal: normal / nn,
        offset: null[d] / nn,
    })
}
