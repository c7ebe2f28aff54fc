//! Properly convex domains and their membership, chord and face oracles.
//!
//! Every variant is described by its closed cone in R^{d+1}. The oracles work
//! on homogeneous vectors through two primitives: a degree-one "slack" that is
//! positive exactly on the open cone, and the exit time of a ray from the
//! closed cone. Products then reduce to their factors.

mod polytope;
mod spec;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use polytope::{affine_rank, Facet, Polytope};
pub use spec::{DomainSpec, ValidationReport};

use crate::projective::{AffineChart, ProjPoint};
use crate::rng;
use crate::{Error, Result, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceKind {
    Interior,
    BoundaryFace,
}

/// The open face containing a point of the closed domain.
///
/// For polyhedral pieces the face is its set of active constraints; a point
/// on the sphere of an ellipsoid is its own face and is recorded in `pinned`.
#[derive(Clone, Debug, Serialize)]
pub struct FaceDescriptor {
    pub kind: FaceKind,
    pub active_constraints: BTreeSet<usize>,
    pub dim: usize,
    #[serde(skip)]
    pub pinned: Vec<ProjPoint>,
}

impl PartialEq for FaceDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.active_constraints == other.active_constraints
            && self.dim == other.dim
            && self.pinned.len() == other.pinned.len()
            && self.pinned.iter().zip(&other.pinned).all(|(a, b)| a == b)
    }
}

/// Ellipsoid Q(v) > 0 in coordinates z = T v where Q = z_n² − |z_rest|² and
/// the chosen cone component has z_n > 0.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    frame: DMatrix<f64>,
    standard: bool,
}

impl Ellipsoid {
    fn standard(n: usize) -> Self {
        Ellipsoid {
            frame: DMatrix::identity(n, n),
            standard: true,
        }
    }

    /// Frame from a symmetric form of signature (1, d); the component is the
    /// one on which the positive eigenvector is positive.
    fn from_form(q: &DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        let eig = q.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        let pos: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i] > 1e-12 * scale)
            .collect();
        let neg = (0..n)
            .filter(|&i| eig.eigenvalues[i] < -1e-12 * scale)
            .count();
        if pos.len() != 1 || neg != n - 1 {
            return Err(Error::InvalidDomain(format!(
                "ellipsoid form has signature ({}, {}), expected (1, {})",
                pos.len(),
                neg,
                n - 1
            )));
        }
        let mut frame = DMatrix::zeros(n, n);
        for (row, i) in (0..n).filter(|&i| i != pos[0]).enumerate() {
            let s = (-eig.eigenvalues[i]).sqrt();
            frame.set_row(row, &(eig.eigenvectors.column(i).transpose() * s));
        }
        let s = eig.eigenvalues[pos[0]].sqrt();
        let mut u = eig.eigenvectors.column(pos[0]).into_owned();
        // Pick the nappe on which the largest entry of u is positive.
        let lead = u.iamax();
        if u[lead] < 0.0 {
            u.neg_mut();
        }
        frame.set_row(n - 1, &(u.transpose() * s));
        Ok(Ellipsoid {
            frame,
            standard: false,
        })
    }

    fn to_z(&self, v: &[f64]) -> DVector<f64> {
        if self.standard {
            DVector::from_column_slice(v)
        } else {
            &self.frame * DVector::from_column_slice(v)
        }
    }

    fn unz(&self, z: &DVector<f64>) -> DVector<f64> {
        if self.standard {
            z.clone()
        } else {
            self.frame.clone().lu().solve(z).expect("invertible frame")
        }
    }
}

#[derive(Clone, Debug)]
pub enum DomainKind {
    Simplex,
    Ellipsoid(Ellipsoid),
    Polytope(Polytope),
    Product(Box<ConvexDomain>, Box<ConvexDomain>),
}

#[derive(Clone, Debug)]
pub struct ConvexDomain {
    kind: DomainKind,
    dim: usize,
    chart: AffineChart,
    tol: Tolerances,
}

impl ConvexDomain {
    /// The simplex T_d, projectivized positive orthant, in the chart
    /// sum(x) = 1 with coordinates the first d barycentric coordinates.
    pub fn simplex(d: usize) -> Self {
        let n = d + 1;
        let f = DVector::from_element(n, 1.0);
        let mut o = DVector::zeros(n);
        o[n - 1] = 1.0;
        let mut b = DMatrix::zeros(n, d);
        for i in 0..d {
            b[(i, i)] = 1.0;
            b[(n - 1, i)] = -1.0;
        }
        ConvexDomain {
            kind: DomainKind::Simplex,
            dim: d,
            chart: AffineChart::new(f, o, b).expect("simplex chart"),
            tol: Tolerances::default(),
        }
    }

    /// The unit ball |x| < 1 in the chart x_{d+1} = 1.
    pub fn ellipsoid(d: usize) -> Self {
        ConvexDomain {
            kind: DomainKind::Ellipsoid(Ellipsoid::standard(d + 1)),
            dim: d,
            chart: AffineChart::standard(d + 1),
            tol: Tolerances::default(),
        }
    }

    pub fn ellipsoid_with_form(q: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() < 2 {
            return Err(Error::InvalidDomain(
                "form must be square of size >= 2".into(),
            ));
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax() {
            return Err(Error::InvalidDomain("form must be symmetric".into()));
        }
        let e = Ellipsoid::from_form(&q)?;
        let n = q.nrows();
        let f = e.frame.row(n - 1).transpose();
        let origin = e.unz(&DVector::from_fn(
            n,
            |i, _| if i == n - 1 { 1.0 } else { 0.0 },
        ));
        let basis = DMatrix::from_columns(
            &(0..n - 1)
                .map(|i| e.unz(&DVector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 })))
                .collect::<Vec<_>>(),
        );
        Ok(ConvexDomain {
            kind: DomainKind::Ellipsoid(e),
            dim: n - 1,
            chart: AffineChart::new(f, origin, basis)?,
            tol: Tolerances::default(),
        })
    }

    /// Convex hull of points of R^d, placed in the chart x_{d+1} = 1.
    pub fn polytope(vertices: &[Vec<f64>]) -> Result<Self> {
        let report = DomainSpec::Polytope {
            vertices: vertices.to_vec(),
        }
        .validate();
        if !report.valid {
            return Err(Error::InvalidDomain(report.violations.join("; ")));
        }
        let p = Polytope::new(
            vertices
                .iter()
                .map(|v| DVector::from_column_slice(v))
                .collect(),
        );
        let d = p.dim();
        Ok(ConvexDomain {
            kind: DomainKind::Polytope(p),
            dim: d,
            chart: AffineChart::standard(d + 1),
            tol: Tolerances::default(),
        })
    }

    /// The domain over the cone sum of the two factor cones.
    pub fn product(a: ConvexDomain, b: ConvexDomain) -> Self {
        let f = DVector::from_iterator(
            a.ambient() + b.ambient(),
            a.chart
                .functional()
                .iter()
                .chain(b.chart.functional().iter())
                .copied(),
        );
        let dim = a.dim + b.dim + 1;
        ConvexDomain {
            kind: DomainKind::Product(Box::new(a), Box::new(b)),
            dim,
            chart: AffineChart::from_functional(f).expect("nonzero functional"),
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        if let DomainKind::Product(a, b) = &mut self.kind {
            **a = a.as_ref().clone().with_tolerances(tol);
            **b = b.as_ref().clone().with_tolerances(tol);
        }
        self
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length d + 1 of homogeneous coordinates.
    pub fn ambient(&self) -> usize {
        self.dim + 1
    }

    pub fn chart(&self) -> &AffineChart {
        &self.chart
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn is_polyhedral(&self) -> bool {
        match &self.kind {
            DomainKind::Simplex | DomainKind::Polytope(_) => true,
            DomainKind::Ellipsoid(_) => false,
            DomainKind::Product(a, b) => a.is_polyhedral() && b.is_polyhedral(),
        }
    }

    pub fn is_strictly_convex(&self) -> bool {
        matches!(self.kind, DomainKind::Ellipsoid(_))
    }

    pub fn num_constraints(&self) -> usize {
        match &self.kind {
            DomainKind::Simplex => self.dim + 1,
            DomainKind::Ellipsoid(_) => 1,
            DomainKind::Polytope(p) => p.facets().len(),
            DomainKind::Product(a, b) => a.num_constraints() + b.num_constraints(),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Degree-one function positive exactly on the open cone. On the chart
    /// hyperplane it is the distance-like depth used for classification.
    pub fn cone_slack(&self, v: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Simplex => v.iter().copied().fold(f64::INFINITY, f64::min),
            DomainKind::Ellipsoid(e) => {
                let z = e.to_z(v);
                let n = z.len();
                z[n - 1] - z.rows(0, n - 1).norm()
            }
            DomainKind::Polytope(p) => p
                .facets()
                .iter()
                .map(|f| f.slack(v))
                .fold(f64::INFINITY, f64::min),
            DomainKind::Product(a, b) => {
                let k = a.ambient();
                a.cone_slack(&v[..k]).min(b.cone_slack(&v[k..]))
            }
        }
    }

    /// Per-constraint degree-one slacks, indexed like `active_constraints`.
    pub fn constraint_slacks(&self, v: &[f64]) -> Vec<f64> {
        match &self.kind {
            DomainKind::Simplex => v.to_vec(),
            DomainKind::Ellipsoid(_) => vec![self.cone_slack(v)],
            DomainKind::Polytope(p) => p.facets().iter().map(|f| f.slack(v)).collect(),
            DomainKind::Product(a, b) => {
                let k = a.ambient();
                let mut s = a.constraint_slacks(&v[..k]);
                s.extend(b.constraint_slacks(&v[k..]));
                s
            }
        }
    }

    /// sup{t >= 0 : u + sign·t·w lies in the closed cone}, for u in the cone.
    pub fn cone_exit(&self, u: &[f64], w: &[f64], sign: f64) -> f64 {
        let linear = |s0: f64, ds: f64| -> f64 {
            if ds < 0.0 {
                (s0 / -ds).max(0.0)
            } else {
                f64::INFINITY
            }
        };
        match &self.kind {
            DomainKind::Simplex => u
                .iter()
                .zip(w)
                .map(|(&a, &b)| linear(a, sign * b))
                .fold(f64::INFINITY, f64::min),
            DomainKind::Polytope(p) => p
                .facets()
                .iter()
                .map(|f| linear(f.slack(u), sign * f.slack(w)))
                .fold(f64::INFINITY, f64::min),
            DomainKind::Ellipsoid(e) if e.standard => ellipsoid_exit(u, w, sign),
            DomainKind::Ellipsoid(e) => {
                ellipsoid_exit(e.to_z(u).as_slice(), e.to_z(w).as_slice(), sign)
            }
            DomainKind::Product(a, b) => {
                let k = a.ambient();
                a.cone_exit(&u[..k], &w[..k], sign)
                    .min(b.cone_exit(&u[k..], &w[k..], sign))
            }
        }
    }

    /// Representative of `p` on the chart hyperplane f = 1.
    pub fn lift(&self, p: &ProjPoint) -> Result<DVector<f64>> {
        self.check_len(p.coords().as_slice())?;
        self.chart.lift(p, self.tol.point * 1e-3)
    }

    /// Depth of `p`: positive inside, zero on the boundary.
    pub fn slack(&self, p: &ProjPoint) -> Result<f64> {
        let v = self.lift(p)?;
        Ok(self.cone_slack(v.as_slice()))
    }

    pub fn contains(&self, p: &ProjPoint, eps: f64) -> Result<Classification> {
        let s = self.slack(p)?;
        Ok(if s > eps {
            Classification::Interior
        } else if s >= -eps {
            Classification::Boundary
        } else {
            Classification::Exterior
        })
    }

    pub fn classify(&self, p: &ProjPoint) -> Result<Classification> {
        self.contains(p, self.tol.point)
    }

    /// Points with positive slack, however small. Distances only need this.
    pub fn is_open_member(&self, p: &ProjPoint) -> bool {
        self.slack(p).is_ok_and(|s| s > 0.0)
    }

    /// Chord through two interior points: returns (a, b) ordered a, x, y, b.
    pub fn chord_endpoints(&self, x: &ProjPoint, y: &ProjPoint) -> Result<(ProjPoint, ProjPoint)> {
        let xh = self.lift(x)?;
        let yh = self.lift(y)?;
        if !(self.cone_slack(xh.as_slice()) > 0.0 && self.cone_slack(yh.as_slice()) > 0.0) {
            return Err(Error::NotInterior);
        }
        if x.approx_eq(y, self.tol.point) {
            return Err(Error::CoincidentPoints);
        }
        let w = &yh - &xh;
        let tp = self.cone_exit(yh.as_slice(), w.as_slice(), 1.0);
        let tm = self.cone_exit(xh.as_slice(), w.as_slice(), -1.0);
        if !tp.is_finite() || !tm.is_finite() {
            return Err(Error::Unbounded);
        }
        let a = ProjPoint::new(&xh - &w * tm)?;
        let b = ProjPoint::new(&yh + &w * tp)?;
        Ok((a, b))
    }

    fn is_zero(&self, v: &[f64]) -> bool {
        v.iter().all(|x| x.abs() <= self.tol.point)
    }

    /// `v` nonzero in the closed cone and on its boundary.
    fn on_cone_boundary(&self, v: &[f64]) -> bool {
        let f: f64 = self
            .chart
            .functional()
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum();
        if f <= 0.0 {
            return false;
        }
        let s = self.cone_slack(v) / f;
        s.abs() <= self.tol.point
    }

    fn active_set(&self, v: &[f64]) -> BTreeSet<usize> {
        let f: f64 = self
            .chart
            .functional()
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum();
        let f = if f > 0.0 { f } else { 1.0 };
        self.constraint_slacks(v)
            .iter()
            .enumerate()
            .filter(|(_, &s)| s / f <= self.tol.point)
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether the closed cone segment between u and v lies in the boundary
    /// of the cone (zero counts as a boundary vector).
    fn cone_segment_in_boundary(&self, u: &[f64], v: &[f64]) -> bool {
        match (self.is_zero(u), self.is_zero(v)) {
            (true, true) => return true,
            (true, false) => return self.on_cone_boundary(v),
            (false, true) => return self.on_cone_boundary(u),
            _ => {}
        }
        if !self.on_cone_boundary(u) || !self.on_cone_boundary(v) {
            return false;
        }
        match &self.kind {
            DomainKind::Simplex | DomainKind::Polytope(_) => {
                !self.active_set(u).is_disjoint(&self.active_set(v))
            }
            DomainKind::Ellipsoid(_) => {
                let (Ok(p), Ok(q)) = (ProjPoint::from_slice(u), ProjPoint::from_slice(v)) else {
                    return false;
                };
                p.approx_eq(&q, self.tol.point.sqrt() * 1e-2)
            }
            DomainKind::Product(a, b) => {
                let k = a.ambient();
                a.cone_segment_in_boundary(&u[..k], &v[..k])
                    || b.cone_segment_in_boundary(&u[k..], &v[k..])
            }
        }
    }

    fn require_boundary(&self, p: &ProjPoint) -> Result<DVector<f64>> {
        match self.classify(p)? {
            Classification::Boundary => self.lift(p),
            _ => Err(Error::NotBoundaryPoint),
        }
    }

    /// Whether the closed segment [x, y] lies in the boundary.
    pub fn segment_in_boundary(&self, x: &ProjPoint, y: &ProjPoint) -> Result<bool> {
        let u = self.require_boundary(x)?;
        let v = self.require_boundary(y)?;
        Ok(self.cone_segment_in_boundary(u.as_slice(), v.as_slice()))
    }

    /// Variant-free test: the segment lies in the boundary iff its midpoint
    /// (in the chart) does.
    pub fn segment_in_boundary_midpoint(&self, x: &ProjPoint, y: &ProjPoint) -> Result<bool> {
        let u = self.require_boundary(x)?;
        let v = self.require_boundary(y)?;
        let m = ProjPoint::new((u + v) * 0.5)?;
        Ok(self.classify(&m)? != Classification::Interior)
    }

    fn face_cone_dim(&self, v: &[f64], active: &BTreeSet<usize>) -> usize {
        match &self.kind {
            DomainKind::Simplex => self.ambient() - active.len(),
            DomainKind::Ellipsoid(_) => {
                if active.is_empty() {
                    self.ambient()
                } else if self.is_zero(v) {
                    0
                } else {
                    1
                }
            }
            DomainKind::Polytope(p) => p.face_cone_dim(active),
            DomainKind::Product(a, b) => {
                let k = a.ambient();
                let na = a.num_constraints();
                let aa = active.iter().filter(|&&i| i < na).copied().collect();
                let ab = active
                    .iter()
                    .filter(|&&i| i >= na)
                    .map(|&i| i - na)
                    .collect();
                a.face_cone_dim(&v[..k], &aa) + b.face_cone_dim(&v[k..], &ab)
            }
        }
    }

    fn pinned_points(&self, v: &[f64], offset: usize, total: usize, out: &mut Vec<ProjPoint>) {
        match &self.kind {
            DomainKind::Ellipsoid(_) if !self.is_zero(v) && self.on_cone_boundary(v) => {
                let mut w = DVector::zeros(total);
                w.rows_mut(offset, v.len()).copy_from_slice(v);
                if let Ok(p) = ProjPoint::new(w) {
                    out.push(p);
                }
            }
            DomainKind::Product(a, b) => {
                let k = a.ambient();
                a.pinned_points(&v[..k], offset, total, out);
                b.pinned_points(&v[k..], offset + k, total, out);
            }
            _ => {}
        }
    }

    pub fn face_of(&self, x: &ProjPoint) -> Result<FaceDescriptor> {
        let v = self.lift(x)?;
        match self.classify(x)? {
            Classification::Exterior => Err(Error::ExteriorPoint),
            Classification::Interior => Ok(FaceDescriptor {
                kind: FaceKind::Interior,
                active_constraints: BTreeSet::new(),
                dim: self.dim,
                pinned: Vec::new(),
            }),
            Classification::Boundary => {
                let active = self.active_set(v.as_slice());
                let cone_dim = self.face_cone_dim(v.as_slice(), &active);
                let mut pinned = Vec::new();
                self.pinned_points(v.as_slice(), 0, self.ambient(), &mut pinned);
                Ok(FaceDescriptor {
                    kind: FaceKind::BoundaryFace,
                    active_constraints: active,
                    dim: cone_dim.saturating_sub(1),
                    pinned,
                })
            }
        }
    }

    /// Vertices (as chart-normalized homogeneous vectors) with their active
    /// constraints, for polyhedral domains.
    pub fn polyhedral_vertices(&self) -> Option<Vec<(DVector<f64>, BTreeSet<usize>)>> {
        match &self.kind {
            DomainKind::Simplex => Some(
                (0..self.ambient())
                    .map(|i| {
                        let mut v = DVector::zeros(self.ambient());
                        v[i] = 1.0;
                        (v, (0..self.ambient()).filter(|&j| j != i).collect())
                    })
                    .collect(),
            ),
            DomainKind::Polytope(p) => Some(
                p.extreme_vertices()
                    .map(|(v, inc)| (Polytope::lifted(v), inc.clone()))
                    .collect(),
            ),
            DomainKind::Ellipsoid(_) => None,
            DomainKind::Product(a, b) => {
                let va = a.polyhedral_vertices()?;
                let vb = b.polyhedral_vertices()?;
                let (ka, kb) = (a.ambient(), b.ambient());
                let (na, nb) = (a.num_constraints(), b.num_constraints());
                let mut out = Vec::new();
                for (v, act) in va {
                    let mut w = DVector::zeros(ka + kb);
                    w.rows_mut(0, ka).copy_from(&v);
                    let mut s = act;
                    s.extend(na..na + nb);
                    out.push((w, s));
                }
                for (v, act) in vb {
                    let mut w = DVector::zeros(ka + kb);
                    w.rows_mut(ka, kb).copy_from(&v);
                    let mut s: BTreeSet<usize> = (0..na).collect();
                    s.extend(act.iter().map(|i| i + na));
                    out.push((w, s));
                }
                Some(out)
            }
        }
    }

    /// A fixed interior point, f-normalized.
    pub fn center(&self) -> DVector<f64> {
        match &self.kind {
            DomainKind::Simplex => {
                DVector::from_element(self.ambient(), 1.0 / self.ambient() as f64)
            }
            DomainKind::Ellipsoid(e) => {
                let n = self.ambient();
                e.unz(&DVector::from_fn(
                    n,
                    |i, _| if i == n - 1 { 1.0 } else { 0.0 },
                ))
            }
            DomainKind::Polytope(p) => Polytope::lifted(&p.centroid()),
            DomainKind::Product(a, b) => {
                let mut v = a.center() * 0.5;
                let w = b.center() * 0.5;
                v.extend(w.iter().copied());
                v
            }
        }
    }

    /// Random f-normalized vector of the open cone.
    pub fn sample_interior_vec<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match &self.kind {
            DomainKind::Simplex => DVector::from_vec(rng::dirichlet(rng, self.ambient())),
            DomainKind::Ellipsoid(e) => {
                let d = self.dim;
                let dir = rng::unit_vector(rng, d);
                let r = rng.gen::<f64>().powf(1.0 / d as f64) * 0.999;
                let mut z = DVector::from_element(d + 1, 1.0);
                z.rows_mut(0, d).copy_from(&(dir * r));
                e.unz(&z)
            }
            DomainKind::Polytope(p) => {
                let ext: Vec<&DVector<f64>> = p.extreme_vertices().map(|(v, _)| v).collect();
                let w = rng::dirichlet(rng, ext.len());
                let mut c = DVector::zeros(p.dim());
                for (v, wi) in ext.iter().zip(&w) {
                    c += *v * *wi;
                }
                Polytope::lifted(&c)
            }
            DomainKind::Product(a, b) => {
                let s = rng.gen_range(0.05..0.95);
                let mut v = a.sample_interior_vec(rng) * s;
                v.extend((b.sample_interior_vec(rng) * (1.0 - s)).iter().copied());
                v
            }
        }
    }

    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> ProjPoint {
        ProjPoint::new(self.sample_interior_vec(rng)).expect("nonzero sample")
    }

    /// Random f-normalized vector of the cone boundary.
    pub fn sample_boundary_vec<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match &self.kind {
            DomainKind::Simplex => {
                let n = self.ambient();
                let mut w = rng::dirichlet(rng, n);
                let k = rng.gen_range(1..n);
                for _ in 0..k {
                    w[rng.gen_range(0..n)] = 0.0;
                }
                if w.iter().all(|&x| x == 0.0) {
                    w[rng.gen_range(0..n)] = 1.0;
                }
                let s: f64 = w.iter().sum();
                DVector::from_vec(w) / s
            }
            DomainKind::Ellipsoid(e) => {
                let d = self.dim;
                let mut z = DVector::from_element(d + 1, 1.0);
                z.rows_mut(0, d).copy_from(&rng::unit_vector(rng, d));
                e.unz(&z)
            }
            DomainKind::Polytope(p) => {
                let k = rng.gen_range(0..p.facets().len());
                let on: Vec<&DVector<f64>> = p
                    .extreme_vertices()
                    .filter(|(_, inc)| inc.contains(&k))
                    .map(|(v, _)| v)
                    .collect();
                let w = rng::dirichlet(rng, on.len());
                let mut c = DVector::zeros(p.dim());
                for (v, wi) in on.iter().zip(&w) {
                    c += *v * *wi;
                }
                Polytope::lifted(&c)
            }
            DomainKind::Product(a, b) => {
                let (va, vb, s) = match rng.gen_range(0..4) {
                    0 => (
                        a.sample_boundary_vec(rng),
                        b.sample_interior_vec(rng),
                        rng.gen::<f64>(),
                    ),
                    1 => (
                        a.sample_interior_vec(rng),
                        b.sample_boundary_vec(rng),
                        rng.gen::<f64>(),
                    ),
                    2 => (a.sample_interior_vec(rng), b.sample_interior_vec(rng), 1.0),
                    _ => (a.sample_interior_vec(rng), b.sample_interior_vec(rng), 0.0),
                };
                let mut v = va * s;
                v.extend((vb * (1.0 - s)).iter().copied());
                v
            }
        }
    }

    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> ProjPoint {
        ProjPoint::new(self.sample_boundary_vec(rng)).expect("nonzero sample")
    }

    pub fn to_spec(&self) -> DomainSpec {
        match &self.kind {
            DomainKind::Simplex => DomainSpec::Simplex { dim: self.dim },
            DomainKind::Ellipsoid(e) => DomainSpec::Ellipsoid {
                dim: self.dim,
                form: if e.standard {
                    None
                } else {
                    let n = self.ambient();
                    let mut j = DMatrix::identity(n, n) * -1.0;
                    j[(n - 1, n - 1)] = 1.0;
                    let q = e.frame.transpose() * j * &e.frame;
                    Some((0..n).map(|i| q.row(i).iter().copied().collect()).collect())
                },
            },
            DomainKind::Polytope(p) => DomainSpec::Polytope {
                vertices: p
                    .vertices()
                    .iter()
                    .map(|v| v.iter().copied().collect())
                    .collect(),
            },
            DomainKind::Product(a, b) => DomainSpec::Product {
                factors: vec![a.to_spec(), b.to_spec()],
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DomainSpec = serde_json::from_str(text)?;
        spec.build()
    }

    /// Checks on a constructed domain: the `DomainSpec` checks plus positivity
    /// of the chart functional on the closure.
    pub fn validate(&self) -> ValidationReport {
        let mut report = self.to_spec().validate();
        let mut probe = rng::stream(0, 0);
        let f = self.chart.functional();
        let min_f = (0..64)
            .map(|_| {
                let v = self.sample_boundary_vec(&mut probe);
                f.dot(&v) / v.norm()
            })
            .fold(f64::INFINITY, f64::min);
        if !(min_f > 0.0) {
            report.valid = false;
            report
                .violations
                .push("chart functional is not positive on the closed domain".into());
        }
        if self.dim != self.chart.dim() {
            report.valid = false;
            report.violations.push("chart dimension mismatch".into());
        }
        report
    }
}

/// Smallest t >= 0 at which z_u + t·sign·z_w leaves {z_n >= |z_rest|}.
fn ellipsoid_exit(zu: &[f64], zw: &[f64], sign: f64) -> f64 {
    let n = zu.len();
    let (un, wn) = (zu[n - 1], sign * zw[n - 1]);
    let (mut uu, mut ww, mut uw) = (0.0, 0.0, 0.0);
    for i in 0..n - 1 {
        uu += zu[i] * zu[i];
        ww += zw[i] * zw[i];
        uw += zu[i] * zw[i];
    }
    let uw = sign * uw;
    let urn = uu.sqrt();
    let c = (un - urn) * (un + urn);
    if c <= 0.0 {
        return 0.0;
    }
    let a = wn * wn - ww;
    let b = un * wn - uw;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq);
    let mut t = f64::INFINITY;
    if a != 0.0 && q / a > 0.0 {
        t = t.min(q / a);
    }
    if q != 0.0 && c / q > 0.0 {
        t = t.min(c / q);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> ProjPoint {
        ProjPoint::from_slice(v).unwrap()
    }

    #[test]
    fn simplex_membership() {
        let t2 = ConvexDomain::simplex(2);
        assert_eq!(
            t2.classify(&pt(&[1.0, 1.0, 1.0])).unwrap(),
            Classification::Interior
        );
        assert_eq!(
            t2.classify(&pt(&[1.0, 0.0, 0.0])).unwrap(),
            Classification::Boundary
        );
        assert_eq!(
            t2.classify(&pt(&[1.0, -1.0, 1.0])).unwrap(),
            Classification::Exterior
        );
    }

    #[test]
    fn disk_membership() {
        let disk = ConvexDomain::ellipsoid(2);
        let p = disk.chart().from_affine(&[2.0, 0.0]).unwrap();
        assert_eq!(disk.classify(&p).unwrap(), Classification::Exterior);
        assert_eq!(
            disk.classify(&pt(&[1.0, -1.0, 0.0])).unwrap_err(),
            Error::PointAtInfinity
        );
    }

    #[test]
    fn disk_chord() {
        let disk = ConvexDomain::ellipsoid(2);
        let x = disk.chart().from_affine(&[0.0, 0.0]).unwrap();
        let y = disk.chart().from_affine(&[0.5, 0.0]).unwrap();
        let (a, b) = disk.chord_endpoints(&x, &y).unwrap();
        assert_eq!(a, pt(&[-1.0, 0.0, 1.0]));
        assert_eq!(b, pt(&[1.0, 0.0, 1.0]));
        assert_eq!(
            disk.chord_endpoints(&x, &x).unwrap_err(),
            Error::CoincidentPoints
        );
    }

    #[test]
    fn simplex_faces() {
        let t2 = ConvexDomain::simplex(2);
        let f = t2.face_of(&pt(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(f.active_constraints, [1, 2].into());
        assert_eq!(f.dim, 0);
        let m = t2.face_of(&pt(&[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(m.active_constraints, [2].into());
        assert_eq!(m.dim, 1);
        let i = t2.face_of(&pt(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(i.kind, FaceKind::Interior);
        assert_eq!(i.dim, 2);
    }

    #[test]
    fn simplex_boundary_segments() {
        let t2 = ConvexDomain::simplex(2);
        let e = |i| ProjPoint::basis(3, i);
        assert!(t2.segment_in_boundary(&e(0), &e(1)).unwrap());
        let m12 = pt(&[1.0, 1.0, 0.0]);
        let m23 = pt(&[0.0, 1.0, 1.0]);
        assert!(!t2.segment_in_boundary(&m12, &m23).unwrap());
        assert_eq!(
            t2.segment_in_boundary(&pt(&[1.0, 1.0, 1.0]), &e(0))
                .unwrap_err(),
            Error::NotBoundaryPoint
        );
    }

    #[test]
    fn disk_has_no_boundary_segments() {
        let disk = ConvexDomain::ellipsoid(2);
        let p = pt(&[1.0, 0.0, 1.0]);
        let q = pt(&[0.0, 1.0, 1.0]);
        assert!(!disk.segment_in_boundary(&p, &q).unwrap());
        assert!(disk.segment_in_boundary(&p, &p).unwrap());
    }

    #[test]
    fn custom_form_matches_disk() {
        // x² + y² < z² written with the positive direction first.
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]);
        let dom = ConvexDomain::ellipsoid_with_form(q).unwrap();
        assert_eq!(
            dom.classify(&pt(&[1.0, 0.2, 0.3])).unwrap(),
            Classification::Interior
        );
        assert_eq!(
            dom.classify(&pt(&[1.0, 1.0, 0.0])).unwrap(),
            Classification::Boundary
        );
        assert_eq!(
            dom.classify(&pt(&[0.0, 1.0, 0.0])).unwrap_err(),
            Error::PointAtInfinity
        );
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
        assert!(ConvexDomain::ellipsoid_with_form(bad).is_err());
    }

    #[test]
    fn product_faces_and_segments() {
        // Cone over a triangle times a ray: T_2 ⊕ T_0 = T_3 combinatorially.
        let dom = ConvexDomain::product(ConvexDomain::simplex(1), ConvexDomain::simplex(1));
        let e = |i| ProjPoint::basis(4, i);
        assert!(dom.segment_in_boundary(&e(0), &e(2)).unwrap());
        assert!(dom.segment_in_boundary(&e(0), &e(1)).unwrap());
        let f = dom.face_of(&e(0)).unwrap();
        assert_eq!(f.active_constraints, [1, 2, 3].into());
        assert_eq!(f.dim, 0);
        let mixed = ConvexDomain::product(ConvexDomain::ellipsoid(2), ConvexDomain::simplex(0));
        let p = pt(&[1.0, 0.0, 1.0, 0.0]);
        let q = pt(&[0.0, 1.0, 1.0, 0.0]);
        let r = pt(&[-1.0, 0.0, 1.0, 1.0]);
        let apex = pt(&[0.0, 0.0, 0.0, 1.0]);
        assert!(mixed.segment_in_boundary(&p, &apex).unwrap());
        // The base disk is a face of the cone over it.
        assert!(mixed.segment_in_boundary(&p, &q).unwrap());
        assert!(!mixed.segment_in_boundary(&p, &r).unwrap());
    }

    #[test]
    fn polytope_domain() {
        let dom = ConvexDomain::polytope(&[
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
        ])
        .unwrap();
        let c = |x: f64, y: f64| dom.chart().from_affine(&[x, y]).unwrap();
        assert_eq!(
            dom.classify(&c(0.0, 0.0)).unwrap(),
            Classification::Interior
        );
        assert_eq!(
            dom.classify(&c(1.0, 0.3)).unwrap(),
            Classification::Boundary
        );
        assert!(dom
            .segment_in_boundary(&c(1.0, 0.3), &c(1.0, -1.0))
            .unwrap());
        assert!(!dom
            .segment_in_boundary(&c(1.0, 0.3), &c(-1.0, 0.0))
            .unwrap());
        let (a, b) = dom.chord_endpoints(&c(0.0, 0.0), &c(0.5, 0.0)).unwrap();
        assert_eq!(a, c(-1.0, 0.0));
        assert_eq!(b, c(1.0, 0.0));
        assert!(dom.validate().valid);
    }
}
