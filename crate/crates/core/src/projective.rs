//! Points, maps and affine charts of real projective space.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, Tolerances};

/// A point of P(R^{d+1}), stored as a unit vector whose first nonzero entry
/// is positive.
#[derive(Clone, Debug)]
pub struct ProjPoint {
    coords: DVector<f64>,
}

impl ProjPoint {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        let mut coords = v / norm;
        // Entries below this are treated as zero when fixing the sign.
        let pivot = coords.iter().position(|c| c.abs() > 1e-12).unwrap_or(0);
        if coords[pivot] < 0.0 {
            coords.neg_mut();
        }
        Ok(ProjPoint { coords })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        ProjPoint { coords: v }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    /// Length of the homogeneous coordinate vector (d + 1).
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Projective dimension d.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// Angle in [0, π/2] between the two lines through the origin.
    pub fn angle_to(&self, other: &ProjPoint) -> f64 {
        wedge_norm(&self.coords, &other.coords).min(1.0).asin()
    }

    pub fn approx_eq(&self, other: &ProjPoint, tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let d1 = (&self.coords - &other.coords).amax();
        let d2 = (&self.coords + &other.coords).amax();
        d1.min(d2) <= tol
    }
}

impl PartialEq for ProjPoint {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, Tolerances::default().point)
    }
}

/// Norm of u ∧ v, i.e. sqrt(sum_{i<j} (u_i v_j - u_j v_i)^2).
pub fn wedge_norm(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            let m = u[i] * v[j] - u[j] * v[i];
            s += m * m;
        }
    }
    s.sqrt()
}

/// A projective transformation given by one of its lifts.
///
/// The inverse is kept alongside the matrix. Long words in a group are badly
/// conditioned and inverting them numerically loses the small end of the
/// spectrum, so products carry their exact inverse.
#[derive(Clone, Debug)]
pub struct ProjMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl ProjMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().det)
    }

    pub fn with_tolerance(matrix: DMatrix<f64>, eps_det: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let det = matrix.determinant();
        if !(det.abs() > eps_det) || matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular(det));
        }
        let inverse = matrix.clone().try_inverse().ok_or(Error::Singular(det))?;
        Ok(ProjMap { matrix, inverse })
    }

    /// Trusts the caller that `inverse` is the inverse of `matrix`.
    pub fn with_inverse(matrix: DMatrix<f64>, inverse: DMatrix<f64>) -> Self {
        ProjMap { matrix, inverse }
    }

    pub fn identity(n: usize) -> Self {
        ProjMap {
            matrix: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inverse(&self) -> ProjMap {
        ProjMap {
            matrix: self.inverse.clone(),
            inverse: self.matrix.clone(),
        }
    }

    /// The product `self · other` (apply `other` first).
    pub fn compose(&self, other: &ProjMap) -> ProjMap {
        let mut matrix = &self.matrix * &other.matrix;
        let mut inverse = &other.inverse * &self.inverse;
        // Keep entries away from overflow; the scale is irrelevant.
        let s = matrix.amax();
        if !(1e-100..=1e100).contains(&s) {
            matrix /= s;
            inverse *= s;
        }
        ProjMap { matrix, inverse }
    }

    pub fn negated(&self) -> ProjMap {
        ProjMap {
            matrix: -&self.matrix,
            inverse: -&self.inverse,
        }
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

pub fn apply_map(g: &ProjMap, p: &ProjPoint) -> ProjPoint {
    // An invertible matrix never sends a unit vector to zero.
    ProjPoint::new(g.apply_vec(p.coords())).expect("invertible map")
}

/// Cross-ratio (|b-x||y-a|)/(|b-y||x-a|) of four collinear points.
pub fn cross_ratio(a: &ProjPoint, x: &ProjPoint, y: &ProjPoint, b: &ProjPoint) -> Result<f64> {
    cross_ratio_with(a, x, y, b, &Tolerances::default())
}

pub fn cross_ratio_with(
    a: &ProjPoint,
    x: &ProjPoint,
    y: &ProjPoint,
    b: &ProjPoint,
    tol: &Tolerances,
) -> Result<f64> {
    let n = a.len();
    if [x, y, b].iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: [x, y, b].iter().map(|p| p.len()).find(|&m| m != n).unwrap(),
        });
    }
    if n >= 3 {
        let m = DMatrix::from_columns(&[
            a.coords().clone(),
            x.coords().clone(),
            y.coords().clone(),
            b.coords().clone(),
        ]);
        let sv = m.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|p, q| q.total_cmp(p));
        if s[2] > tol.collinear * s[0] {
            return Err(Error::NonCollinear);
        }
    }
    let by = wedge_norm(b.coords(), y.coords());
    let xa = wedge_norm(x.coords(), a.coords());
    if by < tol.point || xa < tol.point {
        return Err(Error::DegenerateConfiguration);
    }
    let bx = wedge_norm(b.coords(), x.coords());
    let ya = wedge_norm(y.coords(), a.coords());
    Ok(bx * ya / (by * xa))
}

/// An affine chart {v : f(v) = 1} with coordinates relative to an origin and
/// a basis of ker f.
#[derive(Clone, Debug)]
pub struct AffineChart {
    functional: DVector<f64>,
    origin: DVector<f64>,
    basis: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl AffineChart {
    pub fn new(
        functional: DVector<f64>,
        origin: DVector<f64>,
        basis: DMatrix<f64>,
    ) -> Result<Self> {
        let n = functional.len();
        if origin.len() != n || basis.nrows() != n || basis.ncols() + 1 != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: origin.len(),
            });
        }
        if (functional.dot(&origin) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDomain(
                "chart origin must satisfy f(o) = 1".into(),
            ));
        }
        if (basis.transpose() * &functional).amax() > 1e-12 {
            return Err(Error::InvalidDomain("chart basis must lie in ker f".into()));
        }
        let pinv = if basis.ncols() == 0 {
            DMatrix::zeros(0, n)
        } else {
            basis
                .clone()
                .pseudo_inverse(1e-14)
                .map_err(|e| Error::InvalidDomain(e.to_string()))?
        };
        Ok(AffineChart {
            functional,
            origin,
            basis,
            pinv,
        })
    }

    /// The chart x_{d+1} = 1 with coordinates x_1..x_d.
    pub fn standard(n: usize) -> Self {
        let mut f = DVector::zeros(n);
        f[n - 1] = 1.0;
        let basis = DMatrix::identity(n, n - 1);
        AffineChart::new(f.clone(), f, basis).expect("standard chart")
    }

    /// A chart for a given functional, with an orthonormal basis of its kernel.
    pub fn from_functional(f: DVector<f64>) -> Result<Self> {
        let n = f.len();
        let fn2 = f.norm_squared();
        if !(fn2 > 0.0) {
            return Err(Error::ZeroVector);
        }
        let origin = &f / fn2;
        let unit = &f / fn2.sqrt();
        // Gram-Schmidt the standard basis against f, dropping the most
        // aligned vector.
        let drop = unit.iamax();
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        for i in (0..n).filter(|&i| i != drop) {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            v -= &unit * unit[i];
            for c in &cols {
                let p = c.dot(&v);
                v -= c * p;
            }
            cols.push(v.normalize());
        }
        AffineChart::new(f, origin, DMatrix::from_columns(&cols))
    }

    pub fn functional(&self) -> &DVector<f64> {
        &self.functional
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        self.functional.dot(v)
    }

    /// Representative of `p` on the hyperplane f = 1.
    pub fn lift(&self, p: &ProjPoint, eps: f64) -> Result<DVector<f64>> {
        let f = self.eval(p.coords());
        if f.abs() <= eps {
            return Err(Error::PointAtInfinity);
        }
        Ok(p.coords() / f)
    }

    pub fn to_affine(&self, p: &ProjPoint) -> Result<DVector<f64>> {
        let v = self.lift(p, Tolerances::default().point)?;
        Ok(&self.pinv * (v - &self.origin))
    }

    pub fn from_affine(&self, c: &[f64]) -> Result<ProjPoint> {
        if c.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: c.len(),
            });
        }
        ProjPoint::new(&self.origin + &self.basis * DVector::from_column_slice(c))
    }
}

/// Affine coordinates of `p`, then back; returns the affine coordinates.
pub fn chart_roundtrip(chart: &AffineChart, p: &ProjPoint) -> Result<DVector<f64>> {
    let c = chart.to_affine(p)?;
    let back = chart.from_affine(c.as_slice())?;
    debug_assert!(back.approx_eq(p, 1e-8));
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> ProjPoint {
        ProjPoint::from_slice(v).unwrap()
    }

    #[test]
    fn canonical_sign() {
        let p = pt(&[-2.0, 1.0, 0.0]);
        assert!(p.coords()[0] > 0.0);
        assert!((p.coords().norm() - 1.0).abs() < 1e-15);
        assert_eq!(p, pt(&[4.0, -2.0, 0.0]));
        assert_eq!(
            ProjPoint::from_slice(&[0.0, 0.0]).unwrap_err(),
            Error::ZeroVector
        );
    }

    #[test]
    fn disk_chord_cross_ratio() {
        for k in 1..10 {
            let r = k as f64 / 10.0;
            let cr = cross_ratio(
                &pt(&[-1.0, 0.0, 1.0]),
                &pt(&[0.0, 0.0, 1.0]),
                &pt(&[r, 0.0, 1.0]),
                &pt(&[1.0, 0.0, 1.0]),
            )
            .unwrap();
            assert!((cr - (1.0 + r) / (1.0 - r)).abs() < 1e-12);
        }
    }

    #[test]
    fn real_line_cross_ratio() {
        let p = |t: f64| pt(&[t, 1.0]);
        let cr = cross_ratio(&p(0.0), &p(1.0), &p(2.0), &p(4.0)).unwrap();
        assert!((cr - 3.0).abs() < 1e-12);
        let one = cross_ratio(&p(0.0), &p(1.0), &p(1.0), &p(4.0)).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_ratio_errors() {
        let e = cross_ratio(
            &pt(&[1.0, 0.0, 0.0]),
            &pt(&[0.0, 1.0, 0.0]),
            &pt(&[0.0, 0.0, 1.0]),
            &pt(&[1.0, 1.0, 1.0]),
        );
        assert_eq!(e.unwrap_err(), Error::NonCollinear);
        let p = |t: f64| pt(&[t, 1.0]);
        assert_eq!(
            cross_ratio(&p(0.0), &p(0.0), &p(2.0), &p(4.0)).unwrap_err(),
            Error::DegenerateConfiguration
        );
    }

    #[test]
    fn maps_are_projective() {
        let p = pt(&[0.3, -0.2, 0.9]);
        assert_eq!(apply_map(&ProjMap::identity(3), &p), p);
        let two = ProjMap::diagonal(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(apply_map(&two, &p), p);
        assert!(matches!(
            ProjMap::diagonal(&[1.0, 0.0, 1.0]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn simplex_chart_vertex() {
        let n = 3;
        let f = DVector::from_element(n, 1.0);
        let mut o = DVector::zeros(n);
        o[n - 1] = 1.0;
        let mut b = DMatrix::zeros(n, n - 1);
        for i in 0..n - 1 {
            b[(i, i)] = 1.0;
            b[(n - 1, i)] = -1.0;
        }
        let chart = AffineChart::new(f, o, b).unwrap();
        let c = chart_roundtrip(&chart, &ProjPoint::basis(3, 0)).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && c[1].abs() < 1e-14);
        assert_eq!(
            chart.to_affine(&pt(&[1.0, -1.0, 0.0])).unwrap_err(),
            Error::PointAtInfinity
        );
    }

    #[test]
    fn functional_chart_roundtrip() {
        let chart =
            AffineChart::from_functional(DVector::from_vec(vec![0.2, 0.5, 1.0, 0.1])).unwrap();
        let p = pt(&[0.1, 0.4, 0.7, 0.2]);
        let c = chart.to_affine(&p).unwrap();
        assert!(chart
            .from_affine(c.as_slice())
            .unwrap()
            .approx_eq(&p, 1e-13));
    }
}
