//! Thinness of geodesic triangles with one side on a line.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::domain::ConvexDomain;
use crate::metric::{ray_point, tangent_direction, GeodesicLine, GeodesicSegment};
use crate::minimize::golden;
use crate::projective::ProjPoint;
use crate::rng;
use crate::Result;

/// Samples per side when measuring distances to the other sides.
const SIDE_SAMPLES: usize = 17;

#[derive(Clone, Debug)]
pub struct ThinnessReport {
    pub d_hat: f64,
    pub b_hat: f64,
    pub triangle_count: usize,
    /// (x, y, z) with y, z on the line.
    pub worst_triangle: (ProjPoint, ProjPoint, ProjPoint),
    /// B for each triangle, in sample order.
    pub b_values: Vec<f64>,
    /// Triangles failing D_hat-thinness on some side.
    pub thin_violations: usize,
}

impl ThinnessReport {
    /// B_hat over the first n triangles.
    pub fn b_hat_prefix(&self, n: usize) -> f64 {
        self.b_values[..n.min(self.b_values.len())]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

fn dist_to_union(dom: &ConvexDomain, p: &DVector<f64>, sides: &[&GeodesicSegment]) -> f64 {
    sides
        .iter()
        .map(|s| s.distance_from(dom, p).1)
        .fold(f64::INFINITY, f64::min)
}

/// sup over w ∈ `side` of d(w, ∪ others): a grid over arclength refined by
/// golden section around the best grid point.
fn side_excursion(dom: &ConvexDomain, side: &GeodesicSegment, others: &[&GeodesicSegment]) -> f64 {
    let len = side.length();
    if len == 0.0 {
        return dist_to_union(dom, &side.point_vec_at(0.0), others);
    }
    let n = SIDE_SAMPLES;
    let h = len / (n - 1) as f64;
    let vals: Vec<f64> = (0..n)
        .map(|k| dist_to_union(dom, &side.point_vec_at(h * k as f64), others))
        .collect();
    let (k, &best) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let lo = (h * k as f64 - h).max(0.0);
    let hi = (h * k as f64 + h).min(len);
    let mut f = |s: f64| -dist_to_union(dom, &side.point_vec_at(s), others);
    let (_, v) = golden(&mut f, lo, hi, 1e-6 * (1.0 + len));
    best.max(-v)
}

/// sup over w ∈ [y, z] of d(w, [x, y] ∪ [x, z]).
pub fn triangle_thinness(
    dom: &ConvexDomain,
    x: &ProjPoint,
    y: &ProjPoint,
    z: &ProjPoint,
) -> Result<f64> {
    let xy = GeodesicSegment::new(dom, x, y)?;
    let xz = GeodesicSegment::new(dom, x, z)?;
    let yz = GeodesicSegment::new(dom, y, z)?;
    Ok(side_excursion(dom, &yz, &[&xy, &xz]))
}

/// Whether every side lies in the D-neighbourhood of the other two, on
/// sampled points.
pub fn is_thin(
    dom: &ConvexDomain,
    x: &ProjPoint,
    y: &ProjPoint,
    z: &ProjPoint,
    d: f64,
) -> Result<bool> {
    let xy = GeodesicSegment::new(dom, x, y)?;
    let xz = GeodesicSegment::new(dom, x, z)?;
    let yz = GeodesicSegment::new(dom, y, z)?;
    let sides = [&xy, &yz, &xz];
    for i in 0..3 {
        let others = [sides[(i + 1) % 3], sides[(i + 2) % 3]];
        for p in sides[i].samples(SIDE_SAMPLES) {
            if dist_to_union(dom, &p, &others) > d + 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Triangle number `i`: y, z uniform on the line within parameter ±cap, x at
/// log-uniform distance in [cap/1000, cap] from a line point along a random
/// direction.
fn sample_triangle(
    dom: &ConvexDomain,
    line: &GeodesicLine,
    cap: f64,
    seed: u64,
    i: u64,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let mut r = rng::stream(seed, i);
    use rand::Rng;
    let foot = line.point_vec(r.gen_range(-cap..cap));
    let lo = (cap * 1e-3).ln();
    let dist = (lo + r.gen::<f64>() * (cap.ln() - lo)).exp();
    let dir = tangent_direction(dom, &mut r);
    let x = ray_point(dom, &foot, &dir, dist);
    let y = line.point_vec(r.gen_range(-cap..cap));
    let z = line.point_vec(r.gen_range(-cap..cap));
    (x, y, z)
}

/// Empirical thinness constants for triangles with one side on `line`.
/// D_hat = 2·B_hat, and every sampled triangle is checked to be
/// D_hat-thin.
pub fn estimate_thinness(
    dom: &ConvexDomain,
    line: &GeodesicLine,
    n_triangles: usize,
    cap: f64,
    seed: u64,
) -> Result<ThinnessReport> {
    let tris: Vec<(ProjPoint, ProjPoint, ProjPoint)> = (0..n_triangles as u64)
        .map(|i| {
            let (x, y, z) = sample_triangle(dom, line, cap, seed, i);
            Ok((ProjPoint::new(x)?, ProjPoint::new(y)?, ProjPoint::new(z)?))
        })
        .collect::<Result<_>>()?;
    let b_values: Vec<f64> = tris
        .par_iter()
        .map(|(x, y, z)| triangle_thinness(dom, x, y, z))
        .collect::<Result<_>>()?;
    let (worst, b_hat) = b_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, b)| if b > acc.1 { (i, b) } else { acc });
    let d_hat = 2.0 * b_hat;
    let thin_violations = tris
        .par_iter()
        .map(|(x, y, z)| is_thin(dom, x, y, z, d_hat).map(|ok| usize::from(!ok)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let worst_triangle = tris
        .get(worst)
        .cloned()
        .unwrap_or_else(|| (line.point(0.0), line.point(0.0), line.point(0.0)));
    Ok(ThinnessReport {
        d_hat,
        b_hat,
        triangle_count: n_triangles,
        worst_triangle,
        b_values,
        thin_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needle_triangle_is_zero() {
        let disk = ConvexDomain::ellipsoid(2);
        let p = |x: f64| ProjPoint::from_slice(&[x, 0.0, 1.0]).unwrap();
        let b = triangle_thinness(&disk, &p(0.5), &p(-0.3), &p(0.1)).unwrap();
        assert!(b < 1e-6, "{b}");
    }

    #[test]
    fn disk_triangles_are_thin() {
        let disk = ConvexDomain::ellipsoid(2);
        let line = GeodesicLine::new(
            &disk,
            &ProjPoint::from_slice(&[1.0, 0.0, 1.0]).unwrap(),
            &ProjPoint::from_slice(&[-1.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap();
        let rep = estimate_thinness(&disk, &line, 200, 6.0, 1).unwrap();
        assert_eq!(rep.thin_violations, 0);
        // Twice the hyperbolic ideal-triangle constant ln(1 + √2) bounds B.
        assert!(
            rep.b_hat <= 2.0 * (1.0 + 2f64.sqrt()).ln() + 1e-6,
            "{}",
            rep.b_hat
        );
        assert!((rep.d_hat - 2.0 * rep.b_hat).abs() < 1e-15);
    }
}
