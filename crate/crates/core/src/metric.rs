//! The Hilbert distance, geodesic segments and lines, and closest-point
//! projection onto lines.

use nalgebra::DVector;

use crate::domain::ConvexDomain;
use crate::minimize::{bisect_level, bracket, golden, minimize_on};
use crate::projective::ProjPoint;
use crate::{Error, Result};

/// Hilbert distance between f-normalized representatives of two points with
/// positive slack.
///
/// With y − x as the unit of the chord parameter, the chord leaves the domain
/// at −s_a and 1 + s_b, and the log cross-ratio is
/// ln(1 + 1/s_a) + ln(1 + 1/s_b). Both exits are measured from the nearer
/// point, which keeps precision for points close to the boundary.
pub(crate) fn hilbert_lifted(dom: &ConvexDomain, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut buf = [0.0; 16];
    let mut heap = Vec::new();
    let w: &mut [f64] = if x.len() <= buf.len() {
        &mut buf[..x.len()]
    } else {
        heap.resize(x.len(), 0.0);
        &mut heap
    };
    for (wi, (a, b)) in w.iter_mut().zip(x.iter().zip(y.iter())) {
        *wi = b - a;
    }
    if w.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let sb = dom.cone_exit(y.as_slice(), w, 1.0);
    let sa = dom.cone_exit(x.as_slice(), w, -1.0);
    (1.0 / sa).ln_1p() + (1.0 / sb).ln_1p()
}

/// Chord exits (s_a, s_b) as in [`hilbert_lifted`].
fn chord_exits(dom: &ConvexDomain, x: &DVector<f64>, y: &DVector<f64>) -> Result<(f64, f64)> {
    let w = y - x;
    let sb = dom.cone_exit(y.as_slice(), w.as_slice(), 1.0);
    let sa = dom.cone_exit(x.as_slice(), w.as_slice(), -1.0);
    if !sa.is_finite() || !sb.is_finite() {
        return Err(Error::Unbounded);
    }
    Ok((sa, sb))
}

pub(crate) fn interior_lift(dom: &ConvexDomain, p: &ProjPoint) -> Result<DVector<f64>> {
    let v = dom.lift(p)?;
    if dom.cone_slack(v.as_slice()) > 0.0 {
        Ok(v)
    } else {
        Err(Error::NotInterior)
    }
}

/// The point at Hilbert distance r from the interior lift x along the
/// direction w, inverting ln(s₊(u + s₋) / (s₋(s₊ − u))) = r.
pub(crate) fn ray_point(
    dom: &ConvexDomain,
    x: &DVector<f64>,
    w: &DVector<f64>,
    r: f64,
) -> DVector<f64> {
    if r <= 0.0 {
        return x.clone();
    }
    let sp = dom.cone_exit(x.as_slice(), w.as_slice(), 1.0);
    let sm = dom.cone_exit(x.as_slice(), w.as_slice(), -1.0);
    let e = r.exp_m1();
    let u = if sp.is_finite() {
        sp * sm * e / (sp + (1.0 + e) * sm)
    } else {
        sm * e
    };
    let v = x + w * u;
    let f = dom.chart().eval(&v);
    v / f
}

/// Uniformly random direction tangent to the chart.
pub(crate) fn tangent_direction<R: rand::Rng + ?Sized>(
    dom: &ConvexDomain,
    rng: &mut R,
) -> DVector<f64> {
    let b = dom.chart().basis();
    b * crate::rng::unit_vector(rng, b.ncols())
}

pub fn distance(dom: &ConvexDomain, x: &ProjPoint, y: &ProjPoint) -> Result<f64> {
    let xh = interior_lift(dom, x)?;
    let yh = interior_lift(dom, y)?;
    let d = hilbert_lifted(dom, &xh, &yh);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Unbounded)
    }
}

/// Chord parameter u ∈ [0, 1] (x at 0, y at 1) of the point at distance s
/// from x. Inverts d(u) = ln(B(u + A) / (A(B − u))) with A = s_a, B = 1 + s_b.
fn arclength_param(sa: f64, sb: f64, s: f64) -> f64 {
    let (a, b) = (sa, 1.0 + sb);
    let e = (-s).exp();
    let u = a * b * (-(-s).exp_m1()) / (b * e + a);
    u.clamp(0.0, 1.0)
}

pub fn point_at_arclength(
    dom: &ConvexDomain,
    x: &ProjPoint,
    y: &ProjPoint,
    s: f64,
) -> Result<ProjPoint> {
    GeodesicSegment::new(dom, x, y)?.point_at(s)
}

/// A segment [x, y] between interior points, with its chord data cached.
#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    pub x: ProjPoint,
    pub y: ProjPoint,
    xh: DVector<f64>,
    yh: DVector<f64>,
    sa: f64,
    sb: f64,
    length: f64,
}

impl GeodesicSegment {
    pub fn new(dom: &ConvexDomain, x: &ProjPoint, y: &ProjPoint) -> Result<Self> {
        let xh = interior_lift(dom, x)?;
        let yh = interior_lift(dom, y)?;
        let (sa, sb, length) = if (&yh - &xh).amax() == 0.0 {
            (f64::INFINITY, f64::INFINITY, 0.0)
        } else {
            let (sa, sb) = chord_exits(dom, &xh, &yh)?;
            (sa, sb, (1.0 / sa).ln_1p() + (1.0 / sb).ln_1p())
        };
        Ok(GeodesicSegment {
            x: x.clone(),
            y: y.clone(),
            xh,
            yh,
            sa,
            sb,
            length,
        })
    }

    pub(crate) fn from_lifted(
        dom: &ConvexDomain,
        xh: DVector<f64>,
        yh: DVector<f64>,
    ) -> Result<Self> {
        let x = ProjPoint::new(xh)?;
        let y = ProjPoint::new(yh)?;
        Self::new(dom, &x, &y)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Chord endpoints (a, b), ordered a, x, y, b.
    pub fn chord(&self) -> Result<(ProjPoint, ProjPoint)> {
        if self.length == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        let w = &self.yh - &self.xh;
        Ok((
            ProjPoint::new(&self.xh - &w * self.sa)?,
            ProjPoint::new(&self.yh + &w * self.sb)?,
        ))
    }

    pub(crate) fn point_vec_at(&self, s: f64) -> DVector<f64> {
        if self.length == 0.0 {
            return self.xh.clone();
        }
        if s >= self.length {
            return self.yh.clone();
        }
        let u = arclength_param(self.sa, self.sb, s.max(0.0));
        &self.xh * (1.0 - u) + &self.yh * u
    }

    pub fn point_at(&self, s: f64) -> Result<ProjPoint> {
        let tol = 1e-12 * (1.0 + self.length);
        if !(s >= -tol && s <= self.length + tol) {
            return Err(Error::OutOfRange {
                s,
                max: self.length,
            });
        }
        if s <= 0.0 {
            return Ok(self.x.clone());
        }
        if s >= self.length {
            return Ok(self.y.clone());
        }
        ProjPoint::new(self.point_vec_at(s))
    }

    /// n points evenly spaced in arclength, endpoints included.
    pub(crate) fn samples(&self, n: usize) -> Vec<DVector<f64>> {
        if n <= 1 {
            return vec![self.point_vec_at(0.5 * self.length)];
        }
        (0..n)
            .map(|k| self.point_vec_at(self.length * k as f64 / (n - 1) as f64))
            .collect()
    }

    /// Distance from an interior point to the segment, and the arclength of
    /// a closest point.
    pub(crate) fn distance_from(&self, dom: &ConvexDomain, p: &DVector<f64>) -> (f64, f64) {
        if self.length == 0.0 {
            return (0.0, hilbert_lifted(dom, p, &self.xh));
        }
        let mut f = |s: f64| hilbert_lifted(dom, p, &self.point_vec_at(s));
        let (s, v) = minimize_on(&mut f, 0.0, self.length, 8, 1e-8 * (1.0 + self.length));
        (s, v)
    }
}

/// A bi-infinite projective line with boundary endpoints p, q, parametrized
/// by Hilbert arclength: σ(t) → p as t → +∞ and σ(t) → q as t → −∞.
#[derive(Clone, Debug)]
pub struct GeodesicLine {
    pub p: ProjPoint,
    pub q: ProjPoint,
    ph: DVector<f64>,
    qh: DVector<f64>,
}

impl GeodesicLine {
    pub fn new(dom: &ConvexDomain, p: &ProjPoint, q: &ProjPoint) -> Result<Self> {
        let ph = dom.lift(p)?;
        let qh = dom.lift(q)?;
        let mid = (&ph + &qh) * 0.5;
        if !(dom.cone_slack(mid.as_slice()) > 0.0) {
            return Err(Error::LineMissesDomain);
        }
        Ok(GeodesicLine {
            p: p.clone(),
            q: q.clone(),
            ph,
            qh,
        })
    }

    /// The full chord through two interior points; y lies towards `p`.
    pub fn through(dom: &ConvexDomain, x: &ProjPoint, y: &ProjPoint) -> Result<Self> {
        let (a, b) = dom.chord_endpoints(x, y)?;
        Self::new(dom, &b, &a)
    }

    pub(crate) fn point_vec(&self, t: f64) -> DVector<f64> {
        if t >= 0.0 {
            let e = (-t).exp();
            (&self.ph + &self.qh * e) / (1.0 + e)
        } else {
            let e = t.exp();
            (&self.ph * e + &self.qh) / (1.0 + e)
        }
    }

    pub fn point(&self, t: f64) -> ProjPoint {
        ProjPoint::new(self.point_vec(t)).expect("nonzero")
    }

    /// Parameter of the point of the line closest in the chart to `v`, used
    /// as a starting guess.
    fn guess(&self, v: &DVector<f64>) -> f64 {
        let d = &self.ph - &self.qh;
        let u = ((v - &self.qh).dot(&d) / d.norm_squared()).clamp(1e-12, 1.0 - 1e-12);
        // u = 1 / (1 + e^{-t})
        (u / (1.0 - u)).ln()
    }
}

/// Closest-point set of a point to a line.
#[derive(Clone, Debug)]
pub enum LineProjection {
    Singleton {
        t: f64,
        point: ProjPoint,
        distance: f64,
    },
    Interval {
        t_minus: f64,
        t_plus: f64,
        start: ProjPoint,
        end: ProjPoint,
        midpoint: ProjPoint,
        distance: f64,
    },
}

impl LineProjection {
    pub fn distance(&self) -> f64 {
        match self {
            LineProjection::Singleton { distance, .. }
            | LineProjection::Interval { distance, .. } => *distance,
        }
    }

    /// Parameter interval [T−, T+] (degenerate for singletons).
    pub fn params(&self) -> (f64, f64) {
        match self {
            LineProjection::Singleton { t, .. } => (*t, *t),
            LineProjection::Interval {
                t_minus, t_plus, ..
            } => (*t_minus, *t_plus),
        }
    }

    /// The projection point: the point itself, or the midpoint of the interval.
    pub fn point(&self) -> &ProjPoint {
        match self {
            LineProjection::Singleton { point, .. } => point,
            LineProjection::Interval { midpoint, .. } => midpoint,
        }
    }

    pub fn is_interval(&self) -> bool {
        matches!(self, LineProjection::Interval { .. })
    }
}

/// Minimizing set of t ↦ d(x, σ(t)).
///
/// The minimum is found by bracketing and golden section. The set is
/// reported as an interval when the sublevel set at min + ε_flat is wider
/// than ε_proj and the function stays at the minimum (within ε_flat/100)
/// across the middle half of that sublevel set; a strict minimum has a
/// sublevel set of width ~sqrt(ε_flat) but rises to ~ε_flat/4 at its
/// quarter points, so it is not mistaken for a flat.
pub fn closest_point_set(
    dom: &ConvexDomain,
    line: &GeodesicLine,
    x: &ProjPoint,
) -> Result<LineProjection> {
    let xh = interior_lift(dom, x)?;
    closest_point_set_lifted(dom, line, &xh)
}

pub(crate) fn closest_point_set_lifted(
    dom: &ConvexDomain,
    line: &GeodesicLine,
    xh: &DVector<f64>,
) -> Result<LineProjection> {
    let tol = dom.tolerances();
    let mut f = |t: f64| hilbert_lifted(dom, xh, &line.point_vec(t));
    let t0 = line.guess(xh);
    let (lo, hi) = bracket(&mut f, t0, 0.5);
    let (t_star, m) = minimize_on(&mut f, lo, hi, 24, 1e-9 * (1.0 + t_star_scale(lo, hi)));
    if !m.is_finite() {
        return Err(Error::LineMissesDomain);
    }
    let level = m + tol.flat;
    let edge = |dir: f64, f: &mut dyn FnMut(f64) -> f64| -> (f64, f64) {
        let mut step = 1e-4;
        let mut inside = t_star;
        loop {
            let t = t_star + dir * step;
            if !(f(t) <= level) || step > 1e6 {
                return (inside, t);
            }
            inside = t;
            step *= 2.0;
        }
    };
    let mut g = |t: f64| f(t);
    let (in_r, out_r) = edge(1.0, &mut g);
    let (in_l, out_l) = edge(-1.0, &mut g);
    let coarse = |a: f64, b: f64| 1e-3 * (b - a).abs().max(1e-9);
    let r = bisect_level(&mut g, in_r, out_r, level, coarse(in_r, out_r));
    let l = bisect_level(&mut g, in_l, out_l, level, coarse(in_l, out_l));
    let width = r - l;
    let flat = width > tol.proj && {
        let q1 = l + 0.25 * width;
        let q3 = r - 0.25 * width;
        let mid = 0.5 * (l + r);
        [q1, mid, q3].iter().all(|&t| g(t) <= m + tol.flat / 100.0)
    };
    if !flat {
        let point = line.point(t_star);
        return Ok(LineProjection::Singleton {
            t: t_star,
            point,
            distance: m,
        });
    }
    let res = tol.proj / 10.0;
    let t_plus = bisect_level(&mut g, 0.5 * (l + r), out_r, level, res);
    let t_minus = bisect_level(&mut g, 0.5 * (l + r), out_l, level, res);
    let start = line.point(t_minus);
    let end = line.point(t_plus);
    let midpoint = projective_midpoint(dom, &line.point_vec(t_minus), &line.point_vec(t_plus))?;
    Ok(LineProjection::Interval {
        t_minus,
        t_plus,
        start,
        end,
        midpoint,
        distance: m,
    })
}

fn t_star_scale(lo: f64, hi: f64) -> f64 {
    lo.abs().max(hi.abs()).min(1e3)
}

/// Metric midpoint of the segment between two interior lifts.
fn projective_midpoint(
    dom: &ConvexDomain,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<ProjPoint> {
    let seg = GeodesicSegment::from_lifted(dom, a.clone(), b.clone())?;
    seg.point_at(0.5 * seg.length())
}

/// The projection of x to the line: the closest point, or the midpoint of
/// the closest interval.
pub fn project_to_line(
    dom: &ConvexDomain,
    line: &GeodesicLine,
    x: &ProjPoint,
) -> Result<ProjPoint> {
    Ok(closest_point_set(dom, line, x)?.point().clone())
}

/// Sampled two-sided Hausdorff distance between two segments.
pub fn hausdorff_segments(
    dom: &ConvexDomain,
    s1: &GeodesicSegment,
    s2: &GeodesicSegment,
    n_samples: usize,
) -> f64 {
    let one_sided = |a: &GeodesicSegment, b: &GeodesicSegment| {
        a.samples(n_samples)
            .iter()
            .map(|p| b.distance_from(dom, p).1)
            .fold(0.0, f64::max)
    };
    one_sided(s1, s2).max(one_sided(s2, s1))
}

/// Golden-section minimum of the distance between two segments' points,
/// used for coarse separation checks.
#[allow(dead_code)]
pub(crate) fn segment_gap(dom: &ConvexDomain, s1: &GeodesicSegment, s2: &GeodesicSegment) -> f64 {
    let mut f = |s: f64| s2.distance_from(dom, &s1.point_vec_at(s)).1;
    golden(&mut f, 0.0, s1.length(), 1e-6).1
}
