//! Empirical contraction constants of lines and finite point sets.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::domain::ConvexDomain;
use crate::metric::{
    closest_point_set_lifted, hilbert_lifted, interior_lift, ray_point, tangent_direction,
    GeodesicLine, GeodesicSegment,
};
use crate::projective::ProjPoint;
use crate::rng;
use crate::Result;

/// Grid of candidate constants 0.25·2^k, k = 0..16.
pub fn constant_grid() -> impl Iterator<Item = f64> {
    (0..=16).map(|k| 0.25 * f64::powi(2.0, k))
}

/// Smallest grid value ≥ v (or > v when `strict`), ∞ past the grid.
fn grid_ceil(v: f64, strict: bool) -> f64 {
    constant_grid()
        .find(|&c| if strict { c > v } else { c >= v })
        .unwrap_or(f64::INFINITY)
}

/// Growth per doubling of the cap that counts as divergence, averaged over
/// the doublings by a least-squares fit of log max against log cap.
const DIVERGENCE_RATIO: f64 = 1.5;

#[derive(Clone, Debug)]
pub enum ContractionTarget {
    Line(GeodesicLine),
    /// A finite set, e.g. an orbit segment {gᵏx₀}, with nearest-point
    /// projection.
    Points(Vec<ProjPoint>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContractionVerdict {
    Contracting,
    /// Raw maxima per radius cap, growing on average by ≥ 1.5× per doubling
    /// (or leaving the grid).
    NotContracting {
        sisto: Vec<(f64, f64)>,
        bf: Vec<(f64, f64)>,
    },
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub sisto_c: f64,
    pub bf_c: f64,
    pub coarse_gap: f64,
    pub morse_gauge: f64,
    pub samples: usize,
    pub verdict: ContractionVerdict,
    pub sisto_contracting: bool,
    pub bf_contracting: bool,
    /// (cap, grid constant) per radius cap.
    pub sisto_by_cap: Vec<(f64, f64)>,
    pub bf_by_cap: Vec<(f64, f64)>,
    /// (cap, unrounded maximum) per radius cap; divergence is judged on
    /// these, since rounding to the grid can hide a doubling.
    pub sisto_raw_by_cap: Vec<(f64, f64)>,
    pub bf_raw_by_cap: Vec<(f64, f64)>,
    /// Raw (unrounded) maxima at the largest cap.
    pub sisto_raw: f64,
    pub bf_raw: f64,
    /// Per-sample coarse gaps at the largest cap.
    pub gaps: Vec<f64>,
    pub morse: MorseReport,
}

#[derive(Clone, Copy, Debug)]
enum Anchor {
    Param(f64),
    Index(usize),
}

struct Projection {
    pi: Anchor,
    nearest: Vec<Anchor>,
    dist: f64,
}

struct Target<'a> {
    dom: &'a ConvexDomain,
    kind: &'a ContractionTarget,
    lifts: Vec<DVector<f64>>,
}

impl<'a> Target<'a> {
    fn new(dom: &'a ConvexDomain, kind: &'a ContractionTarget) -> Result<Self> {
        let lifts = match kind {
            ContractionTarget::Line(_) => Vec::new(),
            ContractionTarget::Points(ps) => ps
                .iter()
                .map(|p| interior_lift(dom, p))
                .collect::<Result<_>>()?,
        };
        Ok(Target { dom, kind, lifts })
    }

    fn vec(&self, a: Anchor) -> DVector<f64> {
        match (a, self.kind) {
            (Anchor::Param(t), ContractionTarget::Line(l)) => l.point_vec(t),
            (Anchor::Index(i), _) => self.lifts[i].clone(),
            _ => unreachable!("anchor kind matches target"),
        }
    }

    fn anchor_dist(&self, a: Anchor, b: Anchor) -> f64 {
        match (a, b) {
            // σ has unit speed.
            (Anchor::Param(s), Anchor::Param(t)) => (s - t).abs(),
            (Anchor::Index(i), Anchor::Index(j)) => {
                hilbert_lifted(self.dom, &self.lifts[i], &self.lifts[j])
            }
            _ => unreachable!("anchor kind matches target"),
        }
    }

    fn project(&self, x: &DVector<f64>) -> Result<Projection> {
        match self.kind {
            ContractionTarget::Line(l) => {
                let p = closest_point_set_lifted(self.dom, l, x)?;
                let (lo, hi) = p.params();
                Ok(Projection {
                    pi: Anchor::Param(0.5 * (lo + hi)),
                    nearest: vec![Anchor::Param(lo), Anchor::Param(hi)],
                    dist: p.distance(),
                })
            }
            ContractionTarget::Points(_) => {
                let d: Vec<f64> = self
                    .lifts
                    .iter()
                    .map(|p| hilbert_lifted(self.dom, x, p))
                    .collect();
                let m = d.iter().copied().fold(f64::INFINITY, f64::min);
                let nearest: Vec<Anchor> = (0..d.len())
                    .filter(|&i| d[i] <= m + 1e-9)
                    .map(Anchor::Index)
                    .collect();
                Ok(Projection {
                    pi: nearest[0],
                    nearest,
                    dist: m,
                })
            }
        }
    }

    /// A point of the target near the middle of the sampling window.
    fn foot<R: Rng>(&self, r: &mut R, cap: f64) -> DVector<f64> {
        match self.kind {
            ContractionTarget::Line(l) => l.point_vec(r.gen_range(-0.5 * cap..=0.5 * cap)),
            ContractionTarget::Points(_) => self.lifts[r.gen_range(0..self.lifts.len())].clone(),
        }
    }

    /// Random point at uniform distance in [0, cap] from a random foot on
    /// the target.
    fn sample<R: Rng>(&self, r: &mut R, cap: f64) -> DVector<f64> {
        let foot = self.foot(r, cap);
        let dist = r.gen::<f64>() * cap;
        let dir = tangent_direction(self.dom, r);
        ray_point(self.dom, &foot, &dir, dist)
    }
}

struct CapResult {
    sisto: f64,
    sisto_raw: f64,
    bf: f64,
    bf_raw: f64,
    gaps: Vec<f64>,
}

/// Minimal passing Sisto constant for one pair: the pair constrains C only
/// while d(π(x), π(y)) ≥ C, so any grid value above that distance passes,
/// as does any value at least the excursion of [x, y] from π(x), π(y).
fn sisto_pair(t: &Target, x: &DVector<f64>, y: &DVector<f64>) -> Result<(f64, f64, f64)> {
    let px = t.project(x)?;
    let py = t.project(y)?;
    let dp = t.anchor_dist(px.pi, py.pi);
    let seg = GeodesicSegment::from_lifted(t.dom, x.clone(), y.clone())?;
    let g = seg
        .distance_from(t.dom, &t.vec(px.pi))
        .1
        .max(seg.distance_from(t.dom, &t.vec(py.pi)).1);
    let gap = px
        .nearest
        .iter()
        .map(|&a| t.anchor_dist(px.pi, a))
        .fold(0.0, f64::max);
    Ok((grid_ceil(g, false).min(grid_ceil(dp, true)), g.min(dp), gap))
}

/// Diameter of the nearest-point projection of B(x, R), R < d(x, A), from
/// the projections of x and of points on the sphere of radius R.
fn bf_ball(t: &Target, x: &DVector<f64>, u: f64, dirs: &[DVector<f64>]) -> Result<f64> {
    let px = t.project(x)?;
    let radius = u * px.dist;
    let mut anchors = px.nearest.clone();
    for d in dirs {
        let y = ray_point(t.dom, x, d, radius);
        anchors.extend(t.project(&y)?.nearest);
    }
    let mut diam: f64 = 0.0;
    for i in 0..anchors.len() {
        for j in (i + 1)..anchors.len() {
            diam = diam.max(t.anchor_dist(anchors[i], anchors[j]));
        }
    }
    Ok(diam)
}

fn sphere_directions<R: Rng>(dom: &ConvexDomain, r: &mut R) -> Vec<DVector<f64>> {
    let b = dom.chart().basis();
    if b.ncols() == 2 {
        let phase: f64 = r.gen::<f64>() * std::f64::consts::TAU;
        (0..16)
            .map(|k| {
                let th = phase + std::f64::consts::TAU * k as f64 / 16.0;
                b.column(0) * th.cos() + b.column(1) * th.sin()
            })
            .collect()
    } else {
        (0..32).map(|_| tangent_direction(dom, r)).collect()
    }
}

fn run_cap(t: &Target, n: usize, cap: f64, seed: u64) -> Result<CapResult> {
    let rows: Vec<(f64, f64, f64, f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let x = t.sample(&mut r, cap);
            let y = t.sample(&mut r, cap);
            let (s, s_raw, gap) = sisto_pair(t, &x, &y)?;
            // Radii concentrate near d(x, A), where projections spread most.
            let u = 1.0 - r.gen::<f64>().powi(2);
            let dirs = sphere_directions(t.dom, &mut r);
            let bf_raw = bf_ball(t, &x, u.min(1.0 - 1e-9), &dirs)?;
            Ok((s, s_raw, grid_ceil(bf_raw, false), bf_raw, gap))
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.25, f64::max);
    Ok(CapResult {
        sisto: max(|r| r.0),
        sisto_raw: max(|r| r.1),
        bf: max(|r| r.2),
        bf_raw: max(|r| r.3),
        gaps: rows.iter().map(|r| r.4).collect(),
    })
}

fn diverges(series: &[(f64, f64)]) -> bool {
    if series.iter().any(|(_, c)| !c.is_finite()) {
        return true;
    }
    // A single noisy doubling should not decide: maxima over samples are
    // heavy-tailed, so fit the growth rate instead.
    if series.len() < 2 || series.iter().any(|(_, c)| *c <= 0.0) {
        return false;
    }
    let xs: Vec<f64> = series.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.log2()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx >= DIVERGENCE_RATIO.log2()
}

/// Sisto and Bestvina–Fujiwara constants at radius caps cap/8, cap/4, cap/2,
/// cap (n_samples each), the coarse gap between the projection and the
/// nearest-point projection, and the Morse gauge of (3,3)-quasigeodesics.
pub fn estimate_contraction(
    dom: &ConvexDomain,
    target: &ContractionTarget,
    n_samples: usize,
    cap: f64,
    seed: u64,
) -> Result<ContractionReport> {
    let t = Target::new(dom, target)?;
    let caps = [cap / 8.0, cap / 4.0, cap / 2.0, cap];
    let mut sisto_by_cap = Vec::new();
    let mut bf_by_cap = Vec::new();
    let mut sisto_raw_by_cap = Vec::new();
    let mut bf_raw_by_cap = Vec::new();
    let mut last = None;
    for (k, &c) in caps.iter().enumerate() {
        let res = run_cap(&t, n_samples, c, seed.wrapping_add(k as u64 * 0x9e37_79b9))?;
        sisto_by_cap.push((c, res.sisto));
        bf_by_cap.push((c, res.bf));
        sisto_raw_by_cap.push((
            c,
            if res.sisto.is_finite() {
                res.sisto_raw
            } else {
                f64::INFINITY
            },
        ));
        bf_raw_by_cap.push((
            c,
            if res.bf.is_finite() {
                res.bf_raw
            } else {
                f64::INFINITY
            },
        ));
        last = Some(res);
    }
    let last = last.expect("caps nonempty");
    let sisto_contracting = !diverges(&sisto_raw_by_cap);
    let bf_contracting = !diverges(&bf_raw_by_cap);
    let verdict = if sisto_contracting && bf_contracting {
        ContractionVerdict::Contracting
    } else {
        ContractionVerdict::NotContracting {
            sisto: sisto_raw_by_cap.clone(),
            bf: bf_raw_by_cap.clone(),
        }
    };
    let morse = morse_gauge(dom, target, n_samples.min(1000), cap, seed ^ 0x3c3c)?;
    Ok(ContractionReport {
        sisto_c: last.sisto,
        bf_c: last.bf,
        coarse_gap: last.gaps.iter().copied().fold(0.0, f64::max),
        morse_gauge: morse.gauge,
        samples: n_samples,
        verdict,
        sisto_contracting,
        bf_contracting,
        sisto_by_cap,
        bf_by_cap,
        sisto_raw_by_cap,
        bf_raw_by_cap,
        sisto_raw: last.sisto_raw,
        bf_raw: last.bf_raw,
        gaps: last.gaps,
        morse,
    })
}

#[derive(Clone, Debug)]
pub struct MorseReport {
    /// Grid constant bounding every accepted excursion.
    pub gauge: f64,
    pub max_excursion: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// Excursion of each accepted path.
    pub excursions: Vec<f64>,
}

/// Quasigeodesic constants used for the Morse check.
pub const MORSE_K: f64 = 3.0;
pub const MORSE_C: f64 = 3.0;
const LEGS: usize = 16;

/// Whether a polygonal path through `pts` is a (K, C)-quasigeodesic at its
/// vertices: d(pᵢ, pⱼ) ≥ ℓᵢⱼ/K − C for the path length ℓᵢⱼ between them.
pub(crate) fn is_quasigeodesic(dom: &ConvexDomain, pts: &[DVector<f64>], k: f64, c: f64) -> bool {
    let legs: Vec<f64> = pts
        .windows(2)
        .map(|w| hilbert_lifted(dom, &w[0], &w[1]))
        .collect();
    let mut cum = vec![0.0];
    for l in &legs {
        cum.push(cum.last().unwrap() + l);
    }
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let len = cum[j] - cum[i];
            let d = hilbert_lifted(dom, &pts[i], &pts[j]);
            if d < len / k - c || d > k * len + c {
                return false;
            }
        }
    }
    true
}

/// Paths from one target point to another: the segment between them cut
/// into 16 legs whose inner vertices are moved by at most 1 in random
/// directions; only (3,3)-quasigeodesics are kept. The gauge is the grid
/// constant above the largest distance from a path point to the target.
pub fn morse_gauge(
    dom: &ConvexDomain,
    target: &ContractionTarget,
    n_paths: usize,
    cap: f64,
    seed: u64,
) -> Result<MorseReport> {
    let t = Target::new(dom, target)?;
    let rows: Vec<Option<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let (a, b) = match target {
                ContractionTarget::Line(l) => {
                    let s = r.gen_range(-0.5 * cap..=0.5 * cap);
                    let len = r.gen_range(1.0..=cap.max(1.0));
                    (l.point_vec(s), l.point_vec(s + len))
                }
                ContractionTarget::Points(_) => (t.foot(&mut r, cap), t.foot(&mut r, cap)),
            };
            if hilbert_lifted(dom, &a, &b) == 0.0 {
                return Ok(Some(0.0));
            }
            let chord = GeodesicSegment::from_lifted(dom, a, b)?;
            let mut pts = chord.samples(LEGS + 1);
            for p in pts.iter_mut().take(LEGS).skip(1) {
                let dir = tangent_direction(dom, &mut r);
                *p = ray_point(dom, p, &dir, r.gen::<f64>());
            }
            if !is_quasigeodesic(dom, &pts, MORSE_K, MORSE_C) {
                return Ok(None);
            }
            let mut worst: f64 = 0.0;
            for w in pts.windows(2) {
                let leg = GeodesicSegment::from_lifted(dom, w[0].clone(), w[1].clone())?;
                for q in leg.samples(9) {
                    worst = worst.max(t.project(&q)?.dist);
                }
            }
            Ok(Some(worst))
        })
        .collect::<Result<_>>()?;
    let excursions: Vec<f64> = rows.iter().flatten().copied().collect();
    let max_excursion = excursions.iter().copied().fold(0.0, f64::max);
    Ok(MorseReport {
        gauge: grid_ceil(max_excursion, false),
        max_excursion,
        accepted: excursions.len(),
        rejected: rows.len() - excursions.len(),
        excursions,
    })
}
