//! Half triangles, the rank-one verdict and its consequences.

mod contraction;
mod thinness;

pub use contraction::{
    estimate_contraction, morse_gauge, ContractionReport, ContractionTarget, ContractionVerdict,
    MorseReport,
};
pub use thinness::{estimate_thinness, is_thin, triangle_thinness, ThinnessReport};

use nalgebra::DVector;
use serde::Serialize;

use crate::automorphism::{axes, classify, cone_lift, is_automorphism, spectral_with, AxisReport};
use crate::domain::{Classification, ConvexDomain, DomainKind};
use crate::projective::ProjPoint;
use crate::rng;
use crate::{Error, Result};

/// Boundary samples for half-triangle searches on non-polyhedral domains.
pub const HALF_TRIANGLE_SAMPLES: usize = 10_000;

/// Members of an axis family scanned for half triangles.
pub const FAMILY_SAMPLES: usize = 32;

#[derive(Clone, Debug)]
pub struct HalfTriangleScan {
    pub witness: Option<ProjPoint>,
    /// Whether "no witness" means none exists (polyhedral and strictly
    /// convex domains) or only that sampling found none.
    pub exhaustive: bool,
}

fn is_witness(dom: &ConvexDomain, a: &ProjPoint, b: &ProjPoint, z: &ProjPoint) -> bool {
    if z.approx_eq(a, 1e-9) || z.approx_eq(b, 1e-9) {
        return false;
    }
    matches!(dom.classify(z), Ok(Classification::Boundary))
        && dom.segment_in_boundary(a, z).unwrap_or(false)
        && dom.segment_in_boundary(z, b).unwrap_or(false)
}

/// A boundary point z with [a, z] and [z, b] in the boundary, given boundary
/// points a, b whose open segment is interior.
///
/// On polyhedral domains the vertices suffice: if z works, z lies in the face
/// F₁ ∩ F₂ of two boundary faces through a and b, and any vertex of that face
/// other than a, b works too.
pub fn find_half_triangle(
    dom: &ConvexDomain,
    a: &ProjPoint,
    b: &ProjPoint,
) -> Result<HalfTriangleScan> {
    if a.approx_eq(b, dom.tolerances().point) {
        return Err(Error::SegmentNotInterior);
    }
    for p in [a, b] {
        if dom.classify(p)? != Classification::Boundary {
            return Err(Error::NotBoundaryPoint);
        }
    }
    let (ah, bh) = (dom.lift(a)?, dom.lift(b)?);
    let mid = (&ah + &bh) * 0.5;
    if !(dom.cone_slack(mid.as_slice()) > dom.tolerances().point) {
        return Err(Error::SegmentNotInterior);
    }
    if dom.is_strictly_convex() {
        return Ok(HalfTriangleScan {
            witness: None,
            exhaustive: true,
        });
    }
    if let Some(verts) = dom.polyhedral_vertices() {
        let witness = verts
            .into_iter()
            .filter_map(|(v, _)| ProjPoint::new(v).ok())
            .find(|z| is_witness(dom, a, b, z));
        return Ok(HalfTriangleScan {
            witness,
            exhaustive: true,
        });
    }
    let mut candidates = structured_candidates(dom, &ah, &bh);
    let mut r = rng::stream(0x4a1f, 0);
    candidates.extend((0..HALF_TRIANGLE_SAMPLES).map(|_| dom.sample_boundary_vec(&mut r)));
    let witness = candidates
        .into_iter()
        .filter_map(|v| ProjPoint::new(v).ok())
        .find(|z| is_witness(dom, a, b, z));
    Ok(HalfTriangleScan {
        witness,
        exhaustive: false,
    })
}

/// Boundary candidates of a product cone built from the factor components
/// of a and b: (a₁, 0), (0, a₂), (a₁, b₂), ... recursively.
fn structured_candidates(
    dom: &ConvexDomain,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> Vec<DVector<f64>> {
    if !matches!(dom.kind(), DomainKind::Product(..)) {
        return Vec::new();
    }
    components(dom, a, b)
        .into_iter()
        .filter(|v| v.amax() > 0.0)
        .collect()
}

fn components(dom: &ConvexDomain, a: &DVector<f64>, b: &DVector<f64>) -> Vec<DVector<f64>> {
    let DomainKind::Product(f, g) = dom.kind() else {
        return vec![a.clone(), b.clone(), DVector::zeros(a.len()), a + b];
    };
    let k = f.ambient();
    let m = a.len() - k;
    let left = components(f, &a.rows(0, k).into_owned(), &b.rows(0, k).into_owned());
    let right = components(g, &a.rows(k, m).into_owned(), &b.rows(k, m).into_owned());
    let mut out = Vec::new();
    for l in &left {
        for r in &right {
            let mut v = l.clone();
            v.extend(r.iter().copied());
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum RankOneReason {
    ZeroTranslation,
    NoAxis,
    NotBiproximal,
    HalfTriangle(ProjPoint),
    Verified,
}

impl RankOneReason {
    pub fn label(&self) -> &'static str {
        match self {
            RankOneReason::ZeroTranslation => "ZeroTranslation",
            RankOneReason::NoAxis => "NoAxis",
            RankOneReason::NotBiproximal => "NotBiproximal",
            RankOneReason::HalfTriangle(_) => "HalfTriangle",
            RankOneReason::Verified => "Verified",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RankOneVerdict {
    pub is_rank_one: bool,
    pub reason: RankOneReason,
    /// (attracting, repelling)
    pub axis: Option<(ProjPoint, ProjPoint)>,
    pub fast_path_used: bool,
    pub tau: f64,
    pub biproximal: bool,
    /// Axes scanned for half triangles (family members count separately).
    pub axes_scanned: usize,
    pub axes_with_witness: usize,
    /// First half-triangle witness found, also when the verdict is
    /// NotBiproximal.
    pub witness: Option<ProjPoint>,
    pub scan_exhaustive: bool,
}

impl RankOneVerdict {
    fn negative(reason: RankOneReason, tau: f64) -> Self {
        RankOneVerdict {
            is_rank_one: false,
            reason,
            axis: None,
            fast_path_used: false,
            tau,
            biproximal: false,
            axes_scanned: 0,
            axes_with_witness: 0,
            witness: None,
            scan_exhaustive: true,
        }
    }
}

/// Rank-one test: positive translation length, an axis, and no axis inside
/// a half triangle. With `cocompact_hint`, biproximality alone decides once
/// an axis exists.
pub fn is_rank_one(
    dom: &ConvexDomain,
    g: &crate::ProjMap,
    cocompact_hint: bool,
) -> Result<RankOneVerdict> {
    Ok(rank_one_with_axes(dom, g, cocompact_hint)?.0)
}

/// As [`is_rank_one`], also returning the axis report when one was computed.
pub fn rank_one_with_axes(
    dom: &ConvexDomain,
    g: &crate::ProjMap,
    cocompact_hint: bool,
) -> Result<(RankOneVerdict, Option<AxisReport>)> {
    if g.size() != dom.ambient() {
        return Err(Error::DimensionMismatch {
            expected: dom.ambient(),
            got: g.size(),
        });
    }
    if !is_automorphism(g, dom, 50) {
        return Err(Error::NotAnAutomorphism);
    }
    let sd = spectral_with(&cone_lift(g, dom), dom.tolerances())?;
    let tau = sd.translation_length();
    if tau <= dom.tolerances().modulus {
        return Ok((
            RankOneVerdict::negative(RankOneReason::ZeroTranslation, tau),
            None,
        ));
    }
    let report = axes(g, dom)?;
    let Some(axis) = report.axis.clone() else {
        return Ok((
            RankOneVerdict::negative(RankOneReason::NoAxis, tau),
            Some(report),
        ));
    };
    let class = classify(&sd);
    let mut v = RankOneVerdict {
        is_rank_one: false,
        reason: RankOneReason::Verified,
        axis: Some((axis.attracting.clone(), axis.repelling.clone())),
        fast_path_used: false,
        tau,
        biproximal: class.biproximal,
        axes_scanned: 0,
        axes_with_witness: 0,
        witness: None,
        scan_exhaustive: true,
    };
    if cocompact_hint && class.biproximal {
        v.is_rank_one = true;
        v.fast_path_used = true;
        return Ok((v, Some(report)));
    }
    let members: Vec<(ProjPoint, ProjPoint)> = match &axis.family {
        Some(fam) => fam
            .samples(dom, FAMILY_SAMPLES)
            .into_iter()
            .filter(|(a, b)| {
                matches!((dom.lift(a), dom.lift(b)), (Ok(x), Ok(y))
                    if dom.cone_slack(((&x + &y) * 0.5).as_slice()) > dom.tolerances().point)
            })
            .collect(),
        None => vec![(axis.attracting.clone(), axis.repelling.clone())],
    };
    for (a, b) in &members {
        let scan = find_half_triangle(dom, a, b)?;
        v.axes_scanned += 1;
        v.scan_exhaustive &= scan.exhaustive;
        if let Some(z) = scan.witness {
            v.axes_with_witness += 1;
            v.witness.get_or_insert(z);
        }
    }
    v.reason = if !class.biproximal {
        RankOneReason::NotBiproximal
    } else if let Some(z) = &v.witness {
        RankOneReason::HalfTriangle(z.clone())
    } else {
        v.is_rank_one = true;
        RankOneReason::Verified
    };
    Ok((v, Some(report)))
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub biproximal: bool,
    pub axis_unique: bool,
    pub fixed_points_are_endpoints: bool,
    pub boundary_midpoints_interior: bool,
    pub boundary_samples: usize,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.biproximal
            && self.axis_unique
            && self.fixed_points_are_endpoints
            && self.boundary_midpoints_interior
    }
}

fn open_midpoint(dom: &ConvexDomain, p: &DVector<f64>, q: &DVector<f64>) -> bool {
    dom.cone_slack(((p + q) * 0.5).as_slice()) > 0.0
}

/// Consequences of being rank-one, checked on an element with an axis:
/// biproximality, uniqueness of the axis, no fixed points in the closure
/// besides the axis endpoints, and interior segments from each endpoint to
/// other boundary points.
pub fn verify_rank_one_properties(
    dom: &ConvexDomain,
    g: &crate::ProjMap,
    seed: u64,
) -> Result<PropertyReport> {
    let (verdict, report) = rank_one_with_axes(dom, g, false)?;
    let (Some((a, b)), Some(report)) = (verdict.axis.clone(), report) else {
        return Err(Error::InvalidDomain(format!(
            "no axis to check ({})",
            verdict.reason.label()
        )));
    };
    let is_end = |p: &ProjPoint| p.approx_eq(&a, 1e-8) || p.approx_eq(&b, 1e-8);
    let fixed_points_are_endpoints =
        report.fixed_segments.is_empty() && report.fixed_points_in_closure.iter().all(is_end);

    let lifts: Vec<DVector<f64>> = report
        .fixed_points_in_closure
        .iter()
        .filter_map(|p| dom.lift(p).ok())
        .collect();
    let mut spanning = 0;
    for i in 0..lifts.len() {
        for j in (i + 1)..lifts.len() {
            if open_midpoint(dom, &lifts[i], &lifts[j]) {
                spanning += 1;
            }
        }
    }
    let axis_unique = report.pseudo_axes.iter().filter(|p| p.is_axis).count() == 1
        && spanning == 1
        && report.fixed_segments.is_empty();

    let (ah, bh) = (dom.lift(&a)?, dom.lift(&b)?);
    let n = 100;
    let mut ok = true;
    let mut checked = 0;
    for i in 0..n as u64 {
        let mut r = rng::stream(seed, i);
        let z = dom.sample_boundary_vec(&mut r);
        let zp = ProjPoint::new(z.clone())?;
        if zp.angle_to(&a) < 1e-6 || zp.angle_to(&b) < 1e-6 {
            continue;
        }
        checked += 1;
        ok &= open_midpoint(dom, &ah, &z) && open_midpoint(dom, &bh, &z);
    }
    Ok(PropertyReport {
        biproximal: verdict.biproximal,
        axis_unique,
        fixed_points_are_endpoints,
        boundary_midpoints_interior: ok,
        boundary_samples: checked,
    })
}
