//! Spectral data, translation length, proximality classes, axes and
//! ω-limit sampling for projective automorphisms.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{Classification, ConvexDomain};
use crate::minimize::golden;
use crate::projective::{ProjMap, ProjPoint};
use crate::rng;
use crate::{Error, Result, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpectralPosition {
    Top,
    Middle,
    Bottom,
}

/// Real eigenvalue with its eigenspace (orthonormal columns).
#[derive(Clone, Debug)]
pub struct RealEigenspace {
    pub value: f64,
    pub basis: DMatrix<f64>,
    pub position: SpectralPosition,
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Sorted by nonincreasing modulus.
    pub eigenvalues: Vec<Complex64>,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub e_plus: DMatrix<f64>,
    pub e_minus: DMatrix<f64>,
    pub l_plus: DMatrix<f64>,
    pub l_minus: DMatrix<f64>,
    pub k_plus: DMatrix<f64>,
    pub k_minus: DMatrix<f64>,
    pub jordan_defect_top: usize,
    pub jordan_defect_bottom: usize,
    /// Algebraic multiplicity of the top and bottom moduli.
    pub top_count: usize,
    pub bottom_count: usize,
    /// A real eigenvalue at the top (bottom) modulus, if any.
    pub top_real: Option<f64>,
    pub bottom_real: Option<f64>,
    pub moduli_separated: bool,
    pub real_eigenspaces: Vec<RealEigenspace>,
}

impl SpectralData {
    pub fn translation_length(&self) -> f64 {
        (self.lambda_max / self.lambda_min).ln().max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IsometryClass {
    pub bi_semi_proximal: bool,
    pub biproximal: bool,
    pub loxodromic: bool,
    pub tau: f64,
}

struct Cluster {
    value: Complex64,
    mult: usize,
}

fn scaled(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let s = m.norm();
    (m / s, s)
}

fn eigenvalues_of(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::IllConditioned("Schur iteration did not converge".into()))?;
    let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    Ok(ev)
}

/// Right singular vectors of `a` for its k smallest singular values.
fn smallest_singular_vectors(a: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    // Thin SVD of a wide matrix has fewer singular values than columns; the
    // missing directions are exactly null.
    let have = svd.singular_values.len();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    if have < n {
        let full = DMatrix::from_rows(
            &(0..have)
                .map(|i| vt.row(i).into_owned())
                .collect::<Vec<_>>(),
        );
        let comp = complement(&full.transpose());
        for c in comp.column_iter().take(k) {
            cols.push(c.into_owned());
            vals.push(0.0);
        }
    }
    for &i in idx.iter() {
        if cols.len() >= k {
            break;
        }
        cols.push(vt.row(i).transpose());
        vals.push(svd.singular_values[i]);
    }
    if cols.is_empty() {
        return (DMatrix::zeros(n, 0), vals);
    }
    (DMatrix::from_columns(&cols), vals)
}

/// Null space of `a` with singular values below `tol`.
fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    let (v, s) = smallest_singular_vectors(a, n);
    let k = s.iter().take_while(|&&x| x <= tol).count();
    v.columns(0, k).into_owned()
}

/// Left singular vectors for the k largest singular values.
fn range(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    DMatrix::from_columns(
        &idx[..k]
            .iter()
            .map(|&i| u.column(i).into_owned())
            .collect::<Vec<_>>(),
    )
}

/// Orthonormal basis of the span of the columns.
fn orthonormalize(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return a.clone();
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol * smax.max(1e-300))
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of the column span.
fn complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let q = orthonormalize(a, 1e-12);
    let p = DMatrix::identity(n, n) - &q * q.transpose();
    range(&p, n - q.ncols())
}

/// Intersection of two column spans.
fn intersect(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut m = DMatrix::zeros(n, a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(&(-b));
    let null = null_space(&m, tol);
    if null.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    orthonormalize(&(a * null.rows(0, a.ncols())), 1e-8)
}

fn mat_pow(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let mut r = a.clone();
    for _ in 1..m {
        r = &r * a;
    }
    r
}

/// Polynomial annihilating the cluster: (M − λ) for real λ, the real
/// quadratic factor for a complex pair.
fn factor(m: &DMatrix<f64>, v: Complex64, real: bool) -> DMatrix<f64> {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    if real {
        m - id * v.re
    } else {
        m * m - m * (2.0 * v.re) + id * v.norm_sqr()
    }
}

fn is_real(v: Complex64, tol: f64) -> bool {
    v.im.abs() <= tol * v.norm().max(1e-300)
}

/// Distinct values among eigenvalues of a single modulus, with algebraic
/// multiplicities. Complex conjugates stay separate.
fn clusters(vals: &[Complex64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for &v in vals {
        let v = if is_real(v, tol) {
            Complex64::new(v.re, 0.0)
        } else {
            v
        };
        match out
            .iter_mut()
            .find(|c| (c.value - v).norm() <= tol * v.norm().max(1e-300) * 4.0)
        {
            Some(c) => c.mult += 1,
            None => out.push(Cluster { value: v, mult: 1 }),
        }
    }
    out
}

struct ExtremeSpaces {
    e: DMatrix<f64>,
    l: DMatrix<f64>,
    k: DMatrix<f64>,
    defect: usize,
    count: usize,
    real: Option<f64>,
    reals: Vec<(f64, DMatrix<f64>)>,
}

/// Subspaces at the top modulus of `m` (already scaled to unit norm), whose
/// top eigenvalues are `top`.
fn extreme_spaces(m: &DMatrix<f64>, top: &[Complex64], tol: &Tolerances) -> ExtremeSpaces {
    let n = m.nrows();
    let cl = clusters(top, tol.modulus);
    let mut e_cols: Vec<DVector<f64>> = Vec::new();
    let mut l_cols: Vec<DVector<f64>> = Vec::new();
    let mut p = DMatrix::<f64>::identity(n, n);
    let mut reals = Vec::new();
    let mut real = None;
    let mut count = 0;
    for c in &cl {
        let r = c.value.im == 0.0;
        if !r && c.value.im < 0.0 {
            continue;
        }
        let a = factor(m, c.value, r);
        let e = null_space(&a, tol.rank * a.norm().max(1.0));
        // Null space must be at least one eigenvector; numerically a cluster
        // can miss the threshold, in which case take the best direction.
        let width = if r { 1 } else { 2 };
        let e = if e.ncols() == 0 {
            smallest_singular_vectors(&a, width).0
        } else {
            e
        };
        let k = if r { c.mult } else { 2 * c.mult };
        let l = smallest_singular_vectors(&mat_pow(&a, c.mult), k).0;
        e_cols.extend(e.column_iter().map(|x| x.into_owned()));
        l_cols.extend(l.column_iter().map(|x| x.into_owned()));
        p = &p * mat_pow(&a, c.mult);
        count += k;
        if r {
            if real.is_none() || c.value.re > 0.0 {
                real = Some(c.value.re);
            }
            reals.push((c.value.re, e.clone()));
        }
    }
    let e = orthonormalize(&DMatrix::from_columns(&e_cols), 1e-8);
    let l = orthonormalize(&DMatrix::from_columns(&l_cols), 1e-8);
    let k = range(&p, n.saturating_sub(l.ncols()));
    let defect = count.saturating_sub(e.ncols());
    ExtremeSpaces {
        e,
        l,
        k,
        defect,
        count,
        real,
        reals,
    }
}

/// Spectral data of a lift. Small eigenvalues are read off the inverse, so
/// badly conditioned products keep both ends of their spectrum.
pub fn spectral(g: &ProjMap, eps_mod: f64) -> Result<SpectralData> {
    let tol = Tolerances {
        modulus: eps_mod,
        ..Tolerances::default()
    };
    spectral_with(g, &tol)
}

pub fn spectral_with(g: &ProjMap, tol: &Tolerances) -> Result<SpectralData> {
    let n = g.size();
    let (gs, gn) = scaled(g.matrix());
    let (hs, hn) = scaled(g.inverse_matrix());
    let eg = eigenvalues_of(&gs)?;
    let eh = eigenvalues_of(&hs)?;
    // Eigenvalue λ of g is accurate to ε‖g‖ from g and to ε‖g⁻¹‖|λ|² from
    // g⁻¹; the two agree at |λ|² = ‖g‖/‖g⁻¹‖.
    let thr = (gn / hn).sqrt();
    let mut eigenvalues: Vec<Complex64> = (0..n)
        .map(|i| {
            let from_g = eg[i] * gn;
            if from_g.norm() >= thr {
                from_g
            } else {
                (eh[n - 1 - i] * hn).inv()
            }
        })
        .collect();
    eigenvalues.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    if eigenvalues
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() == 0.0)
    {
        return Err(Error::IllConditioned("non-finite eigenvalue".into()));
    }
    let lambda_max = eigenvalues[0].norm();
    let lambda_min = eigenvalues[n - 1].norm();

    let top_vals: Vec<Complex64> = eg
        .iter()
        .take_while(|v| v.norm() >= eg[0].norm() * (1.0 - tol.modulus))
        .copied()
        .collect();
    let bot_vals: Vec<Complex64> = eh
        .iter()
        .take_while(|v| v.norm() >= eh[0].norm() * (1.0 - tol.modulus))
        .copied()
        .collect();
    for (m, vals) in [(&gs, &top_vals), (&hs, &bot_vals)] {
        let v = vals[0];
        let a = factor(m, v, is_real(v, tol.modulus));
        let smin = smallest_singular_vectors(&a, 1).1[0];
        if smin > tol.residual * a.norm().max(1.0) {
            return Err(Error::IllConditioned(format!("eigen residual {smin:e}")));
        }
    }
    let top = extreme_spaces(&gs, &top_vals, tol);
    let bot = extreme_spaces(&hs, &bot_vals, tol);
    let moduli_separated = eigenvalues
        .windows(2)
        .all(|w| w[1].norm() < w[0].norm() * (1.0 - tol.modulus));

    let mut real_eigenspaces = Vec::new();
    for (v, b) in &top.reals {
        real_eigenspaces.push(RealEigenspace {
            value: v * gn,
            basis: b.clone(),
            position: SpectralPosition::Top,
        });
    }
    let n_mid = n.saturating_sub(top.count + bot.count);
    if top.count + bot.count > n {
        // Every modulus is extreme (e.g. the identity): top and bottom coincide.
    } else if n_mid > 0 {
        let mid = intersect(&top.k, &bot.k, 1e-8);
        let mid_vals: Vec<Complex64> = eigenvalues[top.count..n - bot.count].to_vec();
        real_eigenspaces.extend(middle_eigenspaces(
            &gs, gn, &hs, hn, thr, &mid, &mid_vals, tol,
        ));
    }
    if top.count + bot.count <= n {
        for (v, b) in &bot.reals {
            real_eigenspaces.push(RealEigenspace {
                value: 1.0 / (v * hn),
                basis: b.clone(),
                position: SpectralPosition::Bottom,
            });
        }
    }

    Ok(SpectralData {
        eigenvalues,
        lambda_max,
        lambda_min,
        jordan_defect_top: top.defect,
        jordan_defect_bottom: bot.defect,
        top_count: top.count,
        bottom_count: bot.count,
        top_real: top.real.map(|v| v * gn),
        bottom_real: bot.real.map(|v| 1.0 / (v * hn)),
        e_plus: top.e,
        e_minus: bot.e,
        l_plus: top.l,
        l_minus: bot.l,
        k_plus: top.k,
        k_minus: bot.k,
        moduli_separated,
        real_eigenspaces,
    })
}

/// Real eigenspaces strictly between the extreme moduli, computed inside
/// K⁺ ∩ K⁻ where only middle eigenvalues live.
#[allow(clippy::too_many_arguments)]
fn middle_eigenspaces(
    gs: &DMatrix<f64>,
    gn: f64,
    hs: &DMatrix<f64>,
    hn: f64,
    thr: f64,
    mid: &DMatrix<f64>,
    vals: &[Complex64],
    tol: &Tolerances,
) -> Vec<RealEigenspace> {
    let k = mid.ncols();
    if k == 0 {
        return Vec::new();
    }
    let cl = clusters(vals, tol.modulus);
    let mut out = Vec::new();
    for c in cl.iter().filter(|c| c.value.im == 0.0) {
        let lam = c.value.re;
        if k == 1 || (cl.len() == 1 && c.mult == k) && k == 1 {
            out.push(RealEigenspace {
                value: lam,
                basis: mid.clone(),
                position: SpectralPosition::Middle,
            });
            continue;
        }
        // Restriction of g (or g⁻¹ for small moduli) to the middle space.
        let (s, v) = if lam.abs() >= thr {
            (gs, lam / gn)
        } else {
            (hs, 1.0 / (lam * hn))
        };
        let r = mid.transpose() * s * mid;
        let scale = r.norm().max(v.abs());
        let a = (&r - DMatrix::<f64>::identity(k, k) * v) / scale;
        let null = null_space(&a, tol.rank);
        let null = if null.ncols() == 0 {
            smallest_singular_vectors(&a, 1).0
        } else {
            null
        };
        out.push(RealEigenspace {
            value: lam,
            basis: orthonormalize(&(mid * null), 1e-8),
            position: SpectralPosition::Middle,
        });
    }
    out
}

pub fn translation_length(g: &ProjMap) -> f64 {
    let rho = |m: &DMatrix<f64>| -> f64 {
        let (s, n) = scaled(m);
        match eigenvalues_of(&s) {
            Ok(ev) => ev[0].norm().ln() + n.ln(),
            Err(_) => f64::NAN,
        }
    };
    (rho(g.matrix()) + rho(g.inverse_matrix())).max(0.0)
}

pub fn classify(sd: &SpectralData) -> IsometryClass {
    // The sign of a lift is not part of the projective map: both extreme
    // eigenvalues must be real with a common sign.
    let bi_semi_proximal = match (sd.top_real, sd.bottom_real) {
        (Some(a), Some(b)) => a.signum() == b.signum(),
        _ => false,
    };
    let biproximal = bi_semi_proximal && sd.top_count == 1 && sd.bottom_count == 1;
    let loxodromic = biproximal && sd.moduli_separated;
    IsometryClass {
        bi_semi_proximal,
        biproximal,
        loxodromic,
        tau: sd.translation_length(),
    }
}

/// The lift of g preserving the cone of `dom` rather than its negative.
pub fn cone_lift(g: &ProjMap, dom: &ConvexDomain) -> ProjMap {
    let c = dom.center();
    let v = g.apply_vec(&c);
    if dom.chart().eval(&v) < 0.0 {
        g.negated()
    } else {
        g.clone()
    }
}

/// Sampled check that g and g⁻¹ map the domain into its closure.
pub fn is_automorphism(g: &ProjMap, dom: &ConvexDomain, n_samples: usize) -> bool {
    if g.size() != dom.ambient() {
        return false;
    }
    let g = cone_lift(g, dom);
    let inv = g.inverse();
    let f = dom.chart().functional();
    (0..n_samples as u64).all(|i| {
        let mut r = rng::stream(0x5eed_a170, i);
        let x = dom.sample_interior_vec(&mut r);
        [&g, &inv].iter().all(|m| {
            let v = m.apply_vec(&x);
            let fv = f.dot(&v);
            if !(fv > 0.0) {
                return false;
            }
            let v = v / fv;
            dom.cone_slack(v.as_slice()) >= -dom.tolerances().point
        })
    })
}

/// Fixed points of g in the closed domain coming from one real eigenspace.
#[derive(Clone, Debug)]
pub enum FixedSet {
    Point(ProjPoint),
    /// The closed segment P(E) ∩ Ω̄ with its endpoints.
    Segment(ProjPoint, ProjPoint),
}

impl FixedSet {
    /// Point at parameter s ∈ [0, 1] (segments are parametrized in the chart).
    pub fn at(&self, dom: &ConvexDomain, s: f64) -> ProjPoint {
        match self {
            FixedSet::Point(p) => p.clone(),
            FixedSet::Segment(a, b) => {
                let (Ok(ah), Ok(bh)) = (dom.lift(a), dom.lift(b)) else {
                    return a.clone();
                };
                ProjPoint::new(ah * (1.0 - s) + bh * s).unwrap_or_else(|_| a.clone())
            }
        }
    }

    pub fn is_family(&self) -> bool {
        matches!(self, FixedSet::Segment(..))
    }
}

/// A family of pseudo-axes joining two fixed sets, at least one of which is
/// a segment of fixed points (repeated real eigenvalue).
#[derive(Clone, Debug)]
pub struct AxisFamily {
    pub attracting: FixedSet,
    pub repelling: FixedSet,
}

impl AxisFamily {
    pub fn member(&self, dom: &ConvexDomain, s: f64, t: f64) -> (ProjPoint, ProjPoint) {
        (self.attracting.at(dom, s), self.repelling.at(dom, t))
    }

    /// n members at parameters (k + 1/2)/n.
    pub fn samples(&self, dom: &ConvexDomain, n: usize) -> Vec<(ProjPoint, ProjPoint)> {
        (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) / n as f64;
                self.member(dom, s, 1.0 - s)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PseudoAxis {
    pub attracting: ProjPoint,
    pub repelling: ProjPoint,
    pub attracting_value: f64,
    pub repelling_value: f64,
    pub principal: bool,
    pub is_axis: bool,
    pub family: Option<AxisFamily>,
}

#[derive(Clone, Debug)]
pub struct Axis {
    pub attracting: ProjPoint,
    pub repelling: ProjPoint,
    pub family: Option<AxisFamily>,
}

#[derive(Clone, Debug)]
pub struct AxisReport {
    pub pseudo_axes: Vec<PseudoAxis>,
    pub axis: Option<Axis>,
    pub fixed_points_in_closure: Vec<ProjPoint>,
    /// Segments of fixed points (from repeated real eigenvalues).
    pub fixed_segments: Vec<(ProjPoint, ProjPoint)>,
    pub spectral: SpectralData,
    /// The cone-preserving lift used.
    pub lift: ProjMap,
}

impl AxisReport {
    pub fn principal(&self) -> impl Iterator<Item = &PseudoAxis> {
        self.pseudo_axes.iter().filter(|p| p.principal)
    }
}

/// Slack of the f-normalized direction, or −∞ if it is not in the chart
/// half-space.
fn normalized_slack(dom: &ConvexDomain, v: &DVector<f64>) -> f64 {
    let f = dom.chart().eval(v);
    let scale = v.norm();
    if f.abs() <= 1e-12 * scale {
        return f64::NEG_INFINITY;
    }
    let w = v / f;
    // A nonzero direction with f < 0 is the antipode of a chart point.
    dom.cone_slack(w.as_slice())
}

fn fixed_set(dom: &ConvexDomain, basis: &DMatrix<f64>) -> Option<FixedSet> {
    let eps = dom.tolerances().point;
    let point = |v: DVector<f64>| -> Option<ProjPoint> {
        let f = dom.chart().eval(&v);
        let v = if f < 0.0 { -v } else { v };
        let p = ProjPoint::new(v).ok()?;
        match dom.classify(&p) {
            Ok(Classification::Exterior) | Err(_) => None,
            Ok(_) => Some(p),
        }
    };
    match basis.ncols() {
        0 => None,
        1 => point(basis.column(0).into_owned()).map(FixedSet::Point),
        2 => {
            let (b1, b2) = (basis.column(0).into_owned(), basis.column(1).into_owned());
            let dir = |th: f64| &b1 * th.cos() + &b2 * th.sin();
            let val = |th: f64| normalized_slack(dom, &dir(th));
            let n = 720;
            let grid: Vec<f64> = (0..n)
                .map(|i| std::f64::consts::PI * i as f64 / n as f64)
                .collect();
            let vals: Vec<f64> = grid.iter().map(|&t| val(t)).collect();
            let inside: Vec<bool> = vals.iter().map(|&v| v >= -eps).collect();
            if !inside.iter().any(|&b| b) {
                // Possibly a single tangency between grid points.
                let best = (0..n).max_by(|&i, &j| vals[i].total_cmp(&vals[j]))?;
                let step = std::f64::consts::PI / n as f64;
                let mut neg = |t: f64| -val(t);
                let (t, v) = golden(&mut neg, grid[best] - step, grid[best] + step, 1e-13);
                return if -v >= -eps {
                    point(dir(t)).map(FixedSet::Point)
                } else {
                    None
                };
            }
            let start = inside.iter().position(|&b| !b)?;
            // Walk the circle from an outside angle; the inside run is an arc.
            let idx = |k: usize| (start + k) % n;
            let first = (0..n).find(|&k| inside[idx(k)])?;
            let last = (first..n).take_while(|&k| inside[idx(k)]).last()?;
            let ang = |k: usize| grid[start] + std::f64::consts::PI * k as f64 / n as f64;
            let step = std::f64::consts::PI / n as f64;
            let edge = |inside_t: f64, outside_t: f64| {
                let (mut a, mut b) = (inside_t, outside_t);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if val(m) >= -eps {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                a
            };
            let t1 = edge(ang(first), ang(first) - step);
            let t2 = edge(ang(last), ang(last) + step);
            let p1 = point(dir(t1))?;
            let p2 = point(dir(t2))?;
            if p1.approx_eq(&p2, 1e-9) {
                Some(FixedSet::Point(p1))
            } else {
                Some(FixedSet::Segment(p1, p2))
            }
        }
        k => {
            // Higher-dimensional eigenspaces: sample directions and keep the
            // two farthest-apart fixed points of the closure.
            let mut r = rng::stream(0xf1, k as u64);
            let pts: Vec<ProjPoint> = (0..4000)
                .filter_map(|_| {
                    let a = rng::unit_vector(&mut r, k);
                    let v = basis * a;
                    (normalized_slack(dom, &v) >= -eps)
                        .then(|| point(v))
                        .flatten()
                })
                .collect();
            let first = pts.first()?.clone();
            let far = pts
                .iter()
                .max_by(|a, b| a.angle_to(&first).total_cmp(&b.angle_to(&first)))?
                .clone();
            let other = pts
                .iter()
                .max_by(|a, b| a.angle_to(&far).total_cmp(&b.angle_to(&far)))?
                .clone();
            if far.approx_eq(&other, 1e-9) {
                Some(FixedSet::Point(far))
            } else {
                Some(FixedSet::Segment(far, other))
            }
        }
    }
}

fn midpoint_interior(dom: &ConvexDomain, p: &ProjPoint, q: &ProjPoint) -> bool {
    match (dom.lift(p), dom.lift(q)) {
        (Ok(a), Ok(b)) => {
            let m = (a + b) * 0.5;
            dom.cone_slack(m.as_slice()) > dom.tolerances().point
        }
        _ => false,
    }
}

/// Pseudo-axes, principal pseudo-axes and the axis of g.
pub fn axes(g: &ProjMap, dom: &ConvexDomain) -> Result<AxisReport> {
    if g.size() != dom.ambient() {
        return Err(Error::DimensionMismatch {
            expected: dom.ambient(),
            got: g.size(),
        });
    }
    if !is_automorphism(g, dom, 50) {
        return Err(Error::NotAnAutomorphism);
    }
    let lift = cone_lift(g, dom);
    let sd = spectral_with(&lift, dom.tolerances())?;
    if sd.translation_length() <= dom.tolerances().modulus {
        return Err(Error::ZeroTranslation);
    }
    let mut sets: Vec<(f64, SpectralPosition, FixedSet)> = Vec::new();
    for es in &sd.real_eigenspaces {
        if let Some(fs) = fixed_set(dom, &es.basis) {
            sets.push((es.value, es.position, fs));
        }
    }
    sets.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut fixed_points_in_closure = Vec::new();
    let mut fixed_segments = Vec::new();
    for (_, _, fs) in &sets {
        match fs {
            FixedSet::Point(p) => fixed_points_in_closure.push(p.clone()),
            FixedSet::Segment(a, b) => {
                fixed_points_in_closure.push(a.clone());
                fixed_points_in_closure.push(b.clone());
                fixed_segments.push((a.clone(), b.clone()));
            }
        }
    }

    let mut pseudo_axes = Vec::new();
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let (vi, pi, fi) = &sets[i];
            let (vj, pj, fj) = &sets[j];
            if (vi - vj).abs() <= dom.tolerances().modulus * vi.abs() {
                continue;
            }
            let principal = *pi == SpectralPosition::Top && *pj == SpectralPosition::Bottom;
            let family = (fi.is_family() || fj.is_family()).then(|| AxisFamily {
                attracting: fi.clone(),
                repelling: fj.clone(),
            });
            let (mut a, mut b) = (fi.at(dom, 0.5), fj.at(dom, 0.5));
            let mut is_axis = midpoint_interior(dom, &a, &b);
            if !is_axis {
                if let Some(fam) = &family {
                    if let Some((p, q)) = fam
                        .samples(dom, 32)
                        .into_iter()
                        .find(|(p, q)| midpoint_interior(dom, p, q))
                    {
                        a = p;
                        b = q;
                        is_axis = true;
                    }
                }
            }
            pseudo_axes.push(PseudoAxis {
                attracting: a,
                repelling: b,
                attracting_value: *vi,
                repelling_value: *vj,
                principal,
                is_axis: principal && is_axis,
                family,
            });
        }
    }
    let axis = pseudo_axes.iter().find(|p| p.is_axis).map(|p| Axis {
        attracting: p.attracting.clone(),
        repelling: p.repelling.clone(),
        family: p.family.clone(),
    });
    Ok(AxisReport {
        pseudo_axes,
        axis,
        fixed_points_in_closure,
        fixed_segments,
        spectral: sd,
        lift,
    })
}

/// Angle between a direction and the projectivized span of orthonormal
/// columns.
pub fn angle_to_subspace(v: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let u = v.normalize();
    if basis.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let proj = basis * (basis.transpose() * &u);
    (&u - proj).norm().min(1.0).asin()
}

#[derive(Clone, Debug, Serialize)]
pub struct OmegaSample {
    pub seed: usize,
    pub iterate: usize,
    #[serde(skip)]
    pub point: ProjPoint,
    pub angle_to_e_plus: f64,
}

/// Last quartile of the forward orbit of each seed, without validating that
/// g preserves any domain.
pub fn forward_orbit_tail(
    g: &ProjMap,
    e_plus: &DMatrix<f64>,
    seeds: &[ProjPoint],
    n_iter: usize,
) -> Vec<OmegaSample> {
    let keep_from = n_iter - n_iter / 4;
    let mut out = Vec::new();
    for (i, s) in seeds.iter().enumerate() {
        let mut v = s.coords().clone();
        for k in 1..=n_iter {
            v = g.apply_vec(&v);
            v /= v.norm();
            if k > keep_from || (n_iter < 4 && k == n_iter) {
                out.push(OmegaSample {
                    seed: i,
                    iterate: k,
                    point: ProjPoint::new(v.clone()).expect("unit vector"),
                    angle_to_e_plus: angle_to_subspace(&v, e_plus),
                });
            }
        }
    }
    out
}

/// Forward-orbit tails of interior seeds with their angular distance to
/// P(E⁺). Seeds lying in P(K⁺), which never approach E⁺, are dropped.
pub fn omega_limit_sample(
    g: &ProjMap,
    dom: &ConvexDomain,
    seeds: &[ProjPoint],
    n_iter: usize,
) -> Result<Vec<OmegaSample>> {
    if !is_automorphism(g, dom, 50) {
        return Err(Error::NotAnAutomorphism);
    }
    let lift = cone_lift(g, dom);
    let sd = spectral_with(&lift, dom.tolerances())?;
    if sd.translation_length() <= dom.tolerances().modulus {
        return Err(Error::ZeroTranslation);
    }
    for s in seeds {
        if dom.classify(s)? != Classification::Interior {
            return Err(Error::NotInterior);
        }
    }
    let kept: Vec<ProjPoint> = seeds
        .iter()
        .filter(|s| angle_to_subspace(s.coords(), &sd.k_plus) > 1e-9)
        .cloned()
        .collect();
    Ok(forward_orbit_tail(&lift, &sd.e_plus, &kept, n_iter))
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceWitness {
    /// Smallest m with ‖(g|E⁺)^m / λ_max^m − I‖ ≤ eps, if found.
    pub m: Option<usize>,
    pub best_m: usize,
    pub best_defect: f64,
}

/// Searches for a power of g acting on E⁺ close to the identity. A finite
/// search can only exhibit recurrence, not refute it.
pub fn recurrence_witness(g: &ProjMap, m_cap: usize, eps: f64) -> Result<RecurrenceWitness> {
    let sd = spectral(g, Tolerances::default().modulus)?;
    let q = &sd.e_plus;
    let k = q.ncols();
    let r = q.transpose() * g.matrix() * q / sd.lambda_max;
    let id = DMatrix::<f64>::identity(k, k);
    let mut p = r.clone();
    let mut best = (1, f64::INFINITY);
    for m in 1..=m_cap {
        let defect = (&p - &id).norm();
        if defect < best.1 {
            best = (m, defect);
        }
        if defect <= eps {
            return Ok(RecurrenceWitness {
                m: Some(m),
                best_m: m,
                best_defect: defect,
            });
        }
        p = &p * &r;
    }
    Ok(RecurrenceWitness {
        m: None,
        best_m: best.0,
        best_defect: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> ProjMap {
        ProjMap::diagonal(v).unwrap()
    }

    #[test]
    fn diagonal_spectrum() {
        let sd = spectral(&diag(&[2.0, 1.0, 0.5]), 1e-8).unwrap();
        let moduli: Vec<f64> = sd.eigenvalues.iter().map(|v| v.norm()).collect();
        assert!((moduli[0] - 2.0).abs() < 1e-12 && (moduli[1] - 1.0).abs() < 1e-12);
        assert!((moduli[2] - 0.5).abs() < 1e-12);
        assert_eq!(sd.e_plus.ncols(), 1);
        assert!((sd.e_plus[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((sd.e_minus[(2, 0)].abs() - 1.0).abs() < 1e-12);
        assert_eq!((sd.jordan_defect_top, sd.jordan_defect_bottom), (0, 0));
        let c = classify(&sd);
        assert!(c.loxodromic && c.biproximal && c.bi_semi_proximal);
    }

    #[test]
    fn repeated_bottom() {
        let sd = spectral(&diag(&[2.0, 1.0, 1.0]), 1e-8).unwrap();
        assert!((sd.lambda_min - 1.0).abs() < 1e-12);
        assert_eq!(sd.e_minus.ncols(), 2);
        let c = classify(&sd);
        assert!(c.bi_semi_proximal && !c.biproximal && !c.loxodromic);
    }

    #[test]
    fn identity_spectrum() {
        let sd = spectral(&ProjMap::identity(3), 1e-8).unwrap();
        assert_eq!(sd.e_plus.ncols(), 3);
        assert_eq!(sd.e_minus.ncols(), 3);
        assert!(translation_length(&ProjMap::identity(3)) < 1e-14);
    }

    #[test]
    fn rotation_block() {
        let th = 2f64.sqrt();
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                th.cos(),
                -th.sin(),
                0.0,
                th.sin(),
                th.cos(),
                0.0,
                0.0,
                0.0,
                3.0,
            ],
        );
        let sd = spectral(&ProjMap::new(m).unwrap(), 1e-8).unwrap();
        let c = classify(&sd);
        assert!(!c.bi_semi_proximal);
        assert!((sd.lambda_max - 3.0).abs() < 1e-12);
        assert_eq!(sd.e_minus.ncols(), 2);
    }

    #[test]
    fn jordan_block_defect() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.25]);
        let sd = spectral(&ProjMap::new(m).unwrap(), 1e-6).unwrap();
        assert_eq!(sd.jordan_defect_top, 1);
        assert_eq!(sd.l_plus.ncols(), 2);
        assert_eq!(sd.k_plus.ncols(), 1);
    }

    #[test]
    fn tau_of_inverse() {
        let g = ProjMap::new(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 1.0, 0.0, 0.3, 1.0, 0.2, 0.0, 0.1, 0.7],
        ))
        .unwrap();
        assert!((translation_length(&g) - translation_length(&g.inverse())).abs() < 1e-12);
    }

    #[test]
    fn example_axes_on_simplex() {
        let t2 = ConvexDomain::simplex(2);
        let r1 = axes(&diag(&[4.0, 2.0, 0.125]), &t2).unwrap();
        assert_eq!(r1.pseudo_axes.len(), 3);
        assert_eq!(r1.principal().count(), 1);
        let pr = r1.principal().next().unwrap();
        assert_eq!(pr.attracting, ProjPoint::basis(3, 0));
        assert_eq!(pr.repelling, ProjPoint::basis(3, 2));
        assert!(r1.axis.is_none());

        let r2 = axes(&diag(&[4.0, 2.0, 2.0]), &t2).unwrap();
        let ax = r2.axis.expect("Q_t family has an axis");
        assert!(ax.family.is_some());
        assert_eq!(ax.attracting, ProjPoint::basis(3, 0));
        assert_eq!(
            ax.repelling,
            ProjPoint::from_slice(&[0.0, 1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn boost_axis_on_disk() {
        let disk = ConvexDomain::ellipsoid(2);
        let s: f64 = 1.0;
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                s.cosh(),
                0.0,
                s.sinh(),
                0.0,
                1.0,
                0.0,
                s.sinh(),
                0.0,
                s.cosh(),
            ],
        );
        let r = axes(&ProjMap::new(m).unwrap(), &disk).unwrap();
        assert_eq!(r.pseudo_axes.len(), 1);
        let ax = r.axis.unwrap();
        assert_eq!(
            ax.attracting,
            ProjPoint::from_slice(&[1.0, 0.0, 1.0]).unwrap()
        );
        assert_eq!(
            ax.repelling,
            ProjPoint::from_slice(&[-1.0, 0.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn rejects_non_automorphisms() {
        let t2 = ConvexDomain::simplex(2);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            axes(&ProjMap::new(m).unwrap(), &t2).unwrap_err(),
            Error::NotAnAutomorphism
        );
        assert_eq!(
            axes(&ProjMap::identity(3), &t2).unwrap_err(),
            Error::ZeroTranslation
        );
    }

    #[test]
    fn omega_limit_on_simplex() {
        let t2 = ConvexDomain::simplex(2);
        let seeds = vec![ProjPoint::from_slice(&[0.2, 0.5, 0.3]).unwrap()];
        let out = omega_limit_sample(&diag(&[2.0, 1.0, 0.5]), &t2, &seeds, 200).unwrap();
        assert_eq!(out.len(), 50);
        assert!(out.iter().all(|s| s.angle_to_e_plus < 1e-12));
        assert_eq!(out.last().unwrap().point, ProjPoint::basis(3, 0));
    }

    #[test]
    fn recurrence_of_proximal_map() {
        let w = recurrence_witness(&diag(&[3.0, 1.0, 0.5]), 10, 1e-9).unwrap();
        assert_eq!(w.m, Some(1));
    }
}
