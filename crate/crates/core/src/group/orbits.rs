//! Orbit growth, random walks, closed-geodesic census and limit-set samples.

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{enumerate_ball, Ball, MarkedGroup};
use crate::automorphism::{classify, spectral};
use crate::metric::{hilbert_lifted, interior_lift};
use crate::projective::{ProjMap, ProjPoint};
use crate::rank_one::is_rank_one;
use crate::{rng, Error, Result};

/// Tolerance of the characteristic-polynomial fingerprint, relative to 1 + τ
/// and applied to asinh of each coefficient. Conjugates with long
/// conjugators lose about 1e-7 in τ.
pub const EPS_CP: f64 = 1e-5;

/// Least-squares slope of ys against xs.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// d(x₀, g x₀), infinite when g x₀ is numerically outside the domain.
fn orbit_distance(grp: &MarkedGroup, x0: &DVector<f64>, g: &ProjMap) -> f64 {
    let v = g.apply_vec(x0);
    let f = grp.domain.chart().eval(&v);
    if f == 0.0 {
        return f64::INFINITY;
    }
    let v = v / f;
    if grp.domain.cone_slack(v.as_slice()) <= 0.0 {
        return f64::INFINITY;
    }
    let d = hilbert_lifted(&grp.domain, x0, &v);
    if d.is_finite() {
        d
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalExponent {
    pub omega_hat: f64,
    /// Smallest orbit distance on the sphere of radius L: below it every
    /// orbit point of the group is in the ball.
    pub horizon: f64,
    pub ball_radius: usize,
    /// (n, N(n)) used in the fit.
    pub window: Vec<(usize, usize)>,
}

/// Slope of log N(n) against n, N(n) = #{g in the ball : d(x₀, g x₀) ≤ n},
/// fitted over integers n ≤ min(n_max, horizon) with N(n) ≥ 2.
pub fn critical_exponent(
    grp: &MarkedGroup,
    n_max: usize,
    ball_radius: usize,
) -> Result<CriticalExponent> {
    let ball = enumerate_ball(grp, ball_radius)?;
    let x0 = interior_lift(&grp.domain, &grp.basepoint)?;
    let dists: Vec<f64> = ball
        .elements
        .par_iter()
        .map(|e| orbit_distance(grp, &x0, &e.map))
        .collect();
    let horizon = dists
        .iter()
        .zip(&ball.elements)
        .filter(|(_, e)| e.word.len() == ball_radius)
        .map(|(d, _)| *d)
        .fold(f64::INFINITY, f64::min);
    if ball.len() == 1 || (horizon.is_infinite() && ball_radius > 0) {
        // Finite (here: trivial) orbit.
        return Ok(CriticalExponent {
            omega_hat: 0.0,
            horizon,
            ball_radius,
            window: Vec::new(),
        });
    }
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    let top = (n_max as f64).min(horizon).floor().max(0.0) as usize;
    let window: Vec<(usize, usize)> = (1..=top)
        .map(|n| (n, sorted.partition_point(|&d| d <= n as f64)))
        .filter(|&(_, c)| c >= 2)
        .collect();
    if window.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable thresholds below horizon {horizon:.3}",
            window.len()
        )));
    }
    let xs: Vec<f64> = window.iter().map(|w| w.0 as f64).collect();
    let ys: Vec<f64> = window.iter().map(|w| (w.1 as f64).ln()).collect();
    let omega_hat = least_squares_slope(&xs, &ys).unwrap_or(0.0);
    Ok(CriticalExponent {
        omega_hat,
        horizon,
        ball_radius,
        window,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WalkTrial {
    pub trial: u64,
    /// Freely reduced word of the endpoint.
    pub word: String,
    pub tau: f64,
    pub rank_one: bool,
    pub reason: String,
}

/// Simple random walks of n_steps uniform generator steps, one rng stream
/// per trial.
pub fn random_walk(
    grp: &MarkedGroup,
    n_steps: usize,
    n_trials: usize,
    seed: u64,
) -> Vec<WalkTrial> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(seed, trial);
            let steps: Vec<u8> = if grp.is_empty() {
                Vec::new()
            } else {
                (0..n_steps)
                    .map(|_| r.gen_range(0..grp.len()) as u8)
                    .collect()
            };
            let word = grp.reduce(&steps);
            let g = grp.evaluate(&word);
            let (rank_one, reason, tau) = match is_rank_one(&grp.domain, &g, grp.cocompact) {
                Ok(v) => (v.is_rank_one, v.reason.label().to_string(), v.tau),
                Err(e) => (false, format!("error: {e}"), f64::NAN),
            };
            WalkTrial {
                trial,
                word: grp.word_string(&word),
                tau,
                rank_one,
                reason,
            }
        })
        .collect()
}

pub fn random_walk_rank_one_fraction(
    grp: &MarkedGroup,
    n_steps: usize,
    n_trials: usize,
    seed: u64,
) -> f64 {
    if n_trials == 0 {
        return 0.0;
    }
    let hits = random_walk(grp, n_steps, n_trials, seed)
        .iter()
        .filter(|t| t.rank_one)
        .count();
    hits as f64 / n_trials as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusEntry {
    pub word: String,
    #[serde(skip)]
    pub word_indices: Vec<u8>,
    /// Row-major matrix of the representative.
    pub matrix: Vec<f64>,
    pub tau: f64,
    pub class_id: usize,
    /// Ball elements merged into this class.
    pub class_size: usize,
    /// Words of the merged elements.
    #[serde(skip)]
    pub members: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicCensus {
    /// One entry per class, by increasing τ.
    pub entries: Vec<CensusEntry>,
    pub t_max: f64,
    pub ball_radius: usize,
    pub conj_radius: usize,
    /// Smallest τ over cyclically reduced words of length L; classes below
    /// it are all reached by the ball.
    pub horizon: f64,
    /// Jumps (t, P_hat(t)) of the step function.
    pub p_hat: Vec<(f64, usize)>,
    pub elements: usize,
    /// Conjugacy classes found; an upper bound for the true count.
    pub classes: usize,
}

impl GeodesicCensus {
    /// P_hat(t): classes with τ ≤ t.
    pub fn count_at(&self, t: f64) -> usize {
        self.entries.partition_point(|e| e.tau <= t)
    }

    /// Least-squares slope of log(t·P_hat(t)) over `points` equally spaced
    /// t in [lo, hi].
    pub fn shape_slope(&self, lo: f64, hi: f64, points: usize) -> Option<f64> {
        if points < 2 || hi <= lo {
            return None;
        }
        let ts: Vec<f64> = (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &t in &ts {
            let p = self.count_at(t);
            if p > 0 && t > 0.0 {
                xs.push(t);
                ys.push((t * p as f64).ln());
            }
        }
        least_squares_slope(&xs, &ys)
    }

    /// Slope over [τ_min + 0.5, min(horizon, t_max)] with 30 points.
    pub fn default_shape_slope(&self) -> Option<f64> {
        let lo = self.entries.first()?.tau + 0.5;
        self.shape_slope(lo, self.horizon.min(self.t_max), 30)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// τ followed by the coefficients of the characteristic polynomial of the
/// |det| = 1 lift, computed from the eigenvalues and compressed with asinh.
fn fingerprint(tau: f64, eigs: &[num_complex::Complex64]) -> Vec<f64> {
    let n = eigs.len();
    let logdet: f64 = eigs.iter().map(|z| z.norm().ln()).sum::<f64>() / n as f64;
    let s = (-logdet).exp();
    let mut coef = vec![num_complex::Complex64::new(1.0, 0.0)];
    for z in eigs {
        let z = z * s;
        let mut next = vec![num_complex::Complex64::new(0.0, 0.0); coef.len() + 1];
        for (k, c) in coef.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * z;
        }
        coef = next;
    }
    std::iter::once(tau)
        .chain(coef[1..].iter().map(|c| c.re.asinh()))
        .collect()
}

fn fingerprints_match(a: &[f64], b: &[f64]) -> bool {
    let tol = EPS_CP * (1.0 + a[0].abs());
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Closed geodesics of length ≤ t among conjugacy classes met by the ball of
/// radius L, conjugators searched over radius L/2.
pub fn geodesic_census(grp: &MarkedGroup, t: f64, radius: usize) -> Result<GeodesicCensus> {
    let ball = enumerate_ball(grp, radius)?;
    let conj_radius = radius / 2;
    census_on_ball(grp, &ball, t, conj_radius)
}

fn census_on_ball(
    grp: &MarkedGroup,
    ball: &Ball,
    t: f64,
    conj_radius: usize,
) -> Result<GeodesicCensus> {
    let eps_mod = grp.domain.tolerances().modulus;
    let spectra: Vec<Option<(f64, Vec<f64>)>> = ball
        .elements
        .par_iter()
        .map(|e| {
            // Spectra are conjugation invariant; the cyclic core is better
            // conditioned than u·r·u⁻¹.
            let core = grp.cyclic_core(&e.word);
            let g = if core.len() == e.word.len() {
                e.map.clone()
            } else {
                grp.evaluate(core)
            };
            spectral(&g, eps_mod).ok().map(|sd| {
                let tau = sd.translation_length();
                (tau, fingerprint(tau, &sd.eigenvalues))
            })
        })
        .collect();
    let horizon = ball
        .elements
        .iter()
        .zip(&spectra)
        .filter(|(e, _)| {
            e.word.len() == ball.radius
                && !e.word.is_empty()
                && grp.generators[e.word[0] as usize].inverse != *e.word.last().unwrap() as usize
        })
        .filter_map(|(_, s)| s.as_ref().map(|s| s.0))
        .fold(f64::INFINITY, f64::min);

    let members: Vec<usize> = (0..ball.len())
        .filter(|&i| matches!(&spectra[i], Some((tau, _)) if *tau > eps_mod && *tau <= t))
        .collect();
    let tau_of = |i: usize| spectra[i].as_ref().unwrap().0;
    // Buckets: runs of members whose consecutive τ differ by at most the
    // fingerprint tolerance.
    let mut by_tau = members.clone();
    by_tau.sort_by(|&a, &b| tau_of(a).total_cmp(&tau_of(b)));
    let mut bucket: HashMap<usize, usize> = HashMap::new();
    let mut bucket_sizes: Vec<usize> = Vec::new();
    for (k, &i) in by_tau.iter().enumerate() {
        let new = k == 0 || tau_of(i) - tau_of(by_tau[k - 1]) > EPS_CP * (1.0 + tau_of(i));
        if new {
            bucket_sizes.push(0);
        }
        *bucket_sizes.last_mut().unwrap() += 1;
        bucket.insert(i, bucket_sizes.len() - 1);
    }
    let conjugators: Vec<usize> = (1..ball.len())
        .filter(|&c| ball.word_length(c) <= conj_radius)
        .collect();

    let mut uf = UnionFind((0..ball.len()).collect());
    for &h in members.iter().filter(|h| bucket_sizes[bucket[h]] > 1) {
        let fp = &spectra[h].as_ref().unwrap().1;
        for &c in &conjugators {
            let cw = &ball.elements[c].word;
            let mut w = cw.clone();
            w.extend_from_slice(&ball.elements[h].word);
            w.extend(grp.inverse_word(cw));
            let w = grp.reduce(&w);
            let j = match ball.by_word(&w) {
                Some(j) => Some(j),
                None if ball.relations_found => ball.find(&grp.evaluate(&w)),
                None => None,
            };
            if let Some(j) = j {
                if j != h
                    && bucket.get(&j) == Some(&bucket[&h])
                    && fingerprints_match(fp, &spectra[j].as_ref().unwrap().1)
                {
                    uf.union(h, j);
                }
            }
        }
    }

    let mut classes: HashMap<usize, Vec<usize>> = HashMap::new();
    for &i in &members {
        classes.entry(uf.find(i)).or_default().push(i);
    }
    let mut reps: Vec<(usize, &Vec<usize>)> = classes
        .values()
        .map(|v| {
            let rep = *v
                .iter()
                .min_by(|&&a, &&b| {
                    tau_of(a)
                        .total_cmp(&tau_of(b))
                        .then(ball.word_length(a).cmp(&ball.word_length(b)))
                        .then(ball.elements[a].word.cmp(&ball.elements[b].word))
                })
                .unwrap();
            (rep, v)
        })
        .collect();
    reps.sort_by(|a, b| {
        tau_of(a.0)
            .total_cmp(&tau_of(b.0))
            .then(ball.word_length(a.0).cmp(&ball.word_length(b.0)))
            .then(ball.elements[a.0].word.cmp(&ball.elements[b.0].word))
    });
    let entries: Vec<CensusEntry> = reps
        .iter()
        .enumerate()
        .map(|(k, &(i, members))| {
            let e = &ball.elements[i];
            let m = super::normalize(e.map.matrix());
            CensusEntry {
                word: grp.word_string(&e.word),
                word_indices: e.word.clone(),
                matrix: m.transpose().iter().copied().collect(),
                tau: tau_of(i),
                class_id: k,
                class_size: members.len(),
                members: members
                    .iter()
                    .map(|&j| grp.word_string(&ball.elements[j].word))
                    .collect(),
            }
        })
        .collect();
    let mut p_hat: Vec<(f64, usize)> = Vec::new();
    for (k, e) in entries.iter().enumerate() {
        match p_hat.last_mut() {
            Some(last) if last.0 == e.tau => last.1 = k + 1,
            _ => p_hat.push((e.tau, k + 1)),
        }
    }
    Ok(GeodesicCensus {
        classes: entries.len(),
        entries,
        t_max: t,
        ball_radius: ball.radius,
        conj_radius,
        horizon,
        p_hat,
        elements: ball.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitPoint {
    pub word: String,
    #[serde(skip)]
    pub point: ProjPoint,
    pub coords: Vec<f64>,
    pub rank_one: bool,
}

fn attracting_points(grp: &MarkedGroup, ball: &Ball, tag: bool) -> Vec<LimitPoint> {
    let eps_mod = grp.domain.tolerances().modulus;
    ball.elements
        .par_iter()
        .filter_map(|e| {
            let sd = spectral(&e.map, eps_mod).ok()?;
            if !classify(&sd).loxodromic || sd.e_plus.ncols() != 1 {
                return None;
            }
            // Rounding noise in zero entries would be amplified by strongly
            // anisotropic generators.
            let mut v = sd.e_plus.column(0).into_owned();
            let scale = v.amax();
            v.iter_mut()
                .filter(|x| x.abs() <= 1e-14 * scale)
                .for_each(|x| *x = 0.0);
            let v = if grp.domain.chart().eval(&v) < 0.0 {
                -v
            } else {
                v
            };
            let point = ProjPoint::new(v).ok()?;
            let rank_one = tag
                && is_rank_one(&grp.domain, &e.map, grp.cocompact)
                    .map(|r| r.is_rank_one)
                    .unwrap_or(false);
            Some(LimitPoint {
                word: grp.word_string(&e.word),
                coords: point.coords().iter().copied().collect(),
                point,
                rank_one,
            })
        })
        .collect()
}

/// Attracting fixed points of the loxodromic elements of the ball, tagged
/// with the rank-one verdict of the element.
pub fn limit_set_sample(grp: &MarkedGroup, depth: usize) -> Result<Vec<LimitPoint>> {
    let ball = enumerate_ball(grp, depth)?;
    Ok(attracting_points(grp, &ball, true))
}

/// Largest angle from s·p to the depth-(L+2) samples, over depth-L samples
/// p and generators s. 0 when there are no samples.
pub fn limit_set_invariance(grp: &MarkedGroup, depth: usize) -> Result<f64> {
    let shallow = attracting_points(grp, &enumerate_ball(grp, depth)?, false);
    let deep = attracting_points(grp, &enumerate_ball(grp, depth + 2)?, false);
    let worst = shallow
        .par_iter()
        .map(|p| {
            grp.generators
                .iter()
                .map(|s| {
                    let q = crate::projective::apply_map(&s.map, &p.point);
                    deep.iter()
                        .map(|d| d.point.angle_to(&q))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::domain::ConvexDomain;

    #[test]
    fn trivial_group() {
        let g = MarkedGroup::new(ConvexDomain::ellipsoid(2), Vec::new(), false, None).unwrap();
        assert_eq!(critical_exponent(&g, 20, 5).unwrap().omega_hat, 0.0);
        assert!(limit_set_sample(&g, 4).unwrap().is_empty());
        assert_eq!(random_walk_rank_one_fraction(&g, 10, 5, 1), 0.0);
        let c = geodesic_census(&g, 10.0, 3).unwrap();
        assert_eq!(c.count_at(10.0), 0);
    }

    #[test]
    fn zero_steps_is_never_rank_one() {
        assert_eq!(
            random_walk_rank_one_fraction(&bundled::fuchsian(), 0, 10, 3),
            0.0
        );
    }

    #[test]
    fn abelian_census_is_elementwise() {
        let z2 = bundled::z2_simplex();
        let c = geodesic_census(&z2, 1e3, 4).unwrap();
        // All 40 nonidentity elements of the L1 ball are their own classes.
        assert_eq!(c.classes, 40);
        assert!(c.entries.iter().all(|e| e.class_size == 1));
        assert_eq!(c.count_at(c.entries[0].tau - 1e-9), 0);
        // τ of a^i b^j is the spread of (16i, 14j, −16i − 14j).
        for e in &c.entries {
            let (mut i, mut j) = (0i32, 0i32);
            for ch in e.word.chars() {
                match ch {
                    'a' => i += 1,
                    'A' => i -= 1,
                    'b' => j += 1,
                    _ => j -= 1,
                }
            }
            let l = [
                16.0 * i as f64,
                14.0 * j as f64,
                -16.0 * i as f64 - 14.0 * j as f64,
            ];
            let spread = l.iter().copied().fold(f64::MIN, f64::max)
                - l.iter().copied().fold(f64::MAX, f64::min);
            assert!(
                (e.tau - spread).abs() < 1e-9 * spread,
                "{} {} {}",
                e.word,
                e.tau,
                spread
            );
        }
    }

    #[test]
    fn free_group_classes() {
        let f2 = bundled::fuchsian();
        let c = geodesic_census(&f2, 1e3, 6).unwrap();
        let expected = cyclic_classes(6);
        assert_eq!(c.classes, expected);
        for w in c.p_hat.windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
    }

    /// Conjugacy classes of F₂ with a cyclically reduced representative of
    /// length ≤ L, counted by brute force over rotations.
    fn cyclic_classes(l: usize) -> usize {
        let inv = [2usize, 3, 0, 1];
        let mut seen = std::collections::HashSet::new();
        let mut words: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..l {
            let mut next = Vec::new();
            for w in &words {
                for s in 0..4 {
                    if w.last().is_some_and(|&t| inv[t] == s) {
                        continue;
                    }
                    let mut v = w.clone();
                    v.push(s);
                    if inv[v[0]] != s {
                        let key = (0..v.len())
                            .map(|r| [&v[r..], &v[..r]].concat())
                            .min()
                            .unwrap();
                        seen.insert(key);
                    }
                    next.push(v);
                }
            }
            words = next;
        }
        seen.len()
    }

    #[test]
    fn limit_sets() {
        let z2 = bundled::z2_simplex();
        let pts = limit_set_sample(&z2, 3).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((0..3).any(|i| p.point.angle_to(&ProjPoint::basis(3, i)) < 1e-12));
            assert!(!p.rank_one);
        }
        assert!(limit_set_invariance(&z2, 2).unwrap() < 1e-12);
        let f2 = bundled::fuchsian();
        let a = limit_set_sample(&f2, 2).unwrap();
        let b = limit_set_sample(&f2, 3).unwrap();
        assert!(b.len() > a.len());
        for p in &b {
            let c = p.point.coords();
            let q = c[2] * c[2] - c[0] * c[0] - c[1] * c[1];
            assert!(q.abs() < 1e-9 * c.norm_squared(), "{q}");
            assert!(p.rank_one);
        }
        assert!(limit_set_invariance(&f2, 2).unwrap() < 1e-9);
    }
}
