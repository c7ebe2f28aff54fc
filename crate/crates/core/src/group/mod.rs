//! Marked groups of automorphisms: generators with inverses, words, and
//! enumeration of word-length balls.

mod orbits;

pub use orbits::{
    critical_exponent, geodesic_census, least_squares_slope, limit_set_invariance,
    limit_set_sample, random_walk, random_walk_rank_one_fraction, CensusEntry, CriticalExponent,
    GeodesicCensus, LimitPoint, WalkTrial,
};

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::automorphism::is_automorphism;
use crate::domain::{Classification, ConvexDomain, DomainSpec};
use crate::metric::hilbert_lifted;
use crate::projective::{ProjMap, ProjPoint};
use crate::rng;
use crate::{Error, Result};

/// Largest word length accepted by ball enumeration.
pub const BALL_RADIUS_CAP: usize = 14;
/// Element budget for ball enumeration.
pub const BALL_BUDGET: usize = 5_000_000;
/// Entrywise tolerance on normalized matrices for identifying elements.
pub const DEDUP_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Generator {
    pub label: String,
    pub map: ProjMap,
    /// Index of the inverse generator.
    pub inverse: usize,
}

#[derive(Clone, Debug)]
pub struct MarkedGroup {
    pub domain: ConvexDomain,
    pub generators: Vec<Generator>,
    pub cocompact: bool,
    pub basepoint: ProjPoint,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DomainRef {
    Path(String),
    Inline(DomainSpec),
}

#[derive(Deserialize)]
struct GeneratorJson {
    label: String,
    matrix: Vec<Vec<f64>>,
    #[serde(default)]
    inverse: Option<String>,
}

#[derive(Deserialize)]
struct GroupJson {
    domain: DomainRef,
    generators: Vec<GeneratorJson>,
    #[serde(default)]
    cocompact: bool,
    #[serde(default)]
    basepoint: Option<Vec<f64>>,
}

/// Label for the inverse of a generator: swapped case for single letters,
/// otherwise a "^-1" suffix (removed if already present).
fn inverse_label(label: &str) -> String {
    let mut chars = label.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_alphabetic() && (c.is_lowercase() || c.is_uppercase()) => {
            if c.is_lowercase() {
                c.to_uppercase().collect()
            } else {
                c.to_lowercase().collect()
            }
        }
        _ => match label.strip_suffix("^-1") {
            Some(base) => base.to_string(),
            None => format!("{label}^-1"),
        },
    }
}

/// Whether a·b is a multiple of the identity.
fn is_projective_identity(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let s = m.trace() / n as f64;
    s != 0.0 && (m / s - DMatrix::identity(n, n)).amax() <= 1e-9
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidGroup(
            "generator matrix must be square".into(),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl MarkedGroup {
    /// Builds a group from generators, adding missing inverses.
    pub fn new(
        domain: ConvexDomain,
        gens: Vec<(String, ProjMap)>,
        cocompact: bool,
        basepoint: Option<ProjPoint>,
    ) -> Result<Self> {
        Self::with_declared(
            domain,
            gens.into_iter().map(|(l, m)| (l, m, None)).collect(),
            cocompact,
            basepoint,
        )
    }

    fn with_declared(
        domain: ConvexDomain,
        gens: Vec<(String, ProjMap, Option<String>)>,
        cocompact: bool,
        basepoint: Option<ProjPoint>,
    ) -> Result<Self> {
        let n = domain.ambient();
        let mut out: Vec<Generator> = Vec::new();
        let mut declared = Vec::new();
        for (label, map, inv) in gens {
            if map.size() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: map.size(),
                });
            }
            if out.iter().any(|g| g.label == label) {
                return Err(Error::InvalidGroup(format!("duplicate label {label}")));
            }
            if !is_automorphism(&map, &domain, 64) {
                return Err(Error::InvalidGroup(format!(
                    "generator {label} does not preserve the domain"
                )));
            }
            declared.push(inv);
            out.push(Generator {
                label,
                map,
                inverse: usize::MAX,
            });
        }
        // Declared inverses.
        for i in 0..out.len() {
            if let Some(l) = &declared[i] {
                let j = out
                    .iter()
                    .position(|g| &g.label == l)
                    .ok_or_else(|| Error::InvalidGroup(format!("unknown inverse label {l}")))?;
                if !is_projective_identity(&(out[i].map.matrix() * out[j].map.matrix())) {
                    return Err(Error::InvalidGroup(format!(
                        "{} and {l} are not inverse",
                        out[i].label
                    )));
                }
                out[i].inverse = j;
                out[j].inverse = i;
            }
        }
        // Inverses present among the generators.
        for i in 0..out.len() {
            if out[i].inverse != usize::MAX {
                continue;
            }
            let found = (0..out.len()).find(|&j| {
                (out[j].inverse == usize::MAX || out[j].inverse == i)
                    && is_projective_identity(&(out[i].map.matrix() * out[j].map.matrix()))
            });
            if let Some(j) = found {
                out[i].inverse = j;
                out[j].inverse = i;
            }
        }
        // Missing inverses are appended.
        for i in 0..out.len() {
            if out[i].inverse != usize::MAX {
                continue;
            }
            let j = out.len();
            let label = inverse_label(&out[i].label);
            if out.iter().any(|g| g.label == label) {
                return Err(Error::InvalidGroup(format!(
                    "label {label} is taken by a non-inverse"
                )));
            }
            let map = out[i].map.inverse();
            out[i].inverse = j;
            out.push(Generator {
                label,
                map,
                inverse: i,
            });
        }
        let basepoint = match basepoint {
            Some(p) => p,
            None => ProjPoint::new(domain.center())?,
        };
        if domain.classify(&basepoint)? != Classification::Interior {
            return Err(Error::NotInterior);
        }
        Ok(MarkedGroup {
            domain,
            generators: out,
            cocompact,
            basepoint,
        })
    }

    /// Parses group JSON. A domain given as a string is a path, resolved
    /// against `base_dir`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: GroupJson = serde_json::from_str(text)?;
        let domain = match raw.domain {
            DomainRef::Inline(spec) => spec.build()?,
            DomainRef::Path(p) => {
                let path = match base_dir {
                    Some(d) => d.join(&p),
                    None => p.clone().into(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::InvalidGroup(format!("cannot read domain {}: {e}", path.display()))
                })?;
                ConvexDomain::from_json(&text)?
            }
        };
        let gens = raw
            .generators
            .into_iter()
            .map(|g| {
                Ok((
                    g.label,
                    ProjMap::new(matrix_from_rows(&g.matrix)?)?,
                    g.inverse,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let basepoint = raw
            .basepoint
            .map(|v| ProjPoint::from_slice(&v))
            .transpose()?;
        Self::with_declared(domain, gens, raw.cocompact, basepoint)
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn ambient(&self) -> usize {
        self.domain.ambient()
    }

    /// Word in generator indices to its label string ("e" for the identity).
    pub fn word_string(&self, w: &[u8]) -> String {
        if w.is_empty() {
            return "e".into();
        }
        let single = self.generators.iter().all(|g| g.label.chars().count() == 1);
        let parts: Vec<&str> = w
            .iter()
            .map(|&i| self.generators[i as usize].label.as_str())
            .collect();
        parts.join(if single { "" } else { "." })
    }

    /// Inverse of [`MarkedGroup::word_string`].
    pub fn parse_word(&self, s: &str) -> Result<Vec<u8>> {
        if s == "e" || s.is_empty() {
            return Ok(Vec::new());
        }
        let single = self.generators.iter().all(|g| g.label.chars().count() == 1);
        let lookup = |l: &str| {
            self.generators
                .iter()
                .position(|g| g.label == l)
                .map(|i| i as u8)
                .ok_or_else(|| Error::InvalidGroup(format!("unknown generator {l}")))
        };
        if single {
            s.chars().map(|c| lookup(&c.to_string())).collect()
        } else {
            s.split('.').map(lookup).collect()
        }
    }

    /// Free reduction: cancels adjacent s s⁻¹.
    pub fn reduce(&self, w: &[u8]) -> Vec<u8> {
        let mut out: Vec<u8> = Vec::with_capacity(w.len());
        for &s in w {
            match out.last() {
                Some(&t) if self.generators[t as usize].inverse == s as usize => {
                    out.pop();
                }
                _ => out.push(s),
            }
        }
        out
    }

    /// The reduced word with matching s…s⁻¹ stripped from both ends.
    pub fn cyclic_core<'a>(&self, w: &'a [u8]) -> &'a [u8] {
        let mut w = w;
        while w.len() >= 2 && self.generators[w[0] as usize].inverse == w[w.len() - 1] as usize {
            w = &w[1..w.len() - 1];
        }
        w
    }

    pub fn inverse_word(&self, w: &[u8]) -> Vec<u8> {
        w.iter()
            .rev()
            .map(|&s| self.generators[s as usize].inverse as u8)
            .collect()
    }

    /// Product of the generators along the word.
    pub fn evaluate(&self, w: &[u8]) -> ProjMap {
        let mut m = ProjMap::identity(self.ambient());
        for &s in w {
            m = m.compose(&self.generators[s as usize].map);
        }
        m
    }
}

/// An element of the ball with its shortest word.
#[derive(Clone, Debug)]
pub struct Element {
    pub word: Vec<u8>,
    pub map: ProjMap,
    normalized: DMatrix<f64>,
}

impl Element {
    pub fn normalized(&self) -> &DMatrix<f64> {
        &self.normalized
    }
}

/// Scale to unit Frobenius norm with the first significant entry positive.
pub(crate) fn normalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = m.norm();
    let m = m / s;
    let first = m.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
    if first < 0.0 {
        -m
    } else {
        m
    }
}

fn ord_key(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    if b < 0 {
        i64::MIN - b - 1
    } else {
        b
    }
}

/// Elements keyed by a fixed linear functional of their normalized matrix;
/// candidates within tolerance are compared entrywise, then on probe points.
#[derive(Clone, Debug)]
pub(crate) struct DedupIndex {
    weights: Vec<f64>,
    wsum: f64,
    map: BTreeMap<i64, Vec<usize>>,
    probes: Vec<DVector<f64>>,
    dom: ConvexDomain,
}

impl DedupIndex {
    pub(crate) fn new(dom: &ConvexDomain) -> Self {
        let n = dom.ambient();
        let weights: Vec<f64> = (0..n * n)
            .map(|i| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin())
            .collect();
        let wsum = weights.iter().sum();
        let probes = (0..5)
            .map(|i| {
                let mut r = rng::stream(0xdeda, i);
                dom.sample_interior_vec(&mut r)
            })
            .collect();
        DedupIndex {
            weights,
            wsum,
            map: BTreeMap::new(),
            probes,
            dom: dom.clone(),
        }
    }

    fn key(&self, m: &DMatrix<f64>) -> f64 {
        m.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub(crate) fn find(&self, elems: &[Element], m: &DMatrix<f64>, g: &ProjMap) -> Option<usize> {
        let k = self.key(m);
        let r = DEDUP_TOL * self.wsum;
        self.map
            .range(ord_key(k - r)..=ord_key(k + r))
            .flat_map(|(_, v)| v.iter().copied())
            .find(|&i| {
                (&elems[i].normalized - m).amax() <= DEDUP_TOL && self.same_action(&elems[i].map, g)
            })
    }

    /// Normalized matrices of large elements agree to many digits even when
    /// the elements differ, so equality is confirmed by the Hilbert distance
    /// between the images of the probe points.
    fn same_action(&self, a: &ProjMap, b: &ProjMap) -> bool {
        let image = |g: &ProjMap, p: &DVector<f64>| {
            let v = g.apply_vec(p);
            let f = self.dom.chart().eval(&v);
            v / f
        };
        self.probes.iter().all(|p| {
            let (u, v) = (image(a, p), image(b, p));
            let d = hilbert_lifted(&self.dom, &u, &v);
            if d.is_finite() {
                d <= 1e-6
            } else {
                matches!((ProjPoint::new(u), ProjPoint::new(v)), (Ok(x), Ok(y)) if x.angle_to(&y) <= 1e-12)
            }
        })
    }

    pub(crate) fn insert(&mut self, m: &DMatrix<f64>, idx: usize) {
        self.map.entry(ord_key(self.key(m))).or_default().push(idx);
    }
}

/// Distinct elements of word length ≤ L, breadth first, each with a
/// shortest word.
#[derive(Clone, Debug)]
pub struct Ball {
    pub elements: Vec<Element>,
    pub radius: usize,
    /// Whether two distinct reduced words ever gave the same element.
    pub relations_found: bool,
    index: DedupIndex,
    by_word: HashMap<Vec<u8>, usize>,
}

impl Ball {
    pub fn word_length(&self, i: usize) -> usize {
        self.elements[i].word.len()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of the element with this shortest word, if stored under it.
    pub fn by_word(&self, w: &[u8]) -> Option<usize> {
        self.by_word.get(w).copied()
    }

    /// Index of the element equal to g, if it lies in the ball.
    pub fn find(&self, g: &ProjMap) -> Option<usize> {
        self.index.find(&self.elements, &normalize(g.matrix()), g)
    }
}

pub fn enumerate_ball(grp: &MarkedGroup, radius: usize) -> Result<Ball> {
    if radius > BALL_RADIUS_CAP {
        return Err(Error::BallTooLarge(radius));
    }
    let n = grp.ambient();
    let id = ProjMap::identity(n);
    let mut index = DedupIndex::new(&grp.domain);
    let mut elements = vec![Element {
        word: Vec::new(),
        normalized: normalize(id.matrix()),
        map: id,
    }];
    index.insert(&elements[0].normalized, 0);
    let mut by_word = HashMap::new();
    by_word.insert(Vec::new(), 0);
    let mut relations_found = false;
    let mut layer = vec![0usize];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &e in &layer {
            for (s, gen) in grp.generators.iter().enumerate() {
                if let Some(&last) = elements[e].word.last() {
                    if grp.generators[last as usize].inverse == s {
                        continue;
                    }
                }
                let map = elements[e].map.compose(&gen.map);
                let normalized = normalize(map.matrix());
                if index.find(&elements, &normalized, &map).is_some() {
                    relations_found = true;
                    continue;
                }
                let mut word = elements[e].word.clone();
                word.push(s as u8);
                let idx = elements.len();
                if idx >= BALL_BUDGET {
                    return Err(Error::BallTooLarge(idx));
                }
                index.insert(&normalized, idx);
                by_word.insert(word.clone(), idx);
                elements.push(Element {
                    word,
                    map,
                    normalized,
                });
                next.push(idx);
            }
        }
        layer = next;
    }
    Ok(Ball {
        elements,
        radius,
        relations_found,
        index,
        by_word,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn inverse_labels() {
        assert_eq!(inverse_label("a"), "A");
        assert_eq!(inverse_label("B"), "b");
        assert_eq!(inverse_label("g1"), "g1^-1");
        assert_eq!(inverse_label("g1^-1"), "g1");
    }

    #[test]
    fn ball_sizes() {
        let z2 = bundled::z2_simplex();
        let counts: Vec<usize> = (0..=3)
            .map(|l| enumerate_ball(&z2, l).unwrap().len())
            .collect();
        assert_eq!(counts, vec![1, 5, 13, 25]);
        let f2 = bundled::fuchsian();
        let b = enumerate_ball(&f2, 3).unwrap();
        assert_eq!(b.len(), 53);
        assert!(!b.relations_found);
        assert!(enumerate_ball(&z2, 3).unwrap().relations_found);
        assert!(matches!(
            enumerate_ball(&f2, 15),
            Err(Error::BallTooLarge(_))
        ));
    }

    #[test]
    fn words_reduce() {
        let f2 = bundled::fuchsian();
        let a = 0u8;
        let ai = f2.generators[0].inverse as u8;
        assert_eq!(
            f2.reduce(&[a, 1, f2.generators[1].inverse as u8, ai]),
            Vec::<u8>::new()
        );
        assert_eq!(f2.word_string(&[a, ai, 1]), "aAb");
        assert_eq!(f2.word_string(&[]), "e");
        assert_eq!(f2.parse_word("aAb").unwrap(), vec![a, ai, 1]);
        assert!(f2.parse_word("x").is_err());
        let w = [0u8, 1, 1];
        let g = f2.evaluate(&w).compose(&f2.evaluate(&f2.inverse_word(&w)));
        assert!(is_projective_identity(g.matrix()));
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"domain": {"type": "simplex", "dim": 2},
            "generators": [{"label": "a", "matrix": [[2,0,0],[0,1,0],[0,0,0.5]]}],
            "cocompact": false}"#;
        let g = MarkedGroup::from_json(text, None).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.generators[1].label, "A");
        let bad = r#"{"domain": {"type": "simplex", "dim": 2},
            "generators": [{"label": "a", "matrix": [[0,1,0],[-1,0,0],[0,0,1]]}]}"#;
        assert!(matches!(
            MarkedGroup::from_json(bad, None),
            Err(Error::InvalidGroup(_))
        ));
        let err = MarkedGroup::from_json("{\"domain\": ", None).unwrap_err();
        assert!(matches!(err, Error::Json(ref s) if s.contains("line 1")));
    }
}
