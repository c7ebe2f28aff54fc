//! Worked examples on the 2-simplex and the disk, and consequences of the
//! rank-one verdict.

use hilbert_core::automorphism::{axes, classify, spectral};
use hilbert_core::group::enumerate_ball;
use hilbert_core::rank_one::{
    estimate_contraction, find_half_triangle, verify_rank_one_properties, ContractionTarget,
    ContractionVerdict,
};
use hilbert_core::{
    bundled, is_rank_one, ConvexDomain, GeodesicLine, ProjMap, ProjPoint, RankOneReason,
};
use nalgebra::DMatrix;

fn pt(v: &[f64]) -> ProjPoint {
    ProjPoint::from_slice(v).unwrap()
}

fn e(i: usize) -> ProjPoint {
    ProjPoint::basis(3, i)
}

fn boost(s: f64) -> ProjMap {
    let (c, h) = (s.cosh(), s.sinh());
    ProjMap::new(DMatrix::from_row_slice(
        3,
        3,
        &[c, 0.0, h, 0.0, 1.0, 0.0, h, 0.0, c],
    ))
    .unwrap()
}

fn same_pair(p: &(ProjPoint, ProjPoint), a: &ProjPoint, b: &ProjPoint) -> bool {
    (p.0.approx_eq(a, 1e-9) && p.1.approx_eq(b, 1e-9))
        || (p.0.approx_eq(b, 1e-9) && p.1.approx_eq(a, 1e-9))
}

#[test]
fn distinct_eigenvalues_on_the_simplex() {
    let t2 = ConvexDomain::simplex(2);
    let g1 = ProjMap::diagonal(&[4.0, 2.0, 0.125]).unwrap();
    let rep = axes(&g1, &t2).unwrap();
    let pairs: Vec<(ProjPoint, ProjPoint)> = rep
        .pseudo_axes
        .iter()
        .map(|p| (p.attracting.clone(), p.repelling.clone()))
        .collect();
    assert_eq!(pairs.len(), 3);
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        assert!(pairs.iter().any(|p| same_pair(p, &e(a), &e(b))));
        assert!(t2.segment_in_boundary(&e(a), &e(b)).unwrap());
    }
    let principal: Vec<_> = rep.principal().collect();
    assert_eq!(principal.len(), 1);
    assert!(same_pair(
        &(
            principal[0].attracting.clone(),
            principal[0].repelling.clone()
        ),
        &e(0),
        &e(2)
    ));
    assert!(rep.axis.is_none());
    assert_eq!(
        is_rank_one(&t2, &g1, false).unwrap().reason,
        RankOneReason::NoAxis
    );
}

#[test]
fn repeated_eigenvalue_on_the_simplex() {
    let t2 = ConvexDomain::simplex(2);
    let sd = spectral(&ProjMap::diagonal(&[2.0, 1.0, 1.0]).unwrap(), 1e-8).unwrap();
    assert_eq!(sd.lambda_min, 1.0);
    assert_eq!(sd.e_minus.ncols(), 2);
    let c = classify(&sd);
    assert!(c.bi_semi_proximal && !c.biproximal);

    let g2 = ProjMap::diagonal(&[4.0, 0.5, 0.5]).unwrap();
    let rep = axes(&g2, &t2).unwrap();
    let axis = rep.axis.expect("Q_t are axes");
    let family = axis.family.expect("uncountable family");
    for k in 1..10 {
        let t = k as f64 / 10.0;
        let q = pt(&[0.0, t, 1.0 - t]);
        let (a, b) = family.member(&t2, 0.0, 0.0);
        assert!(a.approx_eq(&e(0), 1e-12) || b.approx_eq(&e(0), 1e-12));
        // e_2 closes a half triangle on every Q_t.
        assert!(t2.segment_in_boundary(&e(0), &e(1)).unwrap());
        assert!(t2.segment_in_boundary(&e(1), &q).unwrap());
        assert!(find_half_triangle(&t2, &e(0), &q)
            .unwrap()
            .witness
            .is_some());
    }
    let v = is_rank_one(&t2, &g2, false).unwrap();
    assert_eq!(v.reason, RankOneReason::NotBiproximal);
    assert!(!v.is_rank_one && v.witness.is_some());
    assert_eq!(v.axes_with_witness, v.axes_scanned);
    assert!(!verify_rank_one_properties(&t2, &g2, 1).unwrap().biproximal);
}

#[test]
fn boost_on_the_disk() {
    let disk = ConvexDomain::ellipsoid(2);
    let g = boost(1.3);
    let rep = axes(&g, &disk).unwrap();
    assert_eq!(rep.pseudo_axes.len(), 1);
    assert!(rep.pseudo_axes[0].is_axis);
    let axis = rep.axis.unwrap();
    assert!(same_pair(
        &(axis.attracting, axis.repelling),
        &pt(&[1.0, 0.0, 1.0]),
        &pt(&[-1.0, 0.0, 1.0])
    ));
    let v = is_rank_one(&disk, &g, false).unwrap();
    assert_eq!(v.reason, RankOneReason::Verified);
    assert!(verify_rank_one_properties(&disk, &g, 2).unwrap().all_pass());
}

#[test]
fn faces_are_transitive() {
    let t2 = ConvexDomain::simplex(2);
    let square = ConvexDomain::polytope(&[
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
    ])
    .unwrap();
    for dom in [t2, square] {
        let verts: Vec<ProjPoint> = dom
            .polyhedral_vertices()
            .unwrap()
            .into_iter()
            .map(|(v, _)| ProjPoint::new(v).unwrap())
            .collect();
        // Points of open edges and vertices.
        let mut pts = verts.clone();
        for i in 0..verts.len() {
            for j in 0..verts.len() {
                if i != j && dom.segment_in_boundary(&verts[i], &verts[j]).unwrap() {
                    for t in [0.3, 0.6] {
                        let v = dom.lift(&verts[i]).unwrap() * t
                            + dom.lift(&verts[j]).unwrap() * (1.0 - t);
                        pts.push(ProjPoint::new(v).unwrap());
                    }
                }
            }
        }
        for x in &pts {
            for y in &pts {
                if x == y || !dom.segment_in_boundary(x, y).unwrap() {
                    continue;
                }
                let (fx, fy) = (dom.face_of(x).unwrap(), dom.face_of(y).unwrap());
                for a in pts.iter().filter(|a| dom.face_of(a).unwrap() == fx) {
                    for b in pts.iter().filter(|b| dom.face_of(b).unwrap() == fy) {
                        if a != b {
                            assert!(dom.segment_in_boundary(a, b).unwrap());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn repelling_faces_miss_the_attracting_set() {
    let t2 = ConvexDomain::simplex(2);
    for g in [[4.0, 2.0, 0.125], [4.0, 0.5, 0.5], [3.0, 3.0, 0.1]] {
        let rep = axes(&ProjMap::diagonal(&g).unwrap(), &t2).unwrap();
        let sd = &rep.spectral;
        let boundary_points = |basis: &DMatrix<f64>| -> Vec<ProjPoint> {
            let mut out = Vec::new();
            for k in 0..=8 {
                let t = k as f64 / 8.0;
                let v = if basis.ncols() == 1 {
                    basis.column(0).into_owned()
                } else {
                    basis.column(0) * t + basis.column(1) * (1.0 - t)
                };
                let v = if v.sum() < 0.0 { -v } else { v };
                if let Ok(p) = ProjPoint::new(v) {
                    if t2.classify(&p).unwrap() == hilbert_core::Classification::Boundary {
                        out.push(p);
                    }
                }
            }
            out
        };
        let plus = boundary_points(&sd.e_plus);
        for y in boundary_points(&sd.e_minus) {
            let fy = t2.face_of(&y).unwrap();
            for p in &plus {
                // p in the closed face of y means p's active set contains y's.
                let fp = t2.face_of(p).unwrap();
                assert!(
                    !fy.active_constraints.is_subset(&fp.active_constraints),
                    "{g:?}"
                );
            }
        }
    }
}

#[test]
fn fast_path_agrees_with_the_full_check() {
    for grp in [bundled::fuchsian(), bundled::z2_simplex()] {
        let ball = enumerate_ball(&grp, 3).unwrap();
        for el in &ball.elements {
            let slow = is_rank_one(&grp.domain, &el.map, false).unwrap();
            let fast = is_rank_one(&grp.domain, &el.map, true).unwrap();
            assert_eq!(slow.is_rank_one, fast.is_rank_one, "{:?}", el.word);
        }
    }
}

#[test]
fn rank_one_axes_contract_and_flat_axes_do_not() {
    let disk = ConvexDomain::ellipsoid(2);
    let f2 = bundled::fuchsian();
    for w in ["a", "ab", "aBBa"] {
        let g = f2.evaluate(&f2.parse_word(w).unwrap());
        let v = is_rank_one(&disk, &g, false).unwrap();
        assert!(v.is_rank_one);
        let (p, q) = v.axis.unwrap();
        let line = GeodesicLine::new(&disk, &p, &q).unwrap();
        let rep =
            estimate_contraction(&disk, &ContractionTarget::Line(line), 300, 16.0, 5).unwrap();
        assert_eq!(rep.verdict, ContractionVerdict::Contracting, "{w}");
        assert!(rep.sisto_contracting && rep.bf_contracting);
    }
    let t2 = ConvexDomain::simplex(2);
    let line = GeodesicLine::new(&t2, &e(0), &pt(&[0.0, 0.5, 0.5])).unwrap();
    let rep = estimate_contraction(&t2, &ContractionTarget::Line(line), 300, 16.0, 5).unwrap();
    assert!(!rep.sisto_contracting && !rep.bf_contracting);
    assert!(
        !is_rank_one(&t2, &ProjMap::diagonal(&[4.0, 0.5, 0.5]).unwrap(), false)
            .unwrap()
            .is_rank_one
    );
}
