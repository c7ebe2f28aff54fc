//! Example domains and groups shipped with the crate.

use crate::domain::ConvexDomain;
use crate::group::MarkedGroup;

pub const SIMPLEX2: &str = include_str!("../data/simplex2.json");
pub const DISK: &str = include_str!("../data/disk.json");
/// Two positive diagonal generators on T_2: a free abelian group of rank 2
/// with no rank-one elements.
pub const Z2_SIMPLEX: &str = include_str!("../data/z2_simplex.json");
/// Ping-pong pair of hyperbolic boosts (displacement 2) on the disk; free of
/// rank 2.
pub const FUCHSIAN: &str = include_str!("../data/fuchsian.json");
pub const BOOST_CYCLIC: &str = include_str!("../data/boost_cyclic.json");

/// (name, JSON) of every bundled group.
pub const GROUPS: [(&str, &str); 3] = [
    ("z2_simplex", Z2_SIMPLEX),
    ("fuchsian", FUCHSIAN),
    ("boost_cyclic", BOOST_CYCLIC),
];

pub const DOMAINS: [(&str, &str); 2] = [("simplex2", SIMPLEX2), ("disk", DISK)];

fn group(text: &str) -> MarkedGroup {
    MarkedGroup::from_json(text, None).expect("bundled group is valid")
}

pub fn simplex2() -> ConvexDomain {
    ConvexDomain::from_json(SIMPLEX2).expect("bundled domain is valid")
}

pub fn disk() -> ConvexDomain {
    ConvexDomain::from_json(DISK).expect("bundled domain is valid")
}

pub fn z2_simplex() -> MarkedGroup {
    group(Z2_SIMPLEX)
}

pub fn fuchsian() -> MarkedGroup {
    group(FUCHSIAN)
}

pub fn boost_cyclic() -> MarkedGroup {
    group(BOOST_CYCLIC)
}

/// Bundled group by name.
pub fn group_by_name(name: &str) -> Option<MarkedGroup> {
    GROUPS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| group(t))
}

pub fn domain_by_name(name: &str) -> Option<ConvexDomain> {
    DOMAINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| ConvexDomain::from_json(t).expect("bundled domain is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_parse() {
        for (name, _) in GROUPS {
            let g = group_by_name(name).unwrap();
            assert_eq!(g.len() % 2, 0, "{name}");
        }
        assert_eq!(simplex2().ambient(), 3);
        assert!(disk().is_strictly_convex());
    }
}
