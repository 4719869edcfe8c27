//! Rules found with the default search settings, bundled with the crate.

use crate::archive::read_rule;
use crate::error::{Error, Result};
use crate::geometry::{Domain, FacetKind};
use crate::rule::QuadratureRule;
use crate::sbp::{build_sbp, SbpOperator};

pub const SHIPPED: &[(Domain, FacetKind, usize)] = &[
    (Domain::Triangle, FacetKind::Lgl, 1),
    (Domain::Triangle, FacetKind::Lgl, 2),
    (Domain::Triangle, FacetKind::Lgl, 3),
    (Domain::Triangle, FacetKind::Lgl, 4),
    (Domain::Triangle, FacetKind::Lgl, 5),
    (Domain::Triangle, FacetKind::Lgl, 6),
    (Domain::Triangle, FacetKind::Lg, 1),
    (Domain::Triangle, FacetKind::Lg, 2),
    (Domain::Triangle, FacetKind::Lg, 3),
    (Domain::Triangle, FacetKind::Lg, 4),
    (Domain::Tetrahedron, FacetKind::Generated, 1),
    (Domain::Tetrahedron, FacetKind::Generated, 2),
    (Domain::Tetrahedron, FacetKind::Generated, 3),
    (Domain::Tetrahedron, FacetKind::Generated, 4),
    (Domain::Tetrahedron, FacetKind::Generated, 5),
];

const TEXTS: [&str; 15] = [
    include_str!("../rules/tri-lgl-q1.json"),
    include_str!("../rules/tri-lgl-q2.json"),
    include_str!("../rules/tri-lgl-q3.json"),
    include_str!("../rules/tri-lgl-q4.json"),
    include_str!("../rules/tri-lgl-q5.json"),
    include_str!("../rules/tri-lgl-q6.json"),
    include_str!("../rules/tri-lg-q1.json"),
    include_str!("../rules/tri-lg-q2.json"),
    include_str!("../rules/tri-lg-q3.json"),
    include_str!("../rules/tri-lg-q4.json"),
    include_str!("../rules/tet-generated-q1.json"),
    include_str!("../rules/tet-generated-q2.json"),
    include_str!("../rules/tet-generated-q3.json"),
    include_str!("../rules/tet-generated-q4.json"),
    include_str!("../rules/tet-generated-q5.json"),
];

pub fn file_name(domain: Domain, facet: FacetKind, qv: usize) -> String {
    format!("{}-{}-q{qv}.json", domain.tag(), facet.tag())
}

/// Archive text of a bundled rule.
pub fn shipped_text(domain: Domain, facet: FacetKind, qv: usize) -> Option<&'static str> {
    SHIPPED
        .iter()
        .position(|&s| s == (domain, facet, qv))
        .map(|i| TEXTS[i])
}

pub fn shipped_rule(domain: Domain, facet: FacetKind, qv: usize) -> Result<QuadratureRule<f64>> {
    let text = shipped_text(domain, facet, qv).ok_or_else(|| {
        Error::InvalidArgument(format!("no bundled {} rule of degree {qv} with {} facets", domain.tag(), facet.tag()))
    })?;
    read_rule(text)
}

/// Bundled rule for a degree-`p` operator: degree `2p` if available, else `2p - 1`.
pub fn rule_for_operator(domain: Domain, facet: FacetKind, p: usize) -> Result<QuadratureRule<f64>> {
    shipped_rule(domain, facet, 2 * p).or_else(|_| shipped_rule(domain, facet, (2 * p).saturating_sub(1)))
}

pub fn shipped_operator(domain: Domain, facet: FacetKind, p: usize) -> Result<SbpOperator<f64>> {
    build_sbp(&rule_for_operator(domain, facet, p)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_rules_load() {
        for &(domain, facet, qv) in SHIPPED {
            let rule = shipped_rule(domain, facet, qv).unwrap();
            assert_eq!((rule.domain, rule.facet_kind, rule.qv), (domain, facet, qv));
        }
        assert!(shipped_rule(Domain::Triangle, FacetKind::Lg, 9).is_err());
        assert_eq!(rule_for_operator(Domain::Tetrahedron, FacetKind::Generated, 3).unwrap().qv, 5);
        assert_eq!(rule_for_operator(Domain::Triangle, FacetKind::Lgl, 2).unwrap().qv, 4);
    }
}
