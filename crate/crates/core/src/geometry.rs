//! Reference simplices, symmetry orbits and node assembly.
//!
//! Reference elements use the vertex listings
//!
//! * interval: `-1`, `1`
//! * triangle: `(-1,-1)`, `(1,-1)`, `(-1,1)`
//! * tetrahedron: `(-1,-1,-1)`, `(1,-1,-1)`, `(-1,1,-1)`, `(-1,-1,1)`
//!
//! and facet `k` is the facet opposite vertex `k`, i.e. the set where the
//! `k`-th barycentric coordinate vanishes.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Barycentric entries may dip this far below zero and still count as inside.
pub const CLOSURE_TOL: f64 = 1e-14;
/// Two nodes closer than this are considered the same node.
pub const DUPLICATE_TOL: f64 = 1e-12;
/// A barycentric entry at most this large puts a node on the matching facet.
pub const FACET_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("orbit kind {kind} is not defined on the {domain}")]
    KindNotInDomain { kind: OrbitKind, domain: Domain },
    #[error("orbit kind {kind} takes {expected} parameters, got {got}")]
    ParamCount {
        kind: OrbitKind,
        expected: usize,
        got: usize,
    },
    #[error("orbit {kind} parameters put nodes outside the closed simplex")]
    ParamOutOfRange { kind: OrbitKind },
    #[error("degenerate orbit: {kind} parameters collapse the orbit to {distinct} distinct nodes")]
    DegenerateOrbit { kind: OrbitKind, distinct: usize },
    #[error("nodes {0} and {1} coincide")]
    DuplicateNodes(usize, usize),
    #[error("need at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("facet {0} does not exist")]
    InvalidFacet(usize),
    #[error("point lies outside the closed reference simplex")]
    OutsideClosure,
}

/// Reference domain tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "interval")]
    Interval,
    #[serde(rename = "tri")]
    Triangle,
    #[serde(rename = "tet")]
    Tetrahedron,
}

impl Domain {
    pub fn from_dim(d: usize) -> Result<Self, GeometryError> {
        match d {
            1 => Ok(Domain::Interval),
            2 => Ok(Domain::Triangle),
            3 => Ok(Domain::Tetrahedron),
            _ => Err(GeometryError::UnsupportedDimension(d)),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Domain::Interval => 1,
            Domain::Triangle => 2,
            Domain::Tetrahedron => 3,
        }
    }

    /// Domain of the facets, `None` for the interval whose facets are points.
    pub fn facet_domain(self) -> Option<Domain> {
        match self {
            Domain::Interval => None,
            Domain::Triangle => Some(Domain::Interval),
            Domain::Tetrahedron => Some(Domain::Triangle),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Domain::Interval => "interval",
            Domain::Triangle => "tri",
            Domain::Tetrahedron => "tet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interval" | "line" => Some(Domain::Interval),
            "tri" | "triangle" => Some(Domain::Triangle),
            "tet" | "tetrahedron" => Some(Domain::Tetrahedron),
            _ => None,
        }
    }

    /// Measure of the reference element.
    pub fn measure<T: Real>(self) -> T {
        match self {
            Domain::Interval | Domain::Triangle => T::lit(2.0),
            Domain::Tetrahedron => T::lit(4.0 / 3.0),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Interval => "interval",
            Domain::Triangle => "triangle",
            Domain::Tetrahedron => "tetrahedron",
        })
    }
}

/// One facet of a reference simplex.
#[derive(Clone, Debug)]
pub struct Facet<T: Real> {
    /// Index of the vertex this facet is opposite to.
    pub opposite: usize,
    /// Facet vertices in increasing order; they define the facet-local frame.
    pub vertices: Vec<usize>,
    /// Outward unit normal.
    pub normal: Vec<T>,
    pub measure: T,
}

#[derive(Clone, Debug)]
pub struct ReferenceSimplex<T: Real> {
    pub domain: Domain,
    /// `d + 1` rows of `d` coordinates.
    pub vertices: DMatrix<T>,
    pub measure: T,
    pub facets: Vec<Facet<T>>,
    /// Maps `[x; 1]` to barycentric coordinates.
    bary_map: DMatrix<T>,
}

fn vertex_table(domain: Domain) -> Vec<Vec<f64>> {
    match domain {
        Domain::Interval => vec![vec![-1.0], vec![1.0]],
        Domain::Triangle => vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]],
        Domain::Tetrahedron => vec![
            vec![-1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ],
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Measure of the simplex spanned by the rows of `pts` (any embedding dimension).
pub fn simplex_measure<T: Real>(pts: &DMatrix<T>) -> T {
    let k = pts.nrows() - 1;
    if k == 0 {
        return T::one();
    }
    let dim = pts.ncols();
    let mut edges = DMatrix::<T>::zeros(dim, k);
    for j in 0..k {
        for i in 0..dim {
            edges[(i, j)] = pts[(j + 1, i)] - pts[(0, i)];
        }
    }
    let gram = edges.transpose() * &edges;
    gram.determinant().abs().sqrt() / T::of_usize(factorial(k))
}

/// Builds the reference simplex of dimension `d`.
pub fn reference_simplex<T: Real>(d: usize) -> Result<ReferenceSimplex<T>, GeometryError> {
    ReferenceSimplex::new(Domain::from_dim(d)?)
}

impl<T: Real> ReferenceSimplex<T> {
    pub fn new(domain: Domain) -> Result<Self, GeometryError> {
        let d = domain.dim();
        let table = vertex_table(domain);
        let vertices = DMatrix::from_fn(d + 1, d, |i, j| T::lit(table[i][j]));
        // [v_0 .. v_d; 1 .. 1] lambda = [x; 1]
        let mut system = DMatrix::<T>::zeros(d + 1, d + 1);
        for k in 0..=d {
            for i in 0..d {
                system[(i, k)] = vertices[(k, i)];
            }
            system[(d, k)] = T::one();
        }
        let bary_map = system
            .try_inverse()
            .expect("reference simplex vertices are affinely independent");
        let measure = simplex_measure(&vertices);

        let mut facets = Vec::with_capacity(d + 1);
        for opposite in 0..=d {
            let fv: Vec<usize> = (0..=d).filter(|&k| k != opposite).collect();
            // outward normal is minus the gradient of the opposite barycentric coordinate
            let grad: Vec<T> = (0..d).map(|i| bary_map[(opposite, i)]).collect();
            let norm = grad.iter().fold(T::zero(), |s, &g| s + g * g).sqrt();
            let normal = grad.iter().map(|&g| -g / norm).collect();
            let pts = DMatrix::from_fn(fv.len(), d, |r, c| vertices[(fv[r], c)]);
            facets.push(Facet {
                opposite,
                vertices: fv,
                normal,
                measure: simplex_measure(&pts),
            });
        }
        Ok(ReferenceSimplex {
            domain,
            vertices,
            measure,
            facets,
            bary_map,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Cartesian coordinates `Tᵀ λ` of a barycentric tuple.
    pub fn to_cartesian(&self, bary: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..=d).fold(T::zero(), |s, k| s + bary[k] * self.vertices[(k, i)]))
            .collect()
    }

    pub fn barycentric(&self, x: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..=d)
            .map(|k| {
                let mut s = self.bary_map[(k, d)];
                for i in 0..d {
                    s += self.bary_map[(k, i)] * x[i];
                }
                s
            })
            .collect()
    }

    /// Whether `x` lies in the closed simplex up to `tol` in barycentric units.
    pub fn contains(&self, x: &[T], tol: T) -> bool {
        self.barycentric(x).iter().all(|&l| l >= -tol)
    }

    pub fn centroid(&self) -> Vec<T> {
        let d = self.dim();
        let w = T::one() / T::of_usize(d + 1);
        self.to_cartesian(&vec![w; d + 1])
    }

    pub fn facet(&self, id: usize) -> Result<&Facet<T>, GeometryError> {
        self.facets.get(id).ok_or(GeometryError::InvalidFacet(id))
    }
}

/// Symmetry group kinds. Facet kinds place every node on the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitKind {
    Vert,
    MidEdge,
    Edge,
    FaceCent,
    Face21,
    Face111,
    S1,
    S11,
    S21,
    S111,
    S31,
    S22,
    S211,
    S1111,
}

impl fmt::Display for OrbitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl OrbitKind {
    pub const ALL: [OrbitKind; 14] = [
        OrbitKind::Vert,
        OrbitKind::MidEdge,
        OrbitKind::Edge,
        OrbitKind::FaceCent,
        OrbitKind::Face21,
        OrbitKind::Face111,
        OrbitKind::S1,
        OrbitKind::S11,
        OrbitKind::S21,
        OrbitKind::S111,
        OrbitKind::S31,
        OrbitKind::S22,
        OrbitKind::S211,
        OrbitKind::S1111,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrbitKind::Vert => "vert",
            OrbitKind::MidEdge => "midedge",
            OrbitKind::Edge => "edge",
            OrbitKind::FaceCent => "facecent",
            OrbitKind::Face21 => "face21",
            OrbitKind::Face111 => "face111",
            OrbitKind::S1 => "s1",
            OrbitKind::S11 => "s11",
            OrbitKind::S21 => "s21",
            OrbitKind::S111 => "s111",
            OrbitKind::S31 => "s31",
            OrbitKind::S22 => "s22",
            OrbitKind::S211 => "s211",
            OrbitKind::S1111 => "s1111",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_facet(self) -> bool {
        matches!(
            self,
            OrbitKind::Vert
                | OrbitKind::MidEdge
                | OrbitKind::Edge
                | OrbitKind::FaceCent
                | OrbitKind::Face21
                | OrbitKind::Face111
        )
    }

    pub fn num_params(self) -> usize {
        match self {
            OrbitKind::Vert
            | OrbitKind::MidEdge
            | OrbitKind::FaceCent
            | OrbitKind::S1 => 0,
            OrbitKind::Edge
            | OrbitKind::Face21
            | OrbitKind::S11
            | OrbitKind::S21
            | OrbitKind::S31
            | OrbitKind::S22 => 1,
            OrbitKind::Face111 | OrbitKind::S111 | OrbitKind::S211 => 2,
            OrbitKind::S1111 => 3,
        }
    }

    pub fn valid_for(self, domain: Domain) -> bool {
        use OrbitKind::*;
        match domain {
            Domain::Interval => matches!(self, Vert | S1 | S11),
            Domain::Triangle => matches!(self, Vert | MidEdge | Edge | S1 | S21 | S111),
            Domain::Tetrahedron => !matches!(self, S11 | S21 | S111),
        }
    }

    /// Number of nodes in a non-degenerate orbit.
    pub fn orbit_size(self, domain: Domain) -> usize {
        use OrbitKind::*;
        match (domain, self) {
            (_, S1) => 1,
            (Domain::Interval, _) => 2,
            (Domain::Triangle, S21 | Vert | MidEdge) => 3,
            (Domain::Triangle, _) => 6,
            (Domain::Tetrahedron, S31 | FaceCent | Vert) => 4,
            (Domain::Tetrahedron, S22 | MidEdge) => 6,
            (Domain::Tetrahedron, S211 | Face21 | Edge) => 12,
            (Domain::Tetrahedron, _) => 24,
        }
    }

    /// Orbit generator as an affine map of the parameters:
    /// `tuple = base + Σ_j params[j] * slopes[j]`.
    fn generator<T: Real>(self, domain: Domain) -> (Vec<T>, Vec<Vec<T>>) {
        use OrbitKind::*;
        let f = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let third = 1.0 / 3.0;
        match (domain, self) {
            (Domain::Interval, S1) => (f(&[0.5, 0.5]), vec![]),
            (Domain::Interval, S11) => (f(&[0.0, 1.0]), vec![f(&[1.0, -1.0])]),
            (Domain::Interval, Vert) => (f(&[1.0, 0.0]), vec![]),
            (Domain::Triangle, S1) => (f(&[third, third, third]), vec![]),
            (Domain::Triangle, S21) => (f(&[0.0, 0.0, 1.0]), vec![f(&[1.0, 1.0, -2.0])]),
            (Domain::Triangle, S111) => (
                f(&[0.0, 0.0, 1.0]),
                vec![f(&[1.0, 0.0, -1.0]), f(&[0.0, 1.0, -1.0])],
            ),
            (Domain::Triangle, Vert) => (f(&[1.0, 0.0, 0.0]), vec![]),
            (Domain::Triangle, MidEdge) => (f(&[0.5, 0.5, 0.0]), vec![]),
            (Domain::Triangle, Edge) => (f(&[0.0, 1.0, 0.0]), vec![f(&[1.0, -1.0, 0.0])]),
            (Domain::Tetrahedron, S1) => (f(&[0.25; 4]), vec![]),
            (Domain::Tetrahedron, S31) => {
                (f(&[0.0, 0.0, 0.0, 1.0]), vec![f(&[1.0, 1.0, 1.0, -3.0])])
            }
            (Domain::Tetrahedron, S22) => {
                (f(&[0.0, 0.0, 0.5, 0.5]), vec![f(&[1.0, 1.0, -1.0, -1.0])])
            }
            (Domain::Tetrahedron, S211) => (
                f(&[0.0, 0.0, 0.0, 1.0]),
                vec![f(&[1.0, 1.0, 0.0, -2.0]), f(&[0.0, 0.0, 1.0, -1.0])],
            ),
            (Domain::Tetrahedron, S1111) => (
                f(&[0.0, 0.0, 0.0, 1.0]),
                vec![
                    f(&[1.0, 0.0, 0.0, -1.0]),
                    f(&[0.0, 1.0, 0.0, -1.0]),
                    f(&[0.0, 0.0, 1.0, -1.0]),
                ],
            ),
            (Domain::Tetrahedron, FaceCent) => (f(&[third, third, third, 0.0]), vec![]),
            (Domain::Tetrahedron, Vert) => (f(&[1.0, 0.0, 0.0, 0.0]), vec![]),
            (Domain::Tetrahedron, MidEdge) => (f(&[0.5, 0.5, 0.0, 0.0]), vec![]),
            (Domain::Tetrahedron, Face21) => {
                (f(&[0.0, 0.0, 1.0, 0.0]), vec![f(&[1.0, 1.0, -2.0, 0.0])])
            }
            (Domain::Tetrahedron, Edge) => {
                (f(&[0.0, 1.0, 0.0, 0.0]), vec![f(&[1.0, -1.0, 0.0, 0.0])])
            }
            (Domain::Tetrahedron, Face111) => (
                f(&[0.0, 0.0, 1.0, 0.0]),
                vec![f(&[1.0, 0.0, -1.0, 0.0]), f(&[0.0, 1.0, -1.0, 0.0])],
            ),
            _ => unreachable!("kind validity is checked by the caller"),
        }
    }

    /// Parameter box used for random initialisation; the feasibility of the
    /// resulting tuple is still checked on expansion.
    pub fn param_bounds(self) -> Vec<(f64, f64)> {
        use OrbitKind::*;
        match self {
            Edge | S11 | S21 | Face21 | S22 => vec![(0.0, 0.5)],
            S31 => vec![(0.0, 1.0 / 3.0)],
            Face111 | S111 => vec![(0.0, 1.0), (0.0, 1.0)],
            S211 => vec![(0.0, 0.5), (0.0, 1.0)],
            S1111 => vec![(0.0, 1.0); 3],
            _ => vec![],
        }
    }
}

/// One symmetry group instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryOrbit<T: Real> {
    pub kind: OrbitKind,
    pub params: Vec<T>,
    pub weight: T,
}

impl<T: Real> SymmetryOrbit<T> {
    pub fn new(kind: OrbitKind, params: Vec<T>, weight: T) -> Self {
        SymmetryOrbit {
            kind,
            params,
            weight,
        }
    }

    pub fn is_facet(&self) -> bool {
        self.kind.is_facet()
    }

    pub fn size(&self, domain: Domain) -> usize {
        self.kind.orbit_size(domain)
    }
}

/// A single expanded orbit node with its barycentric tuple and the tuple's
/// derivative with respect to each orbit parameter.
#[derive(Clone, Debug)]
pub struct OrbitNode<T: Real> {
    pub bary: Vec<T>,
    pub dbary: Vec<Vec<T>>,
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

/// Expands an orbit, keeping the parameter derivatives of every node.
///
/// Nodes are produced by applying the vertex permutations of the simplex in
/// lexicographic order and keeping the first occurrence of each tuple.
pub fn expand_orbit_affine<T: Real>(
    orbit: &SymmetryOrbit<T>,
    domain: Domain,
) -> Result<Vec<OrbitNode<T>>, GeometryError> {
    let kind = orbit.kind;
    if !kind.valid_for(domain) {
        return Err(GeometryError::KindNotInDomain { kind, domain });
    }
    if orbit.params.len() != kind.num_params() {
        return Err(GeometryError::ParamCount {
            kind,
            expected: kind.num_params(),
            got: orbit.params.len(),
        });
    }
    let (base, slopes) = kind.generator::<T>(domain);
    let mut tuple = base;
    for (p, s) in orbit.params.iter().zip(&slopes) {
        for (t, &sk) in tuple.iter_mut().zip(s) {
            *t += *p * sk;
        }
    }
    let lo = -T::lit(CLOSURE_TOL);
    let hi = T::one() + T::lit(CLOSURE_TOL);
    if tuple.iter().any(|&l| !(l >= lo && l <= hi)) {
        return Err(GeometryError::ParamOutOfRange { kind });
    }

    let tol = T::lit(DUPLICATE_TOL);
    let mut nodes: Vec<OrbitNode<T>> = Vec::new();
    for perm in permutations(tuple.len()) {
        let bary: Vec<T> = perm.iter().map(|&k| tuple[k]).collect();
        let dup = nodes.iter().any(|n| {
            n.bary
                .iter()
                .zip(&bary)
                .all(|(&a, &b)| (a - b).abs() <= tol)
        });
        if !dup {
            let dbary = slopes
                .iter()
                .map(|s| perm.iter().map(|&k| s[k]).collect())
                .collect();
            nodes.push(OrbitNode { bary, dbary });
        }
    }
    let expected = kind.orbit_size(domain);
    if nodes.len() != expected {
        return Err(GeometryError::DegenerateOrbit {
            kind,
            distinct: nodes.len(),
        });
    }
    Ok(nodes)
}

/// Barycentric tuples of an orbit in canonical order.
pub fn expand_orbit<T: Real>(
    orbit: &SymmetryOrbit<T>,
    domain: Domain,
) -> Result<Vec<Vec<T>>, GeometryError> {
    Ok(expand_orbit_affine(orbit, domain)?
        .into_iter()
        .map(|n| n.bary)
        .collect())
}

/// Orders orbits canonically: facet orbits first, then by kind, then by
/// parameters.
pub fn canonical_order<T: Real>(a: &SymmetryOrbit<T>, b: &SymmetryOrbit<T>) -> Ordering {
    (!a.is_facet())
        .cmp(&!b.is_facet())
        .then(a.kind.cmp(&b.kind))
        .then_with(|| {
            for (x, y) in a.params.iter().zip(&b.params) {
                match x.partial_cmp(y) {
                    Some(Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            Ordering::Equal
        })
}

/// How the facet nodes of a volume rule were chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetKind {
    /// Legendre-Gauss-Lobatto facet nodes (triangle).
    Lgl,
    /// Legendre-Gauss facet nodes (triangle).
    Lg,
    /// Searched symmetric triangle facet rule (tetrahedron).
    Generated,
    /// No facet rule attached.
    None,
}

impl FacetKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lgl" => Some(FacetKind::Lgl),
            "lg" => Some(FacetKind::Lg),
            "generated" | "gen" => Some(FacetKind::Generated),
            "none" | "pi" => Some(FacetKind::None),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            FacetKind::Lgl => "lgl",
            FacetKind::Lg => "lg",
            FacetKind::Generated => "generated",
            FacetKind::None => "none",
        }
    }
}

impl fmt::Display for FacetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Ordered list of orbits plus the target degree.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSignature<T: Real> {
    pub domain: Domain,
    pub orbits: Vec<SymmetryOrbit<T>>,
    pub qv: usize,
    pub facet_layout: FacetKind,
}

impl<T: Real> GroupSignature<T> {
    /// Builds a signature, sorting the orbits canonically.
    pub fn new(
        domain: Domain,
        mut orbits: Vec<SymmetryOrbit<T>>,
        qv: usize,
        facet_layout: FacetKind,
    ) -> Self {
        orbits.sort_by(canonical_order);
        GroupSignature {
            domain,
            orbits,
            qv,
            facet_layout,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.orbits.iter().map(|o| o.size(self.domain)).sum()
    }

    pub fn assemble(&self, elem: &ReferenceSimplex<T>) -> Result<NodeSet<T>, GeometryError> {
        assemble_nodes(&self.orbits, elem)
    }
}

/// Expanded quadrature nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet<T: Real> {
    pub domain: Domain,
    /// `n_p × d` Cartesian coordinates.
    pub coords: DMatrix<T>,
    /// `n_p × (d+1)` barycentric coordinates.
    pub bary: DMatrix<T>,
    pub weights: DVector<T>,
    pub orbit_index: Vec<usize>,
    pub facet_mask: Vec<bool>,
}

impl<T: Real> NodeSet<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> Vec<T> {
        self.coords.row(i).iter().copied().collect()
    }
}

/// Expands every orbit and maps the barycentric tuples to Cartesian nodes.
pub fn assemble_nodes<T: Real>(
    orbits: &[SymmetryOrbit<T>],
    elem: &ReferenceSimplex<T>,
) -> Result<NodeSet<T>, GeometryError> {
    let domain = elem.domain;
    let d = elem.dim();
    let mut bary_rows: Vec<Vec<T>> = Vec::new();
    let mut weights = Vec::new();
    let mut orbit_index = Vec::new();
    for (o, orbit) in orbits.iter().enumerate() {
        for b in expand_orbit(orbit, domain)? {
            bary_rows.push(b);
            weights.push(orbit.weight);
            orbit_index.push(o);
        }
    }
    let n = bary_rows.len();
    let mut coords = DMatrix::<T>::zeros(n, d);
    for (i, b) in bary_rows.iter().enumerate() {
        for (k, x) in elem.to_cartesian(b).into_iter().enumerate() {
            coords[(i, k)] = x;
        }
    }
    let tol = T::lit(DUPLICATE_TOL);
    for i in 0..n {
        for j in 0..i {
            if orbit_index[i] == orbit_index[j] {
                continue;
            }
            let dist2 = (0..d).fold(T::zero(), |s, k| {
                let t = coords[(i, k)] - coords[(j, k)];
                s + t * t
            });
            if dist2.sqrt() < tol {
                return Err(GeometryError::DuplicateNodes(j, i));
            }
        }
    }
    let ftol = T::lit(FACET_TOL);
    let facet_mask = bary_rows
        .iter()
        .map(|b| b.iter().any(|&l| l.abs() <= ftol))
        .collect();
    let bary = DMatrix::from_fn(n, d + 1, |i, k| bary_rows[i][k]);
    Ok(NodeSet {
        domain,
        coords,
        bary,
        weights: DVector::from_vec(weights),
        orbit_index,
        facet_mask,
    })
}

/// Minimum pairwise Euclidean distance between nodes.
pub fn min_node_spacing<T: Real>(ns: &NodeSet<T>) -> Result<T, GeometryError> {
    let n = ns.len();
    if n < 2 {
        return Err(GeometryError::TooFewNodes(n));
    }
    let d = ns.coords.ncols();
    let mut best = T::max_value().expect("bounded real type");
    for i in 0..n {
        for j in 0..i {
            let dist2 = (0..d).fold(T::zero(), |s, k| {
                let t = ns.coords[(i, k)] - ns.coords[(j, k)];
                s + t * t
            });
            best = best.min(dist2);
        }
    }
    Ok(best.sqrt())
}

/// Nodes lying on facet `facet_id`, with their coordinates in the facet's own
/// reference frame. Facet-local coordinates are `T_facetᵀ λ_facet` where
/// `λ_facet` lists the barycentric coordinates of the facet vertices in
/// increasing vertex order. Point facets (interval endpoints) have empty
/// coordinate vectors.
pub fn facet_restriction<T: Real>(
    ns: &NodeSet<T>,
    elem: &ReferenceSimplex<T>,
    facet_id: usize,
) -> Result<(Vec<usize>, Vec<Vec<T>>), GeometryError> {
    let facet = elem.facet(facet_id)?;
    let ftol = T::lit(FACET_TOL);
    let sub = match elem.domain.facet_domain() {
        Some(fd) => Some(ReferenceSimplex::<T>::new(fd)?),
        None => None,
    };
    let mut idx = Vec::new();
    let mut local = Vec::new();
    for i in 0..ns.len() {
        if ns.bary[(i, facet.opposite)].abs() <= ftol {
            idx.push(i);
            let lam: Vec<T> = facet.vertices.iter().map(|&k| ns.bary[(i, k)]).collect();
            local.push(match &sub {
                Some(s) => s.to_cartesian(&lam),
                None => Vec::new(),
            });
        }
    }
    Ok((idx, local))
}
