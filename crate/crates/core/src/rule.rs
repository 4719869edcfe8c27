//! Quadrature rules assembled from symmetry orbits, and their checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    assemble_nodes, facet_restriction, min_node_spacing, permutations, Domain, FacetKind, NodeSet,
    ReferenceSimplex, SymmetryOrbit, CLOSURE_TOL, DUPLICATE_TOL,
};
use crate::pkd::{integral_vector, pkd_eval};
use crate::scalar::{max_abs, Real};

/// Moment residual accepted as converged.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Monomial integrals must match to this relative tolerance.
pub const MONOMIAL_TOL: f64 = 1e-11;
/// Weights of symmetric partners must agree to this tolerance.
pub const SYMMETRY_WEIGHT_TOL: f64 = 1e-14;

/// Where a rule came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Seed of the search that produced the rule; `None` for closed-form rules.
    pub seed: Option<u64>,
    pub iterations: usize,
    pub residual: f64,
}

impl Provenance {
    pub fn analytic() -> Self {
        Provenance {
            seed: None,
            iterations: 0,
            residual: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T: Real> {
    pub domain: Domain,
    /// Degree the rule is built to integrate exactly.
    pub qv: usize,
    /// Orbits in canonical order; the source of truth for the node set.
    pub orbits: Vec<SymmetryOrbit<T>>,
    pub nodes: NodeSet<T>,
    pub facet_kind: FacetKind,
    /// Rule on the facet simplex that the volume rule's facet nodes reproduce.
    pub facet_rule: Option<Box<QuadratureRule<T>>>,
    pub provenance: Provenance,
}

/// SBP degree implied by a volume degree: the largest `p` with `qv >= 2p - 1`.
pub fn sbp_degree_for(qv: usize) -> usize {
    qv.div_ceil(2).max(1)
}

impl<T: Real> QuadratureRule<T> {
    pub fn new(
        domain: Domain,
        qv: usize,
        mut orbits: Vec<SymmetryOrbit<T>>,
        facet_kind: FacetKind,
        facet_rule: Option<Box<QuadratureRule<T>>>,
        provenance: Provenance,
    ) -> Result<Self> {
        orbits.sort_by(crate::geometry::canonical_order);
        let elem = ReferenceSimplex::new(domain)?;
        let nodes = assemble_nodes(&orbits, &elem)?;
        Ok(QuadratureRule {
            domain,
            qv,
            orbits,
            nodes,
            facet_kind,
            facet_rule,
            provenance,
        })
    }

    pub fn n_p(&self) -> usize {
        self.nodes.len()
    }

    pub fn weights(&self) -> &[T] {
        self.nodes.weights.as_slice()
    }

    /// SBP degree this rule supports; `None` for rules without a facet layout.
    pub fn sbp_degree(&self) -> Option<usize> {
        match self.facet_kind {
            FacetKind::None => None,
            _ => Some(sbp_degree_for(self.qv)),
        }
    }

    pub fn element(&self) -> ReferenceSimplex<T> {
        ReferenceSimplex::new(self.domain).expect("supported domain")
    }

    /// `‖Vᵀw − f‖∞` for the degree-`q` basis.
    pub fn moment_residual(&self, q: usize) -> Result<T> {
        moment_residual(self.domain, q, &self.nodes.coords, self.weights())
    }

    /// Largest degree `<= qmax` through which the rule is exact to `tol`.
    pub fn exact_degree(&self, qmax: usize, tol: T) -> Result<Option<usize>> {
        let mut best = None;
        for q in 0..=qmax {
            if self.moment_residual(q)? <= tol {
                best = Some(q);
            } else {
                break;
            }
        }
        Ok(best)
    }

    pub fn delta_r(&self) -> Result<T> {
        Ok(min_node_spacing(&self.nodes)?)
    }

    /// Integrates `f` evaluated at the Cartesian nodes.
    pub fn integrate(&self, f: impl Fn(&[T]) -> T) -> T {
        (0..self.n_p()).fold(T::zero(), |s, i| {
            s + self.nodes.weights[i] * f(&self.nodes.point(i))
        })
    }

    /// Rebuilds the rule from different orbits, keeping the other metadata.
    pub fn with_orbits(&self, orbits: Vec<SymmetryOrbit<T>>) -> Result<Self> {
        QuadratureRule::new(
            self.domain,
            self.qv,
            orbits,
            self.facet_kind,
            self.facet_rule.clone(),
            self.provenance.clone(),
        )
    }
}

pub fn moment_residual<T: Real>(domain: Domain, q: usize, coords: &DMatrix<T>, w: &[T]) -> Result<T> {
    let v = pkd_eval(domain, q, coords)?;
    let f = integral_vector::<T>(domain, q);
    let mut g = f.map(|x| -x);
    for j in 0..v.ncols() {
        for (i, &wi) in w.iter().enumerate() {
            g[j] += v[(i, j)] * wi;
        }
    }
    Ok(max_abs(g.iter().copied()))
}

fn factorial_i128(n: usize) -> i128 {
    (1..=n as i128).product()
}

fn binomial_i128(n: usize, k: usize) -> i128 {
    (0..k as i128).fold(1, |acc, i| acc * (n as i128 - i) / (i + 1))
}

/// Exact integral over the reference element of `∏ x_k^{exps[k]}`.
///
/// Uses `x_k = 2 λ_k − 1` and the Dirichlet moment formula
/// `∫ ∏ λ^α = |Ω| d! ∏ α_k! / (|α| + d)!`, summed in exact integer
/// arithmetic over a common denominator and rounded once at the end.
/// Supports total degree up to 20.
pub fn monomial_integral<T: Real>(domain: Domain, exps: &[usize]) -> T {
    let d = domain.dim();
    assert_eq!(exps.len(), d);
    let q: usize = exps.iter().sum();
    assert!(q <= 20, "monomial degree {q} exceeds the exact-arithmetic range");
    let denom = factorial_i128(q + d);
    let mut total: i128 = 0;
    let mut k = vec![0usize; d];
    loop {
        let kk: usize = k.iter().sum();
        let term = denom / factorial_i128(kk + d);
        let mut num: i128 = 1;
        for i in 0..d {
            num *= binomial_i128(exps[i], k[i]) * (1i128 << k[i]) * factorial_i128(k[i]);
        }
        let sign = if (q - kk).is_multiple_of(2) { 1 } else { -1 };
        total += sign * num * term;
        // odometer
        let mut i = 0;
        loop {
            if i == d {
                let scale = domain.measure::<f64>() * factorial_i128(d) as f64;
                return T::lit(scale * total as f64 / denom as f64);
            }
            if k[i] < exps[i] {
                k[i] += 1;
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

/// Every multi-index of total degree `<= q` in `d` variables.
pub fn monomial_exponents(d: usize, q: usize) -> Vec<Vec<usize>> {
    crate::pkd::basis_indices(d, q)
        .into_iter()
        .map(|m| m[..d].to_vec())
        .collect()
}

/// Largest `|Q(m) − I(m)| / max(|I(m)|, 1)` over monomials of degree `<= q`.
pub fn monomial_defect<T: Real>(rule: &QuadratureRule<T>, q: usize) -> T {
    let d = rule.domain.dim();
    monomial_exponents(d, q)
        .into_iter()
        .map(|e| {
            let quad = rule.integrate(|x| {
                (0..d).fold(T::one(), |s, k| s * x[k].powi(e[k] as i32))
            });
            let exact = monomial_integral::<T>(rule.domain, &e);
            (quad - exact).abs() / exact.abs().max(T::one())
        })
        .fold(T::zero(), |m, x| m.max(x))
}

/// Largest mismatch found when mapping the node set through every vertex
/// permutation; `None` when some image has no partner node.
pub fn symmetry_defect<T: Real>(ns: &NodeSet<T>) -> Option<T> {
    let n = ns.len();
    let m = ns.bary.ncols();
    let tol = T::lit(DUPLICATE_TOL);
    let mut worst = T::zero();
    for perm in permutations(m) {
        for i in 0..n {
            let image: Vec<T> = perm.iter().map(|&k| ns.bary[(i, k)]).collect();
            let partner = (0..n).find(|&j| (0..m).all(|k| (ns.bary[(j, k)] - image[k]).abs() <= tol))?;
            worst = worst.max((ns.weights[i] - ns.weights[partner]).abs());
        }
    }
    Some(worst)
}

/// Largest distance between the facet nodes of a volume rule and the nodes
/// of its facet rule, maximised over facets; `None` on a count mismatch or
/// when a facet node has no counterpart.
pub fn facet_collocation_defect<T: Real>(rule: &QuadratureRule<T>) -> Option<T> {
    let facet_rule = rule.facet_rule.as_ref()?;
    let elem = rule.element();
    let mut worst = T::zero();
    for f in 0..elem.facets.len() {
        let (idx, local) = facet_restriction(&rule.nodes, &elem, f).ok()?;
        if idx.len() != facet_rule.n_p() {
            return None;
        }
        for x in &local {
            let best = (0..facet_rule.n_p())
                .map(|j| {
                    x.iter()
                        .enumerate()
                        .fold(T::zero(), |s, (k, &xk)| {
                            let t = xk - facet_rule.nodes.coords[(j, k)];
                            s + t * t
                        })
                        .sqrt()
                })
                .fold(T::max_value().expect("bounded"), |m, v| m.min(v));
            worst = worst.max(best);
        }
    }
    Some(worst)
}

/// Outcome of all rule checks.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RuleReport {
    pub domain: Domain,
    pub qv: usize,
    pub n_p: usize,
    pub moment_residual: f64,
    pub monomial_defect: f64,
    pub exact: bool,
    pub min_weight: f64,
    pub positive: bool,
    pub weight_sum_defect: f64,
    pub symmetry_defect: Option<f64>,
    pub symmetric: bool,
    pub min_barycentric: f64,
    pub in_closure: bool,
    pub delta_r: Option<f64>,
    pub sbp_degree: Option<usize>,
    pub facet_degree: Option<usize>,
    pub facet_degree_required: Option<usize>,
    pub facet_collocation_defect: Option<f64>,
    pub facet_ok: bool,
}

impl RuleReport {
    pub fn passed(&self) -> bool {
        self.exact && self.positive && self.symmetric && self.in_closure && self.facet_ok
    }
}

/// Runs every check on `rule`.
pub fn check_rule<T: Real>(rule: &QuadratureRule<T>) -> Result<RuleReport> {
    let residual = rule.moment_residual(rule.qv)?.as_f64();
    let mono = monomial_defect(rule, rule.qv).as_f64();
    let min_w = rule.weights().iter().fold(f64::INFINITY, |m, w| m.min(w.as_f64()));
    let sum_w: f64 = rule.weights().iter().map(|w| w.as_f64()).sum();
    let sym = symmetry_defect(&rule.nodes).map(|s| s.as_f64());
    let min_bary = rule.nodes.bary.iter().fold(f64::INFINITY, |m, b| m.min(b.as_f64()));
    let delta_r = rule.delta_r().ok().map(|x| x.as_f64());
    let sbp_degree = rule.sbp_degree();

    let (facet_degree, facet_required, colloc, facet_ok) = match (&rule.facet_rule, sbp_degree) {
        (Some(fr), Some(p)) => {
            let required = 2 * p;
            let fdeg = fr.exact_degree(required.max(fr.qv) + 1, T::lit(RESIDUAL_TOL))?;
            let colloc = facet_collocation_defect(rule).map(|x| x.as_f64());
            let positive = fr.weights().iter().all(|&w| w > T::zero());
            let ok = fdeg.is_some_and(|g| g >= required)
                && positive
                && colloc.is_some_and(|c| c <= DUPLICATE_TOL);
            (fdeg, Some(required), colloc, ok)
        }
        (None, Some(p)) if rule.domain == Domain::Interval => (None, Some(2 * p), None, true),
        (None, Some(p)) => (None, Some(2 * p), None, false),
        (_, None) => (None, None, None, true),
    };

    Ok(RuleReport {
        domain: rule.domain,
        qv: rule.qv,
        n_p: rule.n_p(),
        moment_residual: residual,
        monomial_defect: mono,
        exact: residual <= RESIDUAL_TOL && mono <= MONOMIAL_TOL,
        min_weight: min_w,
        positive: min_w > 0.0,
        weight_sum_defect: (sum_w - rule.domain.measure::<f64>()).abs(),
        symmetry_defect: sym,
        symmetric: sym.is_some_and(|s| s <= SYMMETRY_WEIGHT_TOL),
        min_barycentric: min_bary,
        in_closure: min_bary >= -CLOSURE_TOL,
        delta_r,
        sbp_degree,
        facet_degree,
        facet_degree_required: facet_required,
        facet_collocation_defect: colloc,
        facet_ok,
    })
}

/// Fails with [`Error::InvalidArgument`] unless the rule passes every check.
pub fn require_valid<T: Real>(rule: &QuadratureRule<T>) -> Result<RuleReport> {
    let r = check_rule(rule)?;
    if r.passed() {
        Ok(r)
    } else {
        Err(Error::InvalidArgument(format!("rule failed verification: {r:?}")))
    }
}
