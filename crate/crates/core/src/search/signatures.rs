//! Orbit-signature enumeration and the top-level rule finder.
//!
//! Volume rules with a facet layout take their facet orbits from the facet
//! rule (LGL/LG on triangle edges, a searched symmetric triangle rule on
//! tetrahedron faces) and add interior orbits. Candidate signatures are tried
//! in increasing node count; a candidate is skipped when its unknown count is
//! below the number of symmetric moment conditions, except for candidates
//! without free parameters, which are cheap linear problems and always tried.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::coupled::{solve_coupled, CoupledOptions};
use super::lma::lma_solve;
use super::pso::random_design;
use super::SearchSpec;
use crate::error::{Error, Result};
use crate::gauss::{lg_rule, lgl_rule};
use crate::geometry::{Domain, FacetKind, OrbitKind, SymmetryOrbit};
use crate::rule::{sbp_degree_for, Provenance, QuadratureRule};
use crate::scalar::Real;

/// Number of linearly independent fully symmetric polynomials of degree
/// `<= q`: these are the only moment conditions a symmetric rule must meet.
pub fn invariant_moment_count(domain: Domain, q: usize) -> usize {
    let mut n = 0;
    match domain {
        Domain::Interval => n = q / 2 + 1,
        Domain::Triangle => {
            for b in 0..=q / 3 {
                n += (q - 3 * b) / 2 + 1;
            }
        }
        Domain::Tetrahedron => {
            for c in 0..=q / 4 {
                for b in 0..=(q - 4 * c) / 3 {
                    n += (q - 4 * c - 3 * b) / 2 + 1;
                }
            }
        }
    }
    n
}

#[derive(Clone, Debug)]
pub struct FindOptions {
    pub seed: u64,
    /// Seeded restarts per nonlinear candidate.
    pub restarts: usize,
    /// Candidate signatures tried before giving up.
    pub max_candidates: usize,
    pub coupled: CoupledOptions,
    /// Restrict the search to this signature (orbit kinds with starting
    /// values; facet orbits are replaced by the facet rule's).
    pub signature: Option<Vec<OrbitKind>>,
    /// Wall-clock cutoff checked between candidates and restart batches.
    pub deadline: Option<Instant>,
}

impl FindOptions {
    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

impl Default for FindOptions {
    fn default() -> Self {
        FindOptions {
            seed: 1,
            restarts: 20,
            max_candidates: 40,
            coupled: CoupledOptions::default(),
            signature: None,
            deadline: None,
        }
    }
}

fn interior_kinds(domain: Domain) -> &'static [OrbitKind] {
    match domain {
        Domain::Interval => &[OrbitKind::S1, OrbitKind::S11],
        Domain::Triangle => &[OrbitKind::S1, OrbitKind::S21, OrbitKind::S111],
        Domain::Tetrahedron => &[
            OrbitKind::S1,
            OrbitKind::S31,
            OrbitKind::S22,
            OrbitKind::S211,
            OrbitKind::S1111,
        ],
    }
}

fn all_kinds(domain: Domain) -> Vec<OrbitKind> {
    OrbitKind::ALL.into_iter().filter(|k| k.valid_for(domain)).collect()
}

/// Kind of the volume orbit holding a facet rule's orbit.
pub fn lift_kind(facet_domain: Domain, kind: OrbitKind) -> OrbitKind {
    use OrbitKind::*;
    match (facet_domain, kind) {
        (Domain::Interval, Vert) => Vert,
        (Domain::Interval, S1) => MidEdge,
        (Domain::Interval, S11) => Edge,
        (Domain::Triangle, Vert) => Vert,
        (Domain::Triangle, MidEdge) => MidEdge,
        (Domain::Triangle, Edge) => Edge,
        (Domain::Triangle, S1) => FaceCent,
        (Domain::Triangle, S21) => Face21,
        (Domain::Triangle, S111) => Face111,
        _ => panic!("{kind} does not live on a {facet_domain} facet"),
    }
}

/// Volume orbits sitting on the facets, carrying the facet rule's parameters.
pub fn lift_facet_orbits<T: Real>(facet: &QuadratureRule<T>, weight: T) -> Vec<SymmetryOrbit<T>> {
    facet
        .orbits
        .iter()
        .map(|o| SymmetryOrbit::new(lift_kind(facet.domain, o.kind), o.params.clone(), weight))
        .collect()
}

/// Rule on the facet simplex supporting SBP degree `p` on a `d`-simplex:
/// `LGL(p+2)` or `LG(p+1)` for triangles, a searched symmetric triangle rule
/// of degree `2p` for tetrahedra.
pub fn facet_quadrature<T: Real>(kind: FacetKind, p: usize, d: usize, opts: &FindOptions) -> Result<QuadratureRule<T>> {
    match (d, kind) {
        (2, FacetKind::Lgl) => lgl_rule(p + 2),
        (2, FacetKind::Lg) => lg_rule(p + 1),
        (3, FacetKind::Generated) => {
            let mut sub = opts.clone();
            sub.signature = None;
            Ok(find_rule::<T>(Domain::Triangle, 2 * p, FacetKind::None, &sub)?.rule)
        }
        _ => Err(Error::InvalidArgument(format!(
            "facet kind {kind} is not available in dimension {d}"
        ))),
    }
}

/// Multiset of orbit kinds with its size and unknown count.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Candidate {
    kinds: Vec<OrbitKind>,
    n_p: usize,
    dof: usize,
    linear: bool,
}

/// Every multiset over `kinds` with at most `max_each` copies of a
/// parametrised kind, one copy of a fixed kind, and `max_total` orbits.
fn multisets(kinds: &[OrbitKind], max_each: usize, max_total: usize) -> Vec<Vec<OrbitKind>> {
    let mut out = vec![vec![]];
    for &k in kinds {
        let cap = if k.num_params() == 0 { 1 } else { max_each };
        let mut next = Vec::new();
        for base in &out {
            for c in 0..=cap {
                if base.len() + c > max_total {
                    break;
                }
                let mut v = base.clone();
                v.extend(std::iter::repeat_n(k, c));
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn make_candidate(domain: Domain, fixed: &[OrbitKind], free: &[OrbitKind]) -> Candidate {
    let n_p = fixed
        .iter()
        .chain(free)
        .map(|k| k.orbit_size(domain))
        .sum();
    let params: usize = free.iter().map(|k| k.num_params()).sum();
    let dof = fixed.len() + free.len() + params;
    let mut kinds = fixed.to_vec();
    kinds.extend_from_slice(free);
    Candidate {
        kinds,
        n_p,
        dof,
        linear: params == 0,
    }
}

fn sort_candidates(c: &mut Vec<Candidate>) {
    c.sort_by(|a, b| {
        a.n_p
            .cmp(&b.n_p)
            .then(b.linear.cmp(&a.linear))
            .then(a.dof.cmp(&b.dof))
            .then(a.kinds.cmp(&b.kinds))
    });
    c.dedup();
}

/// Interior additions to a fixed facet part, in the order they are tried.
fn volume_candidates(domain: Domain, qv: usize, facet_kinds: &[OrbitKind]) -> Vec<Candidate> {
    let need = invariant_moment_count(domain, qv);
    let mut c: Vec<Candidate> = multisets(interior_kinds(domain), 4, 6)
        .into_iter()
        .map(|free| make_candidate(domain, facet_kinds, &free))
        .filter(|c| c.n_p > 0 && (c.dof >= need || c.linear))
        .collect();
    sort_candidates(&mut c);
    c
}

/// Signatures for rules without a facet layout, where every orbit is free.
fn free_candidates(domain: Domain, qv: usize) -> Vec<Candidate> {
    let need = invariant_moment_count(domain, qv);
    let mut c: Vec<Candidate> = multisets(&all_kinds(domain), 3, 6)
        .into_iter()
        .map(|kinds| {
            let mut c = make_candidate(domain, &[], &kinds);
            c.linear = kinds.iter().all(|k| k.num_params() == 0);
            c
        })
        .filter(|c| c.n_p > 0 && (c.dof >= need || c.linear))
        .collect();
    sort_candidates(&mut c);
    c
}

fn mix_seed(seed: u64, candidate: usize, restart: usize) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(candidate as u64 + 1))
        .wrapping_add((restart as u64) << 40);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn template_for<T: Real>(
    kinds: &[OrbitKind],
    facet: Option<&QuadratureRule<T>>,
) -> Vec<SymmetryOrbit<T>> {
    let mut orbits = match facet {
        Some(f) => lift_facet_orbits(f, T::lit(0.1)),
        None => vec![],
    };
    let skip = orbits.len();
    for &k in &kinds[skip..] {
        let params = k
            .param_bounds()
            .iter()
            .map(|&(lo, hi)| T::lit(lo + 0.3 * (hi - lo)))
            .collect();
        orbits.push(SymmetryOrbit::new(k, params, T::lit(0.1)));
    }
    orbits
}

/// Result of [`find_rule`].
#[derive(Clone, Debug)]
pub struct FoundRule<T: Real> {
    pub rule: QuadratureRule<T>,
    /// Index of the successful candidate in trial order.
    pub candidate: usize,
    pub restart: usize,
    /// Coupled searches run in total, including failed candidates.
    pub attempts: usize,
}

/// Solves one signature with up to `restarts` seeded attempts; the
/// lowest-index success wins so the result does not depend on scheduling.
fn solve_signature<T: Real>(
    spec: &SearchSpec<T>,
    opts: &FindOptions,
    candidate: usize,
) -> Result<(Option<(QuadratureRule<T>, usize)>, usize, f64)> {
    if spec.is_linear() {
        // linear least squares with a positivity floor: a few starts suffice
        let starts = 3.min(opts.restarts.max(1));
        let mut best = f64::INFINITY;
        for r in 0..starts {
            let s = mix_seed(opts.seed, candidate, r);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let tau0 = if r == 0 {
                equal_weights(spec)
            } else {
                random_design(spec, &mut rng)
            };
            let out = lma_solve(&tau0, spec, &opts.coupled.lma);
            best = best.min(out.residual);
            if out.residual <= opts.coupled.success_tol {
                let prov = Provenance {
                    seed: Some(s),
                    iterations: out.iterations,
                    residual: out.residual,
                };
                return Ok((Some((spec.to_rule(&out.tau, prov)?, r)), r + 1, out.residual));
            }
        }
        return Ok((None, starts, best));
    }

    let batch = rayon::current_num_threads().max(1);
    let mut best = f64::INFINITY;
    let mut attempts = 0;
    let mut r0 = 0;
    while r0 < opts.restarts && !opts.expired() {
        let r1 = (r0 + batch).min(opts.restarts);
        let results: Vec<Result<(usize, super::SearchOutcome<T>)>> = (r0..r1)
            .into_par_iter()
            .map(|r| {
                let s = mix_seed(opts.seed, candidate, r);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                solve_coupled(spec, &opts.coupled, &[], Some(s), &mut rng).map(|o| (r, o))
            })
            .collect();
        attempts += r1 - r0;
        for res in results {
            let (r, out) = res?;
            best = best.min(out.residual);
            if let Some(rule) = out.rule {
                return Ok((Some((rule, r)), attempts, best));
            }
        }
        r0 = r1;
    }
    Ok((None, attempts, best))
}

fn equal_weights<T: Real>(spec: &SearchSpec<T>) -> DVector<T> {
    let mut tau = spec.initial_vector();
    let w = spec.domain.measure::<T>() / T::of_usize(spec.num_nodes().max(1));
    for i in spec.weight_indices() {
        tau[i] = w;
    }
    tau
}

/// Finds a symmetric positive rule of degree `qv`.
///
/// With `facet_kind` other than [`FacetKind::None`] the rule carries facet
/// nodes that reproduce a facet rule of degree `2p`, `p` being the SBP degree
/// implied by `qv`.
pub fn find_rule<T: Real>(domain: Domain, qv: usize, facet_kind: FacetKind, opts: &FindOptions) -> Result<FoundRule<T>> {
    if qv == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    let d = domain.dim();
    let mut attempts = 0;
    let mut best = f64::INFINITY;
    let mut tried = 0;

    match (domain, facet_kind) {
        (_, FacetKind::None) => {
            let cands = match &opts.signature {
                Some(k) => vec![make_candidate(domain, &[], k)],
                None => free_candidates(domain, qv),
            };
            for (ci, c) in cands.iter().enumerate().take(opts.max_candidates) {
                if opts.expired() {
                    break;
                }
                let template = template_for::<T>(&c.kinds, None);
                let spec = SearchSpec::new(domain, qv, template, FacetKind::None, None)?;
                let (found, a, res) = solve_signature(&spec, opts, ci)?;
                attempts += a;
                best = best.min(res);
                if let Some((rule, restart)) = found {
                    return Ok(FoundRule { rule, candidate: ci, restart, attempts });
                }
            }
        }
        (Domain::Triangle, FacetKind::Lgl | FacetKind::Lg) => {
            let p = sbp_degree_for(qv);
            let facet = facet_quadrature::<T>(facet_kind, p, d, opts)?;
            let fixed: Vec<OrbitKind> = facet.orbits.iter().map(|o| lift_kind(Domain::Interval, o.kind)).collect();
            let cands = match &opts.signature {
                Some(k) => vec![signature_candidate(domain, &fixed, k)?],
                None => volume_candidates(domain, qv, &fixed),
            };
            for (ci, c) in cands.iter().enumerate().take(opts.max_candidates) {
                if opts.expired() {
                    break;
                }
                let template = template_for(&c.kinds, Some(&facet));
                let spec = SearchSpec::new(domain, qv, template, facet_kind, Some(facet.clone()))?;
                let (found, a, res) = solve_signature(&spec, opts, ci)?;
                attempts += a;
                best = best.min(res);
                if let Some((rule, restart)) = found {
                    return Ok(FoundRule { rule, candidate: ci, restart, attempts });
                }
            }
        }
        (Domain::Tetrahedron, FacetKind::Generated) => {
            let p = sbp_degree_for(qv);
            let fq = 2 * p;
            let facet_cands: Vec<Candidate> = free_candidates(Domain::Triangle, fq)
                .into_iter()
                .take(opts.max_candidates)
                .collect();
            // pair every facet signature with interior additions, smallest first
            let mut pairs: Vec<(usize, Candidate)> = Vec::new();
            for (fi, fc) in facet_cands.iter().enumerate() {
                let lifted: Vec<OrbitKind> = fc.kinds.iter().map(|&k| lift_kind(Domain::Triangle, k)).collect();
                let mut sorted = lifted.clone();
                sorted.sort();
                let cands = match &opts.signature {
                    Some(k) => match signature_candidate(domain, &sorted, k) {
                        Ok(c) => vec![c],
                        Err(_) => continue,
                    },
                    None => volume_candidates(domain, qv, &lifted),
                };
                pairs.extend(cands.into_iter().map(|c| (fi, c)));
            }
            pairs.sort_by(|a, b| {
                a.1.n_p
                    .cmp(&b.1.n_p)
                    .then(b.1.linear.cmp(&a.1.linear))
                    .then(a.0.cmp(&b.0))
                    .then(a.1.kinds.cmp(&b.1.kinds))
            });
            let mut facet_cache: HashMap<usize, Option<QuadratureRule<T>>> = HashMap::new();
            let mut sub = opts.clone();
            sub.signature = None;
            for (ci, (fi, c)) in pairs.iter().enumerate() {
                if tried >= opts.max_candidates || opts.expired() {
                    break;
                }
                let facet = facet_cache
                    .entry(*fi)
                    .or_insert_with(|| {
                        let fc = &facet_cands[*fi];
                        let template = template_for::<T>(&fc.kinds, None);
                        let spec = SearchSpec::new(Domain::Triangle, fq, template, FacetKind::None, None).ok()?;
                        solve_signature(&spec, &sub, 10_000 + *fi).ok()?.0.map(|(r, _)| r)
                    })
                    .clone();
                let Some(facet) = facet else { continue };
                tried += 1;
                let template = template_for(&c.kinds, Some(&facet));
                let spec = SearchSpec::new(domain, qv, template, facet_kind, Some(facet.clone()))?;
                let (found, a, res) = solve_signature(&spec, opts, ci)?;
                attempts += a;
                best = best.min(res);
                if let Some((rule, restart)) = found {
                    return Ok(FoundRule { rule, candidate: ci, restart, attempts });
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "facet kind {facet_kind} is not available on the {domain}"
            )))
        }
    }
    Err(Error::SearchFailed { residual: best, attempts })
}

/// Candidate from a user signature; its facet kinds must match the facet
/// rule's.
fn signature_candidate(domain: Domain, fixed: &[OrbitKind], kinds: &[OrbitKind]) -> Result<Candidate> {
    let mut facet: Vec<OrbitKind> = kinds.iter().copied().filter(|k| k.is_facet()).collect();
    let interior: Vec<OrbitKind> = kinds.iter().copied().filter(|k| !k.is_facet()).collect();
    let mut want = fixed.to_vec();
    facet.sort();
    want.sort();
    if !facet.is_empty() && facet != want {
        return Err(Error::InvalidArgument(format!(
            "signature facet orbits {facet:?} do not match the facet rule's {want:?}"
        )));
    }
    if interior.iter().any(|k| !k.valid_for(domain)) {
        return Err(Error::InvalidArgument("signature has orbits foreign to the domain".into()));
    }
    Ok(make_candidate(domain, fixed, &interior))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_counts() {
        let tri: Vec<usize> = (0..=6).map(|q| invariant_moment_count(Domain::Triangle, q)).collect();
        assert_eq!(tri, vec![1, 1, 2, 3, 4, 5, 7]);
        let tet: Vec<usize> = (0..=5).map(|q| invariant_moment_count(Domain::Tetrahedron, q)).collect();
        assert_eq!(tet, vec![1, 1, 2, 3, 5, 6]);
        assert_eq!(invariant_moment_count(Domain::Interval, 5), 3);
    }

    #[test]
    fn candidate_order_is_by_size() {
        let c = volume_candidates(Domain::Triangle, 2, &[OrbitKind::Vert, OrbitKind::MidEdge]);
        assert_eq!(c[0].n_p, 6);
        assert_eq!(c[1].kinds, vec![OrbitKind::Vert, OrbitKind::MidEdge, OrbitKind::S1]);
        assert!(c.windows(2).all(|w| w[0].n_p <= w[1].n_p));
    }

    #[test]
    fn lifted_kinds() {
        assert_eq!(lift_kind(Domain::Interval, OrbitKind::S11), OrbitKind::Edge);
        assert_eq!(lift_kind(Domain::Triangle, OrbitKind::S21), OrbitKind::Face21);
    }

    #[test]
    fn finds_small_lgl_rules() {
        let opts = FindOptions::default();
        let r1 = find_rule::<f64>(Domain::Triangle, 1, FacetKind::Lgl, &opts).unwrap();
        assert_eq!(r1.rule.n_p(), 6);
        assert!((r1.rule.delta_r().unwrap() - 1.0).abs() < 1e-14);
        let r2 = find_rule::<f64>(Domain::Triangle, 2, FacetKind::Lgl, &opts).unwrap();
        assert_eq!(r2.rule.n_p(), 7);
        assert!((r2.rule.delta_r().unwrap() - 0.471).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_requests() {
        let opts = FindOptions::default();
        assert!(find_rule::<f64>(Domain::Triangle, 0, FacetKind::Lgl, &opts).is_err());
        assert!(find_rule::<f64>(Domain::Tetrahedron, 2, FacetKind::Lgl, &opts).is_err());
    }
}
