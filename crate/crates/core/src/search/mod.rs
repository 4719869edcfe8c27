//! Moment-equation solvers for symmetric positive-weight rules.
//!
//! A rule is described by a template of orbits. The unknowns are the orbit
//! parameters followed by the orbit weights; parameters of facet orbits are
//! frozen to the values dictated by the facet rule, so only interior
//! parameters and all weights move.

pub mod coupled;
pub mod lma;
pub mod pso;
pub mod signatures;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    assemble_nodes, expand_orbit_affine, Domain, FacetKind, ReferenceSimplex, SymmetryOrbit,
};
use crate::pkd::{integral_vector, pkd_eval, pkd_eval_grad};
use crate::rule::QuadratureRule;
use crate::scalar::Real;

pub use coupled::{solve_coupled, CoupledOptions, SearchOutcome};
pub use lma::{apply_update_with_positivity, lma_solve, lma_step, LmaOptions, LmaOutcome};
pub use pso::{perturb, pso_step, PsoOptions, Swarm};
pub use signatures::{facet_quadrature, find_rule, invariant_moment_count, FindOptions, FoundRule};

/// Interior orbits must keep every barycentric coordinate above this.
pub const INTERIOR_MARGIN: f64 = 1e-8;

/// Problem definition for one signature.
#[derive(Clone, Debug)]
pub struct SearchSpec<T: Real> {
    pub domain: Domain,
    pub qv: usize,
    /// Orbit kinds and starting values; frozen parameters are taken from here.
    pub template: Vec<SymmetryOrbit<T>>,
    /// Per orbit: whether its parameters are held fixed.
    pub frozen: Vec<bool>,
    pub facet_kind: FacetKind,
    pub facet_rule: Option<QuadratureRule<T>>,
}

impl<T: Real> SearchSpec<T> {
    /// Spec whose facet orbits are frozen and interior orbits are free.
    pub fn new(
        domain: Domain,
        qv: usize,
        template: Vec<SymmetryOrbit<T>>,
        facet_kind: FacetKind,
        facet_rule: Option<QuadratureRule<T>>,
    ) -> Result<Self> {
        if qv == 0 {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        for o in &template {
            if !o.kind.valid_for(domain) {
                return Err(Error::InvalidArgument(format!("{} orbit on {}", o.kind, domain)));
            }
            if o.params.len() != o.kind.num_params() {
                return Err(Error::InvalidArgument(format!("{} parameter count", o.kind)));
            }
        }
        let frozen = template
            .iter()
            .map(|o| facet_kind != FacetKind::None && o.is_facet())
            .collect();
        Ok(SearchSpec {
            domain,
            qv,
            template,
            frozen,
            facet_kind,
            facet_rule,
        })
    }

    pub fn num_params(&self) -> usize {
        self.template.iter().map(|o| o.params.len()).sum()
    }

    /// Length `n_τ` of the full design vector.
    pub fn len(&self) -> usize {
        self.num_params() + self.template.len()
    }

    pub fn is_empty(&self) -> bool {
        self.template.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.template.iter().map(|o| o.size(self.domain)).sum()
    }

    /// Index of each orbit's first parameter in the design vector.
    fn param_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.template.len());
        let mut acc = 0;
        for o in &self.template {
            off.push(acc);
            acc += o.params.len();
        }
        off
    }

    /// Design-vector indices that the solvers may change: free parameters and
    /// all weights.
    pub fn free_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let offs = self.param_offsets();
        for (k, o) in self.template.iter().enumerate() {
            if !self.frozen[k] {
                out.extend(offs[k]..offs[k] + o.params.len());
            }
        }
        let np = self.num_params();
        out.extend(np..np + self.template.len());
        out
    }

    pub fn weight_indices(&self) -> std::ops::Range<usize> {
        let np = self.num_params();
        np..np + self.template.len()
    }

    /// Whether there is no free parameter, making the moment equations linear.
    pub fn is_linear(&self) -> bool {
        self.template
            .iter()
            .zip(&self.frozen)
            .all(|(o, &f)| f || o.params.is_empty())
    }

    /// Packs the template into a design vector.
    pub fn initial_vector(&self) -> DVector<T> {
        self.pack(&self.template)
    }

    pub fn pack(&self, orbits: &[SymmetryOrbit<T>]) -> DVector<T> {
        let mut v = Vec::with_capacity(self.len());
        for o in orbits {
            v.extend_from_slice(&o.params);
        }
        v.extend(orbits.iter().map(|o| o.weight));
        DVector::from_vec(v)
    }

    pub fn unpack(&self, tau: &DVector<T>) -> Vec<SymmetryOrbit<T>> {
        let np = self.num_params();
        let mut at = 0;
        self.template
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let n = o.params.len();
                let params = tau.rows(at, n).iter().copied().collect();
                at += n;
                SymmetryOrbit::new(o.kind, params, tau[np + k])
            })
            .collect()
    }

    fn check_feasible(&self, orbits: &[SymmetryOrbit<T>]) -> Result<()> {
        let elem = ReferenceSimplex::<T>::new(self.domain)?;
        let margin = T::lit(INTERIOR_MARGIN);
        for o in orbits {
            if !o.is_facet() {
                let nodes = expand_orbit_affine(o, self.domain)
                    .map_err(|e| Error::Infeasible(e.to_string()))?;
                if nodes.iter().any(|n| n.bary.iter().any(|&l| l < margin)) {
                    return Err(Error::Infeasible(format!("{} orbit touches the boundary", o.kind)));
                }
            }
            if !o.weight.is_finite() || o.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Infeasible("non-finite entry".into()));
            }
        }
        assemble_nodes(orbits, &elem).map_err(|e| Error::Infeasible(e.to_string()))?;
        Ok(())
    }

    /// Builds a rule from a design vector.
    pub fn to_rule(&self, tau: &DVector<T>, provenance: crate::rule::Provenance) -> Result<QuadratureRule<T>> {
        QuadratureRule::new(
            self.domain,
            self.qv,
            self.unpack(tau),
            self.facet_kind,
            self.facet_rule.clone().map(Box::new),
            provenance,
        )
    }
}

/// Moment residual `g = Vᵀw − f` at design vector `tau`.
pub fn residual<T: Real>(tau: &DVector<T>, spec: &SearchSpec<T>) -> Result<DVector<T>> {
    let orbits = spec.unpack(tau);
    spec.check_feasible(&orbits)?;
    let elem = ReferenceSimplex::<T>::new(spec.domain)?;
    let ns = assemble_nodes(&orbits, &elem)?;
    let v = pkd_eval(spec.domain, spec.qv, &ns.coords)?;
    let mut g = v.tr_mul(&ns.weights);
    g -= integral_vector::<T>(spec.domain, spec.qv);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("residual"));
    }
    Ok(g)
}

/// Jacobian `∂g/∂τ` (`n_b × n_τ`), including columns of frozen parameters.
pub fn jacobian<T: Real>(tau: &DVector<T>, spec: &SearchSpec<T>) -> Result<DMatrix<T>> {
    let orbits = spec.unpack(tau);
    spec.check_feasible(&orbits)?;
    let elem = ReferenceSimplex::<T>::new(spec.domain)?;
    let d = spec.domain.dim();

    let mut coords = Vec::new();
    let mut expanded = Vec::with_capacity(orbits.len());
    for o in &orbits {
        let nodes = expand_orbit_affine(o, spec.domain)?;
        for n in &nodes {
            coords.extend(elem.to_cartesian(&n.bary));
        }
        expanded.push(nodes);
    }
    let n_p = coords.len() / d;
    let coords = DMatrix::from_row_slice(n_p, d, &coords);
    let b = pkd_eval_grad(spec.domain, spec.qv, &coords)?;
    let nb = b.v.ncols();
    let np_total = spec.num_params();
    let mut jac = DMatrix::<T>::zeros(nb, spec.len());

    let mut row = 0;
    let mut pcol = 0;
    for (k, (o, nodes)) in orbits.iter().zip(&expanded).enumerate() {
        for (local, node) in nodes.iter().enumerate() {
            let i = row + local;
            for j in 0..nb {
                jac[(j, np_total + k)] += b.v[(i, j)];
            }
            for (m, db) in node.dbary.iter().enumerate() {
                // dx = Tᵀ dλ
                let dx = elem.to_cartesian(db);
                for j in 0..nb {
                    let mut s = T::zero();
                    for (c, &dxc) in dx.iter().enumerate() {
                        s += b.vx[c][(i, j)] * dxc;
                    }
                    jac[(j, pcol + m)] += o.weight * s;
                }
            }
        }
        row += nodes.len();
        pcol += o.params.len();
    }
    if jac.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("jacobian"));
    }
    Ok(jac)
}

/// Columns of `jac` at `idx`.
pub(crate) fn select_columns<T: Real>(jac: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(jac.nrows(), idx.len(), |i, j| jac[(i, idx[j])])
}

/// Half the squared residual norm, `+∞` for infeasible vectors.
pub fn objective<T: Real>(tau: &DVector<T>, spec: &SearchSpec<T>) -> f64 {
    match residual(tau, spec) {
        Ok(g) => 0.5 * g.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>(),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrbitKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(domain: Domain, qv: usize, template: Vec<SymmetryOrbit<f64>>) -> SearchSpec<f64> {
        SearchSpec::new(domain, qv, template, FacetKind::None, None).unwrap()
    }

    #[test]
    fn centroid_residuals() {
        let s = spec(Domain::Triangle, 1, vec![SymmetryOrbit::new(OrbitKind::S1, vec![], 2.0)]);
        let g = residual(&s.initial_vector(), &s).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.amax() < 1e-15);

        let s = spec(Domain::Triangle, 1, vec![SymmetryOrbit::new(OrbitKind::S1, vec![], 1.0)]);
        let g = residual(&s.initial_vector(), &s).unwrap();
        assert_relative_eq!(g[0], -1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert!(g[1].abs() < 1e-15 && g[2].abs() < 1e-15);
        // no parameter column for S1
        assert_eq!(jacobian(&s.initial_vector(), &s).unwrap().ncols(), 1);
    }

    #[test]
    fn infeasible_is_structured() {
        let s = spec(
            Domain::Triangle,
            2,
            vec![SymmetryOrbit::new(OrbitKind::S21, vec![0.9], 1.0)],
        );
        assert!(matches!(residual(&s.initial_vector(), &s), Err(Error::Infeasible(_))));
        assert_eq!(objective(&s.initial_vector(), &s), f64::INFINITY);
    }

    #[test]
    fn weight_column_is_orbit_sum() {
        let s = spec(
            Domain::Triangle,
            3,
            vec![
                SymmetryOrbit::new(OrbitKind::S21, vec![0.2], 0.3),
                SymmetryOrbit::new(OrbitKind::S111, vec![0.1, 0.3], 0.2),
            ],
        );
        let tau = s.initial_vector();
        let jac = jacobian(&tau, &s).unwrap();
        let elem = ReferenceSimplex::<f64>::new(Domain::Triangle).unwrap();
        let ns = assemble_nodes(&s.unpack(&tau), &elem).unwrap();
        let v = pkd_eval(Domain::Triangle, 3, &ns.coords).unwrap();
        for k in 0..2 {
            for j in 0..v.ncols() {
                let sum: f64 = (0..ns.len()).filter(|&i| ns.orbit_index[i] == k).map(|i| v[(i, j)]).sum();
                assert_relative_eq!(jac[(j, 3 + k)], sum, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn frozen_layout() {
        let s = SearchSpec::<f64>::new(
            Domain::Triangle,
            3,
            vec![
                SymmetryOrbit::new(OrbitKind::Vert, vec![], 0.1),
                SymmetryOrbit::new(OrbitKind::Edge, vec![0.2], 0.1),
                SymmetryOrbit::new(OrbitKind::S21, vec![0.2], 0.3),
            ],
            FacetKind::Lgl,
            None,
        )
        .unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.free_indices(), vec![1, 2, 3, 4]);
        assert!(!s.is_linear());
    }

    fn random_tau(domain: Domain, seed: u64) -> (SearchSpec<f64>, DVector<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let template = match domain {
            Domain::Triangle => vec![
                SymmetryOrbit::new(OrbitKind::Edge, vec![rng.gen_range(0.05..0.45)], rng.gen_range(0.01..0.2)),
                SymmetryOrbit::new(OrbitKind::S21, vec![rng.gen_range(0.05..0.3)], rng.gen_range(0.01..0.2)),
                SymmetryOrbit::new(
                    OrbitKind::S111,
                    vec![rng.gen_range(0.05..0.3), rng.gen_range(0.35..0.6)],
                    rng.gen_range(0.01..0.2),
                ),
            ],
            _ => vec![
                SymmetryOrbit::new(OrbitKind::Face21, vec![rng.gen_range(0.05..0.3)], rng.gen_range(0.01..0.2)),
                SymmetryOrbit::new(OrbitKind::S31, vec![rng.gen_range(0.05..0.3)], rng.gen_range(0.01..0.2)),
                SymmetryOrbit::new(OrbitKind::S22, vec![rng.gen_range(0.05..0.2)], rng.gen_range(0.01..0.2)),
                SymmetryOrbit::new(
                    OrbitKind::S211,
                    vec![rng.gen_range(0.05..0.15), rng.gen_range(0.4..0.6)],
                    rng.gen_range(0.01..0.2),
                ),
                SymmetryOrbit::new(
                    OrbitKind::S1111,
                    vec![rng.gen_range(0.03..0.1), rng.gen_range(0.15..0.25), rng.gen_range(0.3..0.4)],
                    rng.gen_range(0.01..0.2),
                ),
            ],
        };
        let s = spec(domain, 1, template);
        let tau = s.initial_vector();
        (s, tau)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn jacobian_matches_finite_differences(seed in 0u64..10_000, qv in 1usize..=8, tet in any::<bool>()) {
            let domain = if tet { Domain::Tetrahedron } else { Domain::Triangle };
            let (mut s, tau) = random_tau(domain, seed);
            s.qv = qv;
            let jac = jacobian(&tau, &s).unwrap();
            let h = 1e-7;
            let scale = 1.0 + jac.amax();
            for c in 0..tau.len() {
                let mut tp = tau.clone();
                let mut tm = tau.clone();
                tp[c] += h;
                tm[c] -= h;
                let fd = (residual(&tp, &s).unwrap() - residual(&tm, &s).unwrap()) / (2.0 * h);
                for r in 0..fd.len() {
                    prop_assert!((fd[r] - jac[(r, c)]).abs() <= 1e-6 * scale);
                }
            }
        }
    }
}
