//! Diagonal-norm, diagonal-boundary summation-by-parts operators.
//!
//! With volume and facet nodes collocated, the facet extraction operators are
//! plain index selections and every `E_i` is diagonal. `Q_i = S_i + E_i/2`
//! where `S_i` is the minimum-norm antisymmetric matrix meeting the degree-`p`
//! accuracy conditions, so `Q_i + Q_iᵀ = E_i` holds by construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cubature::collapsed_rule;
use crate::error::{Error, Result};
use crate::geometry::{facet_restriction, Domain, ReferenceSimplex, DUPLICATE_TOL};
use crate::pkd::{pkd_eval, pkd_eval_grad};
use crate::rule::{QuadratureRule, RESIDUAL_TOL};
use crate::scalar::{max_abs, Real};

/// Largest accuracy-condition residual accepted when solving for `S`.
pub const ACCURACY_SOLVE_TOL: f64 = 1e-11;

/// Facet data of one reference facet.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetData<T: Real> {
    /// Volume node indices on the facet (`R_γ` as an index list).
    pub nodes: Vec<usize>,
    /// Facet quadrature weights at those nodes, scaled to the facet's measure.
    pub b: DVector<T>,
    pub normal: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SbpOperator<T: Real> {
    pub p: usize,
    pub rule: QuadratureRule<T>,
    /// Diagonal of `H`.
    pub h: DVector<T>,
    /// Diagonals of `E_1..E_d`.
    pub e: Vec<DVector<T>>,
    pub q: Vec<DMatrix<T>>,
    pub d: Vec<DMatrix<T>>,
    pub facets: Vec<FacetData<T>>,
}

impl<T: Real> SbpOperator<T> {
    pub fn dim(&self) -> usize {
        self.rule.domain.dim()
    }

    pub fn n_p(&self) -> usize {
        self.h.len()
    }

    pub fn e_matrix(&self, i: usize) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.e[i])
    }
}

fn facet_degree_of<T: Real>(rule: &QuadratureRule<T>, required: usize) -> Result<Option<usize>> {
    match &rule.facet_rule {
        Some(f) => f.exact_degree(required.max(f.qv) + 1, T::lit(RESIDUAL_TOL)),
        None => Ok(None),
    }
}

/// Boundary operators `E_i = Σ_γ R_γᵀ B_γ N_{i,γ} R_γ` and per-facet data.
pub fn build_e<T: Real>(rule: &QuadratureRule<T>, p: usize) -> Result<(Vec<DVector<T>>, Vec<FacetData<T>>)> {
    let elem = rule.element();
    let d = elem.dim();
    let n = rule.n_p();
    let mut e = vec![DVector::zeros(n); d];
    let mut facets = Vec::with_capacity(d + 1);

    if d > 1 {
        let fdeg = facet_degree_of(rule, 2 * p)?.unwrap_or(0);
        if rule.facet_rule.is_none() || fdeg < 2 * p {
            return Err(Error::FacetDegree {
                got: fdeg,
                required: 2 * p,
            });
        }
    }

    let tol = T::lit(DUPLICATE_TOL);
    for (gamma, facet) in elem.facets.iter().enumerate() {
        let (idx, local) = facet_restriction(&rule.nodes, &elem, gamma)?;
        let b: Vec<T> = match &rule.facet_rule {
            _ if d == 1 => {
                if idx.len() != 1 {
                    return Err(Error::FacetNotCollocated(gamma));
                }
                vec![T::one()]
            }
            Some(fr) => {
                if idx.len() != fr.n_p() {
                    return Err(Error::FacetNotCollocated(gamma));
                }
                let scale = facet.measure / fr.domain.measure::<T>();
                let mut b = Vec::with_capacity(idx.len());
                for x in &local {
                    let j = (0..fr.n_p())
                        .find(|&j| x.iter().enumerate().all(|(k, &xk)| (xk - fr.nodes.coords[(j, k)]).abs() <= tol))
                        .ok_or(Error::FacetNotCollocated(gamma))?;
                    b.push(fr.nodes.weights[j] * scale);
                }
                b
            }
            None => return Err(Error::FacetDegree { got: 0, required: 2 * p }),
        };
        for (i, e_i) in e.iter_mut().enumerate() {
            for (&node, &bj) in idx.iter().zip(&b) {
                e_i[node] += bj * facet.normal[i];
            }
        }
        facets.push(FacetData {
            nodes: idx,
            b: DVector::from_vec(b),
            normal: facet.normal.clone(),
        });
    }
    Ok((e, facets))
}

/// Minimum-norm antisymmetric `S` with `S V = R`.
///
/// With `V⁺` the pseudo-inverse and `G = VᵀR`, `S = RV⁺ − (RV⁺)ᵀ − V⁺ᵀ G V⁺`
/// solves the system whenever `G` is antisymmetric, and has no component
/// acting only on the complement of `range(V)`, which makes it the
/// minimum-norm solution. Inconsistent data shows up in the residual.
fn solve_s<T: Real>(v: &DMatrix<T>, r: &DMatrix<T>) -> Result<DMatrix<T>> {
    let vp = crate::search::lma::pinv(v.clone())?;
    let solve = |r: &DMatrix<T>| {
        let a = r * &vp;
        let g = v.tr_mul(r);
        let s = &a - a.transpose() - vp.tr_mul(&(g * &vp));
        (&s - s.transpose()) * T::lit(0.5)
    };
    let s = solve(r);
    // one refinement pass; the residual satisfies the same compatibility
    let s = &s + solve(&(r - &s * v));
    Ok((&s - s.transpose()) * T::lit(0.5))
}

/// `Q_i` and `D_i = H⁻¹Q_i` for every direction.
pub fn build_q_d<T: Real>(
    rule: &QuadratureRule<T>,
    p: usize,
    e: &[DVector<T>],
) -> Result<(Vec<DMatrix<T>>, Vec<DMatrix<T>>)> {
    if rule.qv + 1 < 2 * p {
        return Err(Error::InvalidArgument(format!(
            "degree-{} rule cannot support a degree-{p} operator",
            rule.qv
        )));
    }
    let domain = rule.domain;
    let basis = pkd_eval_grad(domain, p, &rule.nodes.coords)?;
    let h = &rule.nodes.weights;
    let mut qs = Vec::with_capacity(e.len());
    let mut ds = Vec::with_capacity(e.len());
    for (i, e_i) in e.iter().enumerate() {
        let mut rhs = DMatrix::<T>::zeros(basis.v.nrows(), basis.v.ncols());
        for r in 0..rhs.nrows() {
            for c in 0..rhs.ncols() {
                rhs[(r, c)] = h[r] * basis.vx[i][(r, c)] - e_i[r] * basis.v[(r, c)] / T::lit(2.0);
            }
        }
        let s = solve_s(&basis.v, &rhs)?;
        let defect = max_abs((&s * &basis.v - &rhs).iter().copied()).as_f64();
        if !(defect <= ACCURACY_SOLVE_TOL) {
            return Err(Error::InconsistentAccuracy(defect));
        }
        let mut q = s;
        for r in 0..q.nrows() {
            q[(r, r)] += e_i[r] / T::lit(2.0);
        }
        let mut d = q.clone();
        for r in 0..d.nrows() {
            let inv = T::one() / h[r];
            for c in 0..d.ncols() {
                d[(r, c)] *= inv;
            }
        }
        qs.push(q);
        ds.push(d);
    }
    Ok((qs, ds))
}

/// Full operator of degree `p` on `rule`.
pub fn build_sbp<T: Real>(rule: &QuadratureRule<T>, p: usize) -> Result<SbpOperator<T>> {
    if p == 0 {
        return Err(Error::InvalidArgument("operator degree must be at least 1".into()));
    }
    if rule.weights().iter().any(|&w| !(w > T::zero())) {
        return Err(Error::InvalidArgument("norm matrix needs positive weights".into()));
    }
    let (e, facets) = build_e(rule, p)?;
    let (q, d) = build_q_d(rule, p, &e)?;
    Ok(SbpOperator {
        p,
        rule: rule.clone(),
        h: rule.nodes.weights.clone(),
        e,
        q,
        d,
        facets,
    })
}

/// Results of [`verify_sbp`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SbpReport {
    pub p: usize,
    pub n_p: usize,
    /// `max_i ‖D_i V − V_{x_i}‖_max` over the degree-`p` basis.
    pub accuracy_defect: f64,
    /// `max_i ‖Q_i + Q_iᵀ − E_i‖_max`.
    pub compatibility_defect: f64,
    /// `max_i ‖Q_i‖_max`.
    pub q_max: f64,
    pub min_h: f64,
    /// Largest error of `V_aᵀ E_i V_b` against the boundary integral of
    /// `P_a P_b n_i` for degree-`p` basis pairs.
    pub e_accuracy_defect: f64,
    /// `max_i |Σ diag(E_i)|`.
    pub e_sum: f64,
    pub facet_degree: Option<usize>,
    pub facet_degree_required: usize,
    pub delta_r: Option<f64>,
}

pub const ACCURACY_TOL: f64 = 1e-10;
pub const COMPATIBILITY_RTOL: f64 = 1e-13;
pub const E_ACCURACY_TOL: f64 = 1e-11;
pub const E_SUM_TOL: f64 = 1e-12;

impl SbpReport {
    pub fn accuracy_ok(&self) -> bool {
        self.accuracy_defect <= ACCURACY_TOL
    }

    pub fn compatibility_ok(&self) -> bool {
        self.compatibility_defect <= COMPATIBILITY_RTOL * self.q_max
    }

    pub fn facet_ok(&self) -> bool {
        match self.facet_degree {
            Some(g) => g >= self.facet_degree_required,
            None => true,
        }
    }

    pub fn passed(&self) -> bool {
        self.accuracy_ok()
            && self.compatibility_ok()
            && self.min_h > 0.0
            && self.e_accuracy_defect <= E_ACCURACY_TOL
            && self.e_sum <= E_SUM_TOL
            && self.facet_ok()
    }
}

/// Boundary integral `∮ f g n_i dΓ` of basis pairs, from an independent
/// collapsed rule on every facet.
fn boundary_moments<T: Real>(elem: &ReferenceSimplex<T>, p: usize) -> Result<Vec<DMatrix<T>>> {
    let d = elem.dim();
    let nb = crate::pkd::basis_count(d, p);
    let mut out = vec![DMatrix::<T>::zeros(nb, nb); d];
    for facet in &elem.facets {
        // points on the facet in element coordinates with physical weights
        let (pts, wts): (Vec<Vec<T>>, Vec<T>) = match elem.domain.facet_domain() {
            None => (vec![elem.vertices.row(facet.vertices[0]).iter().copied().collect()], vec![T::one()]),
            Some(fd) => {
                let sub = ReferenceSimplex::<T>::new(fd)?;
                let (xi, w) = collapsed_rule::<T>(fd, 2 * p)?;
                let scale = facet.measure / fd.measure::<T>();
                let pts = (0..w.len())
                    .map(|r| {
                        let x: Vec<T> = xi.row(r).iter().copied().collect();
                        let lam = sub.barycentric(&x);
                        (0..d)
                            .map(|c| {
                                facet
                                    .vertices
                                    .iter()
                                    .zip(&lam)
                                    .fold(T::zero(), |s, (&v, &l)| s + l * elem.vertices[(v, c)])
                            })
                            .collect()
                    })
                    .collect();
                (pts, w.into_iter().map(|w| w * scale).collect())
            }
        };
        let flat: Vec<T> = pts.iter().flatten().copied().collect();
        let x = DMatrix::from_row_slice(pts.len(), d, &flat);
        let v = pkd_eval(elem.domain, p, &x)?;
        for i in 0..d {
            for a in 0..nb {
                for b in 0..nb {
                    let s = (0..wts.len()).fold(T::zero(), |s, r| s + wts[r] * v[(r, a)] * v[(r, b)]);
                    out[i][(a, b)] += s * facet.normal[i];
                }
            }
        }
    }
    Ok(out)
}

/// Checks every defining property of the operator.
pub fn verify_sbp<T: Real>(op: &SbpOperator<T>) -> Result<SbpReport> {
    let domain: Domain = op.rule.domain;
    let elem = op.rule.element();
    let basis = pkd_eval_grad(domain, op.p, &op.rule.nodes.coords)?;
    let bnd = boundary_moments(&elem, op.p)?;
    let mut accuracy: f64 = 0.0;
    let mut compat: f64 = 0.0;
    let mut qmax: f64 = 0.0;
    let mut eacc: f64 = 0.0;
    let mut esum: f64 = 0.0;
    for i in 0..op.dim() {
        let dv = &op.d[i] * &basis.v - &basis.vx[i];
        accuracy = accuracy.max(max_abs(dv.iter().copied()).as_f64());
        let c = &op.q[i] + op.q[i].transpose() - op.e_matrix(i);
        compat = compat.max(max_abs(c.iter().copied()).as_f64());
        qmax = qmax.max(max_abs(op.q[i].iter().copied()).as_f64());
        let ve = DMatrix::from_fn(basis.v.nrows(), basis.v.ncols(), |r, c| op.e[i][r] * basis.v[(r, c)]);
        let disc = basis.v.tr_mul(&ve);
        eacc = eacc.max(max_abs((disc - &bnd[i]).iter().copied()).as_f64());
        esum = esum.max(op.e[i].iter().fold(T::zero(), |s, &x| s + x).abs().as_f64());
    }
    let min_h = op.h.iter().fold(f64::INFINITY, |m, h| m.min(h.as_f64()));
    Ok(SbpReport {
        p: op.p,
        n_p: op.n_p(),
        accuracy_defect: accuracy,
        compatibility_defect: compat,
        q_max: qmax,
        min_h,
        e_accuracy_defect: eacc,
        e_sum: esum,
        facet_degree: facet_degree_of(&op.rule, 2 * op.p)?,
        facet_degree_required: 2 * op.p,
        delta_r: op.rule.delta_r().ok().map(|x| x.as_f64()),
    })
}
