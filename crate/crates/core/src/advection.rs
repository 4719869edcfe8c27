//! Periodic linear advection with SBP-SAT discretizations on affine simplex
//! meshes of the unit square or cube.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::collapsed_rule;
use crate::error::{Error, Result};
use crate::geometry::{permutations, simplex_measure, ReferenceSimplex};
use crate::pkd::pkd_eval;
use crate::sbp::SbpOperator;
use crate::scalar::Real;

/// Tolerance for matching periodic facet nodes.
pub const PAIRING_TOL: f64 = 1e-12;

/// Interface coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatKind {
    /// `min(c·n, 0)`: dissipative.
    Upwind,
    /// `(c·n)/2`: energy conserving.
    Central,
}

/// Wave speed and frequency of the manufactured solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub c: Vec<f64>,
    pub omega: f64,
}

impl Wave {
    /// Default wave for dimension `d`.
    pub fn default_for(d: usize) -> Self {
        match d {
            2 => Wave {
                c: vec![1.25, 7f64.sqrt() / 4.0],
                omega: 8.0,
            },
            _ => Wave {
                c: vec![1.5, 0.5, 1.0 / 2f64.sqrt()],
                omega: 2.0,
            },
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.c.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// `∏ sin(ωπ(x_i − c_i t))`.
pub fn exact_solution<T: Real>(x: &[T], t: T, omega: T, c: &[T]) -> T {
    let pi = T::pi();
    x.iter()
        .zip(c)
        .fold(T::one(), |acc, (&xi, &ci)| acc * (omega * pi * (xi - ci * t)).sin())
}

#[derive(Clone, Debug)]
struct ShapeFacet<T: Real> {
    nodes: Vec<usize>,
    /// `c·n` on the physical facet.
    lambda: T,
    /// Physical facet weights divided by the physical norm at each node.
    lift: Vec<T>,
}

/// One of the `d!` element shapes of the Kuhn subdivision of a cell.
#[derive(Clone, Debug)]
struct Shape<T: Real> {
    /// Vertex offsets in cell units.
    offsets: Vec<Vec<usize>>,
    det: T,
    /// `Σ_i c_i D_i` in physical coordinates.
    dc: DMatrix<T>,
    h_phys: Vec<T>,
    facets: Vec<ShapeFacet<T>>,
}

#[derive(Clone, Debug)]
struct Element {
    shape: usize,
    cell: Vec<usize>,
    /// Per facet: neighbour element and, for every facet node, the matching
    /// node index in the neighbour.
    nbr: Vec<(usize, Vec<usize>)>,
}

/// Meshed periodic problem on `[0,1]^d`.
#[derive(Clone, Debug)]
pub struct MeshedProblem<T: Real> {
    pub d: usize,
    pub m: usize,
    pub op: SbpOperator<T>,
    pub wave: Wave,
    pub sat: SatKind,
    shapes: Vec<Shape<T>>,
    elements: Vec<Element>,
}

fn cells(d: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..m).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    out
}

/// Canonical key of a facet under periodic translation by multiples of `m`.
fn facet_key(mut verts: Vec<Vec<usize>>, m: usize) -> Vec<usize> {
    verts.sort();
    let base = verts[0].clone();
    let mut key: Vec<usize> = base.iter().map(|b| b % m).collect();
    for v in &verts {
        key.extend(v.iter().zip(&base).map(|(a, b)| a - b));
    }
    key
}

impl<T: Real> MeshedProblem<T> {
    /// `m` cells per direction, each split into `d!` simplices.
    pub fn new(m: usize, op: &SbpOperator<T>, wave: Wave, sat: SatKind) -> Result<Self> {
        let d = op.dim();
        if !(2..=3).contains(&d) {
            return Err(Error::InvalidArgument(format!("advection needs d = 2 or 3, got {d}")));
        }
        if m < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 cells per direction, got {m}")));
        }
        if wave.c.len() != d {
            return Err(Error::InvalidArgument("wave speed has the wrong dimension".into()));
        }
        let elem = op.rule.element();
        let h = T::one() / T::of_usize(m);
        let c: Vec<T> = wave.c.iter().map(|&x| T::lit(x)).collect();

        let shapes: Vec<Shape<T>> = permutations(d)
            .into_iter()
            .map(|perm| {
                let mut offsets = vec![vec![0usize; d]];
                for &axis in &perm {
                    let mut v = offsets.last().expect("non-empty").clone();
                    v[axis] += 1;
                    offsets.push(v);
                }
                Self::shape(op, &elem, offsets, h, &c)
            })
            .collect::<Result<_>>()?;

        let mut elements = Vec::new();
        for cell in cells(d, m) {
            for s in 0..shapes.len() {
                elements.push(Element {
                    shape: s,
                    cell: cell.clone(),
                    nbr: Vec::new(),
                });
            }
        }

        let mut by_key: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for (k, el) in elements.iter().enumerate() {
            let offs = &shapes[el.shape].offsets;
            for f in &elem.facets {
                let verts = f
                    .vertices
                    .iter()
                    .map(|&v| offs[v].iter().zip(&el.cell).map(|(o, c)| o + c).collect())
                    .collect();
                by_key.entry(facet_key(verts, m)).or_default().push((k, f.opposite));
            }
        }

        let mut problem = MeshedProblem {
            d,
            m,
            op: op.clone(),
            wave,
            sat,
            shapes,
            elements,
        };
        let mut pairs = vec![vec![(usize::MAX, usize::MAX); elem.facets.len()]; problem.elements.len()];
        for list in by_key.values() {
            match list.as_slice() {
                &[(a, fa), (b, fb)] => {
                    pairs[a][fa] = (b, fb);
                    pairs[b][fb] = (a, fa);
                }
                _ => {
                    let (e, f) = list[0];
                    return Err(Error::FacetPairing { element: e, facet: f });
                }
            }
        }
        let tol = T::lit(PAIRING_TOL);
        let nbrs: Vec<Vec<(usize, Vec<usize>)>> = (0..problem.elements.len())
            .map(|k| {
                (0..elem.facets.len())
                    .map(|g| {
                        let (nk, ng) = pairs[k][g];
                        let mine = problem.node_coords(k);
                        let theirs = problem.node_coords(nk);
                        let fa = &problem.shapes[problem.elements[k].shape].facets[g].nodes;
                        let fb = &problem.shapes[problem.elements[nk].shape].facets[ng].nodes;
                        if fa.len() != fb.len() {
                            return Err(Error::FacetPairing { element: k, facet: g });
                        }
                        let mut used = vec![false; fb.len()];
                        let mut map = Vec::with_capacity(fa.len());
                        for &i in fa {
                            let hit = fb.iter().enumerate().find(|&(jj, &j)| {
                                !used[jj]
                                    && mine[i].iter().zip(&theirs[j]).all(|(&x, &y)| {
                                        let diff = x - y;
                                        (diff - diff.round()).abs() <= tol
                                    })
                            });
                            match hit {
                                Some((jj, &j)) => {
                                    used[jj] = true;
                                    map.push(j);
                                }
                                None => return Err(Error::FacetPairing { element: k, facet: g }),
                            }
                        }
                        Ok((nk, map))
                    })
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        for (el, nbr) in problem.elements.iter_mut().zip(nbrs) {
            el.nbr = nbr;
        }
        Ok(problem)
    }

    fn shape(
        op: &SbpOperator<T>,
        elem: &ReferenceSimplex<T>,
        offsets: Vec<Vec<usize>>,
        h: T,
        c: &[T],
    ) -> Result<Shape<T>> {
        let d = op.dim();
        let x = DMatrix::from_fn(d + 1, d, |v, k| T::of_usize(offsets[v][k]) * h);
        let dx = DMatrix::from_fn(d, d, |r, k| x[(k + 1, r)] - x[(0, r)]);
        let dv = DMatrix::from_fn(d, d, |r, k| elem.vertices[(k + 1, r)] - elem.vertices[(0, r)]);
        let dv_inv = dv.try_inverse().ok_or_else(|| Error::InvalidArgument("singular reference map".into()))?;
        let jac = dx * dv_inv;
        let det = jac.determinant().abs();
        let jinv = jac
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("degenerate element".into()))?;
        // Σ_i c_i ∂/∂x_i = Σ_k (Σ_i c_i ∂ξ_k/∂x_i) ∂/∂ξ_k
        let mut dc = DMatrix::zeros(op.n_p(), op.n_p());
        for k in 0..d {
            let a = (0..d).fold(T::zero(), |s, i| s + c[i] * jinv[(k, i)]);
            dc += &op.d[k] * a;
        }
        let h_phys: Vec<T> = op.h.iter().map(|&w| w * det).collect();
        let facets = op
            .facets
            .iter()
            .zip(&elem.facets)
            .map(|(fd, rf)| {
                let n: Vec<T> = (0..d)
                    .map(|i| (0..d).fold(T::zero(), |s, k| s + jinv[(k, i)] * fd.normal[k]))
                    .collect();
                let norm = n.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
                let lambda = n.iter().zip(c).fold(T::zero(), |s, (&ni, &ci)| s + ni * ci) / norm;
                let pts = DMatrix::from_fn(rf.vertices.len(), d, |r, k| x[(rf.vertices[r], k)]);
                let scale = simplex_measure(&pts) / rf.measure;
                let lift = fd
                    .nodes
                    .iter()
                    .zip(fd.b.iter())
                    .map(|(&i, &b)| b * scale / h_phys[i])
                    .collect();
                ShapeFacet {
                    nodes: fd.nodes.clone(),
                    lambda,
                    lift,
                }
            })
            .collect();
        Ok(Shape {
            offsets,
            det,
            dc,
            h_phys,
            facets,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_p(&self) -> usize {
        self.op.n_p()
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.num_elements() * self.n_p()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn vertices(&self, k: usize) -> Vec<Vec<T>> {
        let el = &self.elements[k];
        let h = T::one() / T::of_usize(self.m);
        self.shapes[el.shape]
            .offsets
            .iter()
            .map(|o| o.iter().zip(&el.cell).map(|(&a, &b)| T::of_usize(a + b) * h).collect())
            .collect()
    }

    fn map_bary(verts: &[Vec<T>], lam: &[T]) -> Vec<T> {
        (0..verts[0].len())
            .map(|i| verts.iter().zip(lam).fold(T::zero(), |s, (v, &l)| s + l * v[i]))
            .collect()
    }

    /// Physical coordinates of the nodes of element `k`.
    pub fn node_coords(&self, k: usize) -> Vec<Vec<T>> {
        let verts = self.vertices(k);
        let b = &self.op.rule.nodes.bary;
        (0..b.nrows())
            .map(|i| {
                let lam: Vec<T> = b.row(i).iter().copied().collect();
                Self::map_bary(&verts, &lam)
            })
            .collect()
    }

    /// Diagonal of the physical norm of element `k`.
    pub fn norm_diag(&self, k: usize) -> &[T] {
        &self.shapes[self.elements[k].shape].h_phys
    }

    /// Nodal samples of `f`.
    pub fn sample(&self, f: impl Fn(&[T]) -> T + Sync) -> Vec<T> {
        (0..self.num_elements())
            .into_par_iter()
            .flat_map_iter(|k| self.node_coords(k).into_iter().map(|x| f(&x)).collect::<Vec<_>>())
            .collect()
    }

    fn wave_t(&self) -> (T, Vec<T>) {
        (
            T::lit(self.wave.omega),
            self.wave.c.iter().map(|&c| T::lit(c)).collect(),
        )
    }

    pub fn exact_state(&self, t: T) -> Vec<T> {
        let (omega, c) = self.wave_t();
        self.sample(|x| exact_solution(x, t, omega, &c))
    }

    /// Semi-discrete right-hand side.
    pub fn rhs(&self, u: &[T]) -> Vec<T> {
        let n = self.n_p();
        let mut out = vec![T::zero(); u.len()];
        out.par_chunks_mut(n).enumerate().for_each(|(k, du)| {
            let el = &self.elements[k];
            let shape = &self.shapes[el.shape];
            let uk = &u[k * n..(k + 1) * n];
            for (r, dr) in du.iter_mut().enumerate() {
                *dr = -(0..n).fold(T::zero(), |s, j| s + shape.dc[(r, j)] * uk[j]);
            }
            for (f, (nk, map)) in shape.facets.iter().zip(&el.nbr) {
                let coef = match self.sat {
                    SatKind::Upwind => f.lambda.min(T::zero()),
                    SatKind::Central => f.lambda / T::lit(2.0),
                };
                if coef == T::zero() {
                    continue;
                }
                let un = &u[nk * n..(nk + 1) * n];
                for ((&i, &j), &lift) in f.nodes.iter().zip(map).zip(&f.lift) {
                    du[i] += coef * lift * (uk[i] - un[j]);
                }
            }
        });
        out
    }

    /// `Σ_k u_kᵀ H_k u_k`.
    pub fn energy(&self, u: &[T]) -> T {
        let n = self.n_p();
        (0..self.num_elements()).fold(T::zero(), |acc, k| {
            let h = self.norm_diag(k);
            acc + (0..n).fold(T::zero(), |s, i| s + h[i] * u[k * n + i] * u[k * n + i])
        })
    }

    /// Discrete L2 error against the exact solution at time `t`.
    ///
    /// The nodal solution is fit by the norm-weighted least-squares projection
    /// onto the degree-`p` modal basis and integrated with a rule of degree
    /// `3p + 1`.
    pub fn l2_error(&self, u: &[T], t: T) -> Result<T> {
        let (omega, c) = self.wave_t();
        self.l2_error_against(u, |x| exact_solution(x, t, omega, &c))
    }

    /// As [`Self::l2_error`] against an arbitrary reference function.
    pub fn l2_error_against(&self, u: &[T], exact: impl Fn(&[T]) -> T + Sync) -> Result<T> {
        let p = self.op.p;
        let domain = self.op.rule.domain;
        let (xi, w) = collapsed_rule::<T>(domain, 3 * p + 1)?;
        let v = pkd_eval(domain, p, &self.op.rule.nodes.coords)?;
        let vq = pkd_eval(domain, p, &xi)?;
        let hv = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| self.op.h[r] * v[(r, c)]);
        let gram = v.tr_mul(&hv);
        let proj = vq * gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("node set cannot resolve the modal basis".into()))?
            * hv.transpose();
        let elem = self.op.rule.element();
        let lam: Vec<Vec<T>> = (0..xi.nrows())
            .map(|q| elem.barycentric(&xi.row(q).iter().copied().collect::<Vec<_>>()))
            .collect();
        let n = self.n_p();
        let per_elem: Vec<T> = (0..self.num_elements())
            .into_par_iter()
            .map(|k| {
                let verts = self.vertices(k);
                let uk = &u[k * n..(k + 1) * n];
                let det = self.shapes[self.elements[k].shape].det;
                (0..w.len()).fold(T::zero(), |s, q| {
                    let uh = (0..n).fold(T::zero(), |a, j| a + proj[(q, j)] * uk[j]);
                    let x = Self::map_bary(&verts, &lam[q]);
                    let e = uh - exact(&x);
                    s + w[q] * e * e
                }) * det
            })
            .collect();
        Ok(per_elem.into_iter().fold(T::zero(), |a, b| a + b).sqrt())
    }

    /// Advances `steps` RK4 steps of size `dt`.
    pub fn advance(&self, u: &[T], dt: T, steps: usize) -> Vec<T> {
        let mut u = u.to_vec();
        for _ in 0..steps {
            u = rk4_step(&u, dt, |v| self.rhs(v));
        }
        u
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<T: Real>(u: &[T], dt: T, f: impl Fn(&[T]) -> Vec<T>) -> Vec<T> {
    let half = dt / T::lit(2.0);
    let axpy = |a: T, x: &[T]| -> Vec<T> { u.iter().zip(x).map(|(&ui, &xi)| ui + a * xi).collect() };
    let k1 = f(u);
    let k2 = f(&axpy(half, &k1));
    let k3 = f(&axpy(half, &k2));
    let k4 = f(&axpy(dt, &k3));
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    (0..u.len())
        .map(|i| u[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]))
        .collect()
}

/// `E(u) − E(u0)` with the physical norm.
pub fn energy_change<T: Real>(problem: &MeshedProblem<T>, u: &[T], u0: &[T]) -> T {
    problem.energy(u) - problem.energy(u0)
}

/// Number of steps of size close to `dt_max` that land exactly on `t`.
pub fn steps_for(t: f64, dt_max: f64) -> (usize, f64) {
    let n = (t / dt_max).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    /// Final time in units of `1/max|c_i|`.
    pub periods: f64,
    pub start: f64,
    /// Golden-section stops when the bracket is this fraction of the stable end.
    pub rtol: f64,
    /// Doubling gives up above this step.
    pub cap: f64,
    pub max_evaluations: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            periods: 5.0,
            start: 1e-3,
            rtol: 1e-4,
            cap: 10.0,
            max_evaluations: 200,
        }
    }
}

/// Energy change after integrating the default wave with step `dt` up to
/// `periods / max|c_i|`. Non-finite energies map to `+∞`.
pub fn stability_energy_change<T: Real>(problem: &MeshedProblem<T>, dt: f64, periods: f64) -> f64 {
    let t_end = periods / problem.wave.max_speed();
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let u0 = problem.exact_state(T::zero());
    let e0 = problem.energy(&u0).as_f64();
    let mut u = u0;
    let dt = T::lit(dt);
    for _ in 0..steps {
        u = rk4_step(&u, dt, |v| problem.rhs(v));
        let e = problem.energy(&u).as_f64();
        if !e.is_finite() || e > 1e8 * e0 {
            return f64::INFINITY;
        }
    }
    let de = problem.energy(&u).as_f64() - e0;
    if de.is_finite() {
        de
    } else {
        f64::INFINITY
    }
}

/// Stability predicate: `ΔE ≤ 0` after the run.
pub fn is_stable<T: Real>(problem: &MeshedProblem<T>, dt: f64, periods: f64) -> bool {
    stability_energy_change(problem, dt, periods) <= 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimestepResult {
    /// Largest step verified stable.
    pub dt: f64,
    /// Smallest step verified unstable.
    pub unstable: f64,
    pub evaluations: usize,
}

/// Largest stable step: doubling from `start` until unstable, then golden-section
/// refinement of the bracket.
pub fn max_stable_dt<T: Real>(problem: &MeshedProblem<T>, opts: &StabilityOptions) -> Result<TimestepResult> {
    let mut evals = 0;
    let mut stable = |dt: f64| {
        evals += 1;
        is_stable(problem, dt, opts.periods)
    };
    let mut lo = 0.0;
    let mut hi = opts.start;
    while stable(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > opts.cap {
            return Err(Error::NoUnstableStep(opts.cap));
        }
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut n = 0;
    while lo == 0.0 || hi - lo > opts.rtol * lo {
        n += 1;
        if n > opts.max_evaluations {
            return Err(Error::NoUnstableStep(hi));
        }
        let x = lo + ratio * (hi - lo);
        if stable(x) {
            lo = x;
        } else {
            hi = x;
        }
    }
    Ok(TimestepResult {
        dt: lo,
        unstable: hi,
        evaluations: evals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub t_final: f64,
    pub wave: Wave,
    /// Step is `cfl · h / max|c_i|`.
    pub cfl: f64,
    pub sat: SatKind,
}

impl ConvergenceOptions {
    pub fn new(d: usize, p: usize) -> Self {
        ConvergenceOptions {
            t_final: 1.0,
            wave: Wave::default_for(d),
            cfl: 0.05 / p.max(1) as f64,
            sat: SatKind::Upwind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub steps: usize,
    pub error: f64,
    /// `log(e_{k-1}/e_k) / log(m_k/m_{k-1})`.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub p: usize,
    pub d: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn final_rate(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rate)
    }
}

/// Default mesh sequence: `60 − 5p + (12 − p)k` in 2D and `10 + 5k` in 3D.
pub fn default_meshes(d: usize, p: usize, levels: usize) -> Vec<usize> {
    (0..levels)
        .map(|k| if d == 2 { 60 - 5 * p + (12 - p) * k } else { 10 + 5 * k })
        .collect()
}

pub fn run_convergence<T: Real>(
    op: &SbpOperator<T>,
    meshes: &[usize],
    opts: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &m in meshes {
        let problem = MeshedProblem::new(m, op, opts.wave.clone(), opts.sat)?;
        let (steps, dt) = steps_for(opts.t_final, opts.cfl / (m as f64 * opts.wave.max_speed()));
        let u = problem.advance(&problem.exact_state(T::zero()), T::lit(dt), steps);
        let error = problem.l2_error(&u, T::lit(opts.t_final))?.as_f64();
        let rate = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (m as f64 / prev.m as f64).ln());
        rows.push(ConvergenceRow { m, steps, error, rate });
    }
    Ok(ConvergenceReport {
        p: op.p,
        d: op.dim(),
        rows,
    })
}
