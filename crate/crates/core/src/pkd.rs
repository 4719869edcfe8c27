//! Orthonormal Proriol-Koornwinder-Dubiner polynomials on the reference
//! interval, triangle and tetrahedron.
//!
//! The collapsed-coordinate factors `(1-s)^i P_i(a)` are evaluated as
//! homogeneous Jacobi polynomials `t^i P_i(u/t)` through a scaled three-term
//! recurrence, so no division by `t` ever happens and the basis is smooth up to
//! the collapsed vertex. Gradients use forward-mode dual numbers carried
//! through the same recurrence.
//!
//! Ordering is graded: total degree `n = 0, 1, ...`, and within a degree the
//! first index `i` runs `0..=n`, then `j`, with the last index taking the
//! remainder.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{Domain, ReferenceSimplex};
use crate::scalar::Real;

/// Nodes further than this outside the simplex (barycentric units) are rejected.
pub const OUTSIDE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("node {index} lies outside the closed reference simplex")]
    OutsideClosure { index: usize },
    #[error("node matrix has {got} columns, expected {expected}")]
    Shape { got: usize, expected: usize },
}

/// Dimension and total degree of a PKD basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisSpec {
    pub domain: Domain,
    pub degree: usize,
}

impl BasisSpec {
    pub fn new(domain: Domain, degree: usize) -> Self {
        BasisSpec { domain, degree }
    }

    pub fn len(&self) -> usize {
        basis_count(self.domain.dim(), self.degree)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-indices `(i, j, k)` in basis order; unused trailing entries are 0.
    pub fn indices(&self) -> Vec<[usize; 3]> {
        basis_indices(self.domain.dim(), self.degree)
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `binomial(q + d, d)`.
pub fn basis_count(d: usize, q: usize) -> usize {
    binomial(q + d, d)
}

pub fn basis_indices(d: usize, q: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(basis_count(d, q));
    for n in 0..=q {
        match d {
            1 => out.push([n, 0, 0]),
            2 => {
                for i in 0..=n {
                    out.push([i, n - i, 0]);
                }
            }
            _ => {
                for i in 0..=n {
                    for j in 0..=n - i {
                        out.push([i, j, n - i - j]);
                    }
                }
            }
        }
    }
    out
}

/// Value with gradient in up to three variables.
#[derive(Clone, Copy, Debug)]
struct Dual<T> {
    v: T,
    g: [T; 3],
}

impl<T: Real> Dual<T> {
    fn cst(v: T) -> Self {
        Dual {
            v,
            g: [T::zero(); 3],
        }
    }

    fn var(v: T, k: usize) -> Self {
        let mut g = [T::zero(); 3];
        g[k] = T::one();
        Dual { v, g }
    }

    fn scale(self, s: T) -> Self {
        Dual {
            v: self.v * s,
            g: self.g.map(|x| x * s),
        }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1], self.g[2] + o.g[2]],
        }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v - o.v,
            g: [self.g[0] - o.g[0], self.g[1] - o.g[1], self.g[2] - o.g[2]],
        }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            g: [
                self.g[0] * o.v + self.v * o.g[0],
                self.g[1] * o.v + self.v * o.g[1],
                self.g[2] * o.v + self.v * o.g[2],
            ],
        }
    }
}

/// Normalised homogeneous Jacobi polynomials `t^n P_n^{(alpha,0)}(u/t)` for
/// `n = 0..=nmax`, orthonormal on `[-1,1]` with weight `(1-x)^alpha` when
/// `t = 1`.
fn homogeneous_jacobi<T: Real>(nmax: usize, alpha: usize, u: Dual<T>, t: Dual<T>) -> Vec<Dual<T>> {
    let a = T::of_usize(alpha);
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let gamma0 = two.powi(alpha as i32 + 1) / (a + one);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(Dual::cst(one / gamma0.sqrt()));
    if nmax == 0 {
        return out;
    }
    let gamma1 = (a + one) / (a + three) * gamma0;
    let p1 = (u.scale((a + two) / two) + t.scale(a / two)).scale(one / gamma1.sqrt());
    out.push(p1);
    let mut a_old = two / (two + a) * ((a + one) / (a + three)).sqrt();
    for i in 1..nmax {
        let fi = T::of_usize(i);
        let h = two * fi + a;
        let ip = fi + one;
        let a_new = two / (h + two) * (ip * ip * (ip + a) * (ip + a) / ((h + one) * (h + three))).sqrt();
        let b_new = -(a * a) / (h * (h + two));
        let next = ((u - t.scale(b_new)) * out[i] - (t * t * out[i - 1]).scale(a_old))
            .scale(one / a_new);
        out.push(next);
        a_old = a_new;
    }
    out
}

/// Evaluates all basis functions (with gradients) at one reference point.
fn eval_point<T: Real>(d: usize, q: usize, x: &[T], idx: &[[usize; 3]]) -> Vec<Dual<T>> {
    let half = T::lit(0.5);
    match d {
        1 => {
            let r = Dual::var(x[0], 0);
            let p = homogeneous_jacobi(q, 0, r, Dual::cst(T::one()));
            idx.iter().map(|m| p[m[0]]).collect()
        }
        2 => {
            let r = Dual::var(x[0], 0);
            let s = Dual::var(x[1], 1);
            let one = Dual::cst(T::one());
            let u = r + (one + s).scale(half);
            let t = (one - s).scale(half);
            let hi = homogeneous_jacobi(q, 0, u, t);
            let mut pow2 = vec![T::one(); q + 1];
            for i in 1..=q {
                pow2[i] = pow2[i - 1] * T::lit(2.0);
            }
            let mut pj: Vec<Vec<Dual<T>>> = Vec::with_capacity(q + 1);
            for i in 0..=q {
                pj.push(homogeneous_jacobi(q - i, 2 * i + 1, s, one));
            }
            let c = T::lit(2.0).sqrt();
            idx.iter()
                .map(|m| (hi[m[0]] * pj[m[0]][m[1]]).scale(c * pow2[m[0]]))
                .collect()
        }
        _ => {
            let r = Dual::var(x[0], 0);
            let s = Dual::var(x[1], 1);
            let w = Dual::var(x[2], 2);
            let one = Dual::cst(T::one());
            let tau1 = (Dual::cst(T::zero()) - s - w).scale(half);
            let u1 = one + r - tau1;
            let tau2 = (one - w).scale(half);
            let u2 = s + (one + w).scale(half);
            let hi = homogeneous_jacobi(q, 0, u1, tau1);
            let hj: Vec<Vec<Dual<T>>> = (0..=q)
                .map(|i| homogeneous_jacobi(q - i, 2 * i + 1, u2, tau2))
                .collect();
            let mut hk: Vec<Vec<Vec<Dual<T>>>> = Vec::with_capacity(q + 1);
            for i in 0..=q {
                hk.push(
                    (0..=q - i)
                        .map(|j| homogeneous_jacobi(q - i - j, 2 * i + 2 * j + 2, w, one))
                        .collect(),
                );
            }
            let c = T::lit(8.0).sqrt();
            idx.iter()
                .map(|m| {
                    let scale = c * T::lit(2.0).powi((2 * m[0] + m[1]) as i32);
                    (hi[m[0]] * hj[m[0]][m[1]] * hk[m[0]][m[1]][m[2]]).scale(scale)
                })
                .collect()
        }
    }
}

/// Basis values and directional derivatives at a set of nodes.
#[derive(Clone, Debug)]
pub struct VandermondeBundle<T: Real> {
    /// `n_p × n_b`, one row per node.
    pub v: DMatrix<T>,
    /// `d` matrices of the same shape holding `∂/∂x_k`.
    pub vx: Vec<DMatrix<T>>,
}

fn check_nodes<T: Real>(domain: Domain, nodes: &DMatrix<T>) -> Result<(), BasisError> {
    let d = domain.dim();
    if nodes.ncols() != d {
        return Err(BasisError::Shape {
            got: nodes.ncols(),
            expected: d,
        });
    }
    let elem = ReferenceSimplex::<T>::new(domain).expect("supported domain");
    let tol = T::lit(OUTSIDE_TOL);
    for i in 0..nodes.nrows() {
        let x: Vec<T> = nodes.row(i).iter().copied().collect();
        if !elem.contains(&x, tol) {
            return Err(BasisError::OutsideClosure { index: i });
        }
    }
    Ok(())
}

fn eval_all<T: Real>(
    domain: Domain,
    q: usize,
    nodes: &DMatrix<T>,
    grads: bool,
) -> Result<VandermondeBundle<T>, BasisError> {
    check_nodes(domain, nodes)?;
    let d = domain.dim();
    let idx = basis_indices(d, q);
    let n = nodes.nrows();
    let mut v = DMatrix::zeros(n, idx.len());
    let mut vx = if grads {
        vec![DMatrix::zeros(n, idx.len()); d]
    } else {
        Vec::new()
    };
    for i in 0..n {
        let x: Vec<T> = nodes.row(i).iter().copied().collect();
        for (j, p) in eval_point(d, q, &x, &idx).into_iter().enumerate() {
            v[(i, j)] = p.v;
            for (k, m) in vx.iter_mut().enumerate() {
                m[(i, j)] = p.g[k];
            }
        }
    }
    Ok(VandermondeBundle { v, vx })
}

/// Vandermonde matrix `V` (`n_p × n_b`) of the degree-`q` basis.
pub fn pkd_eval<T: Real>(domain: Domain, q: usize, nodes: &DMatrix<T>) -> Result<DMatrix<T>, BasisError> {
    Ok(eval_all(domain, q, nodes, false)?.v)
}

/// Directional derivative matrices `V_{x_1} .. V_{x_d}`.
pub fn pkd_grad<T: Real>(
    domain: Domain,
    q: usize,
    nodes: &DMatrix<T>,
) -> Result<Vec<DMatrix<T>>, BasisError> {
    Ok(eval_all(domain, q, nodes, true)?.vx)
}

/// Values and gradients in one pass.
pub fn pkd_eval_grad<T: Real>(
    domain: Domain,
    q: usize,
    nodes: &DMatrix<T>,
) -> Result<VandermondeBundle<T>, BasisError> {
    eval_all(domain, q, nodes, true)
}

/// Exact integrals of the basis functions: `√|Ω|` followed by zeros.
pub fn integral_vector<T: Real>(domain: Domain, q: usize) -> DVector<T> {
    let mut f = DVector::zeros(basis_count(domain.dim(), q));
    f[0] = domain.measure::<T>().sqrt();
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_simplex;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Tensor Gauss-Legendre rule on [-1,1] by Golub-Welsch style Newton.
    fn gauss_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    let (mut p0, mut p1) = (1.0, z);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                    x[i] = z;
                    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                    break;
                }
            }
        }
        (x, w)
    }

    /// Collapsed tensor rule on the reference triangle.
    fn triangle_rule(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let (g, gw) = gauss_1d(n);
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (a, wa) in g.iter().zip(&gw) {
            for (b, wb) in g.iter().zip(&gw) {
                let s = *b;
                let r = 0.5 * (1.0 + a) * (1.0 - s) - 1.0;
                pts.push(r);
                pts.push(s);
                ws.push(wa * wb * 0.5 * (1.0 - s));
            }
        }
        (DMatrix::from_row_slice(ws.len(), 2, &pts), ws)
    }

    fn tet_rule(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let (g, gw) = gauss_1d(n);
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (a, wa) in g.iter().zip(&gw) {
            for (b, wb) in g.iter().zip(&gw) {
                for (c, wc) in g.iter().zip(&gw) {
                    let w = *c;
                    let s = 0.5 * (1.0 + b) * (1.0 - w) - 1.0;
                    let r = 0.5 * (1.0 + a) * (-s - w) - 1.0;
                    pts.extend_from_slice(&[r, s, w]);
                    ws.push(wa * wb * wc * 0.25 * (1.0 - w) * (-s - w));
                }
            }
        }
        (DMatrix::from_row_slice(ws.len(), 3, &pts), ws)
    }

    fn gram_error(v: &DMatrix<f64>, w: &[f64]) -> f64 {
        let wv = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * w[i]);
        let g = v.transpose() * wv;
        let mut e: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[(i, j)] - target).abs());
            }
        }
        e
    }

    #[test]
    fn counts_and_ordering() {
        assert_eq!(basis_count(2, 10), 66);
        assert_eq!(basis_count(3, 4), 35);
        assert_eq!(basis_count(1, 5), 6);
        let idx = basis_indices(2, 2);
        assert_eq!(idx, vec![[0, 0, 0], [0, 1, 0], [1, 0, 0], [0, 2, 0], [1, 1, 0], [2, 0, 0]]);
        let idx3 = basis_indices(3, 3);
        assert_eq!(idx3.len(), 20);
        for w in idx3.windows(2) {
            assert!(w[0].iter().sum::<usize>() <= w[1].iter().sum::<usize>());
        }
    }

    #[test]
    fn constant_function() {
        let tri = DMatrix::from_row_slice(3, 2, &[-1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
        let v = pkd_eval(Domain::Triangle, 3, &tri).unwrap();
        for i in 0..3 {
            assert_relative_eq!(v[(i, 0)], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        }
        let tet = DMatrix::from_row_slice(
            4,
            3,
            &[-1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0],
        );
        let b = pkd_eval_grad(Domain::Tetrahedron, 4, &tet).unwrap();
        for i in 0..4 {
            assert_relative_eq!(b.v[(i, 0)], 3f64.sqrt() / 2.0, epsilon = 1e-15);
            for k in 0..3 {
                assert_eq!(b.vx[k][(i, 0)], 0.0);
            }
            for j in 0..b.v.ncols() {
                assert!(b.v[(i, j)].is_finite());
            }
        }
        let f = integral_vector::<f64>(Domain::Tetrahedron, 3);
        assert_relative_eq!(f[0], (4.0f64 / 3.0).sqrt());
        assert!(f.iter().skip(1).all(|&x| x == 0.0));
    }

    #[test]
    fn orthonormal_on_interval_triangle_tet() {
        let (x, w) = gauss_1d(21);
        let v = pkd_eval(Domain::Interval, 20, &DMatrix::from_column_slice(21, 1, &x)).unwrap();
        assert!(gram_error(&v, &w) < 1e-12);

        let (pts, w) = triangle_rule(12);
        let v = pkd_eval(Domain::Triangle, 10, &pts).unwrap();
        assert!(gram_error(&v, &w) < 1e-12, "{}", gram_error(&v, &w));

        let (pts, w) = tet_rule(8);
        let v = pkd_eval(Domain::Tetrahedron, 6, &pts).unwrap();
        assert!(gram_error(&v, &w) < 1e-12, "{}", gram_error(&v, &w));
    }

    #[test]
    fn stable_at_high_degree() {
        let (pts, w) = triangle_rule(22);
        let v = pkd_eval(Domain::Triangle, 20, &pts).unwrap();
        assert!(gram_error(&v, &w) < 1e-11);
    }

    #[test]
    fn linear_gradients_constant() {
        let (pts, _) = triangle_rule(4);
        let g = pkd_grad(Domain::Triangle, 1, &pts).unwrap();
        for k in 0..2 {
            for j in 1..3 {
                for i in 1..pts.nrows() {
                    assert_relative_eq!(g[k][(i, j)], g[k][(0, j)], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn monomial_integrals_reconstructed() {
        // project x and x^2 onto the basis using a collapsed rule and integrate
        let (pts, w) = triangle_rule(6);
        let v = pkd_eval(Domain::Triangle, 4, &pts).unwrap();
        let f = integral_vector::<f64>(Domain::Triangle, 4);
        for (pow, exact) in [(1, -2.0 / 3.0), (2, 2.0 / 3.0)] {
            let vals: Vec<f64> = (0..pts.nrows()).map(|i| pts[(i, 0)].powi(pow)).collect();
            let coef: Vec<f64> = (0..v.ncols())
                .map(|j| (0..pts.nrows()).map(|i| w[i] * v[(i, j)] * vals[i]).sum())
                .collect();
            let integral: f64 = coef.iter().zip(f.iter()).map(|(c, f)| c * f).sum();
            assert_relative_eq!(integral, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_outside_points() {
        let p = DMatrix::from_row_slice(1, 2, &[0.5, 0.6]);
        assert_eq!(
            pkd_eval(Domain::Triangle, 2, &p).unwrap_err(),
            BasisError::OutsideClosure { index: 0 }
        );
        let p = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 0.0]);
        assert!(matches!(
            pkd_eval(Domain::Triangle, 2, &p),
            Err(BasisError::Shape { .. })
        ));
    }

    #[test]
    fn f32_instantiation() {
        let p = DMatrix::<f32>::from_row_slice(1, 2, &[-0.2, -0.3]);
        let v = pkd_eval(Domain::Triangle, 3, &p).unwrap();
        assert!((v[(0, 0)] - 1.0 / 2f32.sqrt()).abs() < 1e-6);
    }

    fn interior_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.02f64..1.0, d + 1).prop_map(move |raw| {
            let s: f64 = raw.iter().sum();
            let lam: Vec<f64> = raw.iter().map(|x| x / s).collect();
            reference_simplex::<f64>(d).unwrap().to_cartesian(&lam)
        })
    }

    fn fd_check(domain: Domain, q: usize, x: Vec<f64>) -> Result<(), TestCaseError> {
        let d = domain.dim();
        let pt = DMatrix::from_row_slice(1, d, &x);
        let b = pkd_eval_grad(domain, q, &pt).unwrap();
        let h = 1e-6;
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let vp = pkd_eval(domain, q, &DMatrix::from_row_slice(1, d, &xp)).unwrap();
            let vm = pkd_eval(domain, q, &DMatrix::from_row_slice(1, d, &xm)).unwrap();
            let scale = b.vx[k].amax().max(1.0);
            for j in 0..b.v.ncols() {
                let fd = (vp[(0, j)] - vm[(0, j)]) / (2.0 * h);
                prop_assert!((fd - b.vx[k][(0, j)]).abs() <= 1e-6 * scale);
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn gradient_matches_finite_differences_tri(x in interior_point(2), q in 1usize..=10) {
            fd_check(Domain::Triangle, q, x)?;
        }

        #[test]
        fn gradient_matches_finite_differences_tet(x in interior_point(3), q in 1usize..=8) {
            fd_check(Domain::Tetrahedron, q, x)?;
        }
    }
}
