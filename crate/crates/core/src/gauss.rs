//! Legendre-Gauss and Legendre-Gauss-Lobatto rules on `[-1, 1]`.

use crate::error::{Error, Result};
use crate::geometry::{Domain, FacetKind, OrbitKind, SymmetryOrbit};
use crate::rule::{Provenance, QuadratureRule};
use crate::scalar::Real;

/// Legendre values `P_0..=P_n` at `x`.
fn legendre<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut p = vec![T::one(); n + 1];
    if n >= 1 {
        p[1] = x;
    }
    for k in 2..=n {
        let kf = T::of_usize(k);
        p[k] = ((kf + kf - T::one()) * x * p[k - 1] - (kf - T::one()) * p[k - 2]) / kf;
    }
    p
}

/// Ascending LGL nodes and weights with `n >= 2` points.
pub fn lgl_points<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("LGL needs at least 2 points, got {n}")));
    }
    let nn = n - 1;
    let nf = T::of_usize(nn);
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        // Chebyshev-Gauss-Lobatto start, descending
        let mut xi = (T::pi() * T::of_usize(j) / nf).cos();
        for _ in 0..100 {
            let p = legendre(nn, xi);
            let dx = (xi * p[nn] - p[nn - 1]) / (T::of_usize(n) * p[nn]);
            xi -= dx;
            if dx.abs() <= T::epsilon() {
                break;
            }
        }
        let p = legendre(nn, xi);
        x.push(xi);
        w.push(T::lit(2.0) / (nf * (nf + T::one()) * p[nn] * p[nn]));
    }
    x.reverse();
    w.reverse();
    Ok(symmetrise(x, w))
}

/// Ascending LG nodes and weights with `n >= 1` points.
pub fn lg_points<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n < 1 {
        return Err(Error::InvalidArgument("LG needs at least 1 point".into()));
    }
    let nf = T::of_usize(n);
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (T::pi() * (T::of_usize(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let p = legendre(n, z);
            let pm = if n >= 1 { p[n - 1] } else { T::zero() };
            dp = nf * (z * p[n] - pm) / (z * z - T::one());
            let dz = p[n] / dp;
            z -= dz;
            if dz.abs() <= T::epsilon() {
                let p = legendre(n, z);
                dp = nf * (z * p[n] - p[n - 1]) / (z * z - T::one());
                break;
            }
        }
        x.push(z);
        w.push(T::lit(2.0) / ((T::one() - z * z) * dp * dp));
    }
    x.reverse();
    w.reverse();
    Ok(symmetrise(x, w))
}

/// Forces exact mirror symmetry of an ascending node list.
fn symmetrise<T: Real>(mut x: Vec<T>, mut w: Vec<T>) -> (Vec<T>, Vec<T>) {
    let n = x.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let a = (x[j] - x[i]) / T::lit(2.0);
        let ww = (w[i] + w[j]) / T::lit(2.0);
        x[i] = -a;
        x[j] = a;
        w[i] = ww;
        w[j] = ww;
    }
    if n % 2 == 1 {
        x[n / 2] = T::zero();
    }
    (x, w)
}

/// Orbit description of a symmetric ascending 1D rule.
fn orbits_1d<T: Real>(x: &[T], w: &[T]) -> Vec<SymmetryOrbit<T>> {
    let n = x.len();
    let mut orbits = Vec::new();
    for i in 0..n / 2 {
        let pos = x[n - 1 - i];
        if pos == T::one() {
            orbits.push(SymmetryOrbit::new(OrbitKind::Vert, vec![], w[i]));
        } else {
            let alpha = (T::one() - pos) / T::lit(2.0);
            orbits.push(SymmetryOrbit::new(OrbitKind::S11, vec![alpha], w[i]));
        }
    }
    if n % 2 == 1 {
        orbits.push(SymmetryOrbit::new(OrbitKind::S1, vec![], w[n / 2]));
    }
    orbits
}

fn rule_1d<T: Real>(x: Vec<T>, w: Vec<T>, degree: usize, kind: FacetKind) -> Result<QuadratureRule<T>> {
    let orbits = orbits_1d(&x, &w);
    QuadratureRule::new(Domain::Interval, degree, orbits, kind, None, Provenance::analytic())
}

/// `n`-point Legendre-Gauss-Lobatto rule, exact to degree `2n - 3`.
pub fn lgl_rule<T: Real>(n: usize) -> Result<QuadratureRule<T>> {
    let (x, w) = lgl_points(n)?;
    rule_1d(x, w, 2 * n - 3, FacetKind::Lgl)
}

/// `n`-point Legendre-Gauss rule, exact to degree `2n - 1`.
pub fn lg_rule<T: Real>(n: usize) -> Result<QuadratureRule<T>> {
    let (x, w) = lg_points(n)?;
    rule_1d(x, w, 2 * n - 1, FacetKind::Lg)
}
