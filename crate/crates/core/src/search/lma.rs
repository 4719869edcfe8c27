//! Damped Gauss-Newton (Levenberg-Marquardt) iteration with a positivity
//! safeguard on the weights.

use nalgebra::{DMatrix, DVector};

use super::{jacobian, residual, select_columns, SearchSpec};
use crate::error::{Error, Result};
use crate::scalar::{max_abs, Real};

/// Singular values below this fraction of the largest are dropped.
pub const PINV_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LmaOptions {
    pub nu0: f64,
    pub nu_dec: f64,
    pub nu_inc: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    /// Stop once `‖g‖∞` drops to this.
    pub tol: f64,
    pub max_iter: usize,
    /// Floor kept on every weight.
    pub epsilon: f64,
}

impl Default for LmaOptions {
    fn default() -> Self {
        LmaOptions {
            nu0: 1000.0,
            nu_dec: 0.2,
            nu_inc: 5.0,
            nu_min: 1e-8,
            nu_max: 1e16,
            tol: 5e-14,
            max_iter: 300,
            epsilon: 1e-4,
        }
    }
}

impl LmaOptions {
    /// Settings for the final refinement of an already converged vector.
    pub fn polish() -> Self {
        LmaOptions {
            nu0: 1e-6,
            nu_min: 1e-12,
            max_iter: 50,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmaOutcome<T: Real> {
    pub tau: DVector<T>,
    pub converged: bool,
    /// Final `‖g‖∞`; `+∞` if the start was infeasible.
    pub residual: f64,
    pub iterations: usize,
    /// `‖g‖∞` after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub nu: f64,
}

/// Step `h̃ = −Ã⁺ J̃ᵀ g` with `Ã = J̃ᵀJ̃ + ν diag(J̃ᵀJ̃)`.
pub fn lma_step<T: Real>(jr: &DMatrix<T>, g: &DVector<T>, nu: T) -> Result<DVector<T>> {
    if jr.iter().chain(g.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lma step"));
    }
    let jtj = jr.tr_mul(jr);
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += nu * jtj[(i, i)];
    }
    let rhs = jr.tr_mul(g);
    Ok(-(pinv(a)? * rhs))
}

/// Pseudo-inverse with relative singular-value truncation.
pub fn pinv<T: Real>(a: DMatrix<T>) -> Result<DMatrix<T>> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == T::zero() {
        return Ok(DMatrix::zeros(c, r));
    }
    svd.pseudo_inverse(T::lit(PINV_RTOL) * smax)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// `τ + ηh`, with `η` shrunk so no weight drops below `epsilon`.
///
/// `η` is the smallest `(ε − τ_i)/h_i` over weight entries that the full step
/// would push below `ε`.
pub fn apply_update_with_positivity<T: Real>(
    tau: &DVector<T>,
    h: &DVector<T>,
    weights: std::ops::Range<usize>,
    epsilon: T,
) -> Result<DVector<T>> {
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("update"));
    }
    let mut eta = T::one();
    for i in weights {
        if tau[i] + h[i] < epsilon && h[i] < T::zero() {
            eta = eta.min((epsilon - tau[i]) / h[i]);
        }
    }
    let eta = eta.max(T::zero());
    Ok(tau + h * eta)
}

/// Clamps every weight entry to at least `epsilon`.
pub(crate) fn clamp_weights<T: Real>(tau: &mut DVector<T>, weights: std::ops::Range<usize>, epsilon: T) {
    for i in weights {
        if !(tau[i] >= epsilon) {
            tau[i] = epsilon;
        }
    }
}

/// Runs the iteration from `tau0`. Non-convergence is reported through the
/// outcome, not as an error.
pub fn lma_solve<T: Real>(tau0: &DVector<T>, spec: &SearchSpec<T>, opts: &LmaOptions) -> LmaOutcome<T> {
    let free = spec.free_indices();
    let eps = T::lit(opts.epsilon);
    let mut tau = tau0.clone();
    clamp_weights(&mut tau, spec.weight_indices(), eps);
    let mut nu = opts.nu0;
    let fail = |tau: DVector<T>, nu| LmaOutcome {
        tau,
        converged: false,
        residual: f64::INFINITY,
        iterations: 0,
        history: vec![],
        nu,
    };
    let mut g = match residual(&tau, spec) {
        Ok(g) => g,
        Err(_) => return fail(tau, nu),
    };
    let norm2 = |g: &DVector<T>| g.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>();
    let mut obj = norm2(&g);
    let mut history = vec![max_abs(g.iter().copied()).as_f64()];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let ginf = *history.last().expect("non-empty");
        if ginf <= opts.tol {
            break;
        }
        iterations += 1;
        let jac = match jacobian(&tau, spec) {
            Ok(j) => j,
            Err(_) => break,
        };
        let jr = select_columns(&jac, &free);
        let hr = match lma_step(&jr, &g, T::lit(nu)) {
            Ok(h) => h,
            Err(_) => break,
        };
        let mut h = DVector::zeros(tau.len());
        for (k, &i) in free.iter().enumerate() {
            h[i] = hr[k];
        }
        let accepted = apply_update_with_positivity(&tau, &h, spec.weight_indices(), eps)
            .ok()
            .and_then(|cand| residual(&cand, spec).ok().map(|gc| (cand, gc)))
            .filter(|(_, gc)| norm2(gc) < obj);
        match accepted {
            Some((cand, gc)) => {
                tau = cand;
                obj = norm2(&gc);
                g = gc;
                history.push(max_abs(g.iter().copied()).as_f64());
                nu = (nu * opts.nu_dec).max(opts.nu_min);
            }
            None => {
                nu *= opts.nu_inc;
                if nu > opts.nu_max {
                    break;
                }
            }
        }
    }
    let residual = *history.last().expect("non-empty");
    LmaOutcome {
        tau,
        converged: residual <= opts.tol,
        residual,
        iterations,
        history,
        nu,
    }
}
