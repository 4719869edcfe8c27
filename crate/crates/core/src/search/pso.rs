//! Particle-swarm global search over the free design-vector entries.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use super::{objective, SearchSpec};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct PsoOptions {
    pub n_c: usize,
    /// Inertial weight.
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    /// Replacement value for non-positive weights.
    pub weight_floor: f64,
}

impl Default for PsoOptions {
    fn default() -> Self {
        PsoOptions {
            n_c: 20,
            b: 0.6,
            c1: 1.5,
            c2: 1.5,
            weight_floor: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle<T: Real> {
    pub tau: DVector<T>,
    pub v: DVector<T>,
    pub best: DVector<T>,
    pub best_obj: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swarm<T: Real> {
    pub particles: Vec<Particle<T>>,
    pub best: DVector<T>,
    pub best_obj: f64,
}

/// Random feasible-box start: parameters uniform in each orbit's box shrunk
/// by 5%, weights uniform in `(0, 2|Ω|/n_p]`.
pub fn random_design<T: Real, R: Rng + ?Sized>(spec: &SearchSpec<T>, rng: &mut R) -> DVector<T> {
    let wmax = 2.0 * spec.domain.measure::<f64>() / spec.num_nodes().max(1) as f64;
    let mut last = spec.initial_vector();
    for _ in 0..1000 {
        let mut orbits = spec.template.clone();
        for (o, &frozen) in orbits.iter_mut().zip(&spec.frozen) {
            if !frozen {
                for (p, (lo, hi)) in o.params.iter_mut().zip(o.kind.param_bounds()) {
                    let pad = 0.05 * (hi - lo);
                    *p = T::lit(rng.gen_range(lo + pad..hi - pad));
                }
            }
            o.weight = T::lit((1.0 - rng.gen::<f64>()) * wmax);
        }
        last = spec.pack(&orbits);
        if spec.check_feasible(&orbits).is_ok() {
            break;
        }
    }
    last
}

impl<T: Real> Swarm<T> {
    /// Swarm with zero velocities; `seeds` fill the first slots, the rest are random.
    pub fn new<R: Rng + ?Sized>(
        spec: &SearchSpec<T>,
        opts: &PsoOptions,
        seeds: &[DVector<T>],
        rng: &mut R,
    ) -> Self {
        let taus: Vec<DVector<T>> = (0..opts.n_c.max(1))
            .map(|i| match seeds.get(i) {
                Some(s) => s.clone(),
                None => random_design(spec, rng),
            })
            .collect();
        Self::from_positions(spec, taus)
    }

    pub fn from_positions(spec: &SearchSpec<T>, taus: Vec<DVector<T>>) -> Self {
        let objs: Vec<f64> = taus.par_iter().map(|t| objective(t, spec)).collect();
        let particles: Vec<Particle<T>> = taus
            .into_iter()
            .zip(objs)
            .map(|(tau, obj)| Particle {
                v: DVector::zeros(tau.len()),
                best: tau.clone(),
                tau,
                best_obj: obj,
            })
            .collect();
        let mut swarm = Swarm {
            best: particles[0].best.clone(),
            best_obj: f64::INFINITY,
            particles,
        };
        swarm.update_global();
        swarm
    }

    fn update_global(&mut self) {
        for p in &self.particles {
            if p.best_obj < self.best_obj {
                self.best_obj = p.best_obj;
                self.best = p.best.clone();
            }
        }
    }

    /// Offers an externally improved vector as the global best and as the
    /// personal best of the worst particle.
    pub fn inject(&mut self, tau: &DVector<T>, obj: f64) {
        if !(obj < self.best_obj) {
            return;
        }
        self.best = tau.clone();
        self.best_obj = obj;
        let worst = self
            .particles
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.best_obj.total_cmp(&b.1.best_obj))
            .map(|(i, _)| i)
            .expect("non-empty swarm");
        let p = &mut self.particles[worst];
        p.tau = tau.clone();
        p.best = tau.clone();
        p.best_obj = obj;
        p.v.fill(T::zero());
    }
}

/// One velocity/position update of every particle followed by best tracking.
pub fn pso_step<T: Real, R: Rng + ?Sized>(
    swarm: &mut Swarm<T>,
    spec: &SearchSpec<T>,
    opts: &PsoOptions,
    rng: &mut R,
) {
    let free = spec.free_indices();
    let weights = spec.weight_indices();
    let floor = T::lit(opts.weight_floor);
    let (b, c1, c2) = (T::lit(opts.b), T::lit(opts.c1), T::lit(opts.c2));
    let gb = swarm.best.clone();
    for p in swarm.particles.iter_mut() {
        for &i in &free {
            let r1 = T::lit(rng.gen::<f64>());
            let r2 = T::lit(rng.gen::<f64>());
            let vi = b * p.v[i] + c1 * r1 * (p.best[i] - p.tau[i]) + c2 * r2 * (gb[i] - p.tau[i]);
            let mut xi = p.tau[i] + vi;
            if weights.contains(&i) && xi <= T::zero() {
                xi = floor;
            }
            p.v[i] = xi - p.tau[i];
            p.tau[i] = xi;
        }
    }
    let objs: Vec<f64> = swarm
        .particles
        .par_iter()
        .map(|p| objective(&p.tau, spec))
        .collect();
    for (p, obj) in swarm.particles.iter_mut().zip(objs) {
        if obj < p.best_obj {
            p.best_obj = obj;
            p.best = p.tau.clone();
        }
    }
    swarm.update_global();
}

/// `(1−δ)τ̃ + δr` on the free entries with `r` uniform in `[0,1]`, then weights
/// clamped to `weight_floor`.
pub fn perturb<T: Real, R: Rng + ?Sized>(
    tau: &DVector<T>,
    delta: f64,
    spec: &SearchSpec<T>,
    weight_floor: f64,
    rng: &mut R,
) -> DVector<T> {
    let mut out = tau.clone();
    let d = T::lit(delta);
    for i in spec.free_indices() {
        out[i] = (T::one() - d) * tau[i] + d * T::lit(rng.gen::<f64>());
    }
    super::lma::clamp_weights(&mut out, spec.weight_indices(), T::lit(weight_floor));
    out
}
