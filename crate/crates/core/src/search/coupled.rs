//! Alternating swarm exploration and damped Gauss-Newton refinement.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;

use super::lma::{lma_solve, LmaOptions};
use super::pso::{perturb, pso_step, PsoOptions, Swarm};
use super::{objective, SearchSpec};
use crate::error::Result;
use crate::rule::{Provenance, QuadratureRule, RESIDUAL_TOL};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct CoupledOptions {
    pub lma: LmaOptions,
    pub pso: PsoOptions,
    /// Swarm steps between refinements.
    pub pso_steps_per_round: usize,
    pub max_rounds: usize,
    /// Rounds without improvement before the swarm is perturbed.
    pub stagnation_rounds: usize,
    /// Perturbation weight; `None` picks 1e-2 up to degree 10 and 1e-3 above.
    pub delta: Option<f64>,
    /// `‖g‖∞` accepted as a solution after polishing.
    pub success_tol: f64,
    /// Wall-clock cap on one run. Hitting it makes the outcome depend on
    /// machine speed, so it is off by default.
    pub time_limit: Option<Duration>,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            lma: LmaOptions::default(),
            pso: PsoOptions::default(),
            pso_steps_per_round: 10,
            max_rounds: 60,
            stagnation_rounds: 15,
            delta: None,
            success_tol: RESIDUAL_TOL,
            time_limit: None,
        }
    }
}

impl CoupledOptions {
    pub fn delta_for(&self, qv: usize) -> f64 {
        self.delta.unwrap_or(if qv <= 10 { 1e-2 } else { 1e-3 })
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome<T: Real> {
    /// The rule, when the residual reached the success tolerance.
    pub rule: Option<QuadratureRule<T>>,
    pub tau: DVector<T>,
    /// Best `‖g‖∞` reached.
    pub residual: f64,
    pub rounds: usize,
    pub lma_iterations: usize,
}

/// Runs the coupled search. `seeds` warm-start the first particles.
pub fn solve_coupled<T: Real, R: Rng + ?Sized>(
    spec: &SearchSpec<T>,
    opts: &CoupledOptions,
    seeds: &[DVector<T>],
    seed: Option<u64>,
    rng: &mut R,
) -> Result<SearchOutcome<T>> {
    let start = Instant::now();
    let mut swarm = Swarm::new(spec, &opts.pso, seeds, rng);
    let delta = opts.delta_for(spec.qv);
    let mut best_tau = swarm.best.clone();
    let mut best_res = f64::INFINITY;
    let mut lma_iterations = 0;
    let mut stagnant = 0;
    let mut last_refined: Option<DVector<T>> = None;
    let mut rounds = 0;

    while rounds < opts.max_rounds {
        rounds += 1;
        if rounds > 1 {
            for _ in 0..opts.pso_steps_per_round {
                pso_step(&mut swarm, spec, &opts.pso, rng);
            }
        }
        let obj_before = swarm.best_obj;

        if last_refined.as_ref() != Some(&swarm.best) {
            let out = lma_solve(&swarm.best, spec, &opts.lma);
            lma_iterations += out.iterations;
            let mut tau = out.tau;
            let mut res = out.residual;
            if res <= 1e3 * opts.success_tol {
                let pol = lma_solve(&tau, spec, &LmaOptions::polish());
                lma_iterations += pol.iterations;
                if pol.residual <= res {
                    tau = pol.tau;
                    res = pol.residual;
                }
            }
            if res < best_res {
                best_res = res;
                best_tau = tau.clone();
            }
            if res <= opts.success_tol {
                let provenance = Provenance {
                    seed,
                    iterations: lma_iterations,
                    residual: res,
                };
                return Ok(SearchOutcome {
                    rule: Some(spec.to_rule(&tau, provenance)?),
                    tau,
                    residual: res,
                    rounds,
                    lma_iterations,
                });
            }
            swarm.inject(&tau, objective(&tau, spec));
            last_refined = Some(swarm.best.clone());
        }

        if swarm.best_obj < obj_before || rounds == 1 {
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if stagnant >= opts.stagnation_rounds {
            let taus = swarm
                .particles
                .iter()
                .map(|p| perturb(&p.tau, delta, spec, opts.pso.weight_floor, rng))
                .collect();
            let (gb, gobj) = (swarm.best.clone(), swarm.best_obj);
            swarm = Swarm::from_positions(spec, taus);
            swarm.inject(&gb, gobj);
            stagnant = 0;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() > t) {
            break;
        }
    }
    Ok(SearchOutcome {
        rule: None,
        tau: best_tau,
        residual: best_res,
        rounds,
        lma_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, FacetKind, OrbitKind, SymmetryOrbit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn finds_degree_four_interior_rule() {
        // the classical six-point rule: two S21 orbits
        let spec = SearchSpec::new(
            Domain::Triangle,
            4,
            vec![
                SymmetryOrbit::new(OrbitKind::S21, vec![0.1], 0.1),
                SymmetryOrbit::new(OrbitKind::S21, vec![0.4], 0.1),
            ],
            FacetKind::None,
            None,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = solve_coupled(&spec, &CoupledOptions::default(), &[], Some(7), &mut rng).unwrap();
        let rule = out.rule.expect("converged");
        assert_eq!(rule.n_p(), 6);
        assert!(rule.moment_residual(4).unwrap() <= 1e-12);
        assert!(rule.weights().iter().all(|&w| w > 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let again = solve_coupled(&spec, &CoupledOptions::default(), &[], Some(7), &mut rng).unwrap();
        assert_eq!(again.tau, out.tau);
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let spec = SearchSpec::new(
            Domain::Triangle,
            5,
            vec![SymmetryOrbit::new(OrbitKind::S21, vec![0.1], 0.1)],
            FacetKind::None,
            None,
        )
        .unwrap();
        let opts = CoupledOptions {
            max_rounds: 3,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = solve_coupled(&spec, &opts, &[], None, &mut rng).unwrap();
        assert!(out.rule.is_none());
        assert!(out.residual > 1e-6);
        assert_eq!(out.rounds, 3);
    }
}
