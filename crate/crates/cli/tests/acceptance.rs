//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simplex_sbp::advection::{
    is_stable, max_stable_dt, stability_energy_change, ConvergenceOptions, StabilityOptions, TimestepResult,
};
use simplex_sbp::archive::{read_operator, read_rule, write_operator, write_rule};
use simplex_sbp::search::pso::random_design;
use simplex_sbp::search::{jacobian, residual, SearchSpec};
use simplex_sbp::shipped::{shipped_operator, shipped_rule, SHIPPED};
use simplex_sbp::{
    build_sbp, find_rule, run_convergence, verify_sbp, Domain, FacetKind, FindOptions, MeshedProblem, OrbitKind,
    QuadratureRule, SatKind, SbpOperator, SymmetryOrbit, Wave,
};

const EXACTNESS_RTOL: f64 = 1e-11;
const SEARCH_BUDGET: Duration = Duration::from_secs(600);
const MAX_RESTARTS: usize = 20;
const DELTA_R_Q2: f64 = 0.471;
const DELTA_R_TOL: f64 = 0.01;
const COMPAT_RTOL: f64 = 1e-13;
const D_EXACT_TOL: f64 = 1e-10;
const E_SUM_TOL: f64 = 1e-12;
const JACOBIAN_RTOL: f64 = 1e-6;
const JACOBIAN_POINTS: usize = 20;
const JACOBIAN_MAX_QV: usize = 8;
const CONVERGENCE_MESHES: [usize; 3] = [8, 12, 16];
const CONVERGENCE_T: f64 = 0.25;
const CONVERGENCE_OMEGA: f64 = 2.0;
const CONVERGENCE_MARGIN: f64 = 0.5;
const CENTRAL_RTOL: f64 = 1e-10;
const TIMESTEP_MESH: usize = 4;
const TIMESTEP_REFERENCE: f64 = 0.0258;
const TIMESTEP_FACTOR: f64 = 3.0;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All exponent tuples over `n` slots with total degree `q`.
fn tuples(n: usize, q: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![q]];
    }
    (0..=q)
        .flat_map(|a| {
            tuples(n - 1, q - a).into_iter().map(move |mut t| {
                t.insert(0, a);
                t
            })
        })
        .collect()
}

fn barycentric(x: &[f64]) -> Vec<f64> {
    let mut l: Vec<f64> = x.iter().map(|xi| (xi + 1.0) / 2.0).collect();
    l.insert(0, 1.0 - l.iter().sum::<f64>());
    l
}

/// `∫ λ^α` over the reference simplex of dimension `d` (measure `2^d/d!`).
fn bary_integral(d: usize, alpha: &[usize]) -> f64 {
    let total: usize = alpha.iter().sum();
    2f64.powi(d as i32) * alpha.iter().map(|&a| factorial(a)).product::<f64>() / factorial(d + total)
}

fn bary_monomial(l: &[f64], alpha: &[usize]) -> f64 {
    l.iter().zip(alpha).map(|(x, &a)| x.powi(a as i32)).product()
}

/// `∂(λ^α)/∂x_i` with `λ_0 = 1 − Σ λ_k`, `λ_k = (x_{k-1} + 1)/2`.
fn bary_derivative(l: &[f64], alpha: &[usize], i: usize) -> f64 {
    let mut s = 0.0;
    for (k, &a) in alpha.iter().enumerate() {
        let dl = if k == 0 {
            -0.5
        } else if k == i + 1 {
            0.5
        } else {
            continue;
        };
        if a == 0 {
            continue;
        }
        let mut beta = alpha.to_vec();
        beta[k] -= 1;
        s += a as f64 * dl * bary_monomial(l, &beta);
    }
    s
}

/// Worst relative error over all barycentric monomials of degree `<= q`.
fn exactness_error(rule: &QuadratureRule<f64>, q: usize) -> f64 {
    let d = rule.domain.dim();
    let pts: Vec<Vec<f64>> = (0..rule.n_p()).map(|i| barycentric(&rule.nodes.point(i))).collect();
    let w = rule.weights();
    let mut worst: f64 = 0.0;
    for deg in 0..=q {
        for alpha in tuples(d + 1, deg) {
            let exact = bary_integral(d, &alpha);
            let approx: f64 = pts.iter().zip(w).map(|(l, wi)| wi * bary_monomial(l, &alpha)).sum();
            worst = worst.max((approx - exact).abs() / exact);
        }
    }
    worst
}

fn min_distance(rule: &QuadratureRule<f64>) -> f64 {
    let n = rule.n_p();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (rule.nodes.point(i), rule.nodes.point(j));
            best = best.min(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
        }
    }
    best
}

struct Found {
    domain: Domain,
    facet: FacetKind,
    qv: usize,
    rule: Option<QuadratureRule<f64>>,
    elapsed: Duration,
}

const NODE_TARGETS: &[(Domain, FacetKind, usize, usize)] = &[
    (Domain::Triangle, FacetKind::Lgl, 1, 6),
    (Domain::Triangle, FacetKind::Lgl, 2, 7),
    (Domain::Triangle, FacetKind::Lgl, 3, 10),
    (Domain::Triangle, FacetKind::Lgl, 4, 12),
    (Domain::Triangle, FacetKind::Lgl, 5, 15),
    (Domain::Triangle, FacetKind::Lgl, 6, 18),
    (Domain::Triangle, FacetKind::Lg, 1, 6),
    (Domain::Triangle, FacetKind::Lg, 2, 7),
    (Domain::Triangle, FacetKind::Lg, 3, 10),
    (Domain::Triangle, FacetKind::Lg, 4, 12),
    (Domain::Tetrahedron, FacetKind::Generated, 2, 7),
];

fn search_all() -> Vec<Found> {
    NODE_TARGETS
        .iter()
        .map(|&(domain, facet, qv, _)| {
            let start = Instant::now();
            let opts = FindOptions {
                seed: 1,
                restarts: MAX_RESTARTS,
                deadline: Some(start + SEARCH_BUDGET),
                ..FindOptions::default()
            };
            let rule = find_rule::<f64>(domain, qv, facet, &opts).ok().map(|f| f.rule);
            Found {
                domain,
                facet,
                qv,
                rule,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

fn all_rules(found: &[Found]) -> Vec<(String, QuadratureRule<f64>)> {
    let mut rules: Vec<_> = SHIPPED
        .iter()
        .map(|&(d, f, q)| (format!("shipped {}-{}-q{q}", d.tag(), f.tag()), shipped_rule(d, f, q).unwrap()))
        .collect();
    for f in found {
        if let Some(r) = &f.rule {
            rules.push((format!("found {}-{}-q{}", f.domain.tag(), f.facet.tag(), f.qv), r.clone()));
        }
    }
    rules
}

fn criterion_exactness(rules: &[(String, QuadratureRule<f64>)]) -> Outcome {
    let mut worst_volume: f64 = 0.0;
    let mut worst_facet: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, rule) in rules {
        let e = exactness_error(rule, rule.qv);
        worst_volume = worst_volume.max(e);
        if e > EXACTNESS_RTOL {
            bad.push(format!("{name} volume {e:.2e}"));
        }
        if let Some(p) = rule.sbp_degree() {
            match &rule.facet_rule {
                Some(f) if f.qv >= 2 * p => {
                    let e = exactness_error(f, 2 * p);
                    worst_facet = worst_facet.max(e);
                    if e > EXACTNESS_RTOL {
                        bad.push(format!("{name} facet {e:.2e}"));
                    }
                }
                _ => bad.push(format!("{name} facet rule below degree {}", 2 * p)),
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} rules, worst volume rel {worst_volume:.2e}, facet rel {worst_facet:.2e} (tol {EXACTNESS_RTOL:.0e}){}",
            rules.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn criterion_node_counts(found: &[Found]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (f, &(_, _, _, target)) in found.iter().zip(NODE_TARGETS) {
        let n = f.rule.as_ref().map(|r| r.n_p());
        let hit = n == Some(target) && f.elapsed <= SEARCH_BUDGET;
        ok &= hit;
        parts.push(format!(
            "{}-{}-q{}={}{}",
            f.domain.tag(),
            f.facet.tag(),
            f.qv,
            n.map_or("none".into(), |n| n.to_string()),
            if hit { String::new() } else { format!("(want {target})") }
        ));
    }
    let slowest = found.iter().map(|f| f.elapsed).max().unwrap_or_default();
    outcome(ok, format!("{}; slowest search {:.1}s", parts.join(" "), slowest.as_secs_f64()))
}

fn criterion_delta_r(found: &[Found]) -> Outcome {
    let lookup = |qv| {
        found
            .iter()
            .find(|f| f.domain == Domain::Triangle && f.facet == FacetKind::Lgl && f.qv == qv)
            .and_then(|f| f.rule.clone())
    };
    let q1 = lookup(1).map(|r| min_distance(&r));
    let q2 = lookup(2).filter(|r| r.n_p() == 7).map(|r| min_distance(&r));
    let ok1 = q1.is_some_and(|x| format!("{x:.3}") == "1.000");
    let ok2 = q2.is_some_and(|x| (x - DELTA_R_Q2).abs() <= DELTA_R_TOL);
    outcome(
        ok1 && ok2,
        format!(
            "q_v=1 {} (want 1.000), q_v=2 {} (want {DELTA_R_Q2} ± {DELTA_R_TOL})",
            q1.map_or("-".into(), |x| format!("{x:.6}")),
            q2.map_or("-".into(), |x| format!("{x:.6}"))
        ),
    )
}

struct SbpCheck {
    compat: f64,
    d_exact: f64,
    min_h: f64,
    e_sum: f64,
}

fn independent_sbp_check(op: &SbpOperator<f64>) -> SbpCheck {
    let n = op.n_p();
    let dim = op.dim();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| barycentric(&op.rule.nodes.point(i))).collect();
    let mut check = SbpCheck {
        compat: 0.0,
        d_exact: 0.0,
        min_h: op.h.min(),
        e_sum: 0.0,
    };
    for i in 0..dim {
        let q = &op.q[i];
        let e = op.e_matrix(i);
        let defect = (q + q.transpose() - &e).amax();
        check.compat = check.compat.max(defect / q.amax());
        check.e_sum = check.e_sum.max(op.e[i].sum().abs());
        for deg in 0..=op.p {
            for alpha in tuples(dim + 1, deg) {
                let f = nalgebra::DVector::from_iterator(n, pts.iter().map(|l| bary_monomial(l, &alpha)));
                let df = &op.d[i] * f;
                for (r, l) in pts.iter().enumerate() {
                    check.d_exact = check.d_exact.max((df[r] - bary_derivative(l, &alpha, i)).abs());
                }
            }
        }
    }
    check
}

fn criterion_sbp(rules: &[(String, QuadratureRule<f64>)]) -> Outcome {
    let mut count = 0;
    let mut bad = Vec::new();
    let (mut compat, mut d_exact, mut e_acc, mut e_sum, mut min_h) = (0f64, 0f64, 0f64, 0f64, f64::INFINITY);
    for (name, rule) in rules {
        let Some(p) = rule.sbp_degree() else { continue };
        let op = match build_sbp(rule, p) {
            Ok(op) => op,
            Err(e) => {
                bad.push(format!("{name}: {e}"));
                continue;
            }
        };
        count += 1;
        let rep = verify_sbp(&op).unwrap();
        let c = independent_sbp_check(&op);
        compat = compat.max(c.compat);
        d_exact = d_exact.max(c.d_exact);
        e_acc = e_acc.max(rep.e_accuracy_defect);
        e_sum = e_sum.max(c.e_sum);
        min_h = min_h.min(c.min_h);
        if !(rep.passed() && c.compat <= COMPAT_RTOL && c.d_exact <= D_EXACT_TOL && c.min_h > 0.0 && c.e_sum <= E_SUM_TOL)
        {
            bad.push(name.clone());
        }
    }
    outcome(
        bad.is_empty() && count > 0,
        format!(
            "{count} operators; Q+Qᵀ−E rel {compat:.2e}, D exactness {d_exact:.2e}, E accuracy {e_acc:.2e}, ΣE {e_sum:.2e}, min H {min_h:.3e}{}",
            if bad.is_empty() { String::new() } else { format!("; failed {}", bad.join(", ")) }
        ),
    )
}

fn jacobian_template(domain: Domain) -> Vec<SymmetryOrbit<f64>> {
    OrbitKind::ALL
        .into_iter()
        .filter(|k| k.valid_for(domain))
        .map(|k| {
            let params = k.param_bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
            SymmetryOrbit::new(k, params, 0.1)
        })
        .collect()
}

fn criterion_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-7;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for domain in [Domain::Triangle, Domain::Tetrahedron] {
        for qv in 1..=JACOBIAN_MAX_QV {
            let spec = SearchSpec::new(domain, qv, jacobian_template(domain), FacetKind::None, None).unwrap();
            let mut points = 0;
            while points < JACOBIAN_POINTS {
                let tau = random_design(&spec, &mut rng);
                let Ok(jac) = jacobian(&tau, &spec) else {
                    skipped += 1;
                    continue;
                };
                let scale = jac.amax().max(1.0);
                for c in 0..tau.len() {
                    let mut tp = tau.clone();
                    let mut tm = tau.clone();
                    tp[c] += h;
                    tm[c] -= h;
                    let (Ok(rp), Ok(rm)) = (residual(&tp, &spec), residual(&tm, &spec)) else {
                        worst = f64::INFINITY;
                        continue;
                    };
                    let fd = (rp - rm) / (2.0 * h);
                    for r in 0..fd.len() {
                        worst = worst.max((fd[r] - jac[(r, c)]).abs() / scale);
                    }
                }
                points += 1;
                checked += 1;
            }
        }
    }
    outcome(
        worst <= JACOBIAN_RTOL,
        format!(
            "{checked} points (tri+tet, q_v 1..={JACOBIAN_MAX_QV}, {skipped} infeasible draws redrawn), worst rel {worst:.2e} (tol {JACOBIAN_RTOL:.0e})"
        ),
    )
}

fn criterion_convergence() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in 1..=3 {
        let op = shipped_operator(Domain::Triangle, FacetKind::Lgl, p).unwrap();
        let mut opts = ConvergenceOptions::new(2, p);
        opts.t_final = CONVERGENCE_T;
        opts.wave.omega = CONVERGENCE_OMEGA;
        let rep = run_convergence(&op, &CONVERGENCE_MESHES, &opts).unwrap();
        let rate = rep.final_rate().unwrap_or(f64::NAN);
        let want = p as f64 + CONVERGENCE_MARGIN;
        ok &= rate >= want;
        let errors: Vec<String> = rep.rows.iter().map(|r| format!("{:.2e}", r.error)).collect();
        parts.push(format!("p={p} errors [{}] rate {rate:.3} (≥ {want})", errors.join(", ")));
    }
    outcome(ok, parts.join("; "))
}

fn timestep_problem(op: &SbpOperator<f64>, sat: SatKind) -> MeshedProblem<f64> {
    MeshedProblem::new(TIMESTEP_MESH, op, Wave::default_for(2), sat).unwrap()
}

/// `|⟨u, Lu⟩_H| / (‖u‖_H ‖Lu‖_H)`.
fn central_energy_rate(problem: &MeshedProblem<f64>, u: &[f64]) -> f64 {
    let h: Vec<f64> = (0..problem.num_elements()).flat_map(|k| problem.norm_diag(k).to_vec()).collect();
    let lu = problem.rhs(u);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&h).map(|((x, y), w)| x * y * w).sum::<f64>();
    dot(u, &lu).abs() / (dot(u, u).sqrt() * dot(&lu, &lu).sqrt())
}

fn criterion_energy(limits: &[(usize, TimestepResult)]) -> Outcome {
    let periods = StabilityOptions::default().periods;
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, res) in limits {
        let op = shipped_operator(Domain::Triangle, FacetKind::Lgl, *p).unwrap();
        let upwind = timestep_problem(&op, SatKind::Upwind);
        let de = stability_energy_change(&upwind, 0.5 * res.dt, periods);
        let central = timestep_problem(&op, SatKind::Central);
        let mut rng = ChaCha8Rng::seed_from_u64(*p as u64);
        let noise: Vec<f64> = (0..central.len()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let rate = central_energy_rate(&central, &central.exact_state(0.0)).max(central_energy_rate(&central, &noise));
        let de_central = stability_energy_change(&central, 0.5 * res.dt, periods);
        ok &= de <= 0.0 && rate <= CENTRAL_RTOL;
        parts.push(format!(
            "p={p}: upwind ΔE {de:.3e} at 0.5·Δt_max, central ⟨u,Lu⟩_H rel {rate:.2e} (tol {CENTRAL_RTOL:.0e}), central RK4 ΔE {de_central:.3e}"
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_timestep(limits: &[(usize, TimestepResult)], q1_dt: f64) -> Outcome {
    let periods = StabilityOptions::default().periods;
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, res) in limits {
        let op = shipped_operator(Domain::Triangle, FacetKind::Lgl, *p).unwrap();
        let problem = timestep_problem(&op, SatKind::Upwind);
        let stable = is_stable(&problem, res.dt, periods);
        let above = !is_stable(&problem, 1.05 * res.dt, periods);
        ok &= stable && above;
        let mut s = format!(
            "p={p} (q_v={}): Δt_max {:.4e} stable={stable} 1.05·Δt unstable={above}",
            op.rule.qv, res.dt
        );
        if *p == 1 {
            let ratio = res.dt / TIMESTEP_REFERENCE;
            let within = (1.0 / TIMESTEP_FACTOR..=TIMESTEP_FACTOR).contains(&ratio);
            ok &= within;
            s.push_str(&format!(", ratio to {TIMESTEP_REFERENCE} = {ratio:.2} (within ×{TIMESTEP_FACTOR}: {within})"));
        }
        parts.push(s);
    }
    parts.push(format!("info: q_v=1 LGL rule gives Δt_max {q1_dt:.4e}"));
    outcome(ok, parts.join("; "))
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_sbpquad"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run sbpquad");
    (out.status.code().unwrap_or(-1), out.stdout)
}

const CLI_SCRIPT: &[&[&str]] = &[
    &["find", "--domain", "tri", "--qv", "3", "--out", "rule.json", "--report", "find.json"],
    &["find", "--domain", "tet", "--qv", "2", "--out", "tet.json", "--report", "find-tet.json"],
    &["verify", "rule.json", "--report", "verify.json"],
    &["sbp", "rule.json", "--out", "op.json", "--report", "sbp.json"],
    &["converge", "--p", "1", "--mesh", "4,6", "--t-final", "0.1", "--report", "converge.json"],
    &["converge", "--operator", "op.json", "--mesh", "4", "--t-final", "0.1", "--sat", "central", "--report", "converge-op.json"],
    &["timestep", "--p", "1", "--mesh", "2", "--report", "timestep.json"],
];

const CLI_FILES: &[&str] = &[
    "rule.json",
    "tet.json",
    "find.json",
    "find-tet.json",
    "verify.json",
    "op.json",
    "sbp.json",
    "converge.json",
    "converge-op.json",
    "timestep.json",
];

fn criterion_determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut problems = Vec::new();
    for cmd in CLI_SCRIPT {
        let a = run_cli(dirs[0].path(), cmd);
        let b = run_cli(dirs[1].path(), cmd);
        if a.0 != 0 {
            problems.push(format!("`{}` exited {}", cmd[0], a.0));
        }
        if a != b {
            problems.push(format!("`{}` output differs", cmd.join(" ")));
        }
    }
    for f in CLI_FILES {
        let a = std::fs::read(dirs[0].path().join(f));
        let b = std::fs::read(dirs[1].path().join(f));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => problems.push(format!("{f} differs")),
            _ => problems.push(format!("{f} missing")),
        }
    }
    let rule_text = std::fs::read_to_string(dirs[0].path().join("rule.json")).unwrap_or_default();
    if read_rule(&rule_text).and_then(|r| write_rule(&r)).ok().as_deref() != Some(rule_text.as_str()) {
        problems.push("rule archive does not round-trip".into());
    }
    let op_text = std::fs::read_to_string(dirs[0].path().join("op.json")).unwrap_or_default();
    if read_operator(&op_text).and_then(|o| write_operator(&o)).ok().as_deref() != Some(op_text.as_str()) {
        problems.push("operator archive does not round-trip".into());
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} commands twice, {} artifacts compared, archives re-serialized{}",
            CLI_SCRIPT.len(),
            CLI_FILES.len(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join(", ")) }
        ),
    )
}

fn report(n: usize, name: &str, start: Instant, o: &Outcome) {
    println!(
        "criterion {n} {name:<22} {} [{:.1}s] {}",
        if o.ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
}

fn step(results: &mut Vec<bool>, n: usize, name: &str, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let o = f();
    report(n, name, start, &o);
    results.push(o.ok);
}

fn main() {
    let t = Instant::now();
    let found = search_all();
    let search_time = t.elapsed();
    let rules = all_rules(&found);

    let mut results = Vec::new();

    step(&mut results, 1, "exactness", || criterion_exactness(&rules));
    let t2 = Instant::now();
    let o = criterion_node_counts(&found);
    println!(
        "criterion 2 {:<22} {} [{:.1}s] {}",
        "node counts",
        if o.ok { "PASS" } else { "FAIL" },
        search_time.as_secs_f64() + t2.elapsed().as_secs_f64(),
        o.detail
    );
    results.push(o.ok);
    step(&mut results, 3, "delta_r", || criterion_delta_r(&found));
    step(&mut results, 4, "sbp identities", || criterion_sbp(&rules));
    step(&mut results, 5, "jacobian", criterion_jacobian);
    step(&mut results, 6, "convergence", criterion_convergence);

    let t_limits = Instant::now();
    let opts = StabilityOptions::default();
    let limits: Vec<(usize, TimestepResult)> = [1, 2]
        .into_iter()
        .map(|p| {
            let op = shipped_operator(Domain::Triangle, FacetKind::Lgl, p).unwrap();
            (p, max_stable_dt(&timestep_problem(&op, SatKind::Upwind), &opts).unwrap())
        })
        .collect();
    let q1_op = build_sbp(&shipped_rule(Domain::Triangle, FacetKind::Lgl, 1).unwrap(), 1).unwrap();
    let q1_dt = max_stable_dt(&timestep_problem(&q1_op, SatKind::Upwind), &opts).map_or(f64::NAN, |r| r.dt);
    println!("timestep searches [{:.1}s]", t_limits.elapsed().as_secs_f64());

    step(&mut results, 7, "energy stability", || criterion_energy(&limits));
    step(&mut results, 8, "timestep certificate", || criterion_timestep(&limits, q1_dt));
    step(&mut results, 9, "determinism", criterion_determinism);

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed [{:.1}s]", results.len(), t.elapsed().as_secs_f64());
    if passed != results.len() {
        std::process::exit(1);
    }
}
