//! `sbpquad`: find and verify symmetric simplex rules, build SBP operators and
//! run the advection studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use simplex_sbp::advection::{
    default_meshes, is_stable, max_stable_dt, run_convergence, ConvergenceOptions, ConvergenceReport, SatKind,
    StabilityOptions, TimestepResult, Wave,
};
use simplex_sbp::archive::{read_operator, write_operator, write_rule, RuleArchive, NODE_MATCH_TOL};
use simplex_sbp::shipped::{file_name, rule_for_operator};
use simplex_sbp::{build_sbp, check_rule, find_rule, verify_sbp, Domain, Error, FacetKind, FindOptions, MeshedProblem, OrbitKind, RuleReport, SbpOperator, SbpReport};

const EXIT_VERIFY: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "sbpquad", version, about = "Symmetric simplex quadrature and diagonal-E SBP operators")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Also write a machine-readable JSON report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for a rule and write its archive.
    Find(FindArgs),
    /// Check a rule archive.
    Verify {
        archive: PathBuf,
    },
    /// Build and verify the SBP operator of a rule archive.
    Sbp {
        archive: PathBuf,
        /// Operator degree; defaults to the largest the rule supports.
        #[arg(long)]
        p: Option<usize>,
        /// Operator archive to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh convergence study for periodic advection.
    Converge(ConvergeArgs),
    /// Largest energy-stable RK4 step.
    Timestep(TimestepArgs),
}

#[derive(Args)]
struct FindArgs {
    #[arg(long, value_parser = parse_domain)]
    domain: Domain,
    #[arg(long)]
    qv: usize,
    /// lgl, lg (triangle), generated (tetrahedron) or none.
    #[arg(long, value_parser = parse_facet)]
    facet: Option<FacetKind>,
    /// Comma-separated orbit kinds to search instead of enumerating.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    signature: Option<Vec<OrbitKind>>,
    /// Wall-clock budget such as 90s, 30m or 2h.
    #[arg(long, value_parser = parse_budget)]
    budget: Option<Duration>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Archive to write; defaults to `<domain>-<facet>-q<qv>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OperatorSource {
    #[arg(long, required_unless_present = "operator")]
    p: Option<usize>,
    #[arg(long, value_parser = parse_facet)]
    facet: Option<FacetKind>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Use this rule archive instead of the bundled rule.
    #[arg(long, conflicts_with = "operator")]
    rule: Option<PathBuf>,
    /// Use this operator archive.
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long, value_parser = parse_sat, default_value = "upwind")]
    sat: SatKind,
    /// Override the solution frequency.
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    src: OperatorSource,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Comma-separated mesh sizes replacing the default sequence.
    #[arg(long, value_delimiter = ',')]
    mesh: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Step size as a multiple of h / max|c|.
    #[arg(long)]
    cfl: Option<f64>,
}

#[derive(Args)]
struct TimestepArgs {
    #[command(flatten)]
    src: OperatorSource,
    #[arg(long, default_value_t = 4)]
    mesh: usize,
    /// Run length in units of 1 / max|c|.
    #[arg(long, default_value_t = 5.0)]
    periods: f64,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    Domain::parse(s).ok_or_else(|| format!("unknown domain {s:?} (interval, tri, tet)"))
}

fn parse_facet(s: &str) -> Result<FacetKind, String> {
    FacetKind::parse(s).ok_or_else(|| format!("unknown facet kind {s:?} (lgl, lg, generated, none)"))
}

fn parse_kind(s: &str) -> Result<OrbitKind, String> {
    OrbitKind::parse(s.trim()).ok_or_else(|| format!("unknown orbit kind {s:?}"))
}

fn parse_sat(s: &str) -> Result<SatKind, String> {
    match s {
        "upwind" => Ok(SatKind::Upwind),
        "central" => Ok(SatKind::Central),
        _ => Err(format!("unknown SAT {s:?} (upwind, central)")),
    }
}

fn parse_budget(s: &str) -> Result<Duration, String> {
    let (num, unit) = s.split_at(s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len()));
    let x: f64 = num.parse().map_err(|_| format!("bad budget {s:?}"))?;
    let secs = match unit {
        "" | "s" => x,
        "m" => 60.0 * x,
        "h" => 3600.0 * x,
        _ => return Err(format!("bad budget unit in {s:?} (s, m, h)")),
    };
    if !(secs > 0.0) {
        return Err(format!("budget must be positive, got {s:?}"));
    }
    Ok(Duration::from_secs_f64(secs))
}

fn default_facet(domain: Domain) -> FacetKind {
    match domain {
        Domain::Triangle => FacetKind::Lgl,
        Domain::Tetrahedron => FacetKind::Generated,
        Domain::Interval => FacetKind::None,
    }
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        let code = match err.downcast_ref::<Error>() {
            Some(Error::SearchFailed { .. }) => EXIT_BUDGET,
            Some(Error::InvalidArgument(_)) => EXIT_USAGE,
            Some(_) => EXIT_VERIFY,
            None => 1,
        };
        Failure { code, err }
    }
}

fn fail(code: u8, msg: String) -> Failure {
    Failure { code, err: anyhow!(msg) }
}

type Outcome = Result<bool, Failure>;

fn write_report<S: Serialize>(path: Option<&Path>, value: &S) -> anyhow::Result<()> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct FindReport {
    archive: String,
    n_p: usize,
    residual: f64,
    candidate: usize,
    restart: usize,
    check: RuleReport,
}

fn cmd_find(a: FindArgs, seed: u64, report: Option<&Path>) -> Outcome {
    if a.qv == 0 {
        return Err(fail(EXIT_USAGE, "degree must be at least 1".into()));
    }
    let facet = a.facet.unwrap_or_else(|| default_facet(a.domain));
    let mut opts = FindOptions {
        seed,
        restarts: a.restarts,
        signature: a.signature,
        ..FindOptions::default()
    };
    if let Some(b) = a.budget {
        opts.deadline = Some(Instant::now() + b);
        opts.coupled.time_limit = Some(b);
    }
    let found = find_rule::<f64>(a.domain, a.qv, facet, &opts)?;
    let out = a
        .out
        .unwrap_or_else(|| PathBuf::from(file_name(a.domain, facet, a.qv)));
    std::fs::write(&out, write_rule(&found.rule)?).with_context(|| format!("writing {}", out.display()))?;
    let check = check_rule(&found.rule)?;
    println!("wrote {}", out.display());
    println!(
        "{} q_v={} facet={}: n_p={} residual={:.3e} delta_r={}",
        a.domain,
        a.qv,
        facet,
        found.rule.n_p(),
        found.rule.provenance.residual,
        check.delta_r.map_or("-".into(), |x| format!("{x:.4}"))
    );
    let passed = check.passed();
    write_report(
        report,
        &FindReport {
            archive: out.display().to_string(),
            n_p: found.rule.n_p(),
            residual: found.rule.provenance.residual,
            candidate: found.candidate,
            restart: found.restart,
            check,
        },
    )?;
    Ok(passed)
}

#[derive(Serialize)]
struct VerifyReport {
    archive: String,
    /// Largest gap between stored arrays and re-expanded orbits.
    expansion_defect: f64,
    consistent: bool,
    check: RuleReport,
    passed: bool,
}

fn cmd_verify(path: &Path, report: Option<&Path>) -> Outcome {
    let archive: RuleArchive = serde_json::from_str(&read_text(path)?).map_err(|e| Error::Archive(e.to_string()))?;
    let (rule, defect) = archive.expand()?;
    let check = check_rule(&rule)?;
    let consistent = defect <= NODE_MATCH_TOL;
    let passed = consistent && check.passed();
    println!("{} q_v={} facet={} n_p={}", rule.domain, rule.qv, rule.facet_kind, check.n_p);
    println!("  exactness   {}  residual {:.3e}, monomials {:.3e}", mark(check.exact), check.moment_residual, check.monomial_defect);
    println!("  positivity  {}  min weight {:.6e}", mark(check.positive), check.min_weight);
    println!("  symmetry    {}", mark(check.symmetric));
    println!("  closure     {}  min barycentric {:.3e}", mark(check.in_closure), check.min_barycentric);
    println!(
        "  facet rule  {}  degree {} (need {})",
        mark(check.facet_ok),
        check.facet_degree.map_or("-".into(), |g| g.to_string()),
        check.facet_degree_required.map_or("-".into(), |g| g.to_string())
    );
    println!("  arrays      {}  max deviation {:.3e}", mark(consistent), defect);
    println!("  delta_r     {}", check.delta_r.map_or("-".into(), |x| format!("{x:.4}")));
    write_report(
        report,
        &VerifyReport {
            archive: path.display().to_string(),
            expansion_defect: if defect.is_finite() { defect } else { f64::MAX },
            consistent,
            check,
            passed,
        },
    )?;
    Ok(passed)
}

fn print_sbp(rep: &SbpReport) {
    let compat_ok = rep.compatibility_ok();
    println!("degree p={} n_p={}", rep.p, rep.n_p);
    println!("  accuracy       {}  {:.3e}", mark(rep.accuracy_ok()), rep.accuracy_defect);
    println!("  Q + Q^T - E    {}  {:.3e} (|Q| {:.3e})", mark(compat_ok), rep.compatibility_defect, rep.q_max);
    println!("  min H          {}  {:.6e}", mark(rep.min_h > 0.0), rep.min_h);
    println!("  E accuracy     {}  {:.3e}", mark(rep.e_accuracy_defect <= simplex_sbp::sbp::E_ACCURACY_TOL), rep.e_accuracy_defect);
    println!("  sum E          {}  {:.3e}", mark(rep.e_sum <= simplex_sbp::sbp::E_SUM_TOL), rep.e_sum);
    println!(
        "  facet degree   {}  {} (need {})",
        mark(rep.facet_ok()),
        rep.facet_degree.map_or("-".into(), |g| g.to_string()),
        rep.facet_degree_required
    );
    println!("  delta_r        {}", rep.delta_r.map_or("-".into(), |x| format!("{x:.4}")));
}

fn cmd_sbp(path: &Path, p: Option<usize>, out: Option<&Path>, report: Option<&Path>) -> Outcome {
    let archive: RuleArchive = serde_json::from_str(&read_text(path)?).map_err(|e| Error::Archive(e.to_string()))?;
    let rule = archive.to_rule()?;
    let p = match p.or_else(|| rule.sbp_degree()) {
        Some(p) => p,
        None => return Err(fail(EXIT_USAGE, "rule has no facet layout; pass --p".into())),
    };
    let op = build_sbp(&rule, p)?;
    let rep = verify_sbp(&op)?;
    if let Some(out) = out {
        std::fs::write(out, write_operator(&op)?).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    print_sbp(&rep);
    write_report(report, &rep)?;
    Ok(rep.passed())
}

fn load_operator(src: &OperatorSource) -> Result<SbpOperator<f64>, Failure> {
    if let Some(path) = &src.operator {
        return Ok(read_operator(&read_text(path)?)?);
    }
    let p = src.p.unwrap_or_default();
    let domain = match src.d {
        2 => Domain::Triangle,
        3 => Domain::Tetrahedron,
        d => return Err(fail(EXIT_USAGE, format!("--d must be 2 or 3, got {d}"))),
    };
    let rule = match &src.rule {
        Some(path) => simplex_sbp::archive::read_rule(&read_text(path)?)?,
        None => rule_for_operator(domain, src.facet.unwrap_or_else(|| default_facet(domain)), p)?,
    };
    Ok(build_sbp(&rule, p)?)
}

fn wave_for(src: &OperatorSource, d: usize) -> Wave {
    let mut wave = Wave::default_for(d);
    if let Some(w) = src.omega {
        wave.omega = w;
    }
    wave
}

fn cmd_converge(a: ConvergeArgs, seed: u64, report: Option<&Path>) -> Outcome {
    let op = load_operator(&a.src)?;
    let d = op.dim();
    let meshes = a.mesh.clone().unwrap_or_else(|| default_meshes(d, op.p, a.levels));
    if meshes.iter().any(|&m| m < 2) {
        return Err(fail(EXIT_USAGE, "mesh sizes must be at least 2".into()));
    }
    let mut opts = ConvergenceOptions::new(d, op.p);
    opts.t_final = a.t_final;
    opts.wave = wave_for(&a.src, d);
    opts.sat = a.src.sat;
    if let Some(c) = a.cfl {
        opts.cfl = c;
    }
    let rep = run_convergence(&op, &meshes, &opts)?;
    println!("p={} d={} n_p={} t={} omega={}", op.p, d, op.n_p(), opts.t_final, opts.wave.omega);
    println!("{:>6} {:>8} {:>14} {:>7}", "m", "steps", "L2 error", "rate");
    for r in &rep.rows {
        println!(
            "{:>6} {:>8} {:>14.6e} {:>7}",
            r.m,
            r.steps,
            r.error,
            r.rate.map_or("-".into(), |x| format!("{x:.3}"))
        );
    }
    #[derive(Serialize)]
    struct Out<'a> {
        seed: u64,
        options: &'a ConvergenceOptions,
        report: &'a ConvergenceReport,
    }
    write_report(report, &Out { seed, options: &opts, report: &rep })?;
    Ok(rep.rows.iter().all(|r| r.error.is_finite()))
}

fn cmd_timestep(a: TimestepArgs, seed: u64, report: Option<&Path>) -> Outcome {
    let op = load_operator(&a.src)?;
    let d = op.dim();
    let problem = MeshedProblem::new(a.mesh, &op, wave_for(&a.src, d), a.src.sat)?;
    let opts = StabilityOptions {
        periods: a.periods,
        ..StabilityOptions::default()
    };
    let res = max_stable_dt(&problem, &opts)?;
    let stable = is_stable(&problem, res.dt, opts.periods);
    let above = !is_stable(&problem, 1.05 * res.dt, opts.periods);
    println!("p={} d={} n_p={} m={}: dt_max = {:.6e}", op.p, d, op.n_p(), a.mesh, res.dt);
    println!("  dt_max stable        {}", mark(stable));
    println!("  1.05 dt_max unstable {}", mark(above));
    #[derive(Serialize)]
    struct Out<'a> {
        seed: u64,
        p: usize,
        d: usize,
        m: usize,
        result: &'a TimestepResult,
        stable: bool,
        unstable_above: bool,
    }
    write_report(
        report,
        &Out {
            seed,
            p: op.p,
            d,
            m: a.mesh,
            result: &res,
            stable,
            unstable_above: above,
        },
    )?;
    Ok(stable && above)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let report = cli.report.as_deref();
    let outcome = match cli.cmd {
        Cmd::Find(a) => cmd_find(a, cli.seed, report),
        Cmd::Verify { archive } => cmd_verify(&archive, report),
        Cmd::Sbp { archive, p, out } => cmd_sbp(&archive, p, out.as_deref(), report),
        Cmd::Converge(a) => cmd_converge(a, cli.seed, report),
        Cmd::Timestep(a) => cmd_timestep(a, cli.seed, report),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
