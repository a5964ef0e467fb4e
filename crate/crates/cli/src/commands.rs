use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use nlvc::field::{Field, Rank};
use nlvc::helmholtz::{decompose2d, decompose3d};
use nlvc::io::{self, FieldSource, Manifest, RunConfig};
use nlvc::lattice::DomainMask;
use nlvc::operators::{NonlocalOps, Sign};
use nlvc::poincare::{estimate_poincare, refinement_study, spot_check};
use nlvc::solvers::{solve_cd, solve_elasticity, CdProblem, ElasticityProblem};
use nlvc::symbol::{comparison_constant, symbol_bound, SymbolEvaluator, XiGrid};
use nlvc::verify::{self, CheckResult};
use nlvc::{NlvcError, Result};

use crate::{Cli, Command};

/// Runs one command; `Ok(false)` means a verification failure.
pub fn run(cli: &Cli) -> Result<bool> {
    let mut cfg = io::load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(NlvcError::Config("thread count must be positive".into()));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    let (passed, outputs) = match cli.command {
        Command::Symbol => symbol(&cfg, out)?,
        Command::Verify => verify_cmd(&cfg, out)?,
        Command::Poincare => poincare(&cfg, out)?,
        Command::SolveCd => solve_cd_cmd(&cfg, out)?,
        Command::SolveElasticity => solve_elasticity_cmd(&cfg, out)?,
        Command::Helmholtz => helmholtz(&cfg, out)?,
        Command::Localize => localize(&cfg, out)?,
    };
    let manifest = Manifest {
        command: cli.command.name().into(),
        version: io::VERSION.into(),
        seed: cfg.seed,
        config: cfg,
        outputs,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(passed)
}

type Outcome = (bool, Vec<String>);

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> NlvcError {
    NlvcError::Io(std::io::Error::other(e))
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn operators(cfg: &RunConfig) -> Result<(NonlocalOps, DomainMask)> {
    let ops = NonlocalOps::new(&cfg.kernel, cfg.torus(), &cfg.nu()?, cfg.stencil)?.with_backend(cfg.backend);
    let mask = cfg.mask(ops.stencil(Sign::Plus).radius_cells())?;
    Ok((ops, mask))
}

/// Builds a field from its source; `mask` restricts it to the interior.
fn source_field(src: &FieldSource, cfg: &RunConfig, mask: Option<&DomainMask>, rank: Rank, what: &str) -> Result<Field> {
    let torus = cfg.torus();
    let mut f = match src {
        FieldSource::Random => Field::random(torus, rank, &mut rng(cfg.seed)),
        FieldSource::Constant { value } => {
            if value.len() != rank.components() {
                return Err(NlvcError::Config(format!("{what}: constant needs {} components, got {}", rank.components(), value.len())));
            }
            Field::from_fn(torus, rank, |_, c| value[c])
        }
        FieldSource::Oscillating { amplitude, frequency } => {
            let d = torus.dim();
            let k = 2.0 * std::f64::consts::PI * frequency;
            Field::from_fn(torus, rank, |x, c| amplitude * (k * x[(c + 1) % d] + c as f64 * std::f64::consts::FRAC_PI_2).sin())
        }
        FieldSource::File { path } => {
            let f = io::read_field(path)?;
            if &f.torus != torus {
                return Err(NlvcError::Config(format!("{what}: file lives on a different torus")));
            }
            f.expect_rank(rank)?;
            if let Some(m) = mask {
                if !f.is_constrained(m) {
                    return Err(NlvcError::Config(format!("{what}: file must vanish outside the domain")));
                }
            }
            f
        }
    };
    if let (Some(m), FieldSource::Random) = (mask, src) {
        f = Field::random_constrained(m, rank, &mut rng(cfg.seed));
    } else if let Some(m) = mask {
        f.constrain(m);
    }
    Ok(f)
}

fn symbol(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let section = cfg.symbol.clone().unwrap_or_default();
    let d = cfg.kernel.d;
    let nu = cfg.nu()?;
    let grid = XiGrid::log_polar(d, section.rmin, section.rmax, section.n_radii, section.n_dirs)?;
    let ev = SymbolEvaluator::new(&cfg.kernel)?;
    let moments = cfg.kernel.moments()?;
    let points = grid.points();
    let samples: Vec<_> = points.par_iter().map(|xi| ev.sample(&nu, xi)).collect::<Result<_>>()?;
    let path = out.join("symbol.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    let mut header: Vec<String> = Vec::new();
    for prefix in ["xi", "re", "im"] {
        header.extend((0..d).map(|a| format!("{prefix}_{a}")));
    }
    header.extend(["abs", "bound", "lambda_w"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for s in &samples {
        let mut row: Vec<String> = s.xi.iter().chain(&s.re).chain(&s.im).map(|x| format!("{x:e}")).collect();
        row.push(format!("{:e}", s.abs()));
        row.push(format!("{:e}", symbol_bound(&moments, s.xi_norm())));
        row.push(format!("{:e}", s.lambda_w));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    let mut outputs = vec!["symbol.csv".to_string()];
    if section.comparison {
        let est = comparison_constant(&cfg.kernel, &nu, &grid)?;
        println!("comparison constant {:.6e} at xi = {:?}", est.c_est, est.argmin);
        write_json(&out.join("comparison.json"), &est)?;
        outputs.push("comparison.json".into());
    }
    println!("{} symbol samples written to {}", samples.len(), path.display());
    Ok((true, outputs))
}

fn print_checks(checks: &[CheckResult]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    failed == 0
}

fn verify_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let suite = cfg.suite()?;
    let mut checks = verify::run_identity_suite(&suite)?;
    if let Some(l) = &cfg.localize {
        let study = verify::localization_study(&cfg.kernel, &cfg.nu()?, &l.deltas, l.n, cfg.stencil)?;
        checks.extend(verify::localization_checks(&study, &suite.fingerprint()));
    }
    let passed = print_checks(&checks);
    write_json(&out.join("report.json"), &json!({ "passed": passed, "checks": checks }))?;
    Ok((passed, vec!["report.json".into()]))
}

fn poincare(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (ops, mask) = operators(cfg)?;
    let est = estimate_poincare(&mask, &ops, cfg.tol)?;
    let worst = spot_check(&mask, &ops, est.pi_h, cfg.samples, cfg.seed)?;
    let passed = worst <= 1.0 + 1e-8;
    println!("Pi_h = {:.10} ({} interior points, {} iterations)", est.pi_h, mask.interior_count(), est.iterations);
    println!("largest ‖u‖/(Pi_h ‖Gu‖) over {} random fields: {worst:.6}", cfg.samples);
    let mut report = json!({ "estimate": est, "interior_count": mask.interior_count(), "spot_check": worst, "passed": passed });
    if let Some(section) = cfg.poincare.as_ref().filter(|p| !p.refine.is_empty()) {
        let b = cfg.domain.bounds.as_ref().ok_or_else(|| NlvcError::Config("a refinement study needs a domain box".into()))?;
        let study = refinement_study(&cfg.kernel, &cfg.nu()?, &b.lo, &b.hi, &section.refine, cfg.stencil, cfg.backend, cfg.tol)?;
        for (h, p) in &study.history {
            println!("h = {h:.6}  Pi_h = {p:.10}");
        }
        println!("largest relative change {:.4}", study.max_relative_change);
        report["refinement"] = serde_json::to_value(&study)?;
    }
    write_json(&out.join("poincare.json"), &report)?;
    Ok((passed, vec!["poincare.json".into()]))
}

fn write_fields(out: &Path, fields: &[(&str, &Field)]) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (name, f) in fields {
        io::write_field(&out.join(name), f)?;
        names.push(format!("{name}.f64"));
        names.push(format!("{name}.json"));
    }
    Ok(names)
}

fn solve_cd_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let section = cfg.cd.as_ref().ok_or_else(|| NlvcError::Config("solve-cd needs a \"cd\" section".into()))?;
    let (ops, mask) = operators(cfg)?;
    let d = cfg.kernel.d;
    let phi = Arc::new(verify::convection_kernel(&cfg.kernel, &ops)?);
    let eps = Field::from_fn(cfg.torus(), Rank::Scalar, |_, _| section.epsilon);
    let b = source_field(&section.velocity, cfg, None, Rank::Vector(d), "velocity")?;
    let problem = CdProblem::new(mask.clone(), ops, phi, eps, b)?;
    let given = source_field(&section.load, cfg, Some(&mask), Rank::Scalar, "load")?;
    let (f, exact) = if section.manufactured { (problem.apply(&given)?, Some(given)) } else { (given, None) };
    let (u, rep) = solve_cd(&problem, &f, cfg.tol, None)?;
    let recovery = exact.as_ref().map(|e| u.sub(e).norm() / e.norm());
    let passed = rep.apriori_holds && recovery.is_none_or(|r| r <= 10.0 * cfg.tol);
    println!("{} iterations, residual {:.3e}, ‖Gu‖ = {:.6e}, bound holds: {}", rep.iterations, rep.residual, rep.solution_norm, rep.apriori_holds);
    if let Some(v) = &rep.velocity {
        println!("velocity clause {:?}: eta = {:.3e}, threshold = {:.3e}", v.clause, v.eta, v.threshold);
    }
    if let Some(r) = recovery {
        println!("manufactured recovery error {r:.3e}");
    }
    let mut outputs = write_fields(out, &[("u", &u), ("f", &f)])?;
    write_json(&out.join("report.json"), &json!({ "solve": rep, "recovery_error": recovery, "passed": passed }))?;
    outputs.push("report.json".into());
    Ok((passed, outputs))
}

fn solve_elasticity_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let section = cfg.elasticity.as_ref().ok_or_else(|| NlvcError::Config("solve-elasticity needs an \"elasticity\" section".into()))?;
    let (ops, mask) = operators(cfg)?;
    let d = cfg.kernel.d;
    let problem = ElasticityProblem::new(mask.clone(), ops, section.lambda, section.mu)?;
    let given = source_field(&section.load, cfg, Some(&mask), Rank::Vector(d), "load")?;
    let (f, exact) = if section.manufactured {
        let mut f = problem.navier(&given)?;
        f.constrain(&mask);
        (f, Some(given))
    } else {
        (given, None)
    };
    let (u, rep) = solve_elasticity(&problem, &f, cfg.tol)?;
    let recovery = exact.as_ref().map(|e| u.sub(e).norm() / e.norm());
    let passed = rep.apriori_holds && recovery.is_none_or(|r| r <= 10.0 * cfg.tol);
    println!(
        "{} iterations, residual {:.3e}, E(u) = {:.6e}, B(u,u) = {:.6e}, bound holds: {}",
        rep.iterations,
        rep.residual,
        rep.energy.unwrap_or(f64::NAN),
        rep.bilinear.unwrap_or(f64::NAN),
        rep.apriori_holds
    );
    if let Some(r) = recovery {
        println!("manufactured recovery error {r:.3e}");
    }
    let mut outputs = write_fields(out, &[("u", &u), ("f", &f)])?;
    write_json(&out.join("report.json"), &json!({ "solve": rep, "recovery_error": recovery, "passed": passed }))?;
    outputs.push("report.json".into());
    Ok((passed, outputs))
}

fn helmholtz(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let section = cfg.helmholtz.clone().unwrap_or(io::HelmholtzSection { input: FieldSource::Random });
    let (ops, mask) = operators(cfg)?;
    let d = cfg.kernel.d;
    let u = source_field(&section.input, cfg, Some(&mask), Rank::Vector(d), "input")?;
    let (report, mut outputs) = match d {
        2 => {
            let r = decompose2d(&mask, &ops, &u, cfg.tol)?;
            (r.report.clone(), write_fields(out, &[("p", &r.p), ("q", &r.q), ("f", &r.f)])?)
        }
        3 => {
            let r = decompose3d(&mask, &ops, &u, cfg.tol)?;
            (r.report.clone(), write_fields(out, &[("p", &r.p), ("v", &r.v), ("f", &r.f)])?)
        }
        _ => return Err(NlvcError::Config("helmholtz needs d = 2 or 3".into())),
    };
    let un = report.u_norm;
    let mut checks = vec![CheckResult::at_most("helmholtz-reconstruction", report.residual / un, 10.0 * cfg.tol, "")];
    let orth = report.orthogonality.abs() / (un * un);
    checks.push(if cfg.kernel.is_integrable() {
        CheckResult::at_most("helmholtz-orthogonality", orth, 1e-10, "")
    } else {
        CheckResult::report("helmholtz-orthogonality", orth, "")
    });
    if let (Some(n), Some(s)) = (report.divfree_norm, report.divfree_scale) {
        checks.push(CheckResult::at_most("helmholtz-divergence-free", n / s, 1e-12, ""));
    }
    let fp = verify::fingerprint(&cfg.kernel, cfg.torus(), cfg.seed);
    checks.iter_mut().for_each(|c| c.fingerprint = fp.clone());
    let passed = print_checks(&checks);
    write_json(&out.join("report.json"), &json!({ "decomposition": report, "checks": checks, "passed": passed }))?;
    outputs.push("report.json".into());
    Ok((passed, outputs))
}

fn localize(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let section = cfg.localize.as_ref().ok_or_else(|| NlvcError::Config("localize needs a \"localize\" section".into()))?;
    let study = verify::localization_study(&cfg.kernel, &cfg.nu()?, &section.deltas, section.n, cfg.stencil)?;
    let path = out.join("localization.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["delta", "grad_error", "div_error", "curl_error", "affine_error"]).map_err(csv_err)?;
    for r in &study.rows {
        let curl = r.curl_error.map(|x| format!("{x:e}")).unwrap_or_default();
        w.write_record([format!("{:e}", r.delta), format!("{:e}", r.grad_error), format!("{:e}", r.div_error), curl, format!("{:e}", r.affine_error)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    let checks = verify::localization_checks(&study, &verify::fingerprint(&cfg.kernel, cfg.torus(), cfg.seed));
    let passed = print_checks(&checks);
    write_json(&out.join("report.json"), &json!({ "study": study, "checks": checks, "passed": passed }))?;
    Ok((passed, vec!["localization.csv".into(), "report.json".into()]))
}
