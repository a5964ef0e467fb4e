//! Acceptance criteria, one line each. Tolerances are pinned; a criterion
//! passes only when every one of its sub-checks passes, and the line shows
//! the sub-check closest to (or furthest past) its tolerance.
//!
//! Criteria listed in `KNOWN_FAILURES` still print FAIL; the target exits
//! nonzero if any other criterion fails or if a known failure starts passing.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use nlvc::helmholtz::decompose2d;
use nlvc::lattice::fit_box_torus;
use nlvc::operators::{StencilOptions, StencilWeights};
use nlvc::poincare::{estimate_poincare, refinement_study, stencil_radius_cells};
use nlvc::solvers::{check_velocity_assumption, solve_cd, solve_elasticity, CdProblem, ElasticityProblem, VelocityClause};
use nlvc::symbol::{check_equivariance, symbol_bound, comparison_constant, SymbolEvaluator, XiGrid};
use nlvc::verify::{
    centred_domain, convection_kernel, localization_checks, localization_study, quarter_turns, run_identity_suite, sample_frequencies,
    CheckResult, Relation, SuiteConfig, SEED,
};
use nlvc::{Backend, Direction, DomainMask, Field, KernelSpec, NonlocalOps, Rank, Result, Sign, Torus};

/// Pure-gradient input leaves a rotational part supported by the collar
/// residual of the constrained potential; see the project notes.
const KNOWN_FAILURES: &[usize] = &[13];

const TOL: f64 = 1e-10;

struct Criterion {
    number: usize,
    title: &'static str,
    checks: Vec<CheckResult>,
}

impl Criterion {
    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// The failing sub-check, else the one with the least headroom.
    fn decisive(&self) -> Option<&CheckResult> {
        if let Some(c) = self.checks.iter().find(|c| !c.passed) {
            return Some(c);
        }
        let headroom = |c: &CheckResult| match c.relation {
            Relation::AtMost if c.tolerance > 0.0 => c.measured / c.tolerance,
            Relation::AtMost => c.measured,
            Relation::Above if c.measured.is_finite() && c.tolerance.abs() > 0.0 => c.tolerance / c.measured,
            _ => f64::NEG_INFINITY,
        };
        self.checks.iter().max_by(|a, b| headroom(a).total_cmp(&headroom(b)))
    }

    fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let body = match self.decisive() {
            Some(c) => {
                let rel = match c.relation {
                    Relation::AtMost => "<=",
                    Relation::Above => "> ",
                    Relation::Report => "  ",
                };
                let mut s = format!("{} = {:.3e} {} {:.3e}", c.id, c.measured, rel, c.tolerance);
                if let Some(d) = &c.detail {
                    s.push_str(&format!(" ({d})"));
                }
                s
            }
            None => "no checks ran".into(),
        };
        format!("{status} C{:02} {:<34} [{} checks] {body}", self.number, self.title, self.checks.len())
    }
}

fn check(id: &str, r: Result<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| CheckResult::errored(id, &e, ""))
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Suite runs keyed by a short label, each with 100 random samples.
fn suites() -> BTreeMap<&'static str, Vec<CheckResult>> {
    let truncated = StencilOptions { rule: None, trunc_radius: Some(0.25) };
    let configs = [
        ("2d-indicator", KernelSpec::indicator(2, 0.25), Torus::cube(2, 32, 1.0 / 32.0).unwrap(), vec![1.0, 0.0], StencilOptions::default()),
        ("2d-fractional", KernelSpec::fractional_tail(2, 0.5, 0.5, 0.1), Torus::cube(2, 32, 1.0 / 32.0).unwrap(), vec![1.0, 1.0], truncated),
        ("3d-indicator", KernelSpec::indicator(3, 0.25), Torus::cube(3, 16, 1.0 / 16.0).unwrap(), vec![0.0, 0.0, 1.0], StencilOptions::default()),
        ("3d-fractional", KernelSpec::fractional_tail(3, 0.5, 0.5, 0.1), Torus::cube(3, 16, 1.0 / 16.0).unwrap(), vec![1.0, 0.0, 0.0], truncated),
    ];
    let mut out = BTreeMap::new();
    for (label, kernel, torus, nu, stencil) in configs {
        let mut cfg = SuiteConfig::new(kernel, torus, &nu);
        cfg.stencil = stencil;
        cfg.samples = 100;
        cfg.tol = TOL;
        let t0 = Instant::now();
        let checks = run_identity_suite(&cfg).unwrap_or_else(|e| panic!("suite {label} failed to start: {e}"));
        eprintln!("suite {label}: {} checks in {:.1?}", checks.len(), t0.elapsed());
        out.insert(label, checks);
    }
    out
}

/// Sub-checks with the given ids from every suite, labelled by suite.
fn pick(suites: &BTreeMap<&str, Vec<CheckResult>>, ids: &[&str], only: Option<&[&str]>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (label, checks) in suites {
        if only.is_some_and(|o| !o.contains(label)) {
            continue;
        }
        for c in checks.iter().filter(|c| ids.contains(&c.id.as_str())) {
            let mut c = c.clone();
            c.id = format!("{label}/{}", c.id);
            out.push(c);
        }
    }
    out
}

fn symbol_structure() -> Vec<CheckResult> {
    let kernels = [
        ("indicator-1d", KernelSpec::indicator(1, 1.0)),
        ("indicator-2d", KernelSpec::indicator(2, 0.5)),
        ("singular-2d", KernelSpec::compact_singular(2, 0.5, 1.0)),
        ("fractional-2d", KernelSpec::fractional(2, 0.5)),
        ("tempered-2d", KernelSpec::tempered(2, 0.5, 1.0)),
        ("indicator-3d", KernelSpec::indicator(3, 0.5)),
    ];
    let mut out = Vec::new();
    for (label, spec) in kernels {
        let d = spec.d;
        let res = (|| -> Result<Vec<CheckResult>> {
            let ev = SymbolEvaluator::new(&spec)?;
            let m = spec.moments()?;
            let nu = Direction::axis(d, d - 1, 1.0);
            let xis = sample_frequencies(d, 200, SEED);
            let (mut bound, mut align, mut least) = (f64::NEG_INFINITY, 0.0f64, f64::INFINITY);
            for xi in &xis {
                let s = ev.sample(&nu, xi)?;
                bound = bound.max(s.abs() / symbol_bound(&m, s.xi_norm()) - 1.0);
                align = align.max(s.im_misalignment());
                least = least.min(s.abs());
            }
            let mut equiv = 0.0f64;
            for r in quarter_turns(d) {
                equiv = equiv.max(check_equivariance(&ev, &nu, &r, &xis)?.max_residual);
            }
            Ok(vec![
                CheckResult::at_most(&format!("{label}/bound"), bound, 1e-6, ""),
                CheckResult::at_most(&format!("{label}/im-alignment"), align, 1e-9, ""),
                CheckResult::above(&format!("{label}/positivity"), least, 0.0, ""),
                CheckResult::at_most(&format!("{label}/equivariance"), equiv, 1e-7, ""),
            ])
        })();
        match res {
            Ok(v) => out.extend(v),
            Err(e) => out.push(CheckResult::errored(label, &e, "")),
        }
    }
    out
}

fn closed_form() -> Vec<CheckResult> {
    vec![check("indicator-1d/lambda-at-half", (|| {
        let ev = SymbolEvaluator::new(&KernelSpec::indicator(1, 1.0))?;
        Ok(CheckResult::at_most("indicator-1d/lambda-at-half", (ev.big_lambda(0.5)? - 2.0 / PI).abs(), 1e-8, ""))
    })())]
}

fn localization(suites: &BTreeMap<&str, Vec<CheckResult>>) -> Vec<CheckResult> {
    let mut out = pick(suites, &["localization-affine"], Some(&["2d-indicator", "3d-indicator"]));
    match localization_study(&KernelSpec::indicator(2, 1.0), &Direction::axis(2, 0, 1.0), &[0.2, 0.1, 0.05], 256, StencilOptions::default()) {
        Ok(study) => out.extend(localization_checks(&study, "")),
        Err(e) => out.push(CheckResult::errored("localization-study", &e, "")),
    }
    out
}

fn comparison() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for d in [1usize, 2] {
        for alpha in [0.25, 0.5, 0.75, 1.0] {
            // α = 1 has an infinite first moment without a softened core
            let spec = if alpha < 1.0 { KernelSpec::fractional(d, alpha) } else { KernelSpec::fractional_tail(d, alpha, 0.5, 1.0) };
            let id = format!("d{d}-alpha{alpha}");
            out.push(check(&id, (|| {
                let grid = XiGrid::log_polar(d, 1e-2, 1e2, 17, 16)?;
                let est = comparison_constant(&spec, &Direction::axis(d, 0, 1.0), &grid)?;
                Ok(CheckResult::above(&id, est.c_est, 1e-6, "").with_detail(format!("{} frequencies", est.samples)))
            })()));
        }
    }
    out
}

/// Box operators and mask for the unit square.
fn unit_box(spec: &KernelSpec, h: f64, nu: &Direction, opts: StencilOptions) -> Result<(NonlocalOps, DomainMask)> {
    let d = spec.d;
    let (lo, hi) = (vec![0.0; d], vec![1.0; d]);
    let radius = stencil_radius_cells(spec, h, opts)?;
    let torus = fit_box_torus(&lo, &hi, h, radius)?;
    let ops = NonlocalOps::new(spec, &torus, nu, opts)?;
    let mask = DomainMask::build_box(&torus, &lo, &hi, ops.stencil(Sign::Plus).radius_cells())?;
    Ok((ops, mask))
}

/// `1 / σ_min` of the dense constrained gradient, one column per interior point.
fn dense_poincare(mask: &DomainMask, ops: &NonlocalOps) -> Result<f64> {
    let d = mask.torus.dim();
    let idx = mask.interior_indices();
    let rows = d * mask.torus.len();
    let mut g = DMatrix::<f64>::zeros(rows, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        let mut e = Field::zeros(&mask.torus, Rank::Scalar);
        e.data[i] = 1.0;
        let col = ops.grad(&e, Sign::Plus)?;
        g.column_mut(j).copy_from_slice(&col.data);
    }
    let sv = g.singular_values();
    Ok(1.0 / sv.min())
}

fn poincare() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let cases = [
        ("indicator", KernelSpec::indicator(2, 0.25), Direction::axis(2, 0, 1.0), StencilOptions::default()),
        ("fractional", KernelSpec::fractional_tail(2, 0.5, 0.5, 0.1), Direction::new(&[1.0, 1.0]).unwrap(), StencilOptions { rule: None, trunc_radius: Some(0.25) }),
    ];
    for (label, spec, nu, opts) in cases {
        let id = format!("{label}/dense-oracle");
        out.push(check(&id, (|| {
            let (ops, mask) = unit_box(&spec, 1.0 / 16.0, &nu, opts)?;
            assert!(mask.interior_count() <= 400, "oracle size {}", mask.interior_count());
            let est = estimate_poincare(&mask, &ops, 1e-12)?;
            let dense = dense_poincare(&mask, &ops)?;
            let c = CheckResult::at_most(&id, (est.pi_h - dense).abs() / dense, 1e-8, "");
            Ok(c.with_detail(format!("Pi_h = {:.10}, {} DOFs", est.pi_h, mask.interior_count())))
        })()));
    }
    let spec = KernelSpec::indicator(2, 0.25);
    let study = refinement_study(
        &spec,
        &Direction::axis(2, 0, 1.0),
        &[0.0, 0.0],
        &[1.0, 1.0],
        &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        StencilOptions::default(),
        Backend::Fft,
        1e-10,
    );
    match study {
        Ok(s) => {
            let least = s.history.iter().map(|&(_, p)| if p.is_finite() { p } else { -1.0 }).fold(f64::INFINITY, f64::min);
            out.push(CheckResult::above("indicator/finite-positive", least, 0.0, ""));
            let hist: Vec<String> = s.history.iter().map(|(h, p)| format!("h={h}: {p:.6}")).collect();
            out.push(CheckResult::at_most("indicator/refinement-change", s.max_relative_change, 0.1, "").with_detail(hist.join(", ")));
        }
        Err(e) => out.push(CheckResult::errored("indicator/refinement", &e, "")),
    }
    out
}

fn cd_problem(ops: &NonlocalOps, mask: &DomainMask, b: Field) -> Result<CdProblem> {
    let phi = Arc::new(convection_kernel(&KernelSpec::indicator(2, 0.25), ops)?);
    let eps = Field::from_fn(&mask.torus, Rank::Scalar, |x, _| 1.0 + 0.25 * (2.0 * PI * x[1]).cos());
    CdProblem::new(mask.clone(), ops.clone(), phi, eps, b)
}

fn oscillating(t: &Torus, amplitude: f64) -> Field {
    Field::from_fn(t, Rank::Vector(2), |x, c| amplitude * (2.0 * PI * x[(c + 1) % 2] + c as f64 * PI / 2.0).sin())
}

fn convection_diffusion(suites: &BTreeMap<&str, Vec<CheckResult>>) -> Vec<CheckResult> {
    let mut out = pick(suites, &["convection-inequality"], None);
    let setup = unit_box(&KernelSpec::indicator(2, 0.25), 1.0 / 16.0, &Direction::axis(2, 0, 1.0), StencilOptions::default());
    let (ops, mask) = match setup {
        Ok(s) => s,
        Err(e) => return vec![CheckResult::errored("cd-setup", &e, "")],
    };
    let t = mask.torus.clone();
    let pi_h = match estimate_poincare(&mask, &ops, 1e-10) {
        Ok(e) => e.pi_h,
        Err(e) => return vec![CheckResult::errored("cd-poincare", &e, "")],
    };
    let constant = Field::from_fn(&t, Rank::Vector(2), |_, c| 0.4 - 0.3 * c as f64);
    for (label, b) in [("constant-b", constant.clone()), ("oscillating-b", oscillating(&t, 0.01))] {
        let id = format!("{label}/manufactured-recovery");
        out.push(check(&id, (|| {
            let p = cd_problem(&ops, &mask, b)?;
            let exact = Field::random_constrained(&mask, Rank::Scalar, &mut rng(SEED));
            let f = p.apply(&exact)?;
            let (u, _) = solve_cd(&p, &f, TOL, Some(pi_h))?;
            Ok(CheckResult::at_most(&id, u.sub(&exact).norm() / exact.norm(), 10.0 * TOL, ""))
        })()));
    }
    // classification: constant → clause (i); oscillating either side of 2ε₁/Π²
    out.push(check("constant-b/clause", (|| {
        let v = check_velocity_assumption(&cd_problem(&ops, &mask, constant.clone())?, pi_h)?;
        let ok = v.clause == VelocityClause::NonPositive;
        Ok(CheckResult::at_most("constant-b/clause", if ok { 0.0 } else { 1.0 }, 0.0, "").with_detail(format!("{:?}", v.clause)))
    })()));
    out.push(check("oscillating-b/clause", (|| {
        let unit = check_velocity_assumption(&cd_problem(&ops, &mask, oscillating(&t, 1.0))?, pi_h)?;
        let amp = unit.threshold / unit.eta;
        let below = check_velocity_assumption(&cd_problem(&ops, &mask, oscillating(&t, 0.5 * amp))?, pi_h)?;
        let above = check_velocity_assumption(&cd_problem(&ops, &mask, oscillating(&t, 2.0 * amp))?, pi_h)?;
        let ok = unit.max_value > 0.0 && below.clause == VelocityClause::Bounded && above.clause == VelocityClause::Fail;
        let detail = format!("amplitude {:.3e}: {:?}, {:.3e}: {:?}", 0.5 * amp, below.clause, 2.0 * amp, above.clause);
        Ok(CheckResult::at_most("oscillating-b/clause", if ok { 0.0 } else { 1.0 }, 0.0, "").with_detail(detail))
    })()));
    out
}

fn elasticity(suites: &BTreeMap<&str, Vec<CheckResult>>) -> Vec<CheckResult> {
    let mut out = pick(suites, &["elasticity-energy-identity", "korn-inequality"], None);
    for (label, d) in [("2d", 2usize), ("3d", 3)] {
        let id = format!("{label}/manufactured-recovery");
        out.push(check(&id, (|| {
            let h = if d == 2 { 1.0 / 16.0 } else { 1.0 / 8.0 };
            let (ops, mask) = unit_box(&KernelSpec::indicator(d, 0.25), h, &Direction::axis(d, 0, 1.0), StencilOptions::default())?;
            let p = ElasticityProblem::new(mask.clone(), ops, 1.5, 0.8)?;
            let exact = Field::random_constrained(&mask, Rank::Vector(d), &mut rng(SEED));
            let mut f = p.navier(&exact)?;
            f.constrain(&mask);
            let (u, _) = solve_elasticity(&p, &f, TOL)?;
            Ok(CheckResult::at_most(&id, u.sub(&exact).norm() / exact.norm(), 10.0 * TOL, ""))
        })()));
    }
    out
}

/// `u = G p0` with `p0` a bump well inside the domain, so `u` is constrained.
fn pure_gradient() -> Result<CheckResult> {
    let spec = KernelSpec::indicator(2, 0.25);
    let torus = Torus::cube(2, 48, 1.0 / 32.0)?;
    let ops = NonlocalOps::new(&spec, &torus, &Direction::axis(2, 0, 1.0), StencilOptions::default())?;
    let mask = centred_domain(&torus, ops.stencil(Sign::Plus).radius_cells())?;
    let centre = 24.0 / 32.0;
    let p0 = Field::from_fn(&torus, Rank::Scalar, |x, _| {
        let r2 = ((x[0] - centre).powi(2) + (x[1] - centre).powi(2)) / 0.15f64.powi(2);
        if r2 < 1.0 {
            (1.0 - r2).powi(3)
        } else {
            0.0
        }
    });
    let u = ops.grad(&p0, Sign::Plus)?;
    assert!(u.is_constrained(&mask), "the gradient input must vanish on the collar");
    let r = decompose2d(&mask, &ops, &u, TOL)?;
    let rep = &r.report;
    Ok(CheckResult::at_most("pure-gradient/rotational-part", rep.rotational_norm / rep.u_norm, 10.0 * TOL, "")
        .with_detail(format!("reconstruction {:.1e}", rep.residual / rep.u_norm)))
}

fn helmholtz(suites: &BTreeMap<&str, Vec<CheckResult>>) -> Vec<CheckResult> {
    let mut out = pick(suites, &["helmholtz-reconstruction", "helmholtz-divergence-free"], None);
    out.extend(pick(suites, &["helmholtz-orthogonality"], Some(&["2d-indicator", "3d-indicator"])));
    out.push(check("pure-gradient/rotational-part", pure_gradient()));
    out
}

fn measured_values(report: &Path) -> Vec<(String, u64)> {
    let text = std::fs::read_to_string(report).expect("report.json");
    let v: serde_json::Value = serde_json::from_str(&text).expect("report JSON");
    v["checks"]
        .as_array()
        .expect("checks array")
        .iter()
        .map(|c| (c["id"].as_str().unwrap_or("").to_string(), c["measured"].as_f64().unwrap_or(f64::NAN).to_bits()))
        .collect()
}

fn determinism() -> Vec<CheckResult> {
    let dir = tempfile::tempdir().expect("temp dir");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/verify-2d.json");
    let run = |cfg: &Path, out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_nlvc"))
            .args(["verify", "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(out)
            .env("NLVC_THREADS", "1")
            .output()
            .expect("run nlvc")
    };
    let a = run(&config, &first);
    let b = run(&first.join("manifest.json"), &second);
    if !a.status.success() || !b.status.success() {
        let detail = String::from_utf8_lossy(&a.stderr).to_string() + &String::from_utf8_lossy(&b.stderr);
        return vec![CheckResult::at_most("rerun-from-manifest", 1.0, 0.0, "").with_detail(detail.trim().to_string())];
    }
    let x = measured_values(&first.join("report.json"));
    let y = measured_values(&second.join("report.json"));
    let differing = if x.len() == y.len() { x.iter().zip(&y).filter(|(p, q)| p != q).count() } else { x.len().max(y.len()) };
    let c = CheckResult::at_most("rerun-from-manifest/differing-values", differing as f64, 0.0, "");
    vec![c.with_detail(format!("{} values compared bitwise", x.len()))]
}

/// A stencil with one sign flipped must break integration by parts; guards
/// against a check that cannot fail.
fn negative_control() -> bool {
    let t = Torus::cube(2, 16, 1.0 / 16.0).unwrap();
    let mut st = StencilWeights::build(&KernelSpec::indicator(2, 0.25), &t, &Direction::axis(2, 0, 1.0), StencilOptions::default()).unwrap();
    let k = st.beta.iter().position(|b| b[0] != 0.0).expect("a nonzero weight");
    st.beta[k][0] = -st.beta[k][0];
    let ops = NonlocalOps::from_stencil(st);
    nlvc::verify::adjointness_defect(&ops, 4, SEED).unwrap() > 1e-6
}

fn main() {
    let start = Instant::now();
    let suites = suites();
    let criteria = vec![
        Criterion { number: 1, title: "integration by parts", checks: pick(&suites, &["integration-by-parts", "curl-adjoint"], None) },
        Criterion { number: 2, title: "Fourier multiplier exactness", checks: pick(&suites, &["fourier-multiplier"], None) },
        Criterion { number: 3, title: "vanishing identities", checks: pick(&suites, &["curl-of-gradient", "divergence-of-curl"], None) },
        Criterion { number: 4, title: "Laplacian decomposition", checks: pick(&suites, &["laplacian-decomposition"], None) },
        Criterion { number: 5, title: "norm dominance", checks: pick(&suites, &["norm-dominance-divergence", "norm-dominance-curl"], None) },
        Criterion { number: 6, title: "symbol structure", checks: symbol_structure() },
        Criterion { number: 7, title: "closed-form symbol cross-check", checks: closed_form() },
        Criterion { number: 8, title: "localization", checks: localization(&suites) },
        Criterion { number: 9, title: "comparison inequality", checks: comparison() },
        Criterion { number: 10, title: "Poincare constant", checks: poincare() },
        Criterion { number: 11, title: "convection-diffusion", checks: convection_diffusion(&suites) },
        Criterion { number: 12, title: "elasticity", checks: elasticity(&suites) },
        Criterion { number: 13, title: "Helmholtz decomposition", checks: helmholtz(&suites) },
        Criterion { number: 14, title: "determinism", checks: determinism() },
    ];
    println!();
    for c in &criteria {
        println!("{}", c.line());
    }
    let control = negative_control();
    println!("{} negative control: corrupted stencil breaks integration by parts", if control { "PASS" } else { "FAIL" });

    let mut problems = Vec::new();
    for c in &criteria {
        let known = KNOWN_FAILURES.contains(&c.number);
        if !c.passed() && !known {
            problems.push(format!("C{:02} failed", c.number));
            for s in c.checks.iter().filter(|s| !s.passed) {
                println!("    {}", s.line());
            }
        }
        if c.passed() && known {
            problems.push(format!("C{:02} passes but is listed as a known failure", c.number));
        }
    }
    if !control {
        problems.push("negative control did not fail".into());
    }
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!("{passed}/{} criteria passed in {:.1?}; known failures: {:?}", criteria.len(), start.elapsed(), KNOWN_FAILURES);
    if !problems.is_empty() {
        eprintln!("{}", problems.join("\n"));
        std::process::exit(1);
    }
}
