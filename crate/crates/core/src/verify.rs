//! Seeded identity, inequality and convergence checks. Every check draws its
//! random fields from a fresh generator seeded with the configured seed, so a
//! rerun with the same configuration reproduces each measured value.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::helmholtz::{decompose2d, decompose3d};
use crate::kernel::KernelSpec;
use crate::lattice::{halfspace_factor, Direction, DomainMask, Torus};
use crate::operators::var_dir::{direction_field, div_var_dir, grad_var_dir};
use crate::operators::{Backend, NonlocalOps, Sign, StencilOptions};
use crate::poincare::{estimate_poincare, spot_check};
use crate::solvers::{convection_inequality_check, solve_cd, CdProblem, ElasticityProblem};
use crate::symbol::{check_equivariance, positivity_witness, symbol_bound, Orthogonal, SymbolEvaluator};

pub use crate::poincare::SEED;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Passes when `measured <= tolerance`.
    AtMost,
    /// Passes when `measured > tolerance`.
    Above,
    /// Recorded without a pass criterion.
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn new(id: &str, measured: f64, tolerance: f64, relation: Relation, fingerprint: &str) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= tolerance,
            Relation::Above => measured > tolerance,
            Relation::Report => true,
        };
        CheckResult { id: id.into(), passed, measured, tolerance, relation, fingerprint: fingerprint.into(), detail: None }
    }

    pub fn at_most(id: &str, measured: f64, tolerance: f64, fingerprint: &str) -> Self {
        Self::new(id, measured, tolerance, Relation::AtMost, fingerprint)
    }

    pub fn above(id: &str, measured: f64, bound: f64, fingerprint: &str) -> Self {
        Self::new(id, measured, bound, Relation::Above, fingerprint)
    }

    pub fn report(id: &str, measured: f64, fingerprint: &str) -> Self {
        Self::new(id, measured, f64::NAN, Relation::Report, fingerprint)
    }

    /// A check that could not run counts as failed.
    pub fn errored(id: &str, err: &NlvcError, fingerprint: &str) -> Self {
        CheckResult {
            id: id.into(),
            passed: false,
            measured: f64::NAN,
            tolerance: f64::NAN,
            relation: Relation::AtMost,
            fingerprint: fingerprint.into(),
            detail: Some(err.to_string()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// One fixed-width line for terminal output.
    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::Above => "> ",
            Relation::Report => "  ",
        };
        let tol = if self.tolerance.is_nan() { String::from("-") } else { format!("{:.3e}", self.tolerance) };
        let mut s = format!("{} {:<40} {:>11.3e} {} {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.measured, rel, tol);
        if let Some(d) = &self.detail {
            s.push_str("  ");
            s.push_str(d);
        }
        s
    }
}

fn default_samples() -> usize {
    10
}

fn default_symbol_samples() -> usize {
    4
}

fn default_seed() -> u64 {
    SEED
}

fn default_tol() -> f64 {
    1e-10
}

/// Everything a suite run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub kernel: KernelSpec,
    pub torus: Torus,
    pub nu: Vec<f64>,
    /// Interior box; defaults to the largest centred box the collar allows.
    #[serde(default)]
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
    #[serde(default)]
    pub stencil: StencilOptions,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Random fields or field pairs per check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Frequencies per continuum symbol check.
    #[serde(default = "default_symbol_samples")]
    pub symbol_samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl SuiteConfig {
    pub fn new(kernel: KernelSpec, torus: Torus, nu: &[f64]) -> Self {
        SuiteConfig {
            kernel,
            torus,
            nu: nu.to_vec(),
            domain: None,
            stencil: StencilOptions::default(),
            seed: SEED,
            samples: default_samples(),
            symbol_samples: default_symbol_samples(),
            tol: default_tol(),
        }
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.kernel, &self.torus, self.seed)
    }
}

/// `kernel | torus | seed` in a stable textual form.
pub fn fingerprint(kernel: &KernelSpec, torus: &Torus, seed: u64) -> String {
    let k = serde_json::to_string(kernel).unwrap_or_default();
    format!("{k}|n={:?},h={}|seed={seed:#x}", torus.n, torus.h)
}

/// Copies an error for reporting in a second check.
fn again(e: &NlvcError) -> NlvcError {
    NlvcError::Numerical(e.to_string())
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Interior with `n - 2R` points per axis, centred on the torus.
pub fn centred_domain(torus: &Torus, radius: usize) -> Result<DomainMask> {
    let d = torus.dim();
    let interior = (0..torus.len())
        .map(|i| {
            let c = torus.coords(i);
            (0..d).all(|a| c[a] >= radius && c[a] + radius < torus.n[a])
        })
        .collect();
    DomainMask::from_interior(torus, interior, radius)
}

fn beta_scale(ops: &NonlocalOps) -> f64 {
    ops.stencil(Sign::Plus).beta.iter().map(|b| (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()).sum()
}

/// Largest `|(G u, V) + (u, D^{-ν} V)| / (‖G u‖‖V‖ + ‖u‖‖D^{-ν} V‖)` over
/// random pairs, both signs, scalar and vector `u`.
pub fn adjointness_defect(ops: &NonlocalOps, samples: usize, seed: u64) -> Result<f64> {
    let t = ops.torus();
    let d = t.dim();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for k in 0..samples {
        let rank = if k % 2 == 0 { Rank::Scalar } else { Rank::Vector(d) };
        let vrank = if k % 2 == 0 { Rank::Vector(d) } else { Rank::Matrix(d, d) };
        let u = Field::random(t, rank, &mut r);
        let v = Field::random(t, vrank, &mut r);
        for sign in [Sign::Plus, Sign::Minus] {
            let gu = ops.grad(&u, sign)?;
            let dv = ops.div(&v, sign.flip())?;
            let defect = (gu.dot(&v) + u.dot(&dv)).abs();
            let scale = gu.norm() * v.norm() + u.norm() * dv.norm();
            worst = worst.max(defect / scale);
        }
    }
    Ok(worst)
}

/// `(C^ν u, v) - (u, C^{-ν} v)` relative to `‖C u‖‖v‖ + ‖u‖‖C v‖`.
pub fn curl_adjointness_defect(ops: &NonlocalOps, samples: usize, seed: u64) -> Result<f64> {
    let t = ops.torus();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = Field::random(t, Rank::Vector(3), &mut r);
        let v = Field::random(t, Rank::Vector(3), &mut r);
        let cu = ops.curl(&u, Sign::Plus)?;
        let cv = ops.curl(&v, Sign::Minus)?;
        let defect = (cu.dot(&v) - u.dot(&cv)).abs();
        worst = worst.max(defect / (cu.norm() * v.norm() + u.norm() * cv.norm()));
    }
    Ok(worst)
}

/// `‖FFT(G u) - λ_h ⊗ û‖ / ‖û‖` with `G u` from the direct sum.
pub fn multiplier_defect(ops: &NonlocalOps, samples: usize, seed: u64) -> Result<f64> {
    let t = ops.torus();
    let d = t.dim();
    let direct = ops.clone().with_backend(Backend::Direct);
    let plan = ops.fft_plan();
    let sym = ops.symbol(Sign::Plus);
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = Field::random(t, Rank::Scalar, &mut r);
        let uh = plan.forward(&u.data);
        let gu = direct.grad(&u, Sign::Plus)?;
        let mut res = 0.0;
        for a in 0..d {
            let gh = plan.forward(gu.component(a));
            for (k, g) in gh.iter().enumerate() {
                res += (g - sym.lambda[k][a] * uh[k]).norm_sqr();
            }
        }
        let un: f64 = uh.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(res.sqrt() / un);
    }
    Ok(worst)
}

fn relative(a: &Field, b: &Field) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        a.sub(b).norm() / s
    }
}

fn worst_over<F: FnMut(&mut ChaCha20Rng) -> Result<f64>>(samples: usize, seed: u64, mut f: F) -> Result<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        worst = worst.max(f(&mut r)?);
    }
    Ok(worst)
}

/// Evaluates `Σ β(z) u(x + z) - c_ν u(x)` literally.
pub fn convolution_split(ops: &NonlocalOps, u: &Field) -> Result<Field> {
    u.expect_rank(Rank::Scalar)?;
    let st = ops.stencil(Sign::Plus);
    let t = ops.torus();
    let d = t.dim();
    let n = t.len();
    let mut out = Field::zeros(t, Rank::Vector(d));
    for x in 0..n {
        let c = t.coords(x);
        let mut acc = [0.0; 3];
        for (z, b) in st.offsets().iter().zip(&st.beta) {
            let y = u.data[t.shifted(c, *z)];
            for a in 0..d {
                acc[a] += b[a] * y;
            }
        }
        for a in 0..d {
            out.data[a * n + x] = acc[a] - st.c_nu[a] * u.data[x];
        }
    }
    Ok(out)
}

fn lattice_symmetric(nu: &Direction) -> bool {
    let nz: Vec<f64> = nu.as_slice().iter().filter(|x| x.abs() > 1e-15).map(|x| x.abs()).collect();
    nz.iter().all(|x| (x - nz[0]).abs() <= 1e-14)
}

/// `90°` rotations in the coordinate planes.
pub fn quarter_turns(d: usize) -> Vec<Orthogonal> {
    let mut out = Vec::new();
    for (i, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
        if j >= d {
            continue;
        }
        let mut r = [[0.0; 3]; 3];
        for k in 0..3 {
            r[k][k] = 1.0;
        }
        r[i][i] = 0.0;
        r[j][j] = 0.0;
        r[i][j] = -1.0;
        r[j][i] = 1.0;
        out.push(r);
    }
    if d == 1 {
        let mut r = [[0.0; 3]; 3];
        r[0][0] = -1.0;
        out.push(r);
    }
    out
}

/// Deterministic frequencies on the sphere of radius `rho`-ish, avoiding
/// coordinate axes.
pub fn sample_frequencies(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let rho = 10f64.powf(r.random_range(-1.0..1.5));
            let mut v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            v.iter_mut().for_each(|x| *x *= rho / n);
            v
        })
        .collect()
}

/// Comparison kernel of `w` on the lattice of `ops`, truncated to the reach
/// of the `w` stencil so it fits the same collar.
pub fn convection_kernel(kernel: &KernelSpec, ops: &NonlocalOps) -> Result<crate::operators::LatticeKernel> {
    let phi = kernel.comparison_kernel()?;
    let st = ops.stencil(Sign::Plus);
    let reach = st.radius_cells() as f64 * ops.torus().h;
    let opts = StencilOptions { rule: None, trunc_radius: Some(reach.min(phi.profile()?.support())) };
    crate::operators::LatticeKernel::build(&phi, ops.torus(), opts)
}

/// Runs every applicable identity and inequality. Configuration errors are
/// returned; numerical failures are results.
pub fn run_identity_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let fp = cfg.fingerprint();
    let nu = Direction::new(&cfg.nu)?;
    if cfg.torus.dim() != cfg.kernel.d || nu.d != cfg.kernel.d {
        return Err(NlvcError::Config("kernel, torus and direction dimensions differ".into()));
    }
    cfg.kernel.validate()?;
    let ops = NonlocalOps::new(&cfg.kernel, &cfg.torus, &nu, cfg.stencil)?;
    let radius = ops.stencil(Sign::Plus).radius_cells();
    let mask = match &cfg.domain {
        Some((lo, hi)) => DomainMask::build_box(&cfg.torus, lo, hi, radius)?,
        None => centred_domain(&cfg.torus, radius)?,
    };
    let d = cfg.torus.dim();
    let seed = cfg.seed;
    let m = cfg.samples.max(1);
    let mut out = Vec::new();
    let mut push = |id: &str, r: Result<CheckResult>| {
        out.push(r.unwrap_or_else(|e| CheckResult::errored(id, &e, &fp)));
    };

    // lattice half-space factor
    push("halfspace-partition", (|| {
        let mut worst = 0.0f64;
        for dir in [nu, Direction::axis(d, 0, 1.0)] {
            for z in ops.stencil(Sign::Plus).offsets() {
                let mz = [-z[0], -z[1], -z[2]];
                worst = worst.max((halfspace_factor(*z, &dir)? + halfspace_factor(mz, &dir)? - 1.0).abs());
            }
        }
        Ok(CheckResult::at_most("halfspace-partition", worst, 0.0, &fp))
    })());
    push("halfspace-reflection", (|| {
        let mut worst = 0.0f64;
        for z in ops.stencil(Sign::Plus).offsets() {
            let mz = [-z[0], -z[1], -z[2]];
            worst = worst.max((halfspace_factor(*z, &nu.neg())? - halfspace_factor(mz, &nu)?).abs());
        }
        Ok(CheckResult::at_most("halfspace-reflection", worst, 0.0, &fp))
    })());

    // stencil constants
    let st = ops.stencil(Sign::Plus);
    if lattice_symmetric(&nu) {
        push("stencil-direction-constant", Ok(CheckResult::at_most("stencil-direction-constant", st.c_nu_misalignment(), 1e-12, &fp)));
    }
    push("stencil-c-hat-positive", Ok(CheckResult::above("stencil-c-hat-positive", st.c_hat_discrete(), 0.0, &fp)));
    push("convolution-split", worst_over(2, seed, |r| {
        let u = Field::random(&cfg.torus, Rank::Scalar, r);
        Ok(relative(&ops.grad(&u, Sign::Plus)?, &convolution_split(&ops, &u)?))
    })
    .map(|w| CheckResult::at_most("convolution-split", w, 1e-12, &fp)));

    // adjoints and backends
    push("integration-by-parts", adjointness_defect(&ops, m, seed).map(|w| CheckResult::at_most("integration-by-parts", w, 1e-12, &fp)));
    push("integration-by-parts-variable-direction", worst_over(m, seed, |r| {
        let b = Field::random(&cfg.torus, Rank::Vector(d), r);
        let n_field = direction_field(&b, &nu)?;
        let u = Field::random(&cfg.torus, Rank::Scalar, r);
        let v = Field::random(&cfg.torus, Rank::Vector(d), r);
        let gu = grad_var_dir(ops.lattice(), &u, &n_field)?;
        let dv = div_var_dir(ops.lattice(), &v, &n_field)?;
        Ok((gu.dot(&v) + u.dot(&dv)).abs() / (gu.norm() * v.norm() + u.norm() * dv.norm()))
    })
    .map(|w| CheckResult::at_most("integration-by-parts-variable-direction", w, 1e-12, &fp)));
    if d == 3 {
        push("curl-adjoint", curl_adjointness_defect(&ops, m, seed).map(|w| CheckResult::at_most("curl-adjoint", w, 1e-12, &fp)));
    }
    push("backend-agreement", {
        let fft = ops.clone().with_backend(Backend::Fft);
        worst_over(2, seed, |r| {
            let u = Field::random(&cfg.torus, Rank::Vector(d), r);
            let mut w = 0.0f64;
            for sign in [Sign::Plus, Sign::Minus] {
                w = w.max(relative(&ops.grad(&u, sign)?, &fft.grad(&u, sign)?));
                w = w.max(relative(&ops.div(&u, sign)?, &fft.div(&u, sign)?));
                if d == 3 {
                    w = w.max(relative(&ops.curl(&u, sign)?, &fft.curl(&u, sign)?));
                }
            }
            Ok(w)
        })
        .map(|w| CheckResult::at_most("backend-agreement", w, 1e-12, &fp))
    });
    push("fourier-multiplier", multiplier_defect(&ops, 2, seed).map(|w| CheckResult::at_most("fourier-multiplier", w, 1e-10, &fp)));
    push("equivalent-divergence-form", worst_over(2, seed, |r| {
        let v = Field::random(&cfg.torus, Rank::Vector(d), r);
        Ok(relative(&ops.div(&v, Sign::Plus)?, &ops.div_alternative(&v, Sign::Plus)?))
    })
    .map(|w| CheckResult::at_most("equivalent-divergence-form", w, 1e-12, &fp)));
    push("product-rule", worst_over(2, seed, |r| {
        let phi = Field::random(&cfg.torus, Rank::Scalar, r);
        let big = Field::random(&cfg.torus, Rank::Vector(d), r);
        let mut prod = big.clone();
        let n = phi.points();
        for a in 0..d {
            for i in 0..n {
                prod.data[a * n + i] *= phi.data[i];
            }
        }
        let lhs = ops.div(&prod, Sign::Minus)?;
        let db = ops.div(&big, Sign::Minus)?;
        let gp = ops.grad(&phi, Sign::Plus)?;
        let s = ops.product_rule_remainder(&phi, &big)?;
        let mut rhs = s.clone();
        for i in 0..n {
            rhs.data[i] += phi.data[i] * db.data[i] + (0..d).map(|a| gp.data[a * n + i] * big.data[a * n + i]).sum::<f64>();
        }
        Ok(lhs.sub(&rhs).norm() / (phi.max_abs() * big.norm() * beta_scale(&ops)))
    })
    .map(|w| CheckResult::at_most("product-rule", w, 1e-12, &fp)));

    // vector identities
    let bs = beta_scale(&ops);
    if d == 3 {
        push("curl-of-gradient", worst_over(2, seed, |r| {
            let u = Field::random(&cfg.torus, Rank::Scalar, r);
            let g = ops.grad(&u, Sign::Plus)?;
            Ok(ops.curl(&g, Sign::Plus)?.norm() / (bs * bs * u.norm()))
        })
        .map(|w| CheckResult::at_most("curl-of-gradient", w, 1e-12, &fp)));
        push("divergence-of-curl", worst_over(2, seed, |r| {
            let v = Field::random(&cfg.torus, Rank::Vector(3), r);
            let c = ops.curl(&v, Sign::Plus)?;
            Ok(ops.div(&c, Sign::Plus)?.norm() / (bs * bs * v.norm()))
        })
        .map(|w| CheckResult::at_most("divergence-of-curl", w, 1e-12, &fp)));
        push("laplacian-decomposition", worst_over(2, seed, |r| {
            let u = Field::random_constrained(&mask, Rank::Vector(3), r);
            let lu = ops.vector_laplacian(&u)?;
            let gd = ops.grad(&ops.div(&u, Sign::Minus)?, Sign::Plus)?;
            let cc = ops.curl(&ops.curl(&u, Sign::Plus)?, Sign::Minus)?;
            Ok(lu.sub(&gd).add(&cc).norm() / (bs * bs * u.norm()))
        })
        .map(|w| CheckResult::at_most("laplacian-decomposition", w, 1e-10, &fp)));
    } else if d == 2 {
        push("laplacian-decomposition", worst_over(2, seed, |r| {
            let u = Field::random_constrained(&mask, Rank::Vector(2), r);
            let v = Field::random_constrained(&mask, Rank::Vector(2), r);
            let lhs = ops.grad(&u, Sign::Plus)?.dot(&ops.grad(&v, Sign::Plus)?);
            let a = ops.div(&u, Sign::Minus)?.dot(&ops.div(&v, Sign::Minus)?);
            let ju = crate::helmholtz::rotate_j(&u)?;
            let jv = crate::helmholtz::rotate_j(&v)?;
            let b = ops.div(&ju, Sign::Plus)?.dot(&ops.div(&jv, Sign::Plus)?);
            Ok((lhs - a - b).abs() / (bs * bs * u.norm() * v.norm()))
        })
        .map(|w| CheckResult::at_most("laplacian-decomposition", w, 1e-10, &fp)));
    }

    // norm dominance over constrained fields
    push("norm-dominance-divergence", worst_over(m, seed, |r| {
        let u = Field::random_constrained(&mask, Rank::Vector(d), r);
        let g = ops.grad(&u, Sign::Plus)?.norm();
        let a = ops.div(&u, Sign::Plus)?.norm();
        let b = ops.div(&u, Sign::Minus)?.norm();
        Ok(a.max(b) / g - 1.0)
    })
    .map(|w| CheckResult::at_most("norm-dominance-divergence", w, 1e-10, &fp)));
    if d == 3 {
        push("norm-dominance-curl", worst_over(m, seed, |r| {
            let u = Field::random_constrained(&mask, Rank::Vector(3), r);
            let g = ops.grad(&u, Sign::Plus)?.norm();
            let a = ops.curl(&u, Sign::Plus)?.norm();
            let b = ops.curl(&u, Sign::Minus)?.norm();
            Ok(a.max(b) / g - 1.0)
        })
        .map(|w| CheckResult::at_most("norm-dominance-curl", w, 1e-10, &fp)));
    }

    // localization of affine fields
    push("localization-affine", affine_localization_defect(&ops).map(|w| CheckResult::at_most("localization-affine", w, 1e-10, &fp)));

    // Poincaré
    let pi = estimate_poincare(&mask, &ops, 1e-10);
    push("poincare-bound", match &pi {
        Ok(est) => spot_check(&mask, &ops, est.pi_h, m, seed).map(|w| {
            CheckResult::at_most("poincare-bound", w, 1.0 + 1e-8, &fp).with_detail(format!("Pi_h = {:.10}", est.pi_h))
        }),
        Err(e) => Err(again(e)),
    });
    let pi_h = pi.as_ref().map(|e| e.pi_h).ok();

    // convection-diffusion
    push("diffusion-form-symmetry", (|| {
        let mut r = rng(seed);
        let eps = Field::from_fn(&cfg.torus, Rank::Scalar, |x, _| 1.0 + 0.5 * (2.0 * PI * x[0]).sin().powi(2));
        let phi = std::sync::Arc::new(convection_kernel(&cfg.kernel, &ops)?);
        let zero = Field::zeros(&cfg.torus, Rank::Vector(d));
        let p = CdProblem::new(mask.clone(), ops.clone(), phi, eps, zero)?;
        let mut worst = 0.0f64;
        for _ in 0..m {
            let u = Field::random_constrained(&mask, Rank::Scalar, &mut r);
            let v = Field::random_constrained(&mask, Rank::Scalar, &mut r);
            let a = p.bilinear(&u, &v)?;
            let b = p.bilinear(&v, &u)?;
            worst = worst.max((a - b).abs() / (p.diffusion_form(&u, &u)? * p.diffusion_form(&v, &v)?).sqrt());
        }
        Ok(CheckResult::at_most("diffusion-form-symmetry", worst, 1e-12, &fp))
    })());
    push("convection-inequality", (|| {
        let phi = convection_kernel(&cfg.kernel, &ops)?;
        let mut r = rng(seed);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..m {
            let v = Field::random_constrained(&mask, Rank::Scalar, &mut r);
            let b = Field::random(&cfg.torus, Rank::Vector(d), &mut r);
            let n_field = direction_field(&b, &nu)?;
            let (margin, scale) = convection_inequality_check(&phi, &b, &n_field, &v)?;
            worst = worst.max(-margin / scale);
        }
        Ok(CheckResult::at_most("convection-inequality", worst, 1e-10, &fp))
    })());
    push("cd-coercivity-and-bound", (|| {
        let phi = std::sync::Arc::new(convection_kernel(&cfg.kernel, &ops)?);
        let eps = Field::from_fn(&cfg.torus, Rank::Scalar, |_, _| 1.0);
        let b = Field::from_fn(&cfg.torus, Rank::Vector(d), |_, c| 0.5 + 0.25 * c as f64);
        let p = CdProblem::new(mask.clone(), ops.clone(), phi, eps, b)?;
        let f = Field::random_constrained(&mask, Rank::Scalar, &mut rng(seed));
        let (u, rep) = solve_cd(&p, &f, cfg.tol, pi_h)?;
        let g2 = ops.grad(&u, Sign::Plus)?.dot(&ops.grad(&u, Sign::Plus)?);
        let margin = rep.coercivity_margin.unwrap_or(0.0);
        let coercive = rep.bilinear.unwrap_or(0.0) >= margin * g2 * (1.0 - 1e-10);
        let ratio = rep.solution_norm / (rep.apriori_constant * rep.dual_norm);
        let mut c = CheckResult::at_most("cd-coercivity-and-bound", ratio, 1.0 + 1e-8, &fp);
        c.passed &= coercive;
        Ok(c.with_detail(format!("‖Gu‖/(c‖f‖*) with coercivity {}", if coercive { "held" } else { "violated" })))
    })());

    // elasticity
    let elastic = ElasticityProblem::new(mask.clone(), ops.clone(), 1.5, 0.8);
    let soft = ElasticityProblem::new(mask.clone(), ops.clone(), -1.0, 1.0);
    push("elasticity-energy-identity", match &elastic {
        Ok(p) => worst_over(m, seed, |r| {
            let u = Field::random_constrained(&mask, Rank::Vector(d), r);
            let b = p.bilinear(&u, &u)?;
            Ok((b - 2.0 * p.energy(&u)?).abs() / b)
        })
        .map(|w| CheckResult::at_most("elasticity-energy-identity", w, 1e-12, &fp)),
        Err(e) => Err(again(e)),
    });
    push("korn-inequality", (|| {
        let mut worst = f64::NEG_INFINITY;
        for p in [elastic.as_ref().map_err(again)?, soft.as_ref().map_err(again)?] {
            worst = worst.max(worst_over(m, seed, |r| {
                let u = Field::random_constrained(&mask, Rank::Vector(d), r);
                let g = ops.grad(&u, Sign::Plus)?;
                let bound = p.korn_constant() * g.dot(&g);
                Ok(1.0 - 2.0 * p.energy(&u)? / bound)
            })?);
        }
        Ok(CheckResult::at_most("korn-inequality", worst, 1e-10, &fp))
    })());
    push("elasticity-positive-definite", (|| {
        let p = soft.as_ref().map_err(again)?;
        let mut r = rng(seed);
        let mut least = f64::INFINITY;
        for _ in 0..m {
            let u = Field::random_constrained(&mask, Rank::Vector(d), &mut r);
            least = least.min(p.navier(&u)?.dot(&u) / u.dot(&u));
        }
        Ok(CheckResult::above("elasticity-positive-definite", least, 0.0, &fp))
    })());
    push("elasticity-apriori-bound", (|| {
        let p = elastic.as_ref().map_err(again)?;
        let f = Field::random_constrained(&mask, Rank::Vector(d), &mut rng(seed));
        let (_, rep) = crate::solvers::solve_elasticity(p, &f, cfg.tol)?;
        Ok(CheckResult::at_most("elasticity-apriori-bound", rep.solution_norm / (rep.apriori_constant * rep.dual_norm), 1.0 + 1e-8, &fp))
    })());

    // Helmholtz
    if d == 2 || d == 3 {
        let u = Field::random_constrained(&mask, Rank::Vector(d), &mut rng(seed));
        let rep = if d == 2 { decompose2d(&mask, &ops, &u, cfg.tol).map(|r| r.report) } else { decompose3d(&mask, &ops, &u, cfg.tol).map(|r| r.report) };
        match rep {
            Ok(rep) => {
                let un = rep.u_norm;
                push("helmholtz-reconstruction", Ok(CheckResult::at_most("helmholtz-reconstruction", rep.residual / un, 10.0 * cfg.tol, &fp)));
                let orth = rep.orthogonality.abs() / (un * un);
                push("helmholtz-orthogonality", Ok(if cfg.kernel.is_integrable() {
                    CheckResult::at_most("helmholtz-orthogonality", orth, 1e-10, &fp)
                } else {
                    CheckResult::report("helmholtz-orthogonality", orth, &fp).with_detail("non-integrable kernel: measured only")
                }));
                if let (Some(dn), Some(sc)) = (rep.divfree_norm, rep.divfree_scale) {
                    push("helmholtz-divergence-free", Ok(CheckResult::at_most("helmholtz-divergence-free", dn / sc, 1e-12, &fp)));
                }
            }
            Err(e) => push("helmholtz-reconstruction", Err(e)),
        }
    }

    // kernel and symbol
    push("kernel-moments", (|| {
        let a = cfg.kernel.moments()?;
        let b = cfg.kernel.moments_quadrature()?;
        let ok = a.m1 > 0.0 && a.m1.is_finite();
        let rel = ((a.m1 - b.m1) / a.m1).abs().max(if a.m2 > 0.0 { ((a.m2 - b.m2) / a.m2).abs() } else { b.m2.abs() });
        let mut c = CheckResult::at_most("kernel-moments", rel, 1e-8, &fp);
        c.passed &= ok;
        Ok(c)
    })());
    push("comparison-kernel-admissible", (|| {
        let phi = cfg.kernel.comparison_kernel()?;
        let mass = phi.moments()?.total_mass.unwrap_or(f64::INFINITY);
        let mut c = CheckResult::above("comparison-kernel-admissible", if mass.is_finite() { mass } else { -1.0 }, 0.0, &fp);
        c.passed &= phi.check_assumptions().all_pass();
        Ok(c)
    })());
    let xis = sample_frequencies(d, cfg.symbol_samples.max(1), seed);
    let symbol_checks = (|| -> Result<Vec<CheckResult>> {
        let ev = SymbolEvaluator::new(&cfg.kernel)?;
        let mom = cfg.kernel.moments()?;
        let mut bound = f64::NEG_INFINITY;
        let mut align = 0.0f64;
        let mut least = f64::INFINITY;
        let mut witness = f64::INFINITY;
        for xi in &xis {
            let s = ev.sample(&nu, xi)?;
            bound = bound.max(s.abs() / symbol_bound(&mom, s.xi_norm()) - 1.0);
            align = align.max(s.im_misalignment());
            least = least.min(s.abs());
            witness = witness.min(positivity_witness(&ev, &Direction::axis(d, 0, 1.0), xi)?);
        }
        let mut equiv = 0.0f64;
        for r in quarter_turns(d) {
            equiv = equiv.max(check_equivariance(&ev, &nu, &r, &xis[..xis.len().min(2)])?.max_residual);
        }
        Ok(vec![
            CheckResult::at_most("symbol-bound", bound, 1e-6, &fp),
            CheckResult::at_most("symbol-im-alignment", align, 1e-9, &fp),
            CheckResult::above("symbol-positivity", least, 0.0, &fp),
            CheckResult::above("symbol-positivity-witness", witness, 0.0, &fp),
            CheckResult::at_most("symbol-equivariance", equiv, 1e-7, &fp),
        ])
    })();
    match symbol_checks {
        Ok(v) => out.extend(v),
        Err(e) => out.push(CheckResult::errored("symbol-bound", &e, &fp)),
    }
    Ok(out)
}

/// For `u(x) = A x` near the torus centre, `G u = (M1_h / (2d)) Aᵀ` with the
/// lattice first moment; returns the relative max deviation.
pub fn affine_localization_defect(ops: &NonlocalOps) -> Result<f64> {
    let t = ops.torus();
    let d = t.dim();
    let mut a = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = 1.0 + i as f64 - 0.5 * j as f64 + if i == j { 2.0 } else { 0.0 };
        }
    }
    let centre: [usize; 3] = [t.n[0] / 2, if d > 1 { t.n[1] / 2 } else { 0 }, if d > 2 { t.n[2] / 2 } else { 0 }];
    let u = Field::from_fn(t, Rank::Vector(d), |_, _| 0.0);
    let mut u = u;
    let n = t.len();
    for idx in 0..n {
        let c = t.coords(idx);
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[j][k] * (c[k] as f64 - centre[k] as f64) * t.h;
            }
            u.data[j * n + idx] = s;
        }
    }
    let g = ops.grad(&u, Sign::Plus)?;
    let m1 = ops.lattice().first_moment();
    let at = t.index(centre);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let want = m1 / (2.0 * d as f64) * a[j][i];
            worst = worst.max((g.data[(i * d + j) * n + at] - want).abs());
            scale = scale.max(want.abs());
        }
    }
    Ok(worst / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub delta: f64,
    pub grad_error: f64,
    pub div_error: f64,
    /// 3D only.
    pub curl_error: Option<f64>,
    pub affine_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationStudy {
    pub rows: Vec<LocalizationRow>,
    /// Least-squares slope of `log error` against `log δ`, per operator.
    pub grad_order: f64,
    pub div_order: f64,
    pub curl_order: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Max-norm errors of `G u`, `D V` (and `C V` in 3D) against
/// `(M1_h/(2d))` times the classical operators for the scaled kernels
/// `w_δ`, on the unit torus with `n` points per axis, FFT backend.
///
/// Fields: `u = sin(2πx₁)cos(2πx₂)` (times `cos(2πx₃)` in 3D) and
/// `V = (sin x₁ cos x₂, cos x₁ sin x₂, sin x₁ sin x₂)` in units of `2π`.
pub fn localization_study(kernel: &KernelSpec, nu: &Direction, deltas: &[f64], n: usize, opts: StencilOptions) -> Result<LocalizationStudy> {
    let d = kernel.d;
    if !(2..=3).contains(&d) {
        return Err(NlvcError::Config("the localization study needs d = 2 or 3".into()));
    }
    if deltas.len() < 2 {
        return Err(NlvcError::Config("the localization study needs at least two horizons".into()));
    }
    let t = Torus::cube(d, n, 1.0 / n as f64)?;
    let tp = 2.0 * PI;
    let z = |x: [f64; 3]| if d == 3 { (tp * x[2]).cos() } else { 1.0 };
    let dz = |x: [f64; 3]| if d == 3 { -tp * (tp * x[2]).sin() } else { 0.0 };
    let u = Field::from_fn(&t, Rank::Scalar, |x, _| (tp * x[0]).sin() * (tp * x[1]).cos() * z(x));
    let grad_u = Field::from_fn(&t, Rank::Vector(d), |x, c| match c {
        0 => tp * (tp * x[0]).cos() * (tp * x[1]).cos() * z(x),
        1 => -tp * (tp * x[0]).sin() * (tp * x[1]).sin() * z(x),
        _ => (tp * x[0]).sin() * (tp * x[1]).cos() * dz(x),
    });
    // V = (sin x cos y, cos x sin y, sin x sin y), truncated to d components
    let v = Field::from_fn(&t, Rank::Vector(d), |x, c| match c {
        0 => (tp * x[0]).sin() * (tp * x[1]).cos(),
        1 => (tp * x[0]).cos() * (tp * x[1]).sin(),
        _ => (tp * x[0]).sin() * (tp * x[1]).sin(),
    });
    let div_v = Field::from_fn(&t, Rank::Scalar, |x, _| 2.0 * tp * (tp * x[0]).cos() * (tp * x[1]).cos());
    let curl_v = Field::from_fn(&t, Rank::Vector(3), |x, c| match c {
        0 => tp * (tp * x[0]).sin() * (tp * x[1]).cos(),
        1 => -tp * (tp * x[0]).cos() * (tp * x[1]).sin(),
        _ => 0.0,
    });
    let mut rows = Vec::new();
    for &delta in deltas {
        let spec = kernel.scaled(delta);
        let ops = NonlocalOps::new(&spec, &t, nu, opts)?.with_backend(Backend::Fft);
        let c = ops.lattice().first_moment() / (2.0 * d as f64);
        let err = |a: &Field, b: &Field| -> f64 {
            let mut s = b.clone();
            s.scale(c);
            a.sub(&s).max_abs()
        };
        let grad_error = err(&ops.grad(&u, Sign::Plus)?, &grad_u);
        let div_error = err(&ops.div(&v, Sign::Plus)?, &div_v);
        let curl_error = if d == 3 { Some(err(&ops.curl(&v, Sign::Plus)?, &curl_v)) } else { None };
        let direct = NonlocalOps::new(&spec, &t, nu, opts)?;
        rows.push(LocalizationRow { delta, grad_error, div_error, curl_error, affine_error: affine_localization_defect(&direct)? });
    }
    let ds: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let grad_order = fitted_order(&ds, &rows.iter().map(|r| r.grad_error).collect::<Vec<_>>());
    let div_order = fitted_order(&ds, &rows.iter().map(|r| r.div_error).collect::<Vec<_>>());
    let curl_order = if d == 3 { Some(fitted_order(&ds, &rows.iter().map(|r| r.curl_error.unwrap_or(0.0)).collect::<Vec<_>>())) } else { None };
    Ok(LocalizationStudy { rows, grad_order, div_order, curl_order })
}

/// Checks derived from a localization study.
pub fn localization_checks(study: &LocalizationStudy, fp: &str) -> Vec<CheckResult> {
    let affine = study.rows.iter().map(|r| r.affine_error).fold(0.0, f64::max);
    let mut out = vec![
        CheckResult::at_most("localization-affine", affine, 1e-10, fp),
        CheckResult::above("localization-order-gradient", study.grad_order, 0.9, fp),
        CheckResult::above("localization-order-divergence", study.div_order, 0.9, fp),
    ];
    if let Some(o) = study.curl_order {
        out.push(CheckResult::above("localization-order-curl", o, 0.9, fp));
    }
    out
}

/// Topics of the theory and the check ids that exercise them.
pub const COVERAGE: &[(&str, &[&str])] = &[
    ("half-ball operator definitions", &["halfspace-partition", "halfspace-reflection", "convolution-split"]),
    ("localization constant", &["localization-affine", "localization-order-gradient", "localization-order-divergence"]),
    ("equivalent divergence form", &["equivalent-divergence-form"]),
    ("integration by parts", &["integration-by-parts", "integration-by-parts-variable-direction"]),
    ("fourier symbols", &["fourier-multiplier", "symbol-im-alignment", "symbol-bound"]),
    ("symbol equivariance and positivity", &["symbol-equivariance", "symbol-positivity", "symbol-positivity-witness"]),
    ("vector identities", &["laplacian-decomposition"]),
    ("constrained energy space", &["poincare-bound", "norm-dominance-divergence"]),
    ("product rule", &["product-rule"]),
    ("norm dominance", &["norm-dominance-divergence"]),
    ("stencil constants", &["stencil-direction-constant", "stencil-c-hat-positive"]),
    ("convolution plus multiplication split", &["convolution-split", "backend-agreement"]),
    ("poincare estimation", &["poincare-bound"]),
    ("comparison kernel", &["comparison-kernel-admissible", "kernel-moments"]),
    ("convection-diffusion", &["diffusion-form-symmetry", "convection-inequality", "cd-coercivity-and-bound", "integration-by-parts-variable-direction"]),
    ("elasticity", &["elasticity-energy-identity", "korn-inequality", "elasticity-positive-definite", "elasticity-apriori-bound"]),
    ("helmholtz decomposition", &["helmholtz-reconstruction", "helmholtz-orthogonality"]),
];

/// Ids that only appear for three-dimensional configurations.
pub const THREE_D_ONLY: &[&str] = &["curl-adjoint", "curl-of-gradient", "divergence-of-curl", "norm-dominance-curl", "helmholtz-divergence-free", "localization-order-curl"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_order_recovers_power() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((fitted_order(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn quarter_turns_are_orthogonal() {
        for d in 1..=3 {
            for r in quarter_turns(d) {
                assert!(crate::symbol::is_orthogonal(&r, d));
            }
        }
    }

    #[test]
    fn centred_domain_keeps_collar() {
        let t = Torus::cube(2, 20, 0.05).unwrap();
        let m = centred_domain(&t, 4).unwrap();
        assert_eq!(m.interior_count(), 12 * 12);
    }
}
