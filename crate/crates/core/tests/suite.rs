//! Suite-level behaviour: coverage of every listed topic, seeded
//! reproducibility, and a corrupted operator that the checks must catch.

use std::collections::BTreeSet;

use nlvc::operators::{StencilOptions, StencilWeights};
use nlvc::verify::{adjointness_defect, localization_checks, localization_study, run_identity_suite, SuiteConfig, COVERAGE, SEED, THREE_D_ONLY};
use nlvc::{Direction, KernelSpec, NonlocalOps, Torus};

fn small_2d() -> SuiteConfig {
    SuiteConfig::new(KernelSpec::indicator(2, 0.25), Torus::cube(2, 20, 1.0 / 16.0).unwrap(), &[1.0, 0.0])
}

fn small_3d() -> SuiteConfig {
    SuiteConfig::new(KernelSpec::indicator(3, 0.25), Torus::cube(3, 12, 1.0 / 12.0).unwrap(), &[0.0, 1.0, 0.0])
}

#[test]
fn small_suites_pass_and_cover_every_topic() {
    let mut seen = BTreeSet::new();
    for cfg in [small_2d(), small_3d()] {
        let checks = run_identity_suite(&cfg).unwrap();
        for c in &checks {
            assert!(c.passed, "{}", c.line());
            seen.insert(c.id.clone());
        }
        if cfg.torus.dim() == 2 {
            assert!(checks.iter().all(|c| !THREE_D_ONLY.contains(&c.id.as_str())));
        }
    }
    let study = localization_study(&KernelSpec::indicator(3, 1.0), &Direction::axis(3, 2, 1.0), &[0.4, 0.2], 24, StencilOptions::default()).unwrap();
    for c in localization_checks(&study, "") {
        seen.insert(c.id);
    }
    for (topic, ids) in COVERAGE {
        for id in *ids {
            assert!(seen.contains(*id), "topic {topic:?} lists {id}, which no run produced");
        }
    }
    for id in THREE_D_ONLY {
        assert!(seen.contains(*id), "{id} never ran");
    }
}

#[test]
fn seeded_reruns_are_bitwise_identical() {
    let cfg = small_2d();
    let a = run_identity_suite(&cfg).unwrap();
    let b = run_identity_suite(&cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.id, y.id);
        assert_eq!(x.measured.to_bits(), y.measured.to_bits(), "{}", x.id);
    }
}

#[test]
fn another_seed_changes_random_checks() {
    let a = run_identity_suite(&small_2d()).unwrap();
    let mut cfg = small_2d();
    cfg.seed = SEED ^ 1;
    let b = run_identity_suite(&cfg).unwrap();
    let ibp = |v: &[nlvc::verify::CheckResult]| v.iter().find(|c| c.id == "integration-by-parts").unwrap().measured;
    assert_ne!(ibp(&a).to_bits(), ibp(&b).to_bits());
}

#[test]
fn corrupted_stencil_breaks_integration_by_parts() {
    let t = Torus::cube(2, 16, 1.0 / 16.0).unwrap();
    let nu = Direction::axis(2, 0, 1.0);
    let mut st = StencilWeights::build(&KernelSpec::indicator(2, 0.25), &t, &nu, StencilOptions::default()).unwrap();
    assert!(adjointness_defect(&NonlocalOps::from_stencil(st.clone()), 4, SEED).unwrap() <= 1e-12);
    let k = st.beta.iter().position(|b| b[0] != 0.0).unwrap();
    st.beta[k][0] = -st.beta[k][0];
    assert!(adjointness_defect(&NonlocalOps::from_stencil(st), 4, SEED).unwrap() > 1e-6);
}
