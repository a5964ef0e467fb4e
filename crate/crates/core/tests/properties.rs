//! Randomized invariants of the lattice, operators and field I/O.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use nlvc::io::{read_field, write_field};
use nlvc::lattice::halfspace_factor;
use nlvc::operators::StencilOptions;
use nlvc::solvers::ElasticityProblem;
use nlvc::verify::centred_domain;
use nlvc::{Direction, Field, KernelSpec, NonlocalOps, Rank, Sign, Torus};

fn direction(angle: f64, tilt: f64, d: usize) -> Direction {
    let v = match d {
        2 => vec![angle.cos(), angle.sin()],
        _ => vec![angle.cos() * tilt.cos(), angle.sin() * tilt.cos(), tilt.sin()],
    };
    Direction::new(&v).unwrap()
}

fn ops2d(delta: f64, angle: f64) -> NonlocalOps {
    let t = Torus::cube(2, 12, 1.0 / 12.0).unwrap();
    NonlocalOps::new(&KernelSpec::indicator(2, delta), &t, &direction(angle, 0.0, 2), StencilOptions::default()).unwrap()
}

fn offset() -> impl Strategy<Value = [i64; 3]> {
    (-6i64..=6, -6i64..=6, -6i64..=6).prop_filter("nonzero offset", |z| *z != (0, 0, 0)).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn halfspace_factors_partition_unity(z in offset(), a in 0.0..6.3f64, t in -1.5..1.5f64) {
        let nu = direction(a, t, 3);
        let mz = [-z[0], -z[1], -z[2]];
        prop_assert_eq!(halfspace_factor(z, &nu).unwrap() + halfspace_factor(mz, &nu).unwrap(), 1.0);
    }

    #[test]
    fn halfspace_factor_reflects_with_direction(z in offset(), a in 0.0..6.3f64, t in -1.5..1.5f64) {
        let nu = direction(a, t, 3);
        let mz = [-z[0], -z[1], -z[2]];
        prop_assert_eq!(halfspace_factor(z, &nu.neg()).unwrap(), halfspace_factor(mz, &nu).unwrap());
    }

    #[test]
    fn directions_are_unit(v in prop::collection::vec(-5.0..5.0f64, 3)) {
        prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let nu = Direction::new(&v).unwrap();
        let n: f64 = nu.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn gradient_and_divergence_are_negative_adjoints(delta in 0.15..0.3f64, angle in 0.0..6.3f64, seed in any::<u64>()) {
        let ops = ops2d(delta, angle);
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let u = Field::random(ops.torus(), Rank::Vector(2), &mut r);
        let v = Field::random(ops.torus(), Rank::Matrix(2, 2), &mut r);
        let gu = ops.grad(&u, Sign::Plus).unwrap();
        let dv = ops.div(&v, Sign::Minus).unwrap();
        let scale = gu.norm() * v.norm() + u.norm() * dv.norm();
        prop_assert!((gu.dot(&v) + u.dot(&dv)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn divergence_never_exceeds_gradient(delta in 0.15..0.3f64, angle in 0.0..6.3f64, seed in any::<u64>()) {
        let ops = ops2d(delta, angle);
        let mask = centred_domain(ops.torus(), ops.stencil(Sign::Plus).radius_cells()).unwrap();
        let u = Field::random_constrained(&mask, Rank::Vector(2), &mut ChaCha20Rng::seed_from_u64(seed));
        let g = ops.grad(&u, Sign::Plus).unwrap().norm();
        for sign in [Sign::Plus, Sign::Minus] {
            prop_assert!(ops.div(&u, sign).unwrap().norm() <= (1.0 + 1e-10) * g);
        }
    }

    #[test]
    fn constrained_fields_vanish_off_the_interior(delta in 0.15..0.3f64, seed in any::<u64>()) {
        let ops = ops2d(delta, 0.0);
        let mask = centred_domain(ops.torus(), ops.stencil(Sign::Plus).radius_cells()).unwrap();
        let u = Field::random_constrained(&mask, Rank::Vector(2), &mut ChaCha20Rng::seed_from_u64(seed));
        let inside = mask.interior_indices();
        let n = u.points();
        for i in (0..n).filter(|i| !inside.contains(i)) {
            prop_assert_eq!(u.data[i], 0.0);
            prop_assert_eq!(u.data[n + i], 0.0);
        }
    }

    #[test]
    fn discrete_symbol_is_conjugate_symmetric(delta in 0.15..0.3f64, angle in 0.0..6.3f64) {
        let ops = ops2d(delta, angle);
        let t = ops.torus().clone();
        let sym = ops.symbol(Sign::Plus);
        prop_assert!(sym.lambda[0].iter().all(|z| z.re == 0.0 && z.im == 0.0));
        for k in 0..t.len() {
            let c = t.coords(k);
            let m = t.index([(t.n[0] - c[0]) % t.n[0], (t.n[1] - c[1]) % t.n[1], 0]);
            for a in 0..2 {
                prop_assert!((sym.lambda[m][a] - sym.lambda[k][a].conj()).norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn axis_directions_give_parallel_stencil_constant(delta in 0.15..0.45f64, axis in 0usize..3, flip in any::<bool>()) {
        let t = Torus::cube(3, 10, 0.1).unwrap();
        let nu = Direction::axis(3, axis, if flip { -1.0 } else { 1.0 });
        let ops = NonlocalOps::new(&KernelSpec::indicator(3, delta), &t, &nu, StencilOptions::default()).unwrap();
        let st = ops.stencil(Sign::Plus);
        prop_assert!(st.c_nu_misalignment() <= 1e-12);
        prop_assert!(st.c_hat_discrete() > 0.0);
    }

    #[test]
    fn elastic_form_is_twice_the_energy(lambda in -0.5..3.0f64, mu in 0.3..2.0f64, seed in any::<u64>()) {
        let ops = ops2d(0.25, 0.3);
        let mask = centred_domain(ops.torus(), ops.stencil(Sign::Plus).radius_cells()).unwrap();
        let p = ElasticityProblem::new(mask.clone(), ops, lambda, mu).unwrap();
        let u = Field::random_constrained(&mask, Rank::Vector(2), &mut ChaCha20Rng::seed_from_u64(seed));
        let b = p.bilinear(&u, &u).unwrap();
        prop_assert!((b - 2.0 * p.energy(&u).unwrap()).abs() <= 1e-12 * b.abs());
    }

    #[test]
    fn indicator_moments_are_positive_and_finite(d in 1usize..=3, delta in 0.05..3.0f64) {
        let m = KernelSpec::indicator(d, delta).moments().unwrap();
        prop_assert!(m.m1 > 0.0 && m.m1.is_finite());
        prop_assert!(m.m2 >= 0.0 && m.m2.is_finite());
    }

    #[test]
    fn field_files_round_trip_bitwise(n in 4usize..9, rank in 0usize..3, seed in any::<u64>()) {
        let t = Torus::cube(2, n, 1.0 / n as f64).unwrap();
        let rank = [Rank::Scalar, Rank::Vector(2), Rank::Matrix(2, 2)][rank];
        let f = Field::random(&t, rank, &mut ChaCha20Rng::seed_from_u64(seed));
        let dir = tempfile::tempdir().unwrap();
        write_field(&dir.path().join("u"), &f).unwrap();
        let g = read_field(&dir.path().join("u.f64")).unwrap();
        prop_assert_eq!(g.rank, f.rank);
        prop_assert_eq!(&g.torus, &f.torus);
        prop_assert!(f.data.iter().zip(&g.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn truncated_payload_is_rejected() {
    let t = Torus::cube(2, 6, 1.0 / 6.0).unwrap();
    let f = Field::random(&t, Rank::Vector(2), &mut ChaCha20Rng::seed_from_u64(1));
    let dir = tempfile::tempdir().unwrap();
    let (payload, _) = write_field(&dir.path().join("v"), &f).unwrap();
    let bytes = std::fs::read(&payload).unwrap();
    std::fs::write(&payload, &bytes[..bytes.len() - 8]).unwrap();
    let err = read_field(&payload).unwrap_err().to_string();
    assert!(err.contains("bytes"), "{err}");
}

#[test]
fn header_with_wrong_component_count_is_rejected() {
    let t = Torus::cube(2, 6, 1.0 / 6.0).unwrap();
    let f = Field::random(&t, Rank::Vector(2), &mut ChaCha20Rng::seed_from_u64(2));
    let dir = tempfile::tempdir().unwrap();
    let (_, header) = write_field(&dir.path().join("v"), &f).unwrap();
    let mut h: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&header).unwrap()).unwrap();
    h["components"] = serde_json::json!(4);
    std::fs::write(&header, h.to_string()).unwrap();
    assert!(read_field(&header).is_err());
}
