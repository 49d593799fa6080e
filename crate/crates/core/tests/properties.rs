use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use evrep_core::evrep::{convex_mix, expand_operator, expectation, pvec_to_rho, rho_to_pvec};
use evrep_core::spinalg::commutation_residual;
use evrep_core::{
    build_generator, build_quorum, build_spin_operators, propagate_exact, CMatrix, Complex64,
    DensityMatrix, Quorum, QuorumConfig, Spin,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quorum(two_s: u32) -> Arc<Quorum> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Quorum>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap();
    map.entry(two_s)
        .or_insert_with(|| {
            Arc::new(build_quorum(QuorumConfig::default_for(Spin::from_two_s(two_s))).unwrap())
        })
        .clone()
}

fn hermitian(d: usize, entries: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(d, d);
    let mut it = entries.iter().cycle();
    for i in 0..d {
        h[(i, i)] = Complex64::new(*it.next().unwrap(), 0.0);
        for j in i + 1..d {
            let z = Complex64::new(*it.next().unwrap(), *it.next().unwrap());
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spin_algebra_closes(two_s in 0u32..=16) {
        let ops = build_spin_operators(Spin::from_two_s(two_s));
        prop_assert!(commutation_residual(&ops) < 1e-12);
    }

    #[test]
    fn round_trip_and_bounds(two_s in 0u32..=6, seed in any::<u64>(), pure in any::<bool>()) {
        let q = quorum(two_s);
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let rho = if pure {
            DensityMatrix::random_pure(q.spin(), rng)
        } else {
            DensityMatrix::random_mixed(q.spin(), rng)
        };
        let p = rho_to_pvec(&rho, &q).unwrap();
        prop_assert!(p.min() >= -1e-12 && p.max() <= 1.0 + 1e-12);
        prop_assert!((p.normalization(&q).unwrap() - 1.0).abs() < 1e-10);
        let back = pvec_to_rho(&p, &q).unwrap();
        prop_assert!(back.physicality.physical);
        prop_assert!(max_abs(&(back.rho.matrix() - rho.matrix())) < 1e-9);
    }

    #[test]
    fn state_map_is_linear(two_s in 0u32..=4, seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let q = quorum(two_s);
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let a = DensityMatrix::random_mixed(q.spin(), rng);
        let b = DensityMatrix::random_pure(q.spin(), rng);
        let mixed = DensityMatrix::from_matrix(
            a.matrix().map(|z| z * (1.0 - lambda)) + b.matrix().map(|z| z * lambda),
        ).unwrap();
        let pa = rho_to_pvec(&a, &q).unwrap();
        let pb = rho_to_pvec(&b, &q).unwrap();
        let lhs = rho_to_pvec(&mixed, &q).unwrap();
        let rhs = convex_mix(&pa, &pb, lambda).unwrap();
        prop_assert!((lhs.values() - rhs.values()).amax() < 1e-12);
    }

    #[test]
    fn expectation_matches_trace(two_s in 0u32..=4, seed in any::<u64>(), entries in prop::collection::vec(-2.0f64..2.0, 8)) {
        let q = quorum(two_s);
        let d = q.dim();
        let a = hermitian(d, &entries);
        let rho = DensityMatrix::random_mixed(q.spin(), &mut ChaCha8Rng::seed_from_u64(seed));
        let direct = (a.clone() * rho.matrix()).trace().re;
        let coeffs = expand_operator(&a, &q).unwrap();
        let p = rho_to_pvec(&rho, &q).unwrap();
        prop_assert!((expectation(&coeffs, &p).unwrap() - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn generator_is_real_and_conserving(two_s in 0u32..=4, entries in prop::collection::vec(-3.0f64..3.0, 7)) {
        let q = quorum(two_s);
        let h = hermitian(q.dim(), &entries);
        let g = build_generator(&h, &q).unwrap();
        let diag = g.diagnostics();
        prop_assert!(diag.imaginary_residual < 1e-10);
        prop_assert!(diag.conservation_residual < 1e-9);
    }

    #[test]
    fn flow_keeps_physical_bounds_and_commutes_with_mixing(
        two_s in 1u32..=3,
        seed in any::<u64>(),
        entries in prop::collection::vec(-1.0f64..1.0, 5),
        lambda in 0.0f64..=1.0,
        t in 0.0f64..20.0,
    ) {
        let q = quorum(two_s);
        let h = hermitian(q.dim(), &entries);
        let g = build_generator(&h, &q).unwrap();
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let pa = rho_to_pvec(&DensityMatrix::random_pure(q.spin(), rng), &q).unwrap();
        let pb = rho_to_pvec(&DensityMatrix::random_mixed(q.spin(), rng), &q).unwrap();

        let ta = propagate_exact(&g, &pa, t).unwrap();
        prop_assert!(ta.min() >= -1e-8 && ta.max() <= 1.0 + 1e-8);

        let tb = propagate_exact(&g, &pb, t).unwrap();
        let mixed_then_flowed = propagate_exact(&g, &convex_mix(&pa, &pb, lambda).unwrap(), t).unwrap();
        let flowed_then_mixed = convex_mix(&ta, &tb, lambda).unwrap();
        prop_assert!((mixed_then_flowed.values() - flowed_then_mixed.values()).amax() < 1e-9);
    }
}
