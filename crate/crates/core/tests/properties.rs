mod common;

use covariant_dilation::algebra::{Algebra, BlockAutomorphism, LinearMap};
use covariant_dilation::covariant::Strategy;
use covariant_dilation::cpmaps::verify_transfer;
use covariant_dilation::dilation::{schaffer_dilate, unitary_dilate, verify_isometric_dilation};
use covariant_dilation::dynamics::{ExpectationSpec, TransferSpec};
use covariant_dilation::equivalence::{chain_intertwiner, Verdict};
use covariant_dilation::extension::{coisometric_extend, verify_coisometric_extension, ChainOptions};
use covariant_dilation::fixtures;
use covariant_dilation::numerics::{
    self, orthonormal_span, psd_sqrt, random_complex_matrix, random_unitary, real, spectral_norm, CMat,
};
use covariant_dilation::workbench::scenario::{matrix_value, parse_matrix};
use covariant_dilation::workbench::{self, Command, Scenario};
use covariant_dilation::Tolerance;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn contraction(seed: u64, n: usize, norm: f64) -> CMat {
    let g = random_complex_matrix(n, n, &mut common::rng(seed));
    let s = spectral_norm(&g);
    g * real(norm / s)
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn psd_square_root_squares_back(seed in any::<u64>(), n in 1usize..6) {
        let g = random_complex_matrix(n, n, &mut common::rng(seed));
        let p = &g * g.adjoint();
        let s = psd_sqrt(&p, &Tolerance::default()).unwrap();
        prop_assert!(numerics::diff_norm(&(&s * &s), &p) <= 1e-10 * (1.0 + spectral_norm(&p)));
        prop_assert!(numerics::diff_norm(&s, &s.adjoint()) <= 1e-12);
    }

    #[test]
    fn orthonormal_span_is_orthonormal_and_spans(seed in any::<u64>(), n in 1usize..7, k in 1usize..5) {
        let mut r = common::rng(seed);
        let base = random_complex_matrix(n, k.min(n), &mut r);
        // repeat columns so the input is rank deficient
        let mut v = CMat::zeros(n, 2 * base.ncols());
        v.columns_mut(0, base.ncols()).copy_from(&base);
        v.columns_mut(base.ncols(), base.ncols()).copy_from(&(&base * real(2.0)));
        let (q, rank) = orthonormal_span(&v, &Tolerance::default()).unwrap();
        prop_assert_eq!(rank, base.ncols());
        prop_assert!(numerics::diff_norm(&(q.adjoint() * &q), &CMat::identity(rank, rank)) <= 1e-12);
        prop_assert!(spectral_norm(&(&v - &q * (q.adjoint() * &v))) <= 1e-10);
    }

    #[test]
    fn spectral_norm_matches_svd(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let m = random_complex_matrix(rows, cols, &mut common::rng(seed));
        let svd = m.clone().svd(false, false).singular_values.max();
        prop_assert!((spectral_norm(&m) - svd).abs() <= 1e-10 * svd.max(1.0));
    }

    #[test]
    fn complex_matrices_round_trip_through_json(seed in any::<u64>(), rows in 1usize..4, cols in 1usize..4) {
        let m = random_complex_matrix(rows, cols, &mut common::rng(seed));
        let text = serde_json::to_string(&matrix_value(&m)).unwrap();
        let back = parse_matrix(&serde_json::from_str(&text).unwrap(), "$").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn inverse_automorphism_is_a_transfer_operator(seed in any::<u64>()) {
        let tol = Tolerance::default();
        let mut r = common::rng(seed);
        let alg = Algebra::new(vec![2, 1, 2]).unwrap();
        let us = vec![random_unitary(2, &mut r), random_unitary(1, &mut r), random_unitary(2, &mut r)];
        let aut = BlockAutomorphism::new(alg, vec![2, 1, 0], us, &tol).unwrap();
        let inv = aut.inverse();
        let rep = verify_transfer(&inv, &aut, &tol).unwrap();
        prop_assert!(rep.passed, "{:?}", rep);
        prop_assert!(rep.left_inverse_residual <= 1e-12);
        let _ = inv.source();
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn schaffer_dilation_of_matrix_contractions(seed in any::<u64>(), n in 1usize..5, norm in 0.0f64..=1.0, copies in 1usize..4) {
        let tol = Tolerance::default();
        let t = contraction(seed, n, norm);
        let pair = fixtures::matrix_pair(t.clone(), &tol).unwrap();
        let rec = schaffer_dilate(&pair, copies, &tol).unwrap();
        let rep = verify_isometric_dilation(&rec, &pair, &tol).unwrap();
        prop_assert!(rep.passed, "{:?}", rep);
        prop_assert_eq!(rep.span_rank, rep.dim);
        // the H corner of W is T itself
        prop_assert!(numerics::diff_norm(&rec.op.view((0, 0), (n, n)).into_owned(), &t) == 0.0);
    }

    #[test]
    fn chains_over_random_pairs_are_coisometric_extensions(seed in any::<u64>(), levels in 1usize..4, gns in any::<bool>()) {
        let tol = Tolerance::default();
        let pair = fixtures::random_finite_pair(&mut common::rng(seed), &tol).unwrap();
        let strategy = if gns {
            Strategy::Gns(ExpectationSpec::Identity)
        } else {
            Strategy::Adapted(TransferSpec::Inverse)
        };
        let chain = coisometric_extend(&pair, &ChainOptions::new(levels, strategy), &tol).unwrap();
        let rep = verify_coisometric_extension(&chain, &tol).unwrap();
        prop_assert!(rep.passed, "{:?}", rep);
        prop_assert_eq!(rep.block_dims.len(), levels + 1);
        prop_assert!(rep.restriction_v <= 1e-12 && rep.restriction_rho <= 1e-12);
    }

    #[test]
    fn unitary_dilations_reproduce_powers(seed in any::<u64>(), levels in 1usize..4, copies in 1usize..4) {
        let tol = Tolerance::default();
        let pair = fixtures::random_finite_pair(&mut common::rng(seed), &tol).unwrap();
        let opts = ChainOptions::new(levels, Strategy::Adapted(TransferSpec::Inverse));
        let ud = unitary_dilate(&pair, &opts, copies, &tol).unwrap();
        prop_assert!(ud.report.passed, "{:?}", ud.report);
        prop_assert_eq!(ud.report.dilation.len(), levels.min(copies) + 1);
    }

    #[test]
    fn reseeding_an_adapted_chain_gives_an_equivalent_chain(seed in any::<u64>(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let tol = Tolerance::default();
        let mut r = common::rng(seed);
        let pair = if seed % 3 == 0 {
            fixtures::random_tower_pair(&mut r, &tol).unwrap()
        } else {
            fixtures::random_finite_pair(&mut r, &tol).unwrap()
        };
        let strategy = if pair.dynamics().is_tower() {
            Strategy::Adapted(TransferSpec::Phi(CMat::identity(2, 2) * real(0.5)))
        } else {
            Strategy::Adapted(TransferSpec::Inverse)
        };
        let c1 = coisometric_extend(&pair, &ChainOptions::new(2, strategy.clone()).with_seed(s1), &tol).unwrap();
        let c2 = coisometric_extend(&pair, &ChainOptions::new(2, strategy).with_seed(s2), &tol).unwrap();
        let cert = chain_intertwiner(&c1, &c2, &tol).unwrap();
        prop_assert_eq!(cert.verdict, Verdict::Equivalent, "{:?}", cert.residuals);
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn reports_are_deterministic(demo in 0usize..3, cmd in 0usize..5, seed in any::<u64>()) {
        let mut raw = workbench::demo_scenario(workbench::DEMOS[demo]).unwrap();
        raw.seed = Some(seed);
        let command = [Command::Check, Command::Extend, Command::Dilate, Command::Unitary, Command::Matricial][cmd];
        let a = workbench::run(&Scenario::from_raw(raw.clone()).unwrap(), command).unwrap().to_json();
        let b = workbench::run(&Scenario::from_raw(raw).unwrap(), command).unwrap().to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn exit_status_follows_the_clauses(demo in 0usize..3, cmd in 0usize..5) {
        let raw = workbench::demo_scenario(workbench::DEMOS[demo]).unwrap();
        let command = [Command::Check, Command::Extend, Command::Dilate, Command::Unitary, Command::Matricial][cmd];
        let rep = workbench::run(&Scenario::from_raw(raw).unwrap(), command).unwrap();
        let all = rep.clauses.iter().all(|c| c.residual <= c.threshold);
        prop_assert_eq!(rep.passed, all);
        prop_assert_eq!(rep.exit_code() == 0, all);
        prop_assert!(!rep.clauses.is_empty());
        prop_assert!(rep.clauses.iter().all(|c| !c.anchor.is_empty()));
    }
}
