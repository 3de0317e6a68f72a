mod common;

use neqsteady_core::currents::{detailed_balance_test, level_balance, micro_currents};
use neqsteady_core::dynamics::{evolve, DensityMatrix};
use neqsteady_core::kms::{beta_profile, ddb_symmetry_defect, local_kms_residual, max_basis_residual, KMS_TIMES};
use neqsteady_core::linalg::{frobenius, hermitian_eigenvalues, random_density_matrix, random_matrix, trace};
use neqsteady_core::linear::{entropy_production, SymmetricPoint, TwoBathModel};
use neqsteady_core::model::{ReservoirSpec, SystemSpec};
use neqsteady_core::rates::LambShift;
use neqsteady_core::report::{fmt_g17, read_density_matrix, write_density_matrix};
use proptest::prelude::*;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn state_generator_preserves_trace_and_hermiticity(seed in any::<u64>(), n in 2usize..=5) {
        let mut r = rng(seed);
        let s = two_bath_instance(&mut r, n, LambShift::None);
        let rho = random_density_matrix(&mut r, n);
        let d = s.ops.apply_state(&rho);
        prop_assert!(trace(&d).norm() < 1e-14);
        prop_assert!(frobenius(&(&d - d.adjoint())) < 1e-14);
        let x = random_matrix(&mut r, n);
        let lhs = s.ops.apply_state(&x.adjoint());
        prop_assert!(frobenius(&(lhs - s.ops.apply_state(&x).adjoint())) < 1e-13);
    }

    #[test]
    fn birth_death_columns_sum_to_zero(seed in any::<u64>(), n in 2usize..=5) {
        let s = two_bath_instance(&mut rng(seed), n, LambShift::None);
        let a = s.ops.birth_death().matrix();
        let scale = a.amax();
        for c in s.ops.birth_death().column_sums() {
            prop_assert!(c.abs() <= 1e-14 * scale);
        }
        for m in 0..n {
            for l in 0..n {
                let sign_ok = if m == l { a[(m, l)] >= 0.0 } else { a[(m, l)] <= 0.0 };
                prop_assert!(sign_ok, "A[{}, {}] = {}", m, l, a[(m, l)]);
            }
        }
    }

    #[test]
    fn single_bath_relaxes_to_gibbs(seed in any::<u64>(), n in 2usize..=5, beta in 0.1f64..4.0) {
        let s = equilibrium_instance(&mut rng(seed), n, beta);
        let want = gibbs(s.system.levels(), beta);
        for (p, g) in s.rho.populations().iter().zip(&want) {
            prop_assert!((p - g).abs() < 1e-12);
        }
        prop_assert!(s.report.db_satisfied);
        prop_assert!(detailed_balance_test(&s.rates, &s.rho).max_defect < 1e-12);
    }

    #[test]
    fn stationary_currents_balance_per_level(seed in any::<u64>(), n in 2usize..=5) {
        let s = two_bath_instance(&mut rng(seed), n, LambShift::Pv);
        for jm in &s.report.level_balance {
            prop_assert!(jm.abs() < 1e-14);
        }
        prop_assert!(s.report.total_energy_flow.abs() < 1e-14);
    }

    #[test]
    fn balance_identities_hold_for_any_diagonal_state(seed in any::<u64>(), n in 2usize..=5) {
        let mut r = rng(seed);
        let s = two_bath_instance(&mut r, n, LambShift::None);
        let p: Vec<f64> = {
            let raw: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, 0.01..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.iter().map(|x| x / z).collect()
        };
        let rho = DensityMatrix::from_populations(&p).unwrap();
        let report = micro_currents(&s.rates, &rho);
        prop_assert!(level_balance(&report, &s.ops, &rho).max_abs() < 1e-14);
    }

    #[test]
    fn symmetry_defect_paths_agree(seed in any::<u64>(), n in 2usize..=5) {
        let mut r = rng(seed);
        let s = two_bath_instance(&mut r, n, LambShift::Pv);
        let x = random_matrix(&mut r, n);
        let y = random_matrix(&mut r, n);
        let d = ddb_symmetry_defect(&s.ops, &s.report, s.rho.matrix(), &x, &y).unwrap();
        prop_assert!(d.discrepancy() < 1e-13 * frobenius(&x) * frobenius(&y));
    }

    #[test]
    fn evolution_stays_a_state(seed in any::<u64>(), n in 2usize..=4, t in 0.0f64..20.0) {
        let mut r = rng(seed);
        let s = two_bath_instance(&mut r, n, LambShift::Pv);
        let rho0 = DensityMatrix::new(random_density_matrix(&mut r, n)).unwrap();
        let rho = evolve(&s.ops, &rho0, t).unwrap();
        prop_assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-12);
        prop_assert!(hermitian_eigenvalues(rho.matrix()).iter().all(|&e| e > -1e-12));
    }

    #[test]
    fn entropy_production_is_nonnegative(
        seed in any::<u64>(),
        beta0 in 0.4f64..2.5,
        mu0 in -1.0f64..-0.05,
        dbeta in -0.1f64..0.1,
        dmu in -0.1f64..0.1,
    ) {
        let mut r = rng(seed);
        let levels = random_levels(&mut r, 3);
        let model = TwoBathModel::from_parts(levels, random_dipole(&mut r, 3), random_ohmic(&mut r), LambShift::None).unwrap();
        let point = SymmetricPoint { beta0, dbeta, mu0, dmu };
        let sol = model.solve(&point).unwrap();
        let inverted = sol.rho.populations().windows(2).any(|w| w[1] > w[0]);
        prop_assume!(!inverted);
        let mut total = 0.0;
        for f in sol.fluxes() {
            let sigma = entropy_production(f.number, f.heat, beta0, dbeta, dmu);
            prop_assert!(sigma >= -1e-14, "pair ({}, {}): {sigma:e}", f.upper, f.lower);
            total += sigma;
        }
        prop_assert!(total >= -1e-14);
    }

    #[test]
    fn fmt_g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_g17(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        prop_assert!(s.len() <= 24);
    }

    #[test]
    fn density_matrix_files_round_trip(seed in any::<u64>(), n in 1usize..=6) {
        let m = random_matrix(&mut rng(seed), n);
        let mut buf = Vec::new();
        write_density_matrix(&m, &mut buf).unwrap();
        prop_assert_eq!(read_density_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn beta_profile_reconstructs_the_populations(
        raw in prop::collection::vec(0.001f64..1.0, 2..=6),
        offset in 0.1f64..3.0,
        seed in any::<u64>(),
    ) {
        let z: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let levels: Vec<f64> = random_levels(&mut rng(seed), p.len()).iter().map(|e| e + offset).collect();
        let prof = beta_profile(&p, &levels).unwrap();
        prop_assert!((prof.z - 1.0).abs() < 1e-13);
        let rho = prof.reconstruct();
        for (l, pl) in p.iter().enumerate() {
            prop_assert!((rho[(l, l)].re - pl).abs() < 1e-14);
        }
        let state = neqsteady_core::linalg::diag(&p);
        prop_assert!(max_basis_residual(&state, &prof, &KMS_TIMES) < 1e-13);
    }

    #[test]
    fn local_kms_holds_for_stationary_states(seed in any::<u64>(), n in 2usize..=4) {
        let mut r = rng(seed);
        let s = two_bath_instance(&mut r, n, LambShift::None);
        let levels: Vec<f64> = s.system.levels().iter().map(|e| e + 0.5).collect();
        let prof = beta_profile(&s.rho.populations(), &levels).unwrap();
        let x = random_matrix(&mut r, n);
        let y = random_matrix(&mut r, n);
        prop_assert!(local_kms_residual(s.rho.matrix(), &prof, &x, &y, 0.4).norm() < 1e-12 * frobenius(&x) * frobenius(&y));
    }
}

#[test]
fn two_level_ratio_with_chemical_potential() {
    let mut r = rng(77);
    for _ in 0..10 {
        let levels = random_levels(&mut r, 2);
        let beta = rand::Rng::random_range(&mut r, 0.3..3.0);
        let mu = rand::Rng::random_range(&mut r, -1.0..0.0);
        let system = SystemSpec::new(levels.clone(), vec![random_dipole(&mut r, 2)]).unwrap();
        let bath = ReservoirSpec::equilibrium(beta, mu, random_ohmic(&mut r));
        let s = solve(system, vec![bath], LambShift::None);
        let p = s.rho.populations();
        let want = (-beta * (levels[1] - levels[0] - mu)).exp();
        assert!((p[1] / p[0] - want).abs() < 1e-13 * want);
        assert!(s.report.db_satisfied);
    }
}
