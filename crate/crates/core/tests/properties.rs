//! Property-based invariants over seeds, points and parameters.

mod common;

use common::{run_checks, sample_point, with_fibre};
use openwdvv::catalog::{self, parse_complex, varpi_terms};
use openwdvv::exprcore::Point;
use openwdvv::periods::{self, IntegrationPath};
use openwdvv::verify::{self, Target, VerifyConfig};
use openwdvv::C64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reports_depend_only_on_configuration(seed in any::<u64>(), jobs in 1usize..4) {
        let mk = |jobs| VerifyConfig { seed, samples: 3, jobs, ..Default::default() };
        let a = verify::run(&Target::Rank1(catalog::build_saito_a(2).unwrap()), &mk(1)).unwrap();
        let b = verify::run(&Target::Rank1(catalog::build_saito_a(2).unwrap()), &mk(jobs)).unwrap();
        prop_assert_eq!(a.to_json().to_string(), b.to_json().to_string());
    }

    #[test]
    fn open_equations_hold_for_any_seed(seed in any::<u64>(), ell in 1usize..=4) {
        let checks = ["open-r1", "open-r2", "closed-wdvv"];
        for t in [Target::Rank1(catalog::build_saito_a(ell).unwrap()), Target::Rank1(catalog::build_dual_saito_a(ell).unwrap())] {
            let r = run_checks(t, &checks, seed, 2);
            for c in &r.checks {
                prop_assert!(c.max_residual < 1e-8, "{} {}", c.name, c.max_residual);
            }
        }
    }

    #[test]
    fn complex_literals_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
        let text = format!("{re}{im:+}i");
        let z = parse_complex(&text).unwrap();
        prop_assert_eq!(z, C64::new(re, im));
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1(n in 1usize..24, k in 0usize..48) {
        prop_assume!(k < 2 * n);
        let (x, w) = periods::gauss_legendre(n);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
        let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        prop_assert!((s - exact).abs() < 1e-13);
    }

    #[test]
    fn twisted_periods_respect_conjugation(w1 in 0.4f64..1.2, w2 in -1.4f64..-0.5, zr in 2.2f64..4.0, zi in -1.0f64..1.0) {
        let m = catalog::build_dual_saito_a(2).unwrap();
        let p: Point = [("w1".to_string(), C64::new(w1, 0.0)), ("w2".to_string(), C64::new(w2, 0.0))].into();
        let segs = periods::real_segments(&m, &p).unwrap();
        let path: &IntegrationPath = &segs[0];
        let z = C64::new(zr, zi);
        let a = periods::twisted_period(&m, path, z, &p, &[0]).unwrap();
        let b = periods::twisted_period(&m, path, z.conj(), &p, &[0]).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn gauss_manin_relation_holds_at_real_points(w1 in 0.4f64..1.2, w2 in -1.4f64..-0.5, z in 2.3f64..4.0) {
        prop_assume!((w1 + w2).abs() > 0.15 && (w1 - (-(w1 + w2))).abs() > 0.15);
        let m = catalog::build_dual_saito_a(2).unwrap();
        let p: Point = [("w1".to_string(), C64::new(w1, 0.0)), ("w2".to_string(), C64::new(w2, 0.0))].into();
        for path in periods::real_segments(&m, &p).unwrap() {
            let r = periods::gauss_manin_residual(&m, &path, C64::new(z, 0.0), &p).unwrap();
            prop_assert!(r < 1e-9, "{}", r);
        }
    }

    #[test]
    fn euler_field_is_diagonal_in_canonical_frame(seed in 0u64..1000) {
        let m = catalog::build_saito_d(4).unwrap();
        let (_, bd, _) = sample_point(&m, seed);
        prop_assert!(verify::canonical_diag_residual(&bd) < 1e-8);
    }
}

#[test]
fn integration_constant_terms_are_weighted_homogeneous() {
    for ell in 1..=8usize {
        for (ks, num, den) in varpi_terms(ell) {
            let weight: usize = ks.iter().enumerate().map(|(a, k)| (a + 2) * *k as usize).sum();
            assert_eq!(weight, ell + 2);
            assert!(num > 0 && den > 0);
        }
    }
}

/// Whenever the second open equation holds tightly at a point with a
/// non-degenerate fibre second derivative, the first holds too.
#[test]
fn second_open_equation_implies_the_first() {
    let models = [
        catalog::build_saito_a(3).unwrap(),
        catalog::build_dual_saito_a(2).unwrap(),
        catalog::build_dz_a(2, 1).unwrap(),
        catalog::build_ma_zuo(1, 1, 1).unwrap(),
        catalog::fold(catalog::FoldRule::I2, 5).unwrap(),
    ];
    let mut tested = 0;
    for m in &models {
        for seed in 0..12 {
            let (p, bd, x) = sample_point(m, seed);
            let full = with_fibre(&p, m, x);
            let metric = bd.metric.clone().unwrap_or_else(|| nalgebra::DMatrix::zeros(0, 0));
            let c = verify::open_structure(m, &p, &bd.td, &metric).unwrap();
            let (r1, r2) = verify::open_wdvv_residual(m, &full, &c).unwrap();
            let oxx = m.omega.d(&[&m.x, &m.x]).eval(&full).unwrap();
            if r2 < 1e-10 && oxx.norm() > 1e-3 {
                assert!(r1 < 1e-7, "{}: r1 {r1:e} with r2 {r2:e}", m.family);
                tested += 1;
            }
        }
    }
    assert!(tested > 30);
}
