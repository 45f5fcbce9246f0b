//! Every check family must detect a deliberate perturbation of its
//! ingredients: the residual has to exceed `1e-3`.

mod common;

use common::{perturbed_residual, real_point_ell2, residual, run_checks, var, worst_gauss_manin};
use openwdvv::catalog;
use openwdvv::exprcore::Expr;
use openwdvv::verify::{Target, CHECK_NAMES};

const DETECT: f64 = 1e-3;

#[test]
fn every_check_detects_its_perturbation() {
    for name in CHECK_NAMES {
        let r = perturbed_residual(name);
        assert!(r > DETECT, "{name}: perturbed residual {r:e}");
    }
}

#[test]
fn zero_integration_constant_breaks_r2_strongly() {
    let m = catalog::build_saito_a_with_varpi(2, Expr::zero()).unwrap();
    let r = run_checks(Target::Rank1(m), &["open-r2"], 3, 10);
    assert!(residual(&r, "open-r2") > 1e-2);
}

#[test]
fn scaled_integration_constant_is_detected() {
    let varpi = catalog::build_varpi_a(3) * Expr::real(1.1);
    let m = catalog::build_saito_a_with_varpi(3, varpi).unwrap();
    let r = run_checks(Target::Rank1(m), &["open-r2"], 3, 4);
    assert!(residual(&r, "open-r2") > DETECT);
}

#[test]
fn coefficient_formula_without_power_of_coxeter_number_fails_at_ell_four() {
    let v = |i: usize| var(&format!("v{i}"));
    let varpi = Expr::real(1.0 / 30.0) * v(1).powi(3)
        + Expr::real(1.0 / 5.0) * v(1) * v(3)
        + Expr::real(1.0 / 10.0) * v(2).powi(2);
    let m = catalog::build_saito_a_with_varpi(4, varpi).unwrap();
    let r = run_checks(Target::Rank1(m), &["open-r1", "open-r2"], 3, 4);
    assert!(residual(&r, "open-r1").max(residual(&r, "open-r2")) > DETECT);
}

#[test]
fn trigonometric_model_needs_its_integration_constant() {
    let m = catalog::build_dz_a(2, 1).unwrap();
    let half_squares = Expr::real(0.5) * Expr::sum(m.chart.iter().map(|c| var(c).powi(2)).collect());
    let om = m.omega.base().clone() - half_squares;
    let r = run_checks(Target::Rank1(m.with_omega(om)), &["open-r2"], 3, 4);
    assert!(residual(&r, "open-r2") > DETECT);
}

#[test]
fn spurious_mixed_term_in_dual_extension_is_detected() {
    let m = catalog::build_dz_a(1, 1).unwrap();
    let om = m.omega.base().clone() + Expr::real(0.3) * var("x") * var("w1").powi(2);
    let r = run_checks(Target::Rank1(m.with_omega(om)), &["open-r2"], 3, 4);
    assert!(residual(&r, "open-r2") > DETECT);
}

#[test]
fn shifted_charge_breaks_eventual_identity() {
    let mut m = catalog::build_dz_a(2, 1).unwrap();
    m.d += 0.1;
    let r = run_checks(Target::Rank1(m), &["eventual-e1"], 3, 4);
    assert!(residual(&r, "eventual-e1") > DETECT);
}

#[test]
fn one_percent_dual_prepotential_breaks_gauss_manin() {
    let m = catalog::build_dual_saito_a(2).unwrap();
    let p = real_point_ell2();
    let f = m.fstar.as_ref().unwrap().base().clone();
    assert!(worst_gauss_manin(&m, &f, &p) < 1e-10);
    let scaled = f.clone() * Expr::real(1.01);
    assert!(worst_gauss_manin(&m, &scaled, &p) > DETECT);
    let cubic = f + Expr::real(0.01) * (var("w1").powi(3) + var("w2").powi(3));
    assert!(worst_gauss_manin(&m, &cubic, &p) > 1e-2);
}
