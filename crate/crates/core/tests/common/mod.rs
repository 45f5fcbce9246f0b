//! Shared helpers for the integration tests: seeded runs, sample points and
//! one deliberate perturbation per check name.

#![allow(dead_code)]

use openwdvv::catalog::{self, ModelBundle, PsiChoice};
use openwdvv::exprcore::{Expr, Jet, Point, VectorField};
use openwdvv::periods;
use openwdvv::verify::{self, BaseData, ResidualReport, Target, VerifyConfig};
use openwdvv::C64;
use rand::SeedableRng;

/// Runs the named checks with a fixed seed.
pub fn run_checks(t: Target, checks: &[&str], seed: u64, samples: usize) -> ResidualReport {
    let cfg = VerifyConfig {
        seed,
        samples,
        checks: Some(checks.iter().map(|s| s.to_string()).collect()),
        ..Default::default()
    };
    verify::run(&t, &cfg).expect("verification run")
}

pub fn residual(r: &ResidualReport, name: &str) -> f64 {
    r.check(name).expect("check present").max_residual
}

pub fn var(s: &str) -> Expr {
    Expr::var(s)
}

/// An admissible base point with its frame data and a fibre coordinate.
pub fn sample_point(m: &ModelBundle, seed: u64) -> (Point, BaseData, C64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let p = verify::draw_base(&m.sampler, &mut rng);
        if let Ok(bd) = verify::base_data(m, &p) {
            let x = verify::draw_x(m, &p, &mut rng).expect("fibre point");
            return (p, bd, x);
        }
    }
}

pub fn with_fibre(p: &Point, m: &ModelBundle, x: C64) -> Point {
    let mut full = p.clone();
    full.insert(m.x.clone(), x);
    full
}

/// Real parameters with well-separated real zeros for the ell = 2 dual model.
pub fn real_point_ell2() -> Point {
    [("w1".to_string(), C64::new(0.7, 0.0)), ("w2".to_string(), C64::new(-1.2, 0.0))].into()
}

/// Largest Gauss-Manin residual over all segments and tested exponents.
pub fn worst_gauss_manin(m: &ModelBundle, fstar: &Expr, p: &Point) -> f64 {
    let mut worst: f64 = 0.0;
    for path in periods::real_segments(m, p).unwrap() {
        for z in periods::EXPONENTS {
            let (r, _) = periods::gauss_manin_residual_with(m, fstar, &path, C64::new(z, 0.0), p).unwrap();
            worst = worst.max(r);
        }
    }
    worst
}

fn zero_fibre_component(m: &mut ModelBundle) {
    let comps = m
        .eventual
        .components
        .iter()
        .map(|(k, e)| (k.clone(), if *k == m.x { Expr::zero() } else { e.clone() }))
        .collect();
    m.eventual = VectorField::new(comps);
}

fn scaled_fstar(m: ModelBundle, factor: f64) -> ModelBundle {
    let f = m.fstar.as_ref().unwrap().base().clone() * Expr::real(factor);
    m.with_fstar(f)
}

fn one(t: Target, check: &str) -> f64 {
    residual(&run_checks(t, &[check], 17, 4), check)
}

/// Residual of `check` after the documented perturbation of its ingredients.
pub fn perturbed_residual(check: &str) -> f64 {
    match check {
        "omega-x" => {
            let m = catalog::build_saito_a(2).unwrap();
            let om = m.omega.base().clone() + var("x").powi(2);
            one(Target::Rank1(m.with_omega(om)), check)
        }
        "closed-wdvv" => {
            let m = catalog::build_saito_a(3).unwrap();
            let (p, bd, _) = sample_point(&m, 3);
            let c = verify::open_structure(&m, &p, &bd.td, &nalgebra::DMatrix::zeros(0, 0)).unwrap();
            let mut bad = c.clone();
            bad.set(0, 0, 1, c.get(0, 0, 1) + 0.05);
            bad.set(0, 1, 0, c.get(0, 1, 0) + 0.05);
            verify::closed_wdvv_residual(&bad)
        }
        "open-r1" => {
            let m = catalog::build_dual_saito_a(2).unwrap();
            let (p, bd, x) = sample_point(&m, 5);
            let c = verify::open_structure(&m, &p, &bd.td, bd.metric.as_ref().unwrap()).unwrap();
            let mut bad = c.clone();
            bad.set(1, 0, 0, c.get(1, 0, 0) * 1.05 + 0.05);
            verify::open_wdvv_residual(&m, &with_fibre(&p, &m, x), &bad).unwrap().0
        }
        "open-r2" => {
            let m = catalog::build_saito_a_with_varpi(2, Expr::zero()).unwrap();
            one(Target::Rank1(m), check)
        }
        "kab-spread" | "kab-mean" => {
            let m = catalog::build_dual_saito_a(2).unwrap();
            let om = m.omega.base().clone() + Expr::real(0.2) * var("x").powi(2) * var("w1");
            one(Target::Rank1(m.with_omega(om)), check)
        }
        "h-lambda" => {
            let mut m = catalog::build_saito_a(3).unwrap();
            m.d += 0.1;
            one(Target::Rank1(m), check)
        }
        "h-omega" => {
            let m = catalog::build_dual_saito_a(2).unwrap();
            let om = m.omega.base().clone() + Expr::real(0.1) * var("x").powi(3);
            one(Target::Rank1(m.with_omega(om)), check)
        }
        "eventual-e1" | "product" => {
            let mut m = catalog::build_dual_saito_a(2).unwrap();
            zero_fibre_component(&mut m);
            one(Target::Rank1(m), check)
        }
        "eventual-e2" | "dual-product" => {
            let m = scaled_fstar(catalog::build_dual_saito_a(3).unwrap(), 1.01);
            one(Target::Rank1(m), check)
        }
        "canonical-diag" => {
            let m = catalog::build_saito_d(4).unwrap();
            let (_, mut bd, _) = sample_point(&m, 8);
            bd.jinv[(0, 1)] += C64::new(0.05, 0.0);
            verify::canonical_diag_residual(&bd)
        }
        "metric-const" => {
            let mut m = catalog::build_dual_saito_a(2).unwrap();
            m.metric = m.metric.map(|g| g * C64::new(1.01, 0.0));
            one(Target::Rank1(m), check)
        }
        "rank2-f1" | "rank2-f2" | "rank2-f3" | "rank2-f4" | "rank2-restrict" => {
            let mut b = catalog::build_rank2_a(3, PsiChoice::Standard).unwrap();
            b.phi = Jet::new(b.phi.base().clone() + Expr::real(0.1) * var("v1") * var("z").powi(2));
            one(Target::Rank2(b), check)
        }
        "gauss-manin" => {
            let m = catalog::build_dual_saito_a(2).unwrap();
            let f = m.fstar.as_ref().unwrap().base().clone();
            let cubic = f + Expr::real(0.01) * (var("w1").powi(3) + var("w2").powi(3));
            worst_gauss_manin(&m, &cubic, &real_point_ell2())
        }
        "period-doubling" => {
            let f = |x: C64| Ok(vec![(x * 40.0).sin()]);
            periods::integrate(&f, C64::new(0.0, 0.0), C64::new(3.0, 0.0), 1, 2, 10.0).unwrap().doubling
        }
        "jacobi-logtheta" => {
            let (tau, x) = (C64::new(0.3, 1.0), C64::new(0.21, 0.13));
            let (lhs, _) = verify::log_theta_sides(x, tau).unwrap();
            let (_, rhs) = verify::log_theta_sides(x + 0.01, tau).unwrap();
            verify::log_defect(lhs, rhs)
        }
        "jacobi-heat" => {
            let (tau, x) = (C64::new(0.3, 1.0), C64::new(0.21, 0.13));
            let (dtau, _) = verify::heat_sides(x, tau);
            let (_, second) = verify::heat_sides(x, tau + C64::new(0.0, 0.05));
            (dtau - second).norm() / second.norm().max(1.0)
        }
        other => panic!("no perturbation registered for `{other}`"),
    }
}
