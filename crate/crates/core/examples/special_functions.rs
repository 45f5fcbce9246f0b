//! Polylogarithms, Jacobi theta and the heat equation it satisfies.

use openwdvv::specfn::{li, theta1, ThetaContext};
use openwdvv::C64;

fn main() -> anyhow::Result<()> {
    let half = C64::new(0.5, 0.0);
    println!("Li2(1/2) = {:.15}", li(2, half).re);
    println!("Li3(1/2) = {:.15}", li(3, half).re);
    let tau = C64::new(0.3, 1.0);
    let ctx = ThetaContext::new(tau)?;
    let x = C64::new(0.2, 0.1);
    let h = 1e-5;
    let dtau = (theta1(0, x, &ThetaContext::new(tau + h)?) - theta1(0, x, &ThetaContext::new(tau - h)?)) / (2.0 * h);
    let heat = C64::new(0.0, 4.0 * std::f64::consts::PI) * dtau - theta1(2, x, &ctx);
    println!("theta1(x, tau) = {:.12}", theta1(0, x, &ctx));
    println!("|4 pi i d_tau theta - theta''| = {:.2e} (central difference in tau)", heat.norm());
    Ok(())
}
