//! Jacobi-group orbit space of type A: open WDVV and the theta-function identities.

use openwdvv::catalog;
use openwdvv::verify::{run, Target, VerifyConfig};
use openwdvv::C64;

fn main() -> anyhow::Result<()> {
    for tau in [C64::new(0.0, 1.0), C64::new(0.3, 1.0)] {
        let m = catalog::build_jacobi_a(1, tau)?;
        let report = run(&Target::Rank1(m), &VerifyConfig { seed: 5, samples: 4, ..Default::default() })?;
        println!("tau = {tau}");
        for c in &report.checks {
            println!("  {:<16} {:.3e}  {}", c.name, c.max_residual, if c.pass { "pass" } else { "FAIL" });
        }
    }
    Ok(())
}
