//! Dual type-A structure: open WDVV, the constancy of K_ab and the intersection form.

use openwdvv::catalog;
use openwdvv::verify::{run, Target, VerifyConfig};

fn main() -> anyhow::Result<()> {
    for ell in 1..=3 {
        let m = catalog::build_dual_saito_a(ell)?;
        if let Some(g) = &m.metric {
            println!("ell = {ell}: g^ab = {}", g.map(|z| z.re));
        }
        let report = run(&Target::Rank1(m), &VerifyConfig { seed: 42, samples: 10, ..Default::default() })?;
        for c in &report.checks {
            println!("  {:<16} {:.3e}  {}", c.name, c.max_residual, if c.pass { "pass" } else { "FAIL" });
        }
    }
    Ok(())
}
