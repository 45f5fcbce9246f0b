//! Rank-two extension of the type-A open solution over the fibre coordinates (z, w).

use openwdvv::catalog::{self, PsiChoice};
use openwdvv::verify::{run, Target, VerifyConfig};

fn main() -> anyhow::Result<()> {
    for ell in [2, 3] {
        let b = catalog::build_rank2_a(ell, PsiChoice::Standard)?;
        let report = run(&Target::Rank2(b), &VerifyConfig { seed: 9, samples: 6, ..Default::default() })?;
        println!("ell = {ell}");
        for c in &report.checks {
            println!("  {:<16} {:.3e}  {}", c.name, c.max_residual, if c.pass { "pass" } else { "FAIL" });
        }
    }
    Ok(())
}
