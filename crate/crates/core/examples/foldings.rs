//! Foldings of the type-A structure to B_2 and I_2(4) and their open WDVV residuals.

use openwdvv::catalog::{self, FoldRule};
use openwdvv::verify::{run, Target, VerifyConfig};

fn main() -> anyhow::Result<()> {
    for (rule, ell) in [(FoldRule::B, 2), (FoldRule::I2, 4)] {
        let m = catalog::fold(rule, ell)?;
        let label = format!("{} ell={ell} chart {:?}", m.family, m.chart);
        let report = run(&Target::Rank1(m), &VerifyConfig { seed: 2, samples: 6, ..Default::default() })?;
        let r1 = report.check("open-r1").map_or(f64::NAN, |c| c.max_residual);
        let r2 = report.check("open-r2").map_or(f64::NAN, |c| c.max_residual);
        println!("{label}: r1 = {r1:.3e}, r2 = {r2:.3e}, all pass = {}", report.all_pass());
    }
    Ok(())
}
