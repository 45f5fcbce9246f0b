//! Type-A Saito structure: integration constant and open WDVV verification.

use openwdvv::catalog;
use openwdvv::verify::{run, Target, VerifyConfig};

fn main() -> anyhow::Result<()> {
    for ell in 1..=4 {
        println!("ell = {ell}: varpi = {}", catalog::format_varpi(ell));
    }
    let m = catalog::build_saito_a(3)?;
    let report = run(&Target::Rank1(m), &VerifyConfig { seed: 1, samples: 5, ..Default::default() })?;
    println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    Ok(())
}
