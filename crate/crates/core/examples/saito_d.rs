//! Type-D Saito structure: checks that do not need a flat chart.

use openwdvv::catalog;
use openwdvv::verify::{run, Target, VerifyConfig};

fn main() -> anyhow::Result<()> {
    let m = catalog::build_saito_d(4)?;
    let report = run(&Target::Rank1(m), &VerifyConfig { seed: 11, samples: 8, ..Default::default() })?;
    println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    Ok(())
}
