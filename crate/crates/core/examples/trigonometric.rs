//! Extended affine Weyl models: the Dubrovin-Zhang and Ma-Zuo families.

use openwdvv::catalog;
use openwdvv::verify::{run, Target, VerifyConfig};

fn main() -> anyhow::Result<()> {
    let models = [
        catalog::build_dz_a(1, 1)?,
        catalog::build_dz_a(2, 1)?,
        catalog::build_ma_zuo(2, 1, 1)?,
        catalog::build_ma_zuo_general(4, 1, &[1, 1])?,
    ];
    for m in models {
        let name = format!("{} {:?}", m.family, m.chart);
        let report = run(&Target::Rank1(m), &VerifyConfig { seed: 3, samples: 6, ..Default::default() })?;
        let worst = report.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max);
        println!(
            "{name}: {} checks, worst residual {worst:.3e}, all pass = {}",
            report.checks.len(),
            report.all_pass()
        );
    }
    Ok(())
}
