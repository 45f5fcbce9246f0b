//! Twisted periods of the dual type-A structure and the Gauss-Manin relation.

use openwdvv::catalog;
use openwdvv::exprcore::Point;
use openwdvv::periods::{gauss_manin_residual, real_segments, twisted_period};
use openwdvv::C64;

fn main() -> anyhow::Result<()> {
    let m = catalog::build_dual_saito_a(2)?;
    let p: Point = [("w1".to_string(), C64::new(0.7, 0.0)), ("w2".to_string(), C64::new(-1.2, 0.0))].into();
    for path in real_segments(&m, &p)? {
        let (a, b) = (path.waypoints[0].re, path.waypoints[1].re);
        for z in [2.5, 3.0, 3.5] {
            let z = C64::new(z, 0.0);
            let w = twisted_period(&m, &path, z, &p, &[])?;
            let r = gauss_manin_residual(&m, &path, z, &p)?;
            println!("[{a:+.3}, {b:+.3}] z = {}: period = {:.10e}, residual = {r:.2e}", z.re, w.re);
        }
    }
    Ok(())
}
