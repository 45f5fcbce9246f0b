//! Frobenius data from a superpotential by residues: critical points, canonical
//! coordinates, the metric and the structure constants.

use openwdvv::catalog;
use openwdvv::exprcore::Point;
use openwdvv::geometry::{critical_points, residue_data};
use openwdvv::C64;

fn main() -> anyhow::Result<()> {
    let m = catalog::build_saito_a(3)?;
    let p: Point = m.chart.iter().enumerate().map(|(i, c)| (c.clone(), C64::new(0.3 + 0.2 * i as f64, 0.1))).collect();
    let frame = critical_points(&m, &p)?;
    for g in &frame.groups {
        println!("critical value u = {:.6}  at {:?}", g.u, g.points);
    }
    let td = residue_data(&m, &p, &frame, true)?;
    let tidy = |z: C64| (z.re * 1e12).round() / 1e12 + 0.0;
    println!("eta = {}", td.eta.map(tidy));
    println!("c_abc = {:?}", td.c.iter().map(|z| tidy(*z)).collect::<Vec<_>>());
    Ok(())
}
