//! Twisted periods of the dual type-A bundle and the Gauss-Manin relation.
//!
//! For real parameters the superpotential is real on the real axis with
//! simple real zeros; the straight segments between adjacent zeros serve as
//! integration cycles. For `Re z > 2` the differentiated integrands vanish at
//! the endpoints, so parameter derivatives pass under the integral sign. A
//! constant phase `sign(lambda)^z` per segment multiplies every period of
//! that segment alike and is dropped. Quadrature is adaptive Gauss-Legendre
//! after a polynomial change of variables that clusters nodes at both ends.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::ModelBundle;
use crate::error::{Error, Result};
use crate::exprcore::{Evaluator, Expr, Point};

/// Straight integration path between two waypoints with a base node count.
#[derive(Clone, Debug)]
pub struct IntegrationPath {
    pub waypoints: Vec<C64>,
    pub nodes: usize,
}

impl IntegrationPath {
    pub fn segment(a: C64, b: C64) -> Self {
        IntegrationPath { waypoints: vec![a, b], nodes: 16 }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Map `[0, 1] -> [0, 1]` with derivative `140 s^3 (1 - s)^3`.
fn cluster(s: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let phi = s4 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s3);
    let om = 1.0 - s;
    (phi, 140.0 * s3 * om * om * om)
}

type VecFn<'a> = dyn Fn(C64) -> Result<Vec<C64>> + 'a;

fn panel(f: &VecFn, a: C64, b: C64, lo: f64, hi: f64, rule: &(Vec<f64>, Vec<f64>), dim: usize) -> Result<Vec<C64>> {
    let mut acc = vec![C64::new(0.0, 0.0); dim];
    let half = (hi - lo) / 2.0;
    let mid = (hi + lo) / 2.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        let s = mid + half * x;
        let (phi, dphi) = cluster(s);
        let t = a + (b - a) * phi;
        let vals = f(t)?;
        let jac = (b - a) * dphi * half * w;
        for (slot, v) in acc.iter_mut().zip(vals) {
            *slot += v * jac;
        }
    }
    Ok(acc)
}

fn vmax(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Result of an adaptive quadrature with its convergence certificate.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub values: Vec<C64>,
    /// Largest change of any component when every panel uses twice the nodes.
    pub doubling: f64,
    pub panels: usize,
}

/// Integrates a vector-valued function along a segment to tolerance `tol`
/// (relative to `max(1, |values|)`).
pub fn integrate(f: &VecFn, a: C64, b: C64, dim: usize, nodes: usize, tol: f64) -> Result<Quadrature> {
    let base = gauss_legendre(nodes);
    let fine = gauss_legendre(2 * nodes);
    let finest = gauss_legendre(4 * nodes);
    let mut stack = vec![(0.0f64, 1.0f64, 0u32)];
    let mut accepted: Vec<(f64, f64, Vec<C64>)> = Vec::new();
    let mut coarse_total = vec![C64::new(0.0, 0.0); dim];
    let scale_guess = {
        let v = panel(f, a, b, 0.0, 1.0, &fine, dim)?;
        vmax(&v).max(1.0)
    };
    while let Some((lo, hi, depth)) = stack.pop() {
        let c = panel(f, a, b, lo, hi, &base, dim)?;
        let d = panel(f, a, b, lo, hi, &fine, dim)?;
        let err = c.iter().zip(&d).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        if err <= tol * scale_guess * (hi - lo) || depth >= 30 {
            if depth >= 30 {
                return Err(Error::Quadrature(format!("no convergence on [{lo}, {hi}]")));
            }
            accepted.push((lo, hi, d));
            for (s, v) in coarse_total.iter_mut().zip(&c) {
                *s += v;
            }
        } else {
            let mid = (lo + hi) / 2.0;
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    accepted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut values = vec![C64::new(0.0, 0.0); dim];
    let mut doubled = vec![C64::new(0.0, 0.0); dim];
    for (lo, hi, d) in &accepted {
        for (s, v) in values.iter_mut().zip(d) {
            *s += v;
        }
        let e = panel(f, a, b, *lo, *hi, &finest, dim)?;
        for (s, v) in doubled.iter_mut().zip(e) {
            *s += v;
        }
    }
    let scale = vmax(&values).max(1.0);
    let doubling = values.iter().zip(&doubled).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
    Ok(Quadrature { values, doubling, panels: accepted.len() })
}

/// Index bookkeeping for the period vector: `[w~, w~_a..., w~_ab (a <= b)...]`.
fn pair_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    1 + n + a * n - a * (a + 1) / 2 + b
}

/// Symbolic pieces of the twisted-period integrands.
pub struct PeriodIntegrand {
    grad: Vec<Expr>,
    hess: Vec<Expr>,
    n: usize,
}

impl PeriodIntegrand {
    pub fn new(m: &ModelBundle) -> Self {
        let n = m.dim();
        let grad = m.chart.iter().map(|c| m.lambda.d(&[c.as_str()])).collect();
        let mut hess = Vec::new();
        for a in 0..n {
            for b in a..n {
                hess.push(m.lambda.d(&[m.chart[a].as_str(), m.chart[b].as_str()]));
            }
        }
        PeriodIntegrand { grad, hess, n }
    }

    pub fn dim(&self) -> usize {
        1 + self.n + self.n * (self.n + 1) / 2
    }

    /// `|lambda|^z (1, z h_a, z h_ab + z^2 h_a h_b)` with `h = log lambda`.
    fn eval(&self, m: &ModelBundle, p: &Point, x: C64, z: C64) -> Result<Vec<C64>> {
        let mut q = p.clone();
        q.insert(m.x.clone(), x);
        let mut ev = Evaluator::new(&q);
        let lam = ev.eval(m.lambda.base())?;
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        if lam.norm() == 0.0 {
            return Ok(out);
        }
        let base = (z * lam.norm().ln()).exp();
        let ha: Vec<C64> = self.grad.iter().map(|g| Ok(ev.eval(g)? / lam)).collect::<Result<_>>()?;
        out[0] = base;
        for a in 0..n {
            out[1 + a] = base * z * ha[a];
        }
        let mut k = 0;
        for a in 0..n {
            for b in a..n {
                let hab = ev.eval(&self.hess[k])? / lam - ha[a] * ha[b];
                out[pair_index(n, a, b)] = base * (z * hab + z * z * ha[a] * ha[b]);
                k += 1;
            }
        }
        Ok(out)
    }
}

/// The period `int |lambda|^z dx` and its first and second parameter derivatives.
pub fn twisted_periods(m: &ModelBundle, path: &IntegrationPath, z: C64, p: &Point, tol: f64) -> Result<Quadrature> {
    if z.re <= 2.0 {
        return Err(Error::Parameter(format!("twisted periods need Re z > 2, got {z}")));
    }
    let integrand = PeriodIntegrand::new(m);
    let f = |x: C64| integrand.eval(m, p, x, z);
    let mut total: Option<Quadrature> = None;
    for w in path.waypoints.windows(2) {
        let q = integrate(&f, w[0], w[1], integrand.dim(), path.nodes, tol)?;
        total = Some(match total {
            None => q,
            Some(mut t) => {
                for (s, v) in t.values.iter_mut().zip(&q.values) {
                    *s += v;
                }
                t.doubling = t.doubling.max(q.doubling);
                t.panels += q.panels;
                t
            }
        });
    }
    total.ok_or_else(|| Error::Parameter("path needs at least two waypoints".into()))
}

/// Single twisted period with a derivative multi-index over the chart (order <= 2).
pub fn twisted_period(m: &ModelBundle, path: &IntegrationPath, z: C64, p: &Point, deriv: &[usize]) -> Result<C64> {
    let q = twisted_periods(m, path, z, p, 1e-13)?;
    let n = m.dim();
    let idx = match deriv {
        [] => 0,
        [a] => 1 + a,
        [a, b] => pair_index(n, *a, *b),
        _ => return Err(Error::Parameter("derivative order above two".into())),
    };
    Ok(q.values[idx])
}

/// `max_ab |w~_ab - z g^{cd} F*_abc w~_d| / max(1, |w~|)` from a period vector.
pub fn gauss_manin_from_values(values: &[C64], f3: &[C64], metric: &DMatrix<C64>, z: C64, n: usize) -> f64 {
    let scale = vmax(values).max(1.0);
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a..n {
            let mut s = C64::new(0.0, 0.0);
            for c in 0..n {
                for d in 0..n {
                    s += metric[(c, d)] * f3[(a * n + b) * n + c] * values[1 + d];
                }
            }
            worst = worst.max((values[pair_index(n, a, b)] - z * s).norm() / scale);
        }
    }
    worst
}

/// Third derivatives of the dual prepotential, `F[a][b][c]`.
pub fn fstar_third(m: &ModelBundle, fstar: &Expr, p: &Point) -> Result<Vec<C64>> {
    let n = m.dim();
    let jet = crate::exprcore::Jet::new(fstar.clone());
    let mut ev = Evaluator::new(p);
    let mut out = vec![C64::new(0.0, 0.0); n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out[(a * n + b) * n + c] =
                    ev.eval(&jet.d(&[m.chart[a].as_str(), m.chart[b].as_str(), m.chart[c].as_str()]))?;
            }
        }
    }
    Ok(out)
}

/// Gauss-Manin residual along a path, using the given dual prepotential.
pub fn gauss_manin_residual_with(
    m: &ModelBundle,
    fstar: &Expr,
    path: &IntegrationPath,
    z: C64,
    p: &Point,
) -> Result<(f64, f64)> {
    let metric = m.metric.as_ref().ok_or_else(|| Error::Parameter(format!("{} has no intersection form", m.family)))?;
    let q = twisted_periods(m, path, z, p, 1e-13)?;
    let f3 = fstar_third(m, fstar, p)?;
    Ok((gauss_manin_from_values(&q.values, &f3, metric, z, m.dim()), q.doubling))
}

/// Gauss-Manin residual along a path with the bundle's own dual prepotential.
pub fn gauss_manin_residual(m: &ModelBundle, path: &IntegrationPath, z: C64, p: &Point) -> Result<f64> {
    let f = m.fstar.as_ref().ok_or_else(|| Error::Parameter(format!("{} has no dual prepotential", m.family)))?;
    Ok(gauss_manin_residual_with(m, f.base(), path, z, p)?.0)
}

/// Real zeros of the dual type-A superpotential, sorted, and the segments between neighbours.
pub fn real_segments(m: &ModelBundle, p: &Point) -> Result<Vec<IntegrationPath>> {
    if m.family != "dual-saito-a" {
        return Err(Error::Parameter(format!("twisted periods are implemented for dual-saito-a, not {}", m.family)));
    }
    let mut zeros: Vec<f64> = Vec::new();
    let mut wbar = 0.0;
    for c in &m.chart {
        let w = p[c];
        if w.im != 0.0 {
            return Err(Error::Parameter("segment cycles need real parameters".into()));
        }
        zeros.push(w.re);
        wbar += w.re;
    }
    zeros.push(-wbar);
    zeros.sort_by(f64::total_cmp);
    Ok(zeros.windows(2).map(|w| IntegrationPath::segment(C64::new(w[0], 0.0), C64::new(w[1], 0.0))).collect())
}

/// Draws real parameters whose zeros are separated by at least `0.15`.
pub fn draw_real_point(m: &ModelBundle, rng: &mut ChaCha8Rng) -> Result<Point> {
    let half_width = 0.5 + 0.25 * (m.dim() + 1) as f64;
    for _ in 0..100 {
        let vals: Vec<f64> = m.chart.iter().map(|_| rng.random_range(-half_width..half_width)).collect();
        let mut zeros = vals.clone();
        zeros.push(-vals.iter().sum::<f64>());
        zeros.sort_by(f64::total_cmp);
        if zeros.windows(2).all(|w| w[1] - w[0] > 0.15) {
            return Ok(m.chart.iter().cloned().zip(vals.into_iter().map(|v| C64::new(v, 0.0))).collect());
        }
    }
    Err(Error::Inadmissible("no well-separated real parameters after 100 attempts".into()))
}

/// Aggregated period checks over seeded samples.
#[derive(Clone, Copy, Debug, Default)]
pub struct PeriodChecks {
    pub gauss_manin: f64,
    pub doubling: f64,
}

/// Exponents at which the Gauss-Manin relation is tested.
pub const EXPONENTS: [f64; 3] = [2.5, 3.0, 3.5];

/// Runs the Gauss-Manin and node-doubling checks over `samples` real points.
pub fn period_checks(m: &ModelBundle, seed: u64, samples: usize) -> Result<PeriodChecks> {
    let f = m.fstar.as_ref().ok_or_else(|| Error::Parameter(format!("{} has no dual prepotential", m.family)))?;
    let mut out = PeriodChecks::default();
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((1u64 << 32) + i as u64);
        let p = draw_real_point(m, &mut rng)?;
        for path in real_segments(m, &p)? {
            for z in EXPONENTS {
                let (gm, dbl) = gauss_manin_residual_with(m, f.base(), &path, C64::new(z, 0.0), &p)?;
                out.gauss_manin = out.gauss_manin.max(gm);
                out.doubling = out.doubling.max(dbl);
            }
        }
    }
    Ok(out)
}

/// Composite Simpson rule with `n` (even) panels, used as a brute-force oracle.
pub fn simpson(f: impl Fn(f64) -> C64, a: f64, b: f64, n: usize) -> C64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_exponent_gives_path_length() {
        let f = |_x: C64| Ok(vec![c(1.0, 0.0)]);
        let q = integrate(&f, c(-0.3, 0.0), c(1.1, 0.0), 1, 16, 1e-13).unwrap();
        assert!((q.values[0] - 1.4).norm() < 1e-14);
    }

    #[test]
    fn period_matches_dense_simpson() {
        let m = catalog::build_dual_saito_a(1).unwrap();
        let w = 0.9;
        let p: Point = [("w1".to_string(), c(w, 0.0))].into();
        let path = IntegrationPath::segment(c(-w, 0.0), c(w, 0.0));
        let v = twisted_period(&m, &path, c(3.0, 0.0), &p, &[]).unwrap();
        let oracle = simpson(|t| c((w * w - t * t).powi(3), 0.0), -w, w, 100_000);
        assert!((v - oracle).norm() < 1e-8);
    }

    #[test]
    fn conjugate_exponent_gives_conjugate_period() {
        let m = catalog::build_dual_saito_a(2).unwrap();
        let p: Point = [("w1".to_string(), c(0.8, 0.0)), ("w2".to_string(), c(-1.3, 0.0))].into();
        let path = &real_segments(&m, &p).unwrap()[0];
        let z = c(2.7, 0.4);
        let a = twisted_period(&m, path, z, &p, &[0, 1]).unwrap();
        let b = twisted_period(&m, path, z.conj(), &p, &[0, 1]).unwrap();
        assert!((a - b.conj()).norm() < 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn low_exponent_is_rejected() {
        let m = catalog::build_dual_saito_a(1).unwrap();
        let p: Point = [("w1".to_string(), c(0.9, 0.0))].into();
        let path = IntegrationPath::segment(c(-0.9, 0.0), c(0.9, 0.0));
        assert!(twisted_period(&m, &path, c(1.5, 0.0), &p, &[]).is_err());
    }
}
