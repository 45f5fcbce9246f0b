//! Frobenius data from a Landau-Ginzburg pair by residue calculus.
//!
//! Critical points of the superpotential are located as roots of the
//! numerator of its logarithmic derivative (companion-matrix eigenvalues,
//! polished by Newton's method), or by a Newton sweep over the fundamental
//! parallelogram for elliptic curves. At simple critical points every
//! residue reduces to a value divided by the second derivative. Saito flat
//! coordinates of type A are computed by inverting the branch
//! `lambda = k^(ell+1)` at infinity with polynomial coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::catalog::{CurveSpec, ModelBundle, Numerator};
use crate::error::{Error, Result};
use crate::exprcore::{Evaluator, Point};
use crate::series::{invert_branch, with_poly_arity, Center, Coeff, LaurentSeries, Poly};

/// Critical points sharing one critical value (symmetric curves such as
/// even superpotentials have several).
#[derive(Clone, Debug)]
pub struct CritGroup {
    pub points: Vec<C64>,
    /// Critical value, a canonical coordinate.
    pub u: C64,
    /// Diagonal metric entry `scale^2 * sum 1/lambda''` over the group.
    pub eta: C64,
}

/// Canonical frame at a point of the base.
#[derive(Clone, Debug)]
pub struct CanonicalFrame {
    pub groups: Vec<CritGroup>,
}

impl CanonicalFrame {
    pub fn all_points(&self) -> impl Iterator<Item = C64> + '_ {
        self.groups.iter().flat_map(|g| g.points.iter().copied())
    }
}

/// Metric, three-tensor and structure constants at a point.
#[derive(Clone, Debug)]
pub struct TangentData {
    pub chart: Vec<String>,
    pub eta: DMatrix<C64>,
    /// `c_{abc}` in row-major order.
    pub c: Vec<C64>,
    /// `c^m_{ab}` stored at `[m][a][b]` in row-major order.
    pub structure: Vec<C64>,
    /// Residue intersection form with lower indices, when requested.
    pub g: Option<DMatrix<C64>>,
}

impl TangentData {
    pub fn dim(&self) -> usize {
        self.chart.len()
    }

    pub fn c3(&self, a: usize, b: usize, c: usize) -> C64 {
        let n = self.dim();
        self.c[(a * n + b) * n + c]
    }

    pub fn up(&self, m: usize, a: usize, b: usize) -> C64 {
        let n = self.dim();
        self.structure[(m * n + a) * n + b]
    }
}

/// Roots of a polynomial given lowest degree first.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|v| v.norm() == 0.0) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Ok(vec![]);
    }
    let lead = c[n];
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    let eig = m.schur().eigenvalues().ok_or_else(|| Error::NonConvergence("companion matrix eigenvalues".into()))?;
    let mut roots: Vec<C64> = eig.iter().copied().collect();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for k in (0..=n).rev() {
                dp = dp * *r + p;
                p = p * *r + c[k];
            }
            if dp.norm() > 0.0 {
                *r -= p / dp;
            }
        }
    }
    Ok(roots)
}

fn pmul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn padd(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or_default() + b.get(i).copied().unwrap_or_default()).collect()
}

fn pscale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

fn from_roots(roots: &[C64]) -> Vec<C64> {
    roots.iter().fold(vec![C64::new(1.0, 0.0)], |acc, r| pmul(&acc, &[-r, C64::new(1.0, 0.0)]))
}

/// Numerator of `d log(lambda) / dc` in the curve coordinate, lowest degree first.
fn log_derivative_numerator(numerator: &Numerator, pole: i32, p: &Point) -> Result<Vec<C64>> {
    let shift = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    match numerator {
        Numerator::Coeffs(cs) => {
            let mut low: Vec<C64> = cs.iter().map(|c| c.eval(p)).collect::<Result<_>>()?;
            low.reverse();
            let deriv: Vec<C64> = low.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect();
            if pole == 0 {
                Ok(deriv)
            } else {
                Ok(padd(&pmul(&shift, &deriv), &pscale(&low, C64::new(-pole as f64, 0.0))))
            }
        }
        Numerator::Roots(rs) => {
            let roots: Vec<(C64, i32)> = rs.iter().map(|(r, m)| Ok((r.eval(p)?, *m))).collect::<Result<_>>()?;
            let plain: Vec<C64> = roots.iter().map(|(r, _)| *r).collect();
            let mut s = vec![C64::new(0.0, 0.0)];
            for j in 0..roots.len() {
                let others: Vec<C64> = plain.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, r)| *r).collect();
                s = padd(&s, &pscale(&from_roots(&others), C64::new(roots[j].1 as f64, 0.0)));
            }
            if pole == 0 {
                Ok(s)
            } else {
                Ok(padd(&pmul(&shift, &s), &pscale(&from_roots(&plain), C64::new(-pole as f64, 0.0))))
            }
        }
    }
}

fn with_x(p: &Point, x: C64) -> Point {
    let mut q = p.clone();
    q.insert("x".into(), x);
    q
}

fn newton_polish(m: &ModelBundle, p: &Point, mut x: C64) -> Result<C64> {
    let l1 = m.lambda.d(&["x"]);
    let l2 = m.lambda.d(&["x", "x"]);
    for _ in 0..30 {
        let q = with_x(p, x);
        let mut ev = Evaluator::new(&q);
        let d1 = ev.eval(&l1)?;
        let d2 = ev.eval(&l2)?;
        if d2.norm() == 0.0 {
            break;
        }
        let step = d1 / d2;
        x -= step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    Ok(x)
}

fn lattice_reduce(x: C64, tau: C64) -> (f64, f64) {
    let b = x.im / tau.im;
    let a = x.re - b * tau.re;
    (a - a.floor(), b - b.floor())
}

fn elliptic_critical_points(m: &ModelBundle, p: &Point, tau: C64) -> Result<Vec<C64>> {
    let lam = m.lambda.base().clone();
    let l1 = m.lambda.d(&["x"]);
    let l2 = m.lambda.d(&["x", "x"]);
    let expected = m.chart.len();
    let mut found: Vec<(f64, f64)> = Vec::new();
    let mut pts = Vec::new();
    let grid = 9;
    for s in 0..grid {
        for t in 0..grid {
            let mut x = C64::new((s as f64 + 0.5) / grid as f64, 0.0) + tau * ((t as f64 + 0.5) / grid as f64);
            let mut ok = false;
            for _ in 0..60 {
                let q = with_x(p, x);
                let mut ev = Evaluator::new(&q);
                let (Ok(v0), Ok(v1), Ok(v2)) = (ev.eval(&lam), ev.eval(&l1), ev.eval(&l2)) else {
                    break;
                };
                let f = v1 / v0;
                let df = (v2 * v0 - v1 * v1) / (v0 * v0);
                if df.norm() == 0.0 || !f.re.is_finite() {
                    break;
                }
                let step = f / df;
                x -= step;
                if step.norm() > 2.0 {
                    break;
                }
                if step.norm() < 1e-14 {
                    ok = f.norm() < 1e-8;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let (a, b) = lattice_reduce(x, tau);
            let dup = found.iter().any(|(fa, fb)| {
                let da = (a - fa).abs().min(1.0 - (a - fa).abs());
                let db = (b - fb).abs().min(1.0 - (b - fb).abs());
                da < 1e-7 && db < 1e-7
            });
            if !dup {
                found.push((a, b));
                pts.push(C64::new(a, 0.0) + tau * b);
            }
        }
    }
    if pts.len() != expected {
        return Err(Error::NonConvergence(format!(
            "found {} critical points on the torus, expected {expected}",
            pts.len()
        )));
    }
    Ok(pts)
}

/// Critical points, critical values and canonical metric entries at `p`.
pub fn critical_points(m: &ModelBundle, p: &Point) -> Result<CanonicalFrame> {
    let l1 = m.lambda.d(&["x"]);
    let l2 = m.lambda.d(&["x", "x"]);
    let points = match &m.curve {
        CurveSpec::Rational { exp_coord, numerator, pole_order } => {
            let num = log_derivative_numerator(numerator, *pole_order, p)?;
            let roots = poly_roots(&num)?;
            let mut pts = Vec::with_capacity(roots.len());
            for r in roots {
                let x0 = if *exp_coord {
                    if r.norm() < 1e-300 {
                        return Err(Error::Degenerate(0.0));
                    }
                    r.ln()
                } else {
                    r
                };
                pts.push(newton_polish(m, p, x0)?);
            }
            pts
        }
        CurveSpec::Elliptic { tau } => {
            let tau = tau.eval(p)?;
            elliptic_critical_points(m, p, tau)?
        }
    };
    let lam = m.lambda.base();
    let scale2 = m.omega_scale * m.omega_scale;
    let mut info = Vec::with_capacity(points.len());
    for q in &points {
        let pq = with_x(p, *q);
        let mut ev = Evaluator::new(&pq);
        let d1 = ev.eval(&l1)?;
        let d2 = ev.eval(&l2)?;
        let u = ev.eval(lam)?;
        if d2.norm() < 1e-8 {
            return Err(Error::Degenerate(d2.norm()));
        }
        if d1.norm() > 1e-8 * (1.0 + d2.norm()) {
            return Err(Error::NonConvergence(format!("|lambda'| = {:e} at a critical point", d1.norm())));
        }
        info.push((*q, u, d2));
    }
    let mut groups: Vec<CritGroup> = Vec::new();
    for (q, u, d2) in info {
        match groups.iter_mut().find(|g| (g.u - u).norm() < 1e-9 * (1.0 + u.norm())) {
            Some(g) => {
                g.points.push(q);
                g.eta += scale2 / d2;
            }
            None => groups.push(CritGroup { points: vec![q], u, eta: scale2 / d2 }),
        }
    }
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            let sep = (groups[i].u - groups[j].u).norm();
            if sep < 1e-6 {
                return Err(Error::Inadmissible(format!("critical values only {sep:e} apart")));
            }
        }
    }
    Ok(CanonicalFrame { groups })
}

fn gradients(m: &ModelBundle, p: &Point, q: C64) -> Result<(Vec<C64>, C64, C64)> {
    let pq = with_x(p, q);
    let mut ev = Evaluator::new(&pq);
    let grad = m.chart.iter().map(|c| ev.eval(&m.lambda.d(&[c.as_str()]))).collect::<Result<Vec<_>>>()?;
    let l2 = ev.eval(&m.lambda.d(&["x", "x"]))?;
    let u = ev.eval(m.lambda.base())?;
    Ok((grad, l2, u))
}

/// Jacobian `J[mu][i] = d_i lambda(q_mu)` from chart to canonical coordinates.
pub fn canonical_jacobian(m: &ModelBundle, p: &Point, frame: &CanonicalFrame) -> Result<DMatrix<C64>> {
    let n = m.dim();
    if frame.groups.len() != n {
        return Err(Error::Degenerate(frame.groups.len() as f64));
    }
    let mut j = DMatrix::zeros(n, n);
    for (mu, g) in frame.groups.iter().enumerate() {
        let (grad, _, _) = gradients(m, p, g.points[0])?;
        for i in 0..n {
            j[(mu, i)] = grad[i];
        }
    }
    Ok(j)
}

/// Metric and three-tensor from residues (and the intersection form when `with_g`).
pub fn residue_data(m: &ModelBundle, p: &Point, frame: &CanonicalFrame, with_g: bool) -> Result<TangentData> {
    let n = m.dim();
    let scale2 = C64::new(m.omega_scale * m.omega_scale, 0.0);
    let mut eta = DMatrix::<C64>::zeros(n, n);
    let mut g = DMatrix::<C64>::zeros(n, n);
    let mut c = vec![C64::new(0.0, 0.0); n * n * n];
    for q in frame.all_points() {
        let (grad, l2, u) = gradients(m, p, q)?;
        if with_g && u.norm() < 1e-8 {
            return Err(Error::Discriminant(u.norm()));
        }
        let w = scale2 / l2;
        for a in 0..n {
            for b in 0..n {
                let ab = grad[a] * grad[b] * w;
                eta[(a, b)] += ab;
                if with_g {
                    g[(a, b)] += ab / u;
                }
                for cc in 0..n {
                    c[(a * n + b) * n + cc] += ab * grad[cc];
                }
            }
        }
    }
    let inv = eta.clone().try_inverse().ok_or_else(|| Error::Degenerate(eta.determinant().norm()))?;
    let mut structure = vec![C64::new(0.0, 0.0); n * n * n];
    for mu in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for nu in 0..n {
                    s += inv[(mu, nu)] * c[(nu * n + a) * n + b];
                }
                structure[(mu * n + a) * n + b] = s;
            }
        }
    }
    Ok(TangentData { chart: m.chart.clone(), eta, c, structure, g: if with_g { Some(g) } else { None } })
}

/// Intersection form with upper indices, `-scale * g^{-1}`, from the residue form.
pub fn dual_metric_from_residue(m: &ModelBundle, td: &TangentData) -> Result<DMatrix<C64>> {
    let g = td.g.as_ref().ok_or_else(|| Error::Parameter("intersection form was not computed".into()))?;
    let inv = g.clone().try_inverse().ok_or_else(|| Error::Degenerate(g.determinant().norm()))?;
    Ok(inv * C64::new(-m.omega_scale, 0.0))
}

/// Condition number estimate of a matrix from its singular values.
pub fn condition_number(mat: &DMatrix<C64>) -> f64 {
    let sv = mat.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Saito flat coordinates `t_alpha(a)` of type A as polynomials in `a_1..a_ell`.
pub fn flat_polys(ell: usize) -> Result<Vec<Poly>> {
    if !(1..=8).contains(&ell) {
        return Err(Error::Parameter(format!("flat coordinates need 1 <= ell <= 8, got {ell}")));
    }
    with_poly_arity(ell, || {
        let h = ell as i32 + 1;
        let order = ell as i32 + 1;
        let len = (order + h + 1) as usize;
        let mut coeffs = vec![<Poly as Coeff>::zero(); len];
        coeffs[0] = Poly::one();
        for alpha in 1..=ell {
            coeffs[alpha + 1] = Poly::variable(ell, alpha - 1);
        }
        let lam = LaurentSeries::new("x", Center::Infinity, -h, coeffs);
        let x = invert_branch(&lam, h, order)?;
        (1..=ell)
            .map(|alpha| Ok((x.coeff(alpha as i32)? * Poly::from_c64(C64::new(-(h as f64), 0.0))).chop(1e-13)))
            .collect()
    })
}

/// Deformation parameters `a_alpha(v)` as polynomials in the flat coordinates.
pub fn inverse_flat_polys(ell: usize) -> Result<Vec<Poly>> {
    let t = flat_polys(ell)?;
    let mut a: Vec<Poly> = Vec::with_capacity(ell);
    for alpha in 0..ell {
        let rest = t[alpha].clone() - Poly::variable(ell, alpha);
        let mut subs = a.clone();
        while subs.len() < ell {
            subs.push(Poly::constant(ell, C64::new(0.0, 0.0)));
        }
        a.push((Poly::variable(ell, alpha) - rest.compose(&subs)).chop(1e-13));
    }
    Ok(a)
}

/// Flat coordinates, Jacobian `dt/da` and Hessians `d2t/da2` at parameter values `a`.
pub struct FlatCoords {
    pub t: Vec<C64>,
    pub jacobian: DMatrix<C64>,
    /// `hessians[alpha][(i, j)] = d2 t_alpha / da_i da_j`.
    pub hessians: Vec<DMatrix<C64>>,
}

pub fn flat_coords_a(ell: usize, a: &[C64]) -> Result<FlatCoords> {
    let polys = flat_polys(ell)?;
    let t = polys.iter().map(|p| p.eval(a)).collect();
    let jacobian = DMatrix::from_fn(ell, ell, |i, j| polys[i].diff(j).eval(a));
    let hessians = polys.iter().map(|p| DMatrix::from_fn(ell, ell, |i, j| p.diff(i).diff(j).eval(a))).collect();
    Ok(FlatCoords { t, jacobian, hessians })
}

/// Solves `t(a) = t` by Newton's method started from `a = t`.
pub fn invert_flat_map(ell: usize, t: &[C64]) -> Result<Vec<C64>> {
    let polys = flat_polys(ell)?;
    let mut a = t.to_vec();
    let scale = 1.0 + t.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for _ in 0..50 {
        let r: Vec<C64> = polys.iter().zip(t).map(|(p, tv)| p.eval(&a) - tv).collect();
        let res = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if res < 1e-14 * scale {
            return Ok(a);
        }
        let jac = DMatrix::from_fn(ell, ell, |i, j| polys[i].diff(j).eval(&a));
        let step = jac
            .lu()
            .solve(&nalgebra::DVector::from_vec(r))
            .ok_or_else(|| Error::NonConvergence("singular Jacobian in flat-coordinate inversion".into()))?;
        for i in 0..ell {
            a[i] -= step[i];
        }
    }
    Err(Error::NonConvergence("flat-coordinate inversion after 50 iterations".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::exprcore::Expr;
    use crate::series::{expand, residue};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(pairs: &[(&str, C64)]) -> Point {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn roots_of_cubic() {
        let roots = poly_roots(&from_roots(&[c(1.0, 0.0), c(-2.0, 0.5), c(0.3, -0.7)])).unwrap();
        for r in [c(1.0, 0.0), c(-2.0, 0.5), c(0.3, -0.7)] {
            assert!(roots.iter().any(|x| (x - r).norm() < 1e-12));
        }
    }

    #[test]
    fn a1_critical_point_and_metric() {
        let b = catalog::build_saito_a(1).unwrap();
        let p = pt(&[("v1", c(0.7, 0.2))]);
        let frame = critical_points(&b, &p).unwrap();
        assert_eq!(frame.groups.len(), 1);
        assert!(frame.groups[0].points[0].norm() < 1e-14);
        assert!((frame.groups[0].u - c(0.7, 0.2)).norm() < 1e-14);
        assert!((frame.groups[0].eta - 0.5).norm() < 1e-14);
        let lam = b.lambda.base().clone();
        let s = expand(&(Expr::one() / lam.diff("x")), "x", Center::Finite(c(0.0, 0.0)), 2, &p).unwrap();
        assert!((residue(&s) - frame.groups[0].eta).norm() < 1e-14);
    }

    #[test]
    fn a2_critical_values() {
        let b = catalog::build_saito_a(2).unwrap();
        let p = pt(&[("v1", c(-3.0, 0.0)), ("v2", c(0.0, 0.0))]);
        let a = saito_param_values(2, &p);
        assert!((a[0] + 3.0).norm() < 1e-14 && a[1].norm() < 1e-14);
        let frame = critical_points(&b, &p).unwrap();
        let mut qs: Vec<(f64, f64)> = frame.groups.iter().map(|g| (g.points[0].re, g.u.re)).collect();
        qs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((qs[0].0 + 1.0).abs() < 1e-12 && (qs[0].1 - 2.0).abs() < 1e-12);
        assert!((qs[1].0 - 1.0).abs() < 1e-12 && (qs[1].1 + 2.0).abs() < 1e-12);
    }

    fn saito_param_values(ell: usize, p: &Point) -> Vec<C64> {
        let v: Vec<C64> = (1..=ell).map(|i| p[&format!("v{i}")]).collect();
        inverse_flat_polys(ell).unwrap().iter().map(|q| q.eval(&v)).collect()
    }

    #[test]
    fn dz_critical_points_are_roots_of_derivative() {
        let b = catalog::build_dz_a(1, 1).unwrap();
        let p = pt(&[("w1", c(0.4, 0.3)), ("w2", c(-0.6, 0.9))]);
        let frame = critical_points(&b, &p).unwrap();
        assert_eq!(frame.groups.len(), 2);
        for q in frame.all_points() {
            let v = b.lambda.d(&["x"]).eval(&with_x(&p, q)).unwrap();
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn a2_metric_in_parameter_chart_is_antidiagonal() {
        let b = catalog::build_saito_a(2).unwrap();
        for p in [pt(&[("v1", c(0.7, 0.2)), ("v2", c(-0.3, 1.1))]), pt(&[("v1", c(-1.2, 0.4)), ("v2", c(0.5, -0.6))])] {
            let frame = critical_points(&b, &p).unwrap();
            let td = residue_data(&b, &p, &frame, false).unwrap();
            assert!((td.eta[(0, 1)] - 1.0 / 3.0).norm() < 1e-12);
            assert!(td.eta[(0, 0)].norm() < 1e-12 && td.eta[(1, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn a3_metric_in_a_chart_is_not_flat() {
        let a = [c(0.6, 0.3), c(-0.4, 0.8), c(0.9, -0.1)];
        let x = Expr::var("x");
        let lam =
            x.powi(4) + Expr::constant(a[0]) * x.powi(2) + Expr::constant(a[1]) * x.clone() + Expr::constant(a[2]);
        let integrand = x.powi(4) / lam.diff("x");
        let s = expand(&integrand, "x", Center::Infinity, 4, &Point::new()).unwrap();
        let eta11 = -residue(&s);
        assert!((eta11 + a[0] / 8.0).norm() < 1e-13);
    }

    #[test]
    fn flat_coordinates_low_rank() {
        let a = [c(0.8, 0.3)];
        let fc = flat_coords_a(1, &a).unwrap();
        assert!((fc.t[0] - a[0]).norm() < 1e-14);
        let a2 = [c(0.8, 0.3), c(-0.2, 0.5)];
        let fc = flat_coords_a(2, &a2).unwrap();
        assert!((fc.t[0] - a2[0]).norm() < 1e-14 && (fc.t[1] - a2[1]).norm() < 1e-14);
        let a3 = [c(0.8, 0.3), c(-0.2, 0.5), c(0.4, 0.4)];
        let fc = flat_coords_a(3, &a3).unwrap();
        assert!((fc.t[2] - (a3[2] - a3[0] * a3[0] / 8.0)).norm() < 1e-14);
        assert!((fc.jacobian[(2, 2)] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn flat_map_round_trip() {
        for ell in [2usize, 3] {
            for seed in 0..5 {
                let a: Vec<C64> =
                    (0..ell).map(|i| c(0.3 + 0.1 * (i + seed) as f64, 0.2 - 0.15 * seed as f64)).collect();
                let t = flat_coords_a(ell, &a).unwrap().t;
                let back = invert_flat_map(ell, &t).unwrap();
                for (x, y) in a.iter().zip(&back) {
                    assert!((x - y).norm() < 1e-10);
                }
            }
        }
        let zero = invert_flat_map(3, &[c(0.0, 0.0); 3]).unwrap();
        assert!(zero.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn canonical_diagonalisation_saito_a3() {
        let b = catalog::build_saito_a(3).unwrap();
        let p = pt(&[("v1", c(0.7, 0.2)), ("v2", c(-0.3, 1.1)), ("v3", c(0.9, -0.4))]);
        let frame = critical_points(&b, &p).unwrap();
        let td = residue_data(&b, &p, &frame, false).unwrap();
        let j = canonical_jacobian(&b, &p, &frame).unwrap();
        let jinv = j.try_inverse().unwrap();
        let diag = jinv.transpose() * td.eta.clone() * jinv;
        for mu in 0..3 {
            for nu in 0..3 {
                let target = if mu == nu { frame.groups[mu].eta } else { c(0.0, 0.0) };
                assert!((diag[(mu, nu)] - target).norm() < 1e-10);
            }
        }
    }
}
