//! Residual evaluators for every identity family, seeded sampling of
//! admissible points, and deterministic aggregation into a report.
//!
//! Every residual is normalised by `max(1, magnitude of the terms involved)`
//! so that tolerances are meaningful for both small and large sample values.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::catalog::{CurveSpec, Dist, ModelBundle, Period, RankTwoBundle, Sampler, Structure};
use crate::error::{Error, Result};
use crate::exprcore::{lie_derivative, Evaluator, Expr, Jet, Point};
use crate::geometry::{self, CanonicalFrame, TangentData};
use crate::periods;
use crate::specfn;

/// Every check name understood by [`run`].
pub const CHECK_NAMES: &[&str] = &[
    "omega-x",
    "closed-wdvv",
    "open-r1",
    "open-r2",
    "kab-spread",
    "kab-mean",
    "h-lambda",
    "h-omega",
    "eventual-e1",
    "eventual-e2",
    "product",
    "dual-product",
    "canonical-diag",
    "metric-const",
    "rank2-f1",
    "rank2-f2",
    "rank2-f3",
    "rank2-f4",
    "rank2-restrict",
    "gauss-manin",
    "period-doubling",
    "jacobi-logtheta",
    "jacobi-heat",
];

const RESAMPLE_ATTEMPTS: usize = 100;
const KAB_POINTS: usize = 5;

/// One line of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome of a verification run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub model: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub wall_ms: u64,
}

fn json_number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(f64::MAX)
    }
}

impl ResidualReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "model": self.model,
            "params": self.params,
            "seed": self.seed,
            "samples": self.samples,
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name,
                "max_residual": json_number(c.max_residual),
                "tolerance": c.tolerance,
                "pass": c.pass,
            })).collect::<Vec<_>>(),
            "wall_ms": self.wall_ms,
        })
    }
}

/// Settings of a verification run.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: usize,
    /// Explicit check selection; `None` runs the defaults of the model.
    pub checks: Option<Vec<String>>,
    pub tolerances: BTreeMap<String, f64>,
    pub jobs: usize,
    /// Record elapsed wall time in the report (off by default for byte-identical output).
    pub timing: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 0, samples: 10, checks: None, tolerances: BTreeMap::new(), jobs: 1, timing: false }
    }
}

/// What to verify.
pub enum Target {
    Rank1(ModelBundle),
    Rank2(RankTwoBundle),
}

impl Target {
    pub fn family(&self) -> &str {
        match self {
            Target::Rank1(m) => &m.family,
            Target::Rank2(_) => "rank2-a",
        }
    }
}

/// Default tolerance for a check on a model family.
pub fn default_tolerance(family: &str, check: &str) -> f64 {
    if family.starts_with("jacobi") || check == "gauss-manin" || check == "period-doubling" {
        1e-6
    } else {
        1e-7
    }
}

/// Checks run by default for a rank-one bundle.
pub fn default_checks(m: &ModelBundle) -> Vec<&'static str> {
    let mut out = vec!["omega-x", "closed-wdvv"];
    if m.has_flat_chart() {
        out.extend(["open-r1", "open-r2"]);
    }
    if m.dual {
        out.extend(["kab-spread", "kab-mean"]);
    }
    out.extend(["h-lambda", "h-omega", "eventual-e1", "eventual-e2", "product"]);
    if m.dual {
        out.push("dual-product");
    }
    out.push("canonical-diag");
    if m.has_flat_chart() && !m.is_elliptic() {
        out.push("metric-const");
    }
    if m.is_elliptic() {
        out.extend(["jacobi-logtheta", "jacobi-heat"]);
    }
    out
}

/// Checks run by default for a rank-two bundle.
pub fn rank2_checks() -> Vec<&'static str> {
    vec!["rank2-f1", "rank2-f2", "rank2-f3", "rank2-f4", "rank2-restrict"]
}

/// Checks applicable to a target at all (defaults plus optional extras).
pub fn applicable_checks(t: &Target) -> Vec<&'static str> {
    match t {
        Target::Rank2(_) => rank2_checks(),
        Target::Rank1(m) => {
            let mut v = default_checks(m);
            if m.family == "dual-saito-a" {
                v.extend(["gauss-manin", "period-doubling"]);
            }
            v
        }
    }
}

fn norm_max(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `|a - b|` relative to `max(1, |a|, |b|)` entrywise, maximised.
pub fn defect(a: &[C64], b: &[C64]) -> f64 {
    let scale = 1f64.max(norm_max(a)).max(norm_max(b));
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn rel(residual: C64, magnitude: f64) -> f64 {
    residual.norm() / magnitude.max(1.0)
}

/// Structure constants `C^m_{ab}` stored at `[m][a][b]`.
#[derive(Clone, Debug)]
pub struct Structure3 {
    pub n: usize,
    pub data: Vec<C64>,
}

impl Structure3 {
    pub fn get(&self, m: usize, a: usize, b: usize) -> C64 {
        self.data[(m * self.n + a) * self.n + b]
    }

    pub fn set(&mut self, m: usize, a: usize, b: usize, v: C64) {
        let n = self.n;
        self.data[(m * n + a) * n + b] = v;
    }

    pub fn scaled(&self, s: f64) -> Structure3 {
        Structure3 { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `X . Y` with components `sum C^m_{ab} X^a Y^b`.
    pub fn mul(&self, x: &[C64], y: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|m| {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..self.n {
                    for b in 0..self.n {
                        s += self.get(m, a, b) * x[a] * y[b];
                    }
                }
                s
            })
            .collect()
    }

    /// Matrix of `Y -> X . Y`.
    pub fn left_matrix(&self, x: &[C64]) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |m, b| (0..self.n).map(|a| self.get(m, a, b) * x[a]).sum())
    }
}

fn point_with(p: &Point, x: C64) -> Point {
    let mut q = p.clone();
    q.insert("x".into(), x);
    q
}

/// Third derivatives of the dual prepotential, `F[c][a][b]`.
fn fstar_third(m: &ModelBundle, ev: &mut Evaluator) -> Result<Vec<C64>> {
    let f = m.fstar.as_ref().ok_or_else(|| Error::Parameter(format!("{} has no dual prepotential", m.family)))?;
    let n = m.dim();
    let mut out = vec![C64::new(0.0, 0.0); n * n * n];
    for a in 0..n {
        for b in a..n {
            for c in b..n {
                let v = ev.eval(&f.d(&[&m.chart[a], &m.chart[b], &m.chart[c]]))?;
                for (i, j, k) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    out[(i * n + j) * n + k] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Structure constants governing the open equations of `m`: residue ones
/// for primal bundles, `g^{mc} F*_{cab}` for dual ones.
pub fn open_structure(m: &ModelBundle, p: &Point, td: &TangentData, metric: &DMatrix<C64>) -> Result<Structure3> {
    let n = m.dim();
    match m.structure {
        Structure::Residue | Structure::ResidueNonFlat => Ok(Structure3 { n, data: td.structure.clone() }),
        Structure::Dual => {
            let mut ev = Evaluator::new(p);
            let f3 = fstar_third(m, &mut ev)?;
            let mut s = Structure3 { n, data: vec![C64::new(0.0, 0.0); n * n * n] };
            for mu in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let v = (0..n).map(|c| metric[(mu, c)] * f3[(c * n + a) * n + b]).sum();
                        s.set(mu, a, b, v);
                    }
                }
            }
            Ok(s)
        }
    }
}

/// Associativity defect of structure constants.
pub fn closed_wdvv_residual(c: &Structure3) -> f64 {
    let n = c.n;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for f in 0..n {
                    let mut lhs = C64::new(0.0, 0.0);
                    let mut rhs = C64::new(0.0, 0.0);
                    let mut mag: f64 = 0.0;
                    for e in 0..n {
                        let t1 = c.get(e, a, b) * c.get(f, e, cc);
                        let t2 = c.get(e, b, cc) * c.get(f, a, e);
                        lhs += t1;
                        rhs += t2;
                        mag = mag.max(t1.norm()).max(t2.norm());
                    }
                    worst = worst.max(rel(lhs - rhs, mag));
                }
            }
        }
    }
    worst
}

/// Second derivatives of a potential over `chart + [x]`.
fn hessian(jet: &Jet, vars: &[&str], ev: &mut Evaluator) -> Result<Vec<Vec<C64>>> {
    let k = vars.len();
    let mut h = vec![vec![C64::new(0.0, 0.0); k]; k];
    for i in 0..k {
        for j in i..k {
            let v = ev.eval(&jet.d(&[vars[i], vars[j]]))?;
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok(h)
}

fn chart_and_x(m: &ModelBundle) -> Vec<&str> {
    let mut v: Vec<&str> = m.chart.iter().map(|s| s.as_str()).collect();
    v.push(m.x.as_str());
    v
}

/// Rank-one open WDVV residuals `(r1, r2)` at a full point (chart and `x`).
pub fn open_wdvv_residual(m: &ModelBundle, full: &Point, c: &Structure3) -> Result<(f64, f64)> {
    let vars = chart_and_x(m);
    let n = m.dim();
    let mut ev = Evaluator::new(full);
    let h = hessian(&m.omega, &vars, &mut ev)?;
    let x = n;
    let mut r1: f64 = 0.0;
    for mu in 0..n {
        for nu in 0..n {
            for rho in 0..n {
                let mut s = C64::new(0.0, 0.0);
                let mut mag: f64 = 0.0;
                for al in 0..n {
                    let t1 = c.get(al, mu, nu) * h[al][rho];
                    let t2 = c.get(al, nu, rho) * h[al][mu];
                    s += t1 - t2;
                    mag = mag.max(t1.norm()).max(t2.norm());
                }
                let t3 = h[x][rho] * h[mu][nu];
                let t4 = h[x][mu] * h[nu][rho];
                s += t3 - t4;
                mag = mag.max(t3.norm()).max(t4.norm());
                r1 = r1.max(rel(s, mag));
            }
        }
    }
    let mut r2: f64 = 0.0;
    for mu in 0..n {
        for nu in 0..n {
            let mut s = C64::new(0.0, 0.0);
            let mut mag: f64 = 0.0;
            for al in 0..n {
                let t = c.get(al, mu, nu) * h[x][al];
                s += t;
                mag = mag.max(t.norm());
            }
            let t1 = h[x][x] * h[mu][nu];
            let t2 = h[x][mu] * h[x][nu];
            s += t1 - t2;
            mag = mag.max(t1.norm()).max(t2.norm());
            r2 = r2.max(rel(s, mag));
        }
    }
    Ok((r1, r2))
}

/// Evaluates `K_ab(x)` for all `a <= b` at one fibre point.
pub fn kab_values(m: &ModelBundle, full: &Point, c: &Structure3) -> Result<Vec<C64>> {
    let n = m.dim();
    let x = m.x.as_str();
    let mut ev = Evaluator::new(full);
    let om = &m.omega;
    let hx = ev.eval(&om.d(&[x, x]))?;
    let hxx = ev.eval(&om.d(&[x, x, x]))?;
    let mut ha = Vec::with_capacity(n);
    let mut hax = Vec::with_capacity(n);
    for v in &m.chart {
        ha.push(ev.eval(&om.d(&[x, v]))?);
        hax.push(ev.eval(&om.d(&[x, x, v]))?);
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in a..n {
            let hab = ev.eval(&om.d(&[x, &m.chart[a], &m.chart[b]]))?;
            let mut num = ha[a] * ha[b];
            let mut dnum = hax[a] * ha[b] + ha[a] * hax[b];
            for d in 0..n {
                num -= c.get(d, a, b) * ha[d];
                dnum -= c.get(d, a, b) * hax[d];
            }
            out.push(hab - (dnum * hx - num * hxx) / (hx * hx));
        }
    }
    Ok(out)
}

/// Spread (largest standard deviation over the fibre points) and largest
/// absolute mean of the `K_ab` functions.
pub fn kab_constancy(m: &ModelBundle, p: &Point, xs: &[C64], c: &Structure3) -> Result<(f64, f64)> {
    let vals: Vec<Vec<C64>> = xs.iter().map(|x| kab_values(m, &point_with(p, *x), c)).collect::<Result<_>>()?;
    let k = vals[0].len();
    let (mut spread, mut mean_max): (f64, f64) = (0.0, 0.0);
    for j in 0..k {
        let mean: C64 = vals.iter().map(|v| v[j]).sum::<C64>() / xs.len() as f64;
        let var = vals.iter().map(|v| (v[j] - mean).norm_sqr()).sum::<f64>() / xs.len() as f64;
        spread = spread.max(var.sqrt());
        mean_max = mean_max.max(mean.norm());
    }
    Ok((spread, mean_max))
}

/// Symbolic ingredients shared by all samples of one bundle.
pub struct Prepared {
    lie_e_lambda: Expr,
    lie_ev_lambda: Expr,
    homogeneity: Jet,
    eventual_x: Expr,
    euler: Vec<Expr>,
}

impl Prepared {
    pub fn new(m: &ModelBundle) -> Self {
        let lam = m.lambda.base();
        let omega = m.omega.base();
        let h = lie_derivative(&m.eventual, omega) - m.omega_weight() * omega.clone();
        Prepared {
            lie_e_lambda: lie_derivative(&m.euler, lam),
            lie_ev_lambda: lie_derivative(&m.eventual, lam),
            homogeneity: Jet::new(h),
            eventual_x: m.eventual.component(&m.x),
            euler: m.chart.iter().map(|c| m.euler.component(c)).collect(),
        }
    }
}

/// Identity between the fibre derivative of the extended prepotential and
/// the superpotential (`Omega_x = a lambda`, or `Omega_x = a log lambda` up
/// to a constant for dual bundles).
pub fn omega_x_residual(m: &ModelBundle, full: &Point) -> Result<f64> {
    let x = m.x.as_str();
    let mut ev = Evaluator::new(full);
    let a = m.omega_scale;
    let lam = ev.eval(m.lambda.base())?;
    if !m.dual {
        let ox = ev.eval(&m.omega.d(&[x]))?;
        return Ok(rel(ox - a * lam, lam.norm()));
    }
    let mut worst: f64 = 0.0;
    for v in chart_and_x(m) {
        if m.is_elliptic() && v == "tau" {
            continue;
        }
        let lhs = ev.eval(&m.omega.d(&[x, v]))?;
        let rhs = a * ev.eval(&m.lambda.d(&[v]))? / lam;
        worst = worst.max(rel(lhs - rhs, lhs.norm().max(rhs.norm())));
    }
    Ok(worst)
}

/// `(h_lambda, h_omega)` homogeneity residuals.
pub fn homogeneity_checks(m: &ModelBundle, prep: &Prepared, full: &Point) -> Result<(f64, f64)> {
    let mut ev = Evaluator::new(full);
    let x = full[&m.x];
    let lam = ev.eval(m.lambda.base())?;
    let lx = ev.eval(&m.lambda.d(&[&m.x]))?;
    let le = ev.eval(&prep.lie_e_lambda)?;
    let shift = (1.0 - m.d) * x / 2.0 + m.d0;
    let h_lambda = rel(le - lam + shift * lx, lam.norm().max(le.norm()));
    let vars = chart_and_x(m);
    let hess = hessian(&prep.homogeneity, &vars, &mut ev)?;
    let h_omega = hess.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((h_lambda, h_omega))
}

/// Canonical frame, residue data, Jacobian and its inverse at a base point.
pub struct BaseData {
    pub frame: CanonicalFrame,
    pub td: TangentData,
    pub jacobian: DMatrix<C64>,
    pub jinv: DMatrix<C64>,
    pub metric: Option<DMatrix<C64>>,
}

pub fn base_data(m: &ModelBundle, p: &Point) -> Result<BaseData> {
    let frame = geometry::critical_points(m, p)?;
    if frame.groups.len() != m.dim() {
        return Err(Error::Degenerate(frame.groups.len() as f64));
    }
    for g in &frame.groups {
        if g.u.norm() < 1e-8 {
            return Err(Error::Discriminant(g.u.norm()));
        }
    }
    let td = geometry::residue_data(m, p, &frame, m.dual)?;
    let jacobian = geometry::canonical_jacobian(m, p, &frame)?;
    if geometry::condition_number(&jacobian) > 1e8 {
        return Err(Error::Degenerate(0.0));
    }
    let jinv = jacobian.clone().try_inverse().ok_or(Error::Degenerate(0.0))?;
    let metric = if m.dual {
        Some(match &m.metric {
            Some(g) => g.clone(),
            None => geometry::dual_metric_from_residue(m, &td)?,
        })
    } else {
        None
    };
    Ok(BaseData { frame, td, jacobian, jinv, metric })
}

fn primal_structure(m: &ModelBundle, bd: &BaseData) -> Structure3 {
    Structure3 { n: m.dim(), data: bd.td.structure.clone() }
}

/// Unit and inverse Euler field in chart components from the canonical frame.
fn canonical_fields(bd: &BaseData) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let n = bd.jinv.nrows();
    let u: Vec<C64> = bd.frame.groups.iter().map(|g| g.u).collect();
    let e = (0..n).map(|i| (0..n).map(|mu| bd.jinv[(i, mu)]).sum()).collect();
    let euler = (0..n).map(|i| (0..n).map(|mu| bd.jinv[(i, mu)] * u[mu]).sum()).collect();
    let einv = (0..n).map(|i| (0..n).map(|mu| bd.jinv[(i, mu)] / u[mu]).sum()).collect();
    (e, euler, einv)
}

fn solve(mat: DMatrix<C64>, rhs: &[C64]) -> Result<Vec<C64>> {
    let sol = mat.lu().solve(&DVector::from_column_slice(rhs)).ok_or(Error::Degenerate(0.0))?;
    Ok(sol.iter().copied().collect())
}

/// `X * Y = E^{-1} . X . Y` built from the canonical idempotents, where it
/// reads `(X * Y)_mu = X_mu Y_mu / u_mu`.
pub fn canonical_star(bd: &BaseData) -> Structure3 {
    let n = bd.jinv.nrows();
    let u: Vec<C64> = bd.frame.groups.iter().map(|g| g.u).collect();
    let mut s = Structure3 { n, data: vec![C64::new(0.0, 0.0); n * n * n] };
    for m in 0..n {
        for a in 0..n {
            for b in 0..n {
                let v = (0..n).map(|mu| bd.jinv[(m, mu)] * bd.jacobian[(mu, a)] * bd.jacobian[(mu, b)] / u[mu]).sum();
                s.set(m, a, b, v);
            }
        }
    }
    s
}

/// `(e1, e2)` eventual-identity residuals.
pub fn eventual_identity_checks(
    m: &ModelBundle,
    prep: &Prepared,
    full: &Point,
    bd: &BaseData,
    open: &Structure3,
) -> Result<(f64, f64)> {
    let mut ev = Evaluator::new(full);
    let x = full[&m.x];
    let lam = ev.eval(m.lambda.base())?;
    let lx = ev.eval(&m.lambda.d(&[&m.x]))?;
    let lev = ev.eval(&prep.lie_ev_lambda)?;
    let le = ev.eval(&prep.lie_e_lambda)?;
    let ex_stored = ev.eval(&prep.eventual_x)?;
    let ex_formula = (1.0 - m.d) * x / 2.0 + m.d0;
    let ex_reconstructed = (lam - le) / lx;
    let euler_stored: Vec<C64> = prep.euler.iter().map(|e| ev.eval(e)).collect::<Result<_>>()?;
    let (unit, euler_canonical, einv_canonical) = canonical_fields(bd);
    let e1 = [
        rel(lev - lam, lam.norm()),
        rel(ex_stored - ex_formula, ex_stored.norm()),
        rel(ex_stored - ex_reconstructed, ex_stored.norm()),
        defect(&euler_stored, &euler_canonical),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let bullet = primal_structure(m, bd);
    let einv = solve(bullet.left_matrix(&euler_stored), &unit)?;
    let mut e2 = defect(&einv, &einv_canonical);
    if m.dual {
        let star = open.scaled(m.omega_scale);
        e2 = e2.max(defect(&star.mul(&unit, &unit), &einv_canonical));
    }
    Ok((e1, e2))
}

/// A projectable vector: base components and fibre component.
#[derive(Clone, Debug)]
pub struct Lifted {
    pub base: Vec<C64>,
    pub fibre: C64,
}

impl Lifted {
    fn flat(&self) -> Vec<C64> {
        let mut v = self.base.clone();
        v.push(self.fibre);
        v
    }
}

/// Pointwise data of the superpotential used by the extended products.
struct FibreJet {
    lam: C64,
    lx: C64,
    grad: Vec<C64>,
}

impl FibreJet {
    fn lie(&self, v: &[C64]) -> C64 {
        v.iter().zip(&self.grad).map(|(a, b)| a * b).sum()
    }
}

fn tilde_bullet(fj: &FibreJet, c: &Structure3, x: &Lifted, y: &Lifted) -> Lifted {
    let base = c.mul(&x.base, &y.base);
    let (lxl, lyl) = (fj.lie(&x.base), fj.lie(&y.base));
    let fibre = (lxl * lyl - fj.lie(&base)) / fj.lx + x.fibre * lyl + y.fibre * lxl + x.fibre * y.fibre * fj.lx;
    Lifted { base, fibre }
}

fn tilde_star(fj: &FibreJet, c: &Structure3, x: &Lifted, y: &Lifted) -> Lifted {
    let base = c.mul(&x.base, &y.base);
    let (lxl, lyl) = (fj.lie(&x.base), fj.lie(&y.base));
    let fibre = (lxl * lyl / fj.lam - fj.lie(&base)) / fj.lx
        + (x.fibre * lyl + y.fibre * lxl + x.fibre * y.fibre * fj.lx) / fj.lam;
    Lifted { base, fibre }
}

/// Defects of the extended products on the universal curve.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProductDefects {
    pub associativity: f64,
    pub unit: f64,
    pub dual_unit: f64,
    /// Dual product from the dual prepotential versus `E^{-1} . X . Y`.
    pub dual_product: f64,
}

impl ProductDefects {
    pub fn product(&self) -> f64 {
        self.associativity.max(self.unit).max(self.dual_unit)
    }
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_lifted(n: usize, rng: &mut ChaCha8Rng) -> Lifted {
    Lifted { base: (0..n).map(|_| random_c(rng)).collect(), fibre: random_c(rng) }
}

/// Associativity, unit and dual-unit defects of the extended products for
/// three random constant projectable vectors.
pub fn extended_product_checks(
    m: &ModelBundle,
    prep: &Prepared,
    full: &Point,
    bd: &BaseData,
    open: &Structure3,
    rng: &mut ChaCha8Rng,
) -> Result<ProductDefects> {
    let n = m.dim();
    let mut ev = Evaluator::new(full);
    let fj = FibreJet {
        lam: ev.eval(m.lambda.base())?,
        lx: ev.eval(&m.lambda.d(&[&m.x]))?,
        grad: m.chart.iter().map(|c| ev.eval(&m.lambda.d(&[c.as_str()]))).collect::<Result<_>>()?,
    };
    let bullet = primal_structure(m, bd);
    let (unit, _, _) = canonical_fields(bd);
    let euler: Vec<C64> = prep.euler.iter().map(|e| ev.eval(e)).collect::<Result<_>>()?;
    let star_from_bullet = canonical_star(bd);
    let star = if m.dual { open.scaled(m.omega_scale) } else { star_from_bullet.clone() };
    let (x, y, z) = (random_lifted(n, rng), random_lifted(n, rng), random_lifted(n, rng));
    let lhs = tilde_bullet(&fj, &bullet, &tilde_bullet(&fj, &bullet, &x, &y), &z);
    let rhs = tilde_bullet(&fj, &bullet, &x, &tilde_bullet(&fj, &bullet, &y, &z));
    let mut assoc = defect(&lhs.flat(), &rhs.flat());
    let lhs = tilde_star(&fj, &star, &tilde_star(&fj, &star, &x, &y), &z);
    let rhs = tilde_star(&fj, &star, &x, &tilde_star(&fj, &star, &y, &z));
    assoc = assoc.max(defect(&lhs.flat(), &rhs.flat()));
    let e = Lifted { base: unit, fibre: C64::new(0.0, 0.0) };
    let unit_defect = defect(&tilde_bullet(&fj, &bullet, &e, &x).flat(), &x.flat());
    let ev_field = Lifted { base: euler, fibre: ev.eval(&prep.eventual_x)? };
    let dual_unit = defect(&tilde_star(&fj, &star, &ev_field, &x).flat(), &x.flat());
    let dual_product =
        if m.dual { defect(&star.mul(&x.base, &y.base), &star_from_bullet.mul(&x.base, &y.base)) } else { 0.0 };
    Ok(ProductDefects { associativity: assoc, unit: unit_defect, dual_unit, dual_product })
}

/// Canonical diagonalisation defect of the residue metric.
pub fn canonical_diag_residual(bd: &BaseData) -> f64 {
    let diag = bd.jinv.transpose() * bd.td.eta.clone() * bd.jinv.clone();
    let n = diag.nrows();
    let scale = bd.frame.groups.iter().map(|g| g.eta.norm()).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for mu in 0..n {
        for nu in 0..n {
            let target = if mu == nu { bd.frame.groups[mu].eta } else { C64::new(0.0, 0.0) };
            worst = worst.max((diag[(mu, nu)] - target).norm() / scale);
        }
    }
    worst
}

/// Both sides of the log-theta identity: `log theta_1(x)` and its
/// elliptic-polylogarithm expansion.
pub fn log_theta_sides(x: C64, tau: C64) -> Result<(C64, C64)> {
    let ctx = specfn::ThetaContext::new(tau)?;
    let pi = std::f64::consts::PI;
    let lhs = specfn::theta1(0, x, &ctx).ln();
    let dl2 = specfn::two_pi_i() * specfn::elliptic_li(1, x, &ctx) + specfn::elliptic_li_shift(2);
    let rhs = C64::new(0.0, pi / 2.0) + specfn::dedekind_eta_log(tau) + C64::new(0.0, 1.0 / (2.0 * pi)) * dl2;
    Ok((lhs, rhs))
}

/// Both sides of the heat equation: `4 pi i d_tau theta_1` and `theta_1''`.
pub fn heat_sides(x: C64, tau: C64) -> (C64, C64) {
    let pi = std::f64::consts::PI;
    (C64::new(0.0, 4.0 * pi) * specfn::theta1_deriv(0, 1, x, tau), specfn::theta1_deriv(2, 0, x, tau))
}

/// Defect of two logarithms compared modulo `2 pi i`.
pub fn log_defect(lhs: C64, rhs: C64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut d = lhs - rhs;
    d.im -= tau * (d.im / tau).round();
    d.norm()
}

/// Log-theta identity and heat equation at a fibre point of an elliptic bundle.
pub fn jacobi_identities(m: &ModelBundle, full: &Point) -> Result<(f64, f64)> {
    let CurveSpec::Elliptic { tau } = &m.curve else {
        return Err(Error::Parameter("jacobi identities need an elliptic bundle".into()));
    };
    let tau = tau.eval(full)?;
    let x = full[&m.x];
    let (lhs, rhs) = log_theta_sides(x, tau)?;
    let (dtau, second) = heat_sides(x, tau);
    Ok((log_defect(lhs, rhs), (dtau - second).norm() / second.norm().max(1.0)))
}

fn sample_dist(d: Dist, rng: &mut ChaCha8Rng) -> C64 {
    match d {
        Dist::Annulus(lo, hi) => {
            let r = rng.random_range(lo..hi);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            C64::from_polar(r, phase)
        }
        Dist::Square(lo, hi) => C64::new(rng.random_range(lo..hi), rng.random_range(lo..hi)),
        Dist::Fixed(c) => c,
    }
}

fn reduced_distance(d: C64, period: &Period, p: &Point) -> Result<f64> {
    Ok(match period {
        Period::None => d.norm(),
        Period::Imaginary => {
            let two_pi = std::f64::consts::TAU;
            C64::new(d.re, d.im - two_pi * (d.im / two_pi).round()).norm()
        }
        Period::Lattice(tau) => {
            let tau = tau.eval(p)?;
            let b = (d.im / tau.im).round();
            let r = d - tau * b;
            let a = r.re.round();
            let mut best = f64::INFINITY;
            for da in -1..=1 {
                for db in -1..=1 {
                    best = best.min((r - C64::new(a + da as f64, 0.0) - tau * db as f64).norm());
                }
            }
            best
        }
    })
}

/// Draws chart values from a sampler.
pub fn draw_base(sampler: &Sampler, rng: &mut ChaCha8Rng) -> Point {
    sampler.chart.iter().map(|(name, d)| (name.clone(), sample_dist(*d, rng))).collect()
}

/// Draws an admissible fibre coordinate at a base point.
pub fn draw_x(m: &ModelBundle, p: &Point, rng: &mut ChaCha8Rng) -> Result<C64> {
    let singular: Vec<C64> = m.sampler.singular.iter().map(|s| s.eval(p)).collect::<Result<_>>()?;
    for _ in 0..RESAMPLE_ATTEMPTS {
        let x = sample_dist(m.sampler.x, rng);
        let mut ok = true;
        for s in &singular {
            if reduced_distance(x - s, &m.sampler.period, p)? <= 0.05 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let full = point_with(p, x);
        let mut ev = Evaluator::new(&full);
        let (Ok(lam), Ok(lx)) = (ev.eval(m.lambda.base()), ev.eval(&m.lambda.d(&[&m.x]))) else {
            continue;
        };
        if lx.norm() > 1e-6 && (!m.dual || lam.norm() > 1e-8) {
            return Ok(x);
        }
    }
    Err(Error::Inadmissible("no admissible fibre point after 100 attempts".into()))
}

fn recoverable(e: &Error) -> bool {
    !matches!(e, Error::Parameter(_) | Error::UnboundVariable(_))
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Residuals of one admissible sample.
#[derive(Clone, Debug, Default)]
pub struct SampleOutcome {
    pub residuals: BTreeMap<&'static str, f64>,
    pub eta: Option<DMatrix<C64>>,
}

fn wants(checks: &[&str], any: &[&str]) -> bool {
    any.iter().any(|c| checks.contains(c))
}

fn evaluate_rank1(m: &ModelBundle, prep: &Prepared, checks: &[&str], rng: &mut ChaCha8Rng) -> Result<SampleOutcome> {
    let p = draw_base(&m.sampler, rng);
    let bd = base_data(m, &p)?;
    let x = draw_x(m, &p, rng)?;
    let full = point_with(&p, x);
    let mut out = SampleOutcome::default();
    let metric = bd.metric.clone().unwrap_or_else(|| DMatrix::zeros(0, 0));
    let open = open_structure(m, &p, &bd.td, &metric)?;
    let mut put = |k: &'static str, v: f64| {
        out.residuals.insert(k, v);
    };
    if checks.contains(&"omega-x") {
        put("omega-x", omega_x_residual(m, &full)?);
    }
    if checks.contains(&"closed-wdvv") {
        put("closed-wdvv", closed_wdvv_residual(&open));
    }
    if wants(checks, &["open-r1", "open-r2"]) {
        let (r1, r2) = open_wdvv_residual(m, &full, &open)?;
        put("open-r1", r1);
        put("open-r2", r2);
    }
    if wants(checks, &["kab-spread", "kab-mean"]) {
        let mut xs = vec![x];
        while xs.len() < KAB_POINTS {
            xs.push(draw_x(m, &p, rng)?);
        }
        let (spread, mean) = kab_constancy(m, &p, &xs, &open)?;
        put("kab-spread", spread);
        put("kab-mean", mean);
    }
    if wants(checks, &["h-lambda", "h-omega"]) {
        let (hl, ho) = homogeneity_checks(m, prep, &full)?;
        put("h-lambda", hl);
        put("h-omega", ho);
    }
    if wants(checks, &["eventual-e1", "eventual-e2"]) {
        let (e1, e2) = eventual_identity_checks(m, prep, &full, &bd, &open)?;
        put("eventual-e1", e1);
        put("eventual-e2", e2);
    }
    if wants(checks, &["product", "dual-product"]) {
        let d = extended_product_checks(m, prep, &full, &bd, &open, rng)?;
        put("product", d.product());
        put("dual-product", d.dual_product);
    }
    if checks.contains(&"canonical-diag") {
        put("canonical-diag", canonical_diag_residual(&bd));
    }
    if checks.contains(&"metric-const") {
        if let Some(g) = &bd.metric {
            let from_residue = geometry::dual_metric_from_residue(m, &bd.td)?;
            let v = defect(from_residue.as_slice(), g.as_slice());
            put("metric-const", v);
        }
    }
    if wants(checks, &["jacobi-logtheta", "jacobi-heat"]) {
        let (lt, heat) = jacobi_identities(m, &full)?;
        put("jacobi-logtheta", lt);
        put("jacobi-heat", heat);
    }
    if !m.dual {
        out.eta = Some(bd.td.eta.clone());
    }
    Ok(out)
}

/// Fully evaluated sample of a rank-one bundle, resampling on inadmissible draws.
pub fn sample_rank1(
    m: &ModelBundle,
    prep: &Prepared,
    checks: &[&str],
    seed: u64,
    index: usize,
) -> Result<SampleOutcome> {
    let mut rng = sample_rng(seed, index);
    let mut last = None;
    for _ in 0..RESAMPLE_ATTEMPTS {
        match evaluate_rank1(m, prep, checks, &mut rng) {
            Ok(o) => return Ok(o),
            Err(e) if recoverable(&e) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Inadmissible(format!(
        "sample {index}: no admissible point after {RESAMPLE_ATTEMPTS} attempts ({})",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Four rank-two residual families at `(v, z, w)`.
pub fn rank2_residual(b: &RankTwoBundle, full: &Point, c: &Structure3) -> Result<[f64; 4]> {
    let n = b.base.dim();
    let chart: Vec<&str> = b.base.chart.iter().map(|s| s.as_str()).collect();
    let fib = ["z", "w"];
    let om = [&b.phi, &b.psi];
    let mut ev = Evaluator::new(full);
    let mut all: Vec<&str> = chart.clone();
    all.extend(fib);
    let h: Vec<Vec<Vec<C64>>> = om.iter().map(|j| hessian(j, &all, &mut ev)).collect::<Result<_>>()?;
    let fx = |k: usize| n + k;
    let mut f = [0.0f64; 4];
    for a in 0..2 {
        let ha = &h[a];
        for al in 0..n {
            for be in 0..n {
                for ga in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    let mut mag: f64 = 0.0;
                    for mu in 0..n {
                        let t1 = c.get(mu, al, be) * ha[mu][ga];
                        let t2 = c.get(mu, be, ga) * ha[al][mu];
                        s += t1 - t2;
                        mag = mag.max(t1.norm()).max(t2.norm());
                    }
                    for bb in 0..2 {
                        let t1 = h[bb][al][be] * ha[fx(bb)][ga];
                        let t2 = h[bb][be][ga] * ha[fx(bb)][al];
                        s += t1 - t2;
                        mag = mag.max(t1.norm()).max(t2.norm());
                    }
                    f[0] = f[0].max(rel(s, mag));
                }
                for bx in 0..2 {
                    let mut s = C64::new(0.0, 0.0);
                    let mut mag: f64 = 0.0;
                    for mu in 0..n {
                        let t = c.get(mu, al, be) * ha[mu][fx(bx)];
                        s += t;
                        mag = mag.max(t.norm());
                    }
                    for cc in 0..2 {
                        let t1 = h[cc][al][be] * ha[fx(cc)][fx(bx)];
                        let t2 = h[cc][be][fx(bx)] * ha[fx(cc)][al];
                        s += t1 - t2;
                        mag = mag.max(t1.norm()).max(t2.norm());
                    }
                    f[1] = f[1].max(rel(s, mag));
                }
            }
        }
    }
    for cc in 0..2 {
        for al in 0..n {
            for a in 0..2 {
                for bb in 0..2 {
                    let mut s = C64::new(0.0, 0.0);
                    let mut mag: f64 = 0.0;
                    for d in 0..2 {
                        let t1 = h[d][fx(a)][fx(bb)] * h[cc][al][fx(d)];
                        let t2 = h[d][al][fx(a)] * h[cc][fx(d)][fx(bb)];
                        s += t1 - t2;
                        mag = mag.max(t1.norm()).max(t2.norm());
                    }
                    f[2] = f[2].max(rel(s, mag));
                }
            }
        }
    }
    for d in 0..2 {
        for a in 0..2 {
            for bb in 0..2 {
                for cc in 0..2 {
                    let mut s = C64::new(0.0, 0.0);
                    let mut mag: f64 = 0.0;
                    for k in 0..2 {
                        let t1 = h[k][fx(bb)][fx(cc)] * h[d][fx(a)][fx(k)];
                        let t2 = h[k][fx(a)][fx(bb)] * h[d][fx(k)][fx(cc)];
                        s += t1 - t2;
                        mag = mag.max(t1.norm()).max(t2.norm());
                    }
                    f[3] = f[3].max(rel(s, mag));
                }
            }
        }
    }
    Ok(f)
}

/// Restriction of the rank-two extension to `w = 0` against the rank-one model.
pub fn rank2_restriction(b: &RankTwoBundle, p: &Point, z: C64, c: &Structure3) -> Result<f64> {
    let mut at = p.clone();
    at.insert("z".into(), z);
    at.insert("w".into(), C64::new(0.0, 0.0));
    let mut rank1 = p.clone();
    rank1.insert("x".into(), z);
    let mut ev = Evaluator::new(&at);
    let mut ev1 = Evaluator::new(&rank1);
    let lam = ev1.eval(b.base.lambda.base())?;
    let mut worst = rel(ev.eval(&b.phi.d(&["z"]))? - lam, lam.norm());
    worst = worst.max(rel(ev.eval(b.phi.base())? - ev1.eval(b.base.omega.base())?, 1.0));
    let (_, r2) = open_wdvv_residual(&b.base, &rank1, c)?;
    let fam = rank2_residual(b, &at, c)?;
    worst = worst.max((fam[1] - r2).abs().min(fam[1].max(r2)));
    let full: Point = {
        let mut q = p.clone();
        q.insert("z".into(), z);
        q.insert("w".into(), C64::new(0.37, -0.21));
        q
    };
    let mut evf = Evaluator::new(&full);
    let w = full["w"];
    let fz = evf.eval(&b.f.diff("z"))?;
    let fv = evf.eval(&b.f)?;
    let psi_z = evf.eval(&b.psi.d(&["z"]))?;
    let psi_w = evf.eval(&b.psi.d(&["w"]))?;
    let standard = b.psi.d(&["w", "w"]).eval(&full)?.norm() < 1e-12;
    if standard {
        worst = worst.max(rel(psi_z - w * fz, psi_z.norm()));
        worst = worst.max(rel(psi_w - (fv - w * w), psi_w.norm()));
    }
    Ok(worst)
}

fn evaluate_rank2(b: &RankTwoBundle, checks: &[&str], rng: &mut ChaCha8Rng) -> Result<SampleOutcome> {
    let p = draw_base(&b.base.sampler, rng);
    let bd = base_data(&b.base, &p)?;
    let c = primal_structure(&b.base, &bd);
    let z = sample_dist(Dist::Annulus(0.6, 1.4), rng);
    let w = sample_dist(Dist::Annulus(0.6, 1.4), rng);
    let mut full = p.clone();
    full.insert("z".into(), z);
    full.insert("w".into(), w);
    let mut out = SampleOutcome::default();
    if wants(checks, &["rank2-f1", "rank2-f2", "rank2-f3", "rank2-f4"]) {
        let f = rank2_residual(b, &full, &c)?;
        for (k, name) in ["rank2-f1", "rank2-f2", "rank2-f3", "rank2-f4"].into_iter().enumerate() {
            out.residuals.insert(name, f[k]);
        }
    }
    if checks.contains(&"rank2-restrict") {
        out.residuals.insert("rank2-restrict", rank2_restriction(b, &p, z, &c)?);
    }
    Ok(out)
}

pub fn sample_rank2(b: &RankTwoBundle, checks: &[&str], seed: u64, index: usize) -> Result<SampleOutcome> {
    let mut rng = sample_rng(seed, index);
    let mut last = None;
    for _ in 0..RESAMPLE_ATTEMPTS {
        match evaluate_rank2(b, checks, &mut rng) {
            Ok(o) => return Ok(o),
            Err(e) if recoverable(&e) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Inadmissible(format!(
        "sample {index}: no admissible point ({})",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Resolves and validates the check selection of a run.
pub fn select_checks(t: &Target, cfg: &VerifyConfig) -> Result<Vec<&'static str>> {
    let applicable = applicable_checks(t);
    match &cfg.checks {
        None => Ok(match t {
            Target::Rank1(m) => default_checks(m),
            Target::Rank2(_) => rank2_checks(),
        }),
        Some(list) => {
            let mut out = Vec::new();
            for name in list {
                let known = CHECK_NAMES
                    .iter()
                    .find(|c| **c == name.as_str())
                    .ok_or_else(|| Error::Parameter(format!("unknown check `{name}`")))?;
                if !applicable.contains(known) {
                    return Err(Error::Parameter(format!("check `{name}` does not apply to {}", t.family())));
                }
                if !out.contains(known) {
                    out.push(*known);
                }
            }
            Ok(out)
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))
}

/// Runs the selected checks over `samples` seeded admissible points.
pub fn run(t: &Target, cfg: &VerifyConfig) -> Result<ResidualReport> {
    let start = Instant::now();
    let checks = select_checks(t, cfg)?;
    for name in cfg.tolerances.keys() {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::Parameter(format!("unknown check `{name}` in tolerance override")));
        }
    }
    if cfg.samples == 0 {
        return Err(Error::Parameter("samples must be positive".into()));
    }
    let sample_checks: Vec<&str> =
        checks.iter().copied().filter(|c| !matches!(*c, "gauss-manin" | "period-doubling")).collect();
    let workers = pool(cfg.jobs)?;
    let outcomes: Vec<Result<SampleOutcome>> = match t {
        Target::Rank1(m) => {
            let prep = Prepared::new(m);
            workers.install(|| {
                (0..cfg.samples).into_par_iter().map(|i| sample_rank1(m, &prep, &sample_checks, cfg.seed, i)).collect()
            })
        }
        Target::Rank2(b) => workers.install(|| {
            (0..cfg.samples).into_par_iter().map(|i| sample_rank2(b, &sample_checks, cfg.seed, i)).collect()
        }),
    };
    let mut maxima: BTreeMap<&str, f64> = BTreeMap::new();
    let mut etas = Vec::new();
    for o in outcomes {
        let o = o?;
        for (k, v) in o.residuals {
            let slot = maxima.entry(k).or_insert(0.0);
            *slot = if v.is_nan() { f64::INFINITY } else { slot.max(v) };
        }
        if let Some(e) = o.eta {
            etas.push(e);
        }
    }
    if let Target::Rank1(m) = t {
        if checks.contains(&"metric-const") && !m.dual {
            let first = &etas[0];
            let v = etas.iter().map(|e| defect(e.as_slice(), first.as_slice())).fold(0.0, f64::max);
            maxima.insert("metric-const", v);
        }
        if wants(&checks, &["gauss-manin", "period-doubling"]) {
            let r = periods::period_checks(m, cfg.seed, cfg.samples)?;
            maxima.insert("gauss-manin", r.gauss_manin);
            maxima.insert("period-doubling", r.doubling);
        }
    }
    let family = t.family().to_string();
    let results = checks
        .iter()
        .map(|name| {
            let tol = cfg.tolerances.get(*name).copied().unwrap_or_else(|| default_tolerance(&family, name));
            let v = maxima.get(name).copied().unwrap_or(0.0);
            CheckResult { name: name.to_string(), max_residual: v, tolerance: tol, pass: v <= tol }
        })
        .collect();
    let params = match t {
        Target::Rank1(m) => m.params.clone(),
        Target::Rank2(b) => [("ell".to_string(), b.ell.to_string())].into(),
    };
    Ok(ResidualReport {
        model: family,
        params,
        seed: cfg.seed,
        samples: cfg.samples,
        checks: results,
        wall_ms: if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 },
    })
}
