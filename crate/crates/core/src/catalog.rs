//! Constructors for every explicit model family.
//!
//! Each builder returns a [`ModelBundle`]: the superpotential, the extended
//! prepotential, the dual prepotential when there is one, Euler fields,
//! charges, the curve description used to locate critical points, and a
//! sampling recipe for admissible points.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::exprcore::{Expr, Jet, VectorField};
use crate::geometry;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Numerator of a rational superpotential in the curve coordinate.
#[derive(Clone, Debug)]
pub enum Numerator {
    /// Coefficients, highest degree first.
    Coeffs(Vec<Expr>),
    /// Roots with (possibly negative) multiplicities.
    Roots(Vec<(Expr, i32)>),
}

/// How critical points of the superpotential are located.
#[derive(Clone, Debug)]
pub enum CurveSpec {
    /// `lambda = N(c) / c^pole_order`, with `c = x` or `c = exp(x)`.
    Rational { exp_coord: bool, numerator: Numerator, pole_order: i32 },
    /// Elliptic function of `x` with periods `1` and `tau`.
    Elliptic { tau: Expr },
}

/// Periodicity of the curve coordinate, used by proximity guards.
#[derive(Clone, Debug)]
pub enum Period {
    None,
    /// Period `2 pi i`.
    Imaginary,
    /// Lattice generated by `1` and `tau`.
    Lattice(Expr),
}

/// Distribution of one sampled coordinate.
#[derive(Clone, Copy, Debug)]
pub enum Dist {
    /// Modulus uniform in `[lo, hi]`, phase uniform.
    Annulus(f64, f64),
    /// Real and imaginary parts uniform in `[lo, hi]`.
    Square(f64, f64),
    Fixed(C64),
}

/// Sampling recipe for base points and fibre coordinates.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub chart: Vec<(String, Dist)>,
    pub x: Dist,
    /// Points of the curve (zeros and poles of `lambda`) the fibre sample must avoid.
    pub singular: Vec<Expr>,
    pub period: Period,
}

/// Where the structure constants of the base come from.
#[derive(Clone, Debug)]
pub enum Structure {
    /// Residues of the superpotential in a flat chart.
    Residue,
    /// Residues in a chart that is not flat: open equations do not apply.
    ResidueNonFlat,
    /// Intersection form times the third derivatives of the dual prepotential.
    Dual,
}

/// One model family instantiated at given integer parameters.
pub struct ModelBundle {
    pub family: String,
    pub params: BTreeMap<String, String>,
    pub x: String,
    pub chart: Vec<String>,
    pub lambda: Jet,
    /// `omega = scale * dx`.
    pub omega_scale: f64,
    pub omega: Jet,
    pub fstar: Option<Jet>,
    pub structure: Structure,
    /// Closed-form intersection form (upper indices), when known.
    pub metric: Option<DMatrix<C64>>,
    pub d: f64,
    pub d0: f64,
    pub euler: VectorField,
    pub eventual: VectorField,
    pub dual: bool,
    pub curve: CurveSpec,
    pub sampler: Sampler,
    pub metadata: Vec<(String, String)>,
}

impl ModelBundle {
    pub fn dim(&self) -> usize {
        self.chart.len()
    }

    /// Weight `kappa` with `Lie_E Omega = kappa Omega` modulo linear terms.
    pub fn omega_weight(&self) -> f64 {
        if self.dual {
            (1.0 - self.d) / 2.0
        } else {
            (3.0 - self.d) / 2.0
        }
    }

    /// Whether the rank-one open equations can be evaluated in this chart.
    pub fn has_flat_chart(&self) -> bool {
        !matches!(self.structure, Structure::ResidueNonFlat)
    }

    /// Tolerance scale: elliptic families need a looser default.
    pub fn is_elliptic(&self) -> bool {
        matches!(self.curve, CurveSpec::Elliptic { .. })
    }

    /// Replaces the extended prepotential.
    pub fn with_omega(mut self, omega: Expr) -> Self {
        self.omega = Jet::new(omega);
        self
    }

    /// Replaces the dual prepotential.
    pub fn with_fstar(mut self, fstar: Expr) -> Self {
        self.fstar = Some(Jet::new(fstar));
        self
    }
}

/// Parameter map accepted by [`build`].
pub type Params = BTreeMap<String, String>;

/// Family identifiers with their parameter schemas.
pub const FAMILIES: &[(&str, &str)] = &[
    ("saito-a", "ell=1..8"),
    ("saito-d", "ell=3..8"),
    ("dual-saito-a", "ell=1..6"),
    ("dz-a", "ell=1..6, r=1..4"),
    ("ma-zuo", "ell=1..6, r=1..4, k=1..4 | n=2..8, r=1..4, ks=k1:k2:... (n > r + sum ks)"),
    ("jacobi-a", "ell=1..4, tau=complex (Im tau >= 0.2, default i)"),
    ("rank2-a", "ell=1..6"),
    ("fold-b", "ell=2..4"),
    ("fold-i2", "ell=3..8"),
];

fn var(name: &str) -> Expr {
    Expr::var(name)
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn real(r: f64) -> Expr {
    Expr::real(r)
}

/// Reads a positive integer parameter.
pub fn int_param(p: &Params, key: &str) -> Result<i64> {
    let raw = p.get(key).ok_or_else(|| Error::Parameter(format!("missing parameter `{key}`")))?;
    raw.trim()
        .parse::<i64>()
        .map_err(|_| Error::Parameter(format!("parameter `{key}` must be an integer, got `{raw}`")))
}

/// Parses complex literals such as `1i`, `0.3+1i`, `-0.5-2i` or `2`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parameter(format!("cannot parse complex number `{s}`"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        let split = body.char_indices().skip(1).filter(|(_, c)| *c == '+' || *c == '-').last().map(|(i, _)| i);
        let (re, im) = match split {
            Some(i) if !body[..i].ends_with(['e', 'E']) => (&body[..i], &body[i..]),
            _ => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            v => v.parse::<f64>().map_err(|_| bad())?,
        };
        let re = re.parse::<f64>().map_err(|_| bad())?;
        Ok(C64::new(re, im))
    } else {
        Ok(C64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0))
    }
}

fn check_range(name: &str, v: i64, lo: i64, hi: i64) -> Result<()> {
    if v < lo || v > hi {
        return Err(Error::Parameter(format!("`{name}` must lie in {lo}..={hi}, got {v}")));
    }
    Ok(())
}

fn allow_only(p: &Params, keys: &[&str]) -> Result<()> {
    for k in p.keys() {
        if !keys.contains(&k.as_str()) {
            return Err(Error::Parameter(format!("unknown parameter `{k}`")));
        }
    }
    Ok(())
}

/// Builds a rank-one bundle by family id.
pub fn build(family: &str, p: &Params) -> Result<ModelBundle> {
    let mut b = match family {
        "saito-a" => {
            allow_only(p, &["ell"])?;
            build_saito_a(int_param(p, "ell")? as usize)?
        }
        "saito-d" => {
            allow_only(p, &["ell"])?;
            build_saito_d(int_param(p, "ell")? as usize)?
        }
        "dual-saito-a" => {
            allow_only(p, &["ell"])?;
            build_dual_saito_a(int_param(p, "ell")? as usize)?
        }
        "dz-a" => {
            allow_only(p, &["ell", "r"])?;
            build_dz_a(int_param(p, "ell")? as usize, int_param(p, "r")? as usize)?
        }
        "ma-zuo" => {
            if p.contains_key("n") || p.contains_key("ks") {
                allow_only(p, &["n", "r", "ks"])?;
                let ks = p
                    .get("ks")
                    .ok_or_else(|| Error::Parameter("missing parameter `ks`".into()))?
                    .split([':', ';', '/'])
                    .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Parameter(format!("bad entry `{s}` in ks"))))
                    .collect::<Result<Vec<_>>>()?;
                build_ma_zuo_general(int_param(p, "n")? as usize, int_param(p, "r")? as usize, &ks)?
            } else {
                allow_only(p, &["ell", "r", "k"])?;
                build_ma_zuo(int_param(p, "ell")? as usize, int_param(p, "r")? as usize, int_param(p, "k")? as usize)?
            }
        }
        "jacobi-a" => {
            allow_only(p, &["ell", "tau"])?;
            let tau = match p.get("tau") {
                Some(s) => parse_complex(s)?,
                None => I,
            };
            build_jacobi_a(int_param(p, "ell")? as usize, tau)?
        }
        "fold-b" => {
            allow_only(p, &["ell"])?;
            fold(FoldRule::B, int_param(p, "ell")? as usize)?
        }
        "fold-i2" => {
            allow_only(p, &["ell"])?;
            fold(FoldRule::I2, int_param(p, "ell")? as usize)?
        }
        "rank2-a" => {
            return Err(Error::Parameter("rank2-a is a rank-two family; use build_rank2_a".into()));
        }
        other => return Err(Error::Parameter(format!("unknown model family `{other}`"))),
    };
    b.params = p.clone();
    Ok(b)
}

fn generic_sampler(chart: &[String], singular: Vec<Expr>, period: Period) -> Sampler {
    Sampler {
        chart: chart.iter().map(|c| (c.clone(), Dist::Annulus(0.6, 1.4))).collect(),
        x: Dist::Annulus(0.6, 1.4),
        singular,
        period,
    }
}

fn euler_weighted(chart: &[String], weights: &[f64], h: f64) -> VectorField {
    VectorField::new(chart.iter().zip(weights).map(|(c, w)| (c.clone(), real(w / h) * var(c))).collect())
}

fn with_x(v: &VectorField, coeff: Expr) -> VectorField {
    let mut comps = v.components.clone();
    comps.push(("x".into(), coeff));
    VectorField::new(comps)
}

/// Exact rational coefficients of the integration constant of the type-A solution.
///
/// The coefficient of `v_1^k_1 ... v_ell^k_ell` is
/// `(K - 2)! / (k_1! ... k_ell! (ell + 1)^(K - 1))` with `K = sum k_alpha`,
/// supported on `sum (alpha + 1) k_alpha = ell + 2`.
///
/// Returns `(exponents k_1..k_ell, numerator, denominator)` in lowest terms.
pub fn varpi_terms(ell: usize) -> Vec<(Vec<u32>, u128, u128)> {
    fn fact(n: u32) -> u128 {
        (1..=n as u128).product()
    }
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    fn rec(alpha: usize, ell: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if alpha > ell {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let w = alpha + 1;
        let mut k = 0;
        while k * w <= left {
            cur.push(k as u32);
            rec(alpha + 1, ell, left - k * w, cur, out);
            cur.pop();
            k += 1;
        }
    }
    let mut supports = Vec::new();
    rec(1, ell, ell + 2, &mut Vec::new(), &mut supports);
    let mut out = Vec::new();
    for ks in supports {
        let total: u32 = ks.iter().sum();
        if total < 2 {
            continue;
        }
        let num = fact(total - 2);
        let den = (ell as u128 + 1).pow(total - 1) * ks.iter().map(|k| fact(*k)).product::<u128>();
        let g = gcd(num, den);
        out.push((ks, num / g, den / g));
    }
    out.sort();
    out.reverse();
    out
}

/// The integration constant as a polynomial expression in `v1..v_ell`.
pub fn build_varpi_a(ell: usize) -> Expr {
    let chart = names("v", ell);
    Expr::sum(
        varpi_terms(ell)
            .into_iter()
            .map(|(ks, num, den)| {
                let mut f = vec![real(num as f64 / den as f64)];
                for (k, v) in ks.iter().zip(&chart) {
                    if *k > 0 {
                        f.push(var(v).powi(*k as i32));
                    }
                }
                Expr::product(f)
            })
            .collect(),
    )
}

/// Formats the integration constant as `num/den*v1^k1*...` terms.
pub fn format_varpi(ell: usize) -> String {
    let terms: Vec<String> = varpi_terms(ell)
        .into_iter()
        .map(|(ks, num, den)| {
            let mut s = format!("{num}/{den}");
            for (i, k) in ks.iter().enumerate() {
                match k {
                    0 => {}
                    1 => s.push_str(&format!("*v{}", i + 1)),
                    k => s.push_str(&format!("*v{}^{k}", i + 1)),
                }
            }
            s
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Deformation parameters `a_1..a_ell` as expressions in flat coordinates `v`.
pub fn saito_a_parameters(ell: usize) -> Result<Vec<Expr>> {
    let polys = geometry::inverse_flat_polys(ell)?;
    let chart = names("v", ell);
    let refs: Vec<&str> = chart.iter().map(|s| s.as_str()).collect();
    Ok(polys.iter().map(|p| p.to_expr(&refs)).collect())
}

/// Saito type-A model in flat coordinates, with the integration constant `varpi`.
pub fn build_saito_a_with_varpi(ell: usize, varpi: Expr) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 1, 8)?;
    let chart = names("v", ell);
    let a = saito_a_parameters(ell)?;
    let x = var("x");
    let h = (ell + 1) as f64;
    let mut lam = vec![x.powi(ell as i32 + 1)];
    let mut om = vec![x.powi(ell as i32 + 2) / real(ell as f64 + 2.0)];
    for (alpha, aa) in a.iter().enumerate() {
        let alpha = alpha + 1;
        let pw = (ell - alpha) as i32;
        lam.push(aa.clone() * x.powi(pw));
        om.push(aa.clone() * x.powi(pw + 1) / real(pw as f64 + 1.0));
    }
    om.push(varpi);
    let mut coeffs = vec![Expr::one(), Expr::zero()];
    coeffs.extend(a.iter().cloned());
    let weights: Vec<f64> = (1..=ell).map(|al| (al + 1) as f64).collect();
    let euler = euler_weighted(&chart, &weights, h);
    let eventual = with_x(&euler, real(1.0 / h) * x.clone());
    Ok(ModelBundle {
        family: "saito-a".into(),
        params: [("ell".to_string(), ell.to_string())].into(),
        x: "x".into(),
        sampler: generic_sampler(&chart, vec![], Period::None),
        chart,
        lambda: Jet::new(Expr::sum(lam)),
        omega_scale: 1.0,
        omega: Jet::new(Expr::sum(om)),
        fstar: None,
        structure: Structure::Residue,
        metric: None,
        d: 1.0 - 2.0 / h,
        d0: 0.0,
        euler,
        eventual,
        dual: false,
        curve: CurveSpec::Rational { exp_coord: false, numerator: Numerator::Coeffs(coeffs), pole_order: 0 },
        metadata: vec![("varpi".into(), format_varpi(ell))],
    })
}

/// Saito type-A model with the integration constant from the coefficient formula.
pub fn build_saito_a(ell: usize) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 1, 8)?;
    build_saito_a_with_varpi(ell, build_varpi_a(ell))
}

/// Saito type-D model in deformation parameters `a_1..a_ell` (not a flat chart).
pub fn build_saito_d(ell: usize) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 3, 8)?;
    let chart = names("a", ell);
    let x = var("x");
    let h = 2.0 * (ell as f64 - 1.0);
    let coef = |i: usize| if i == 0 { Expr::one() } else { var(&chart[i - 1]) };
    let al = var(&chart[ell - 1]);
    let mut lam = Vec::new();
    let mut om = Vec::new();
    let mut numer = Vec::new();
    for i in 0..ell {
        let pw = 2 * (ell - 1 - i) as i32;
        let scale = 2f64.powi((ell - 1 - i) as i32);
        lam.push(coef(i) * x.powi(pw) / real(scale));
        om.push(coef(i) * x.powi(pw + 1) / real(scale * (pw as f64 + 1.0)));
        numer.push(coef(i) / real(scale));
        numer.push(Expr::zero());
    }
    lam.push(-(al.powi(2) / (2.0 * x.powi(2))));
    om.push(al.powi(2) / (2.0 * x.clone()));
    numer.push(-(al.powi(2) / 2.0));
    let mut weights: Vec<f64> = (1..ell).map(|i| 2.0 * i as f64).collect();
    weights.push(ell as f64);
    let euler = euler_weighted(&chart, &weights, h);
    let eventual = with_x(&euler, real(1.0 / h) * x.clone());
    let weight_str = weights.iter().map(|w| format!("{w}")).collect::<Vec<_>>().join(",");
    Ok(ModelBundle {
        family: "saito-d".into(),
        params: [("ell".to_string(), ell.to_string())].into(),
        x: "x".into(),
        sampler: generic_sampler(&chart, vec![Expr::zero()], Period::None),
        chart,
        lambda: Jet::new(Expr::sum(lam)),
        omega_scale: 1.0,
        omega: Jet::new(Expr::sum(om)),
        fstar: None,
        structure: Structure::ResidueNonFlat,
        metric: None,
        d: 1.0 - 2.0 / h,
        d0: 0.0,
        euler,
        eventual,
        dual: false,
        curve: CurveSpec::Rational { exp_coord: false, numerator: Numerator::Coeffs(numer), pole_order: 2 },
        metadata: vec![("euler-weights".into(), weight_str), ("coxeter-number".into(), format!("{h}"))],
    })
}

fn wbar(chart: &[String]) -> Expr {
    chart.iter().map(|c| var(c)).sum()
}

/// Dual prepotential of the almost-dual type-A structure.
pub fn dual_saito_a_fstar(ell: usize) -> Expr {
    let chart = names("w", ell);
    let wb = wbar(&chart);
    let half_sq_log = |d: Expr| d.powi(2) * d.log() / 2.0;
    let mut terms = Vec::new();
    for a in 0..ell {
        for b in (a + 1)..ell {
            terms.push(half_sq_log(var(&chart[a]) - var(&chart[b])));
        }
        terms.push(half_sq_log(var(&chart[a]) + wb.clone()));
    }
    Expr::sum(terms)
}

/// Almost-dual type-A model in the flat coordinates of the intersection form.
pub fn build_dual_saito_a(ell: usize) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 1, 6)?;
    let chart = names("w", ell);
    let x = var("x");
    let wb = wbar(&chart);
    let mut lam = vec![x.clone() + wb.clone()];
    let mut om = vec![(x.clone() + wb.clone()) * (x.clone() + wb.clone()).log()];
    let mut roots = vec![(-wb.clone(), 1)];
    for c in &chart {
        let d = x.clone() - var(c);
        lam.push(d.clone());
        om.push(d.clone() * d.log());
        roots.push((var(c), 1));
    }
    let h = (ell + 1) as f64;
    let weights = vec![1.0; ell];
    let euler = euler_weighted(&chart, &weights, h);
    let eventual = with_x(&euler, real(1.0 / h) * x.clone());
    let metric = DMatrix::from_fn(ell, ell, |i, j| C64::new(if i == j { 1.0 } else { 0.0 } - 1.0 / h, 0.0));
    let mut singular = vec![-wb.clone()];
    singular.extend(chart.iter().map(|c| var(c)));
    Ok(ModelBundle {
        family: "dual-saito-a".into(),
        params: [("ell".to_string(), ell.to_string())].into(),
        x: "x".into(),
        sampler: generic_sampler(&chart, singular, Period::None),
        chart,
        lambda: Jet::new(Expr::product(lam)),
        omega_scale: 1.0,
        omega: Jet::new(Expr::sum(om)),
        fstar: Some(Jet::new(dual_saito_a_fstar(ell))),
        structure: Structure::Dual,
        metric: Some(metric),
        d: 1.0 - 2.0 / h,
        d0: 0.0,
        euler,
        eventual,
        dual: true,
        curve: CurveSpec::Rational { exp_coord: false, numerator: Numerator::Roots(roots), pole_order: 0 },
        metadata: vec![("metric-source".into(), "residue".into())],
    })
}

/// Dual prepotential of the trigonometric families for coordinates `z_i`
/// with multiplicities `m_i`, pole order `r` and `ell = sum m_i - r`.
pub fn trig_fstar(z: &[Expr], mult: &[f64], ell: f64, r: f64) -> Expr {
    let n = z.len();
    let mut terms = Vec::new();
    for i in 0..n {
        let (zi, mi) = (&z[i], mult[i]);
        let cubic = ((ell - r) * mi + 3.0 * mi * mi - 2.0 / r * mi.powi(3)) / 12.0;
        terms.push(real(cubic) * zi.powi(3));
        for j in 0..n {
            if j == i {
                continue;
            }
            let (zj, mj) = (&z[j], mult[j]);
            let c = 0.25 * mi * mj - mi * mi * mj / (2.0 * r);
            terms.push(real(c) * zi.powi(2) * zj.clone());
            if j > i {
                let li = (zi.clone() - zj.clone()).li_exp(3) + (zj.clone() - zi.clone()).li_exp(3);
                terms.push(real(-0.5 * mi * mj) * li);
                for k in (j + 1)..n {
                    terms.push(real(-mi * mj * mult[k] / r) * zi.clone() * zj.clone() * z[k].clone());
                }
            }
        }
    }
    Expr::sum(terms)
}

/// Extended prepotential of the trigonometric families.
pub fn trig_omega(z: &[Expr], mult: &[f64], r: f64) -> Expr {
    let x = var("x");
    let mut terms = vec![real(r / 2.0) * x.powi(2)];
    for (zi, mi) in z.iter().zip(mult) {
        terms.push(real(mi / 2.0) * zi.powi(2));
        terms.push(real(-mi) * x.clone() * zi.clone());
        terms.push(real(*mi) * (x.clone() - zi.clone()).li_exp(2));
    }
    Expr::sum(terms)
}

fn trig_bundle(family: &str, chart: Vec<String>, mult: Vec<f64>, r: usize) -> Result<ModelBundle> {
    let x = var("x");
    let rf = r as f64;
    let ell_f = mult.iter().sum::<f64>() - rf;
    if ell_f < 0.5 {
        return Err(Error::Parameter(format!("{family}: need sum of multiplicities > r")));
    }
    let z: Vec<Expr> = chart.iter().map(|c| var(c)).collect();
    let mut lam = vec![(-rf * x.clone()).exp()];
    for (zi, mi) in z.iter().zip(&mult) {
        lam.push((x.exp() - zi.exp()).powi(*mi as i32));
    }
    let euler = VectorField::new(chart.iter().map(|c| (c.clone(), real(1.0 / ell_f))).collect());
    let eventual = with_x(&euler, real(1.0 / ell_f));
    let n = chart.len();
    let metric = DMatrix::from_fn(n, n, |i, j| C64::new(1.0 / ell_f - if i == j { 1.0 / mult[i] } else { 0.0 }, 0.0));
    let roots = z.iter().zip(&mult).map(|(zi, mi)| (zi.exp(), *mi as i32)).collect();
    Ok(ModelBundle {
        family: family.into(),
        params: BTreeMap::new(),
        x: "x".into(),
        sampler: generic_sampler(&chart, z.clone(), Period::Imaginary),
        lambda: Jet::new(Expr::product(lam)),
        omega_scale: -1.0,
        omega: Jet::new(trig_omega(&z, &mult, rf)),
        fstar: Some(Jet::new(trig_fstar(&z, &mult, ell_f, rf))),
        structure: Structure::Dual,
        metric: Some(metric),
        d: 1.0,
        d0: 1.0 / ell_f,
        euler,
        eventual,
        dual: true,
        curve: CurveSpec::Rational { exp_coord: true, numerator: Numerator::Roots(roots), pole_order: r as i32 },
        metadata: vec![("ell".into(), format!("{ell_f}"))],
        chart,
    })
}

/// Extended affine Weyl group orbit space of type A (trigonometric model).
pub fn build_dz_a(ell: usize, r: usize) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 1, 6)?;
    check_range("r", r as i64, 1, 4)?;
    let chart = names("w", ell + r);
    trig_bundle("dz-a", chart, vec![1.0; ell + r], r)
}

/// Trigonometric model with one extra pole of order `k`, coordinates `(w, u)`.
pub fn build_ma_zuo(ell: usize, r: usize, k: usize) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 1, 6)?;
    check_range("r", r as i64, 1, 4)?;
    check_range("k", k as i64, 1, 4)?;
    build_ma_zuo_general(ell + r + k, r, &[k])
}

/// Generalised trigonometric model: `n` simple zeros, pole order `r` at
/// `y = 0` and poles of orders `ks` at `y = exp(u_mu)`.
pub fn build_ma_zuo_general(n: usize, r: usize, ks: &[usize]) -> Result<ModelBundle> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Parameter("ks must be a nonempty list of positive integers".into()));
    }
    let total: usize = ks.iter().sum();
    if n <= r + total {
        return Err(Error::Parameter(format!("need n > r + sum(ks), got n={n}, r={r}, sum={total}")));
    }
    check_range("r", r as i64, 1, 4)?;
    check_range("n", n as i64, 2, 8)?;
    let mut chart = names("w", n);
    chart.extend(if ks.len() == 1 { vec!["u".to_string()] } else { names("u", ks.len()) });
    let mut mult = vec![1.0; n];
    mult.extend(ks.iter().map(|k| -(*k as f64)));
    let mut b = trig_bundle("ma-zuo", chart, mult, r)?;
    b.metadata.push(("ks".into(), ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(":")));
    Ok(b)
}

/// Dual prepotential of the Jacobi-group model of type A.
pub fn jacobi_fstar(ell: usize) -> Expr {
    let chart = names("w", ell);
    let tau = var("tau");
    let u = var("u");
    let wb = wbar(&chart);
    let sq: Expr = chart.iter().map(|c| var(c).powi(2)).sum();
    let pi3 = Expr::constant(I * PI.powi(3));
    let phi3 = |z: Expr| z.elliptic_li(3, &tau) - Expr::zero().elliptic_li(3, &tau);
    let mut zs = vec![-wb.clone()];
    zs.extend(chart.iter().map(|c| var(c)));
    let mut terms = vec![pi3 * u.clone() * (tau.clone() * u.clone() - wb.powi(2) - sq)];
    for i in 0..=ell {
        for j in 0..=ell {
            if i != j {
                terms.push(real(-0.125) * phi3(zs[i].clone() - zs[j].clone()));
            }
        }
    }
    let mut single = vec![phi3(-wb.clone())];
    single.extend(chart.iter().map(|c| phi3(var(c))));
    terms.push(real((ell + 1) as f64 / 4.0) * Expr::sum(single));
    Expr::sum(terms)
}

/// Extended prepotential of the Jacobi-group model of type A.
pub fn jacobi_omega(ell: usize) -> Expr {
    let chart = names("w", ell);
    let tau = var("tau");
    let x = var("x");
    let wb = wbar(&chart);
    let c = Expr::constant(I / (2.0 * PI));
    let diff = |shift: Expr| (x.clone() + shift.clone()).elliptic_li(2, &tau) - shift.elliptic_li(2, &tau);
    let mut inner = vec![diff(wb.clone()), real(-((ell + 1) as f64)) * diff(Expr::zero())];
    inner.extend(chart.iter().map(|w| diff(-var(w))));
    Expr::constant(2.0 * PI * I) * var("u") * x.clone() + c * Expr::sum(inner)
}

/// Jacobi-group orbit space of type A, chart `(w_1..w_ell, u, tau)`.
pub fn build_jacobi_a(ell: usize, tau: C64) -> Result<ModelBundle> {
    check_range("ell", ell as i64, 1, 4)?;
    if tau.im < 0.2 {
        return Err(Error::Parameter(format!("Im tau must be at least 0.2, got {}", tau.im)));
    }
    let mut chart = names("w", ell);
    let tau_e = var("tau");
    let x = var("x");
    let wb = wbar(&chart);
    let mut lam = vec![(Expr::constant(2.0 * PI * I) * var("u")).exp(), (x.clone() + wb.clone()).theta1(&tau_e)];
    for c in &chart {
        lam.push((x.clone() - var(c)).theta1(&tau_e));
    }
    lam.push(x.theta1(&tau_e).powi(-(ell as i32 + 1)));
    let mut singular = vec![Expr::zero(), -wb.clone()];
    singular.extend(chart.iter().map(|c| var(c)));
    let n = ell + 2;
    let metric = DMatrix::from_fn(n, n, |i, j| {
        let v = if i < ell && j < ell {
            1.0 / (ell as f64 + 1.0) - if i == j { 1.0 } else { 0.0 }
        } else if (i == ell && j == ell + 1) || (i == ell + 1 && j == ell) {
            1.0
        } else {
            0.0
        };
        C64::new(v / (PI * PI), 0.0)
    });
    let mut sampler_chart: Vec<(String, Dist)> = chart.iter().map(|c| (c.clone(), Dist::Square(0.1, 0.35))).collect();
    sampler_chart.push(("u".into(), Dist::Square(0.1, 0.35)));
    sampler_chart.push(("tau".into(), Dist::Fixed(tau)));
    chart.push("u".into());
    chart.push("tau".into());
    let euler = VectorField::new(vec![("u".into(), Expr::constant(1.0 / (2.0 * PI * I)))]);
    Ok(ModelBundle {
        family: "jacobi-a".into(),
        params: [("ell".to_string(), ell.to_string()), ("tau".to_string(), format!("{}", tau))].into(),
        x: "x".into(),
        chart,
        lambda: Jet::new(Expr::product(lam)),
        omega_scale: 1.0,
        omega: Jet::new(jacobi_omega(ell)),
        fstar: Some(Jet::new(jacobi_fstar(ell))),
        structure: Structure::Dual,
        metric: Some(metric),
        d: 1.0,
        d0: 0.0,
        eventual: euler.clone(),
        euler,
        dual: true,
        curve: CurveSpec::Elliptic { tau: tau_e.clone() },
        sampler: Sampler {
            chart: sampler_chart,
            x: Dist::Square(-0.45, 0.45),
            singular,
            period: Period::Lattice(tau_e),
        },
        metadata: vec![],
    })
}

/// Folding patterns producing non-simply-laced solutions from type A.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldRule {
    /// `B_ell` from `A_{2 ell - 1}`: keep odd-indexed coordinates.
    B,
    /// `I_2(ell)` from `A_{ell - 1}`: keep the first and last coordinates.
    I2,
}

impl FoldRule {
    /// Source rank and the (1-based) source indices kept by the embedding.
    pub fn embedding(self, ell: usize) -> Result<(usize, Vec<usize>)> {
        match self {
            FoldRule::B => {
                check_range("ell", ell as i64, 2, 4)?;
                Ok((2 * ell - 1, (1..=ell).map(|i| 2 * i - 1).collect()))
            }
            FoldRule::I2 => {
                check_range("ell", ell as i64, 3, 8)?;
                Ok((ell - 1, vec![1, ell - 1]))
            }
        }
    }
}

/// Restricts a type-A solution to the fixed locus of a folding.
pub fn fold(rule: FoldRule, ell: usize) -> Result<ModelBundle> {
    let (m, keep) = rule.embedding(ell)?;
    let source = build_saito_a(m)?;
    fold_bundle(rule, ell, &source, &keep)
}

/// Applies the zero-padding embedding to an already built type-A bundle.
pub fn fold_bundle(rule: FoldRule, ell: usize, source: &ModelBundle, keep: &[usize]) -> Result<ModelBundle> {
    let m = source.dim();
    let chart = names("v", keep.len());
    let mut subst = BTreeMap::new();
    for i in 1..=m {
        let e = match keep.iter().position(|k| *k == i) {
            Some(j) => var(&chart[j]),
            None => Expr::zero(),
        };
        subst.insert(format!("v{i}"), e);
    }
    let lam = source.lambda.base().substitute(&subst);
    let om = source.omega.base().substitute(&subst);
    let numer = match &source.curve {
        CurveSpec::Rational { numerator: Numerator::Coeffs(cs), .. } => {
            Numerator::Coeffs(cs.iter().map(|c| c.substitute(&subst)).collect())
        }
        _ => return Err(Error::Parameter("folding requires a type-A source".into())),
    };
    let h = (m + 1) as f64;
    let weights: Vec<f64> = keep.iter().map(|k| (*k + 1) as f64).collect();
    let euler = euler_weighted(&chart, &weights, h);
    let eventual = with_x(&euler, real(1.0 / h) * var("x"));
    let family = match rule {
        FoldRule::B => "fold-b",
        FoldRule::I2 => "fold-i2",
    };
    Ok(ModelBundle {
        family: family.into(),
        params: [("ell".to_string(), ell.to_string())].into(),
        x: "x".into(),
        sampler: generic_sampler(&chart, vec![], Period::None),
        chart,
        lambda: Jet::new(lam),
        omega_scale: 1.0,
        omega: Jet::new(om),
        fstar: None,
        structure: Structure::Residue,
        metric: None,
        d: 1.0 - 2.0 / h,
        d0: 0.0,
        euler,
        eventual,
        dual: false,
        curve: CurveSpec::Rational { exp_coord: false, numerator: numer, pole_order: 0 },
        metadata: vec![
            ("source".into(), format!("saito-a ell={m}")),
            ("embedding".into(), keep.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")),
        ],
    })
}

/// Rank-two extension of the type-A Saito structure with fibre coordinates `(z, w)`.
pub struct RankTwoBundle {
    pub ell: usize,
    pub base: ModelBundle,
    pub phi: Jet,
    pub psi: Jet,
    pub f: Expr,
}

/// Which second component to use for the rank-two extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsiChoice {
    /// `w (z^(ell+1) + a_1 z^(ell-1) + ... + a_ell)`.
    Standard,
    /// `w^3`.
    Cubic,
}

pub fn build_rank2_a(ell: usize, psi: PsiChoice) -> Result<RankTwoBundle> {
    check_range("ell", ell as i64, 1, 6)?;
    let base = build_saito_a(ell)?;
    let subst: BTreeMap<String, Expr> = [("x".to_string(), var("z"))].into();
    let lam_z = base.lambda.base().substitute(&subst);
    let phi = base.omega.base().substitute(&subst);
    let w = var("w");
    let psi = match psi {
        PsiChoice::Standard => w.clone() * lam_z.clone(),
        PsiChoice::Cubic => w.powi(3),
    };
    Ok(RankTwoBundle { ell, f: lam_z + w.powi(2), phi: Jet::new(phi), psi: Jet::new(psi), base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprcore::{lie_derivative, Point};

    fn pt(pairs: &[(&str, C64)]) -> Point {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn varpi_coefficients() {
        assert_eq!(format_varpi(1), "0");
        assert_eq!(format_varpi(2), "1/6*v1^2");
        assert_eq!(format_varpi(3), "1/4*v1*v2");
        assert_eq!(format_varpi(4), "1/150*v1^3 + 1/5*v1*v3 + 1/10*v2^2");
    }

    #[test]
    fn parse_complex_forms() {
        assert_eq!(parse_complex("1i").unwrap(), C64::new(0.0, 1.0));
        assert_eq!(parse_complex("0.3+1i").unwrap(), C64::new(0.3, 1.0));
        assert_eq!(parse_complex("-0.5-2i").unwrap(), C64::new(-0.5, -2.0));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert_eq!(parse_complex("2").unwrap(), C64::new(2.0, 0.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn dz_euler_field_telescopes() {
        let b = build_dz_a(2, 1).unwrap();
        let p = pt(&[
            ("x", C64::new(0.3, 0.9)),
            ("w1", C64::new(0.7, -0.2)),
            ("w2", C64::new(-0.4, 0.6)),
            ("w3", C64::new(1.1, 0.3)),
        ]);
        let lam = b.lambda.base();
        let lie = lie_derivative(&b.eventual, lam).eval(&p).unwrap();
        let ex = p["x"].exp();
        let mut dx_log = C64::new(-1.0, 0.0);
        let mut dw_log = C64::new(0.0, 0.0);
        for w in ["w1", "w2", "w3"] {
            let ew = p[w].exp();
            dx_log += ex / (ex - ew);
            dw_log -= ew / (ex - ew);
        }
        let expected = lam.eval(&p).unwrap() * (dx_log + dw_log) / 2.0;
        assert!((lie - expected).norm() < 1e-12);
        assert!((lie - lam.eval(&p).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn jacobi_euler_field_is_u_scaling() {
        let b = build_jacobi_a(1, I).unwrap();
        let p = pt(&[("x", C64::new(0.31, 0.12)), ("w1", C64::new(0.17, 0.22)), ("u", C64::new(0.2, 0.1)), ("tau", I)]);
        let lam = b.lambda.base();
        let lie = lie_derivative(&b.eventual, lam).eval(&p).unwrap();
        assert!((lie - lam.eval(&p).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn dz_third_derivatives_match_closed_forms() {
        let b = build_dz_a(2, 1).unwrap();
        let f = b.fstar.as_ref().unwrap();
        let w = [C64::new(0.7, -0.2), C64::new(-0.4, 0.6), C64::new(1.1, 0.3)];
        let p = pt(&[("w1", w[0]), ("w2", w[1]), ("w3", w[2])]);
        let (ell, r) = (2.0, 1.0);
        let faaa = f.d(&["w1", "w1", "w1"]).eval(&p).unwrap();
        let mut expected = C64::new(1.0 + ell - 1.0 / r, 0.0);
        for b in 1..3 {
            expected += 1.0 / ((w[0] - w[b]).exp() - 1.0);
        }
        assert!((faaa - expected).norm() < 1e-9);
        for (a, wa) in ["w1", "w2", "w3"].iter().enumerate() {
            for (bb, wb) in ["w1", "w2", "w3"].iter().enumerate() {
                let s: C64 = ["w1", "w2", "w3"].iter().map(|c| f.d(&[wa, wb, c]).eval(&p).unwrap()).sum();
                let target = -ell / r + if a == bb { ell } else { 0.0 };
                assert!((s - target).norm() < 1e-9, "({a},{bb})");
            }
        }
    }

    #[test]
    fn single_pole_display_matches_general_formula() {
        let (ell, r, k) = (2usize, 1usize, 1usize);
        let n = ell + r + k;
        let b = build_ma_zuo(ell, r, k).unwrap();
        let f = b.fstar.as_ref().unwrap().base().clone();
        let w: Vec<Expr> = (1..=n).map(|i| var(&format!("w{i}"))).collect();
        let u = var("u");
        let (lf, rf, kf) = (ell as f64, r as f64, k as f64);
        let l3 = |z: Expr| z.li_exp(3);
        let mut t = Vec::new();
        for a in 0..n {
            for bb in (a + 1)..n {
                t.push(real(-0.5) * (l3(w[a].clone() - w[bb].clone()) + l3(w[bb].clone() - w[a].clone())));
                t.push(real(0.25 * (1.0 - 2.0 / rf)) * w[a].clone() * w[bb].clone() * (w[a].clone() + w[bb].clone()));
                t.push(real(kf / rf) * u.clone() * w[a].clone() * w[bb].clone());
                for c in (bb + 1)..n {
                    t.push(real(-1.0 / rf) * w[a].clone() * w[bb].clone() * w[c].clone());
                }
            }
        }
        let sw: Expr = w.iter().cloned().sum();
        let sw2: Expr = w.iter().map(|x| x.powi(2)).sum();
        let sw3: Expr = w.iter().map(|x| x.powi(3)).sum();
        for wa in &w {
            t.push(real(kf / 2.0) * (l3(u.clone() - wa.clone()) + l3(wa.clone() - u.clone())));
        }
        t.push(real(kf * (3.0 * kf + rf - lf + 2.0 / rf * kf * kf) / 12.0) * u.powi(3));
        t.push(real((3.0 - rf + lf - 2.0 / rf) / 12.0) * sw3);
        t.push(real(-0.25 * kf * (1.0 + 2.0 / rf * kf)) * u.powi(2) * sw);
        t.push(real(-0.25 * kf * (1.0 - 2.0 / rf)) * u.clone() * sw2);
        let display = Expr::sum(t);
        let p = pt(&[
            ("w1", C64::new(0.7, -0.2)),
            ("w2", C64::new(-0.4, 0.6)),
            ("w3", C64::new(1.1, 0.3)),
            ("w4", C64::new(0.2, -0.9)),
            ("u", C64::new(-0.8, 0.35)),
        ]);
        let vars = ["w1", "w2", "w3", "w4", "u"];
        for a in vars {
            for bb in vars {
                for c in vars {
                    let g = f.diff(a).diff(bb).diff(c).eval(&p).unwrap();
                    let d = display.diff(a).diff(bb).diff(c).eval(&p).unwrap();
                    assert!((g - d).norm() < 1e-10, "{a}{bb}{c}");
                }
            }
        }
    }

    #[test]
    fn ma_zuo_uuu_closed_form() {
        let (ell, r, k) = (1usize, 1usize, 1usize);
        let b = build_ma_zuo(ell, r, k).unwrap();
        let f = b.fstar.as_ref().unwrap();
        let p = pt(&[
            ("w1", C64::new(0.7, -0.2)),
            ("w2", C64::new(-0.4, 0.6)),
            ("w3", C64::new(1.1, 0.3)),
            ("u", C64::new(-0.8, 0.35)),
        ]);
        let got = f.d(&["u", "u", "u"]).eval(&p).unwrap();
        let kf = k as f64;
        let mut expected = C64::new(kf.powi(3) / r as f64 - kf * (ell as f64 - kf), 0.0);
        for w in ["w1", "w2", "w3"] {
            expected -= kf / ((p["u"] - p[w]).exp() - 1.0);
        }
        assert!((got - expected).norm() < 1e-9);
    }

    #[test]
    fn dz_is_zero_pole_limit_of_general_formula() {
        let z: Vec<Expr> = (1..=3).map(|i| var(&format!("w{i}"))).collect();
        let general = trig_fstar(&z, &[1.0, 1.0, 1.0], 2.0, 1.0);
        let dz = build_dz_a(2, 1).unwrap();
        let p = pt(&[("w1", C64::new(0.7, -0.2)), ("w2", C64::new(-0.4, 0.6)), ("w3", C64::new(1.1, 0.3))]);
        let a = general.diff("w1").diff("w2").diff("w2").eval(&p).unwrap();
        let b = dz.fstar.as_ref().unwrap().d(&["w1", "w2", "w2"]).eval(&p).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn jacobi_mixed_third_derivative() {
        let b = build_jacobi_a(2, C64::new(0.3, 1.0)).unwrap();
        let f = b.fstar.as_ref().unwrap();
        let p = pt(&[
            ("w1", C64::new(0.17, 0.22)),
            ("w2", C64::new(0.25, 0.13)),
            ("u", C64::new(0.2, 0.1)),
            ("tau", C64::new(0.3, 1.0)),
        ]);
        let pi3 = PI.powi(3);
        let uab = f.d(&["u", "w1", "w2"]).eval(&p).unwrap();
        let uaa = f.d(&["u", "w1", "w1"]).eval(&p).unwrap();
        assert!((uab - (-2.0 * I * pi3)).norm() < 1e-9);
        assert!((uaa - (-4.0 * I * pi3)).norm() < 1e-9);
        assert!(f.d(&["u", "u", "u"]).eval(&p).unwrap().norm() < 1e-12);
    }

    #[test]
    fn fold_embedding_patterns() {
        assert_eq!(FoldRule::B.embedding(2).unwrap(), (3, vec![1, 3]));
        assert_eq!(FoldRule::I2.embedding(4).unwrap(), (3, vec![1, 3]));
        assert_eq!(FoldRule::I2.embedding(3).unwrap(), (2, vec![1, 2]));
    }

    #[test]
    fn unknown_family_and_parameter_are_rejected() {
        let p: Params = [("ell".to_string(), "2".to_string())].into();
        assert!(matches!(build("nope", &p), Err(Error::Parameter(_))));
        let bad: Params = [("ell".to_string(), "2".to_string()), ("q".to_string(), "1".to_string())].into();
        assert!(matches!(build("saito-a", &bad), Err(Error::Parameter(_))));
        let range: Params = [("ell".to_string(), "0".to_string())].into();
        assert!(build("saito-a", &range).is_err());
    }
}
