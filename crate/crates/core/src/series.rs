//! Truncated Laurent series in one variable.
//!
//! A series records its centre (a finite point or infinity), the smallest
//! exponent it stores and the exclusive truncation order. At infinity the
//! exponents refer to the local coordinate `xi = 1/x`, so `1/x` is stored as
//! `xi^1`. Coefficients live in any [`Coeff`] ring: complex numbers for
//! numerical expansions, or multivariate polynomials ([`Poly`]) when the
//! coefficients must stay symbolic in the deformation parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::exprcore::{Expr, Node, Point};

/// Coefficient ring of a [`LaurentSeries`].
pub trait Coeff:
    Clone + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn from_c64(c: C64) -> Self;
    fn is_zero(&self) -> bool;
    /// Multiplicative inverse when the element is a unit of the ring.
    fn try_inv(&self) -> Option<Self>;
    /// Largest coefficient modulus, used for truncation diagnostics.
    fn magnitude(&self) -> f64;

    fn one() -> Self {
        Self::from_c64(C64::new(1.0, 0.0))
    }

    fn scale(&self, c: C64) -> Self {
        self.clone() * Self::from_c64(c)
    }
}

impl Coeff for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_c64(c: C64) -> Self {
        c
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn try_inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(1.0 / self)
        }
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Multivariate polynomial with complex coefficients in a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl Poly {
    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut terms = BTreeMap::new();
        if c != C64::new(0.0, 0.0) {
            terms.insert(vec![0; nvars], c);
        }
        Self { nvars, terms }
    }

    /// The `i`-th coordinate function.
    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(e, C64::new(1.0, 0.0));
        Self { nvars, terms }
    }

    fn widen(self, n: usize) -> Poly {
        let mut out = Poly::constant(n, C64::new(0.0, 0.0));
        for (e, c) in self.terms {
            out.insert(e, c);
        }
        out
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Monomials as (exponent vector, coefficient), in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.terms.iter()
    }

    fn insert(&mut self, mut e: Vec<u32>, c: C64) {
        e.resize(self.nvars.max(e.len()), 0);
        let slot = self.terms.entry(e.clone()).or_insert(C64::new(0.0, 0.0));
        *slot += c;
        if slot.norm() == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn eval(&self, vals: &[C64]) -> C64 {
        self.terms.iter().map(|(e, c)| e.iter().zip(vals).fold(*c, |acc, (k, v)| acc * v.powi(*k as i32))).sum()
    }

    /// Partial derivative along variable `i`.
    pub fn diff(&self, i: usize) -> Poly {
        let mut out = Poly::constant(self.nvars, C64::new(0.0, 0.0));
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.insert(e2, c * e[i] as f64);
            }
        }
        out
    }

    /// Substitutes `subs[i]` for variable `i`.
    pub fn compose(&self, subs: &[Poly]) -> Poly {
        let n = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut out = Poly::constant(n, C64::new(0.0, 0.0));
        for (e, c) in &self.terms {
            let mut term = Poly::constant(n, *c);
            for (k, s) in e.iter().zip(subs) {
                for _ in 0..*k {
                    term = term * s.clone();
                }
            }
            out = out + term;
        }
        out
    }

    /// Converts to an expression in the named variables.
    pub fn to_expr(&self, names: &[&str]) -> Expr {
        let vars: Vec<Expr> = names.iter().map(|n| Expr::var(n)).collect();
        Expr::sum(
            self.terms
                .iter()
                .map(|(e, c)| {
                    let mut f = vec![Expr::constant(*c)];
                    for (k, v) in e.iter().zip(&vars) {
                        if *k > 0 {
                            f.push(v.powi(*k as i32));
                        }
                    }
                    Expr::product(f)
                })
                .collect(),
        )
    }

    /// Constant term.
    pub fn constant_term(&self) -> C64 {
        self.terms.iter().filter(|(e, _)| e.iter().all(|k| *k == 0)).map(|(_, c)| *c).sum()
    }

    /// Drops coefficients of modulus below `tol`.
    pub fn chop(mut self, tol: f64) -> Poly {
        self.terms.retain(|_, c| c.norm() >= tol);
        self
    }

    fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|k| *k == 0))
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        if rhs.nvars > self.nvars {
            self = self.widen(rhs.nvars);
        }
        for (e, c) in rhs.terms {
            self.insert(e, c);
        }
        self
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(mut self) -> Poly {
        for c in self.terms.values_mut() {
            *c = -*c;
        }
        self
    }
}

impl Mul for Poly {
    type Output = Poly;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Poly) -> Poly {
        let n = self.nvars.max(rhs.nvars);
        let mut out = Poly::constant(n, C64::new(0.0, 0.0));
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Vec<u32> = (0..n).map(|i| e1.get(i).unwrap_or(&0) + e2.get(i).unwrap_or(&0)).collect();
                out.insert(e, c1 * c2);
            }
        }
        out
    }
}

thread_local! {
    static POLY_NVARS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

/// Runs `f` with `nvars` as the arity of polynomials created by [`Coeff`] constructors.
pub fn with_poly_arity<R>(nvars: usize, f: impl FnOnce() -> R) -> R {
    let prev = POLY_NVARS.with(|c| c.replace(nvars));
    let out = f();
    POLY_NVARS.with(|c| c.set(prev));
    out
}

impl Coeff for Poly {
    fn zero() -> Self {
        Poly::constant(POLY_NVARS.with(|c| c.get()), C64::new(0.0, 0.0))
    }
    fn from_c64(c: C64) -> Self {
        Poly::constant(POLY_NVARS.with(|c| c.get()), c)
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn try_inv(&self) -> Option<Self> {
        if self.is_constant() && !self.is_zero() {
            Some(Poly::constant(self.nvars, 1.0 / self.constant_term()))
        } else {
            None
        }
    }
    fn magnitude(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Expansion point of a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Center {
    Finite(C64),
    Infinity,
}

/// Truncated Laurent series; coefficient `k` multiplies `s^(min_exp + k)`.
#[derive(Clone, Debug)]
pub struct LaurentSeries<T: Coeff = C64> {
    pub var: String,
    pub center: Center,
    min_exp: i32,
    coeffs: Vec<T>,
}

impl<T: Coeff> LaurentSeries<T> {
    /// Series with the given coefficients starting at `min_exp`; the
    /// truncation order is `min_exp + coeffs.len()`.
    pub fn new(var: &str, center: Center, min_exp: i32, coeffs: Vec<T>) -> Self {
        Self { var: var.to_string(), center, min_exp, coeffs }
    }

    /// Constant series known up to (excluding) `order`.
    pub fn constant(var: &str, center: Center, c: T, order: i32) -> Self {
        let n = order.max(0) as usize;
        let mut coeffs = vec![T::zero(); n];
        if n > 0 {
            coeffs[0] = c;
        }
        Self::new(var, center, 0, coeffs)
    }

    /// Local coordinate `s` (or `xi`) itself.
    pub fn monomial(var: &str, center: Center, exp: i32, c: T, order: i32) -> Self {
        let n = (order - exp).max(0) as usize;
        let mut coeffs = vec![T::zero(); n];
        if n > 0 {
            coeffs[0] = c;
        }
        Self::new(var, center, exp, coeffs)
    }

    pub fn min_exp(&self) -> i32 {
        self.min_exp
    }

    /// Exclusive truncation order.
    pub fn order(&self) -> i32 {
        self.min_exp + self.coeffs.len() as i32
    }

    /// Coefficient of `s^k` (zero below the stored range).
    pub fn coeff(&self, k: i32) -> Result<T> {
        if k >= self.order() {
            return Err(Error::Truncation(k as f64));
        }
        if k < self.min_exp {
            return Ok(T::zero());
        }
        Ok(self.coeffs[(k - self.min_exp) as usize].clone())
    }

    /// Exponent of the first nonzero coefficient, if any.
    pub fn valuation(&self) -> Option<i32> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|i| self.min_exp + i as i32)
    }

    fn normalized(&self) -> Self {
        match self.valuation() {
            Some(v) => {
                let skip = (v - self.min_exp) as usize;
                Self::new(&self.var, self.center, v, self.coeffs[skip..].to_vec())
            }
            None => Self::new(&self.var, self.center, self.order(), vec![]),
        }
    }

    /// Drops every coefficient at or above `order`.
    pub fn truncate(&self, order: i32) -> Self {
        let keep = (order - self.min_exp).clamp(0, self.coeffs.len() as i32) as usize;
        Self::new(&self.var, self.center, self.min_exp, self.coeffs[..keep].to_vec())
    }

    pub fn add(&self, other: &Self) -> Self {
        let lo = self.min_exp.min(other.min_exp);
        let hi = self.order().min(other.order());
        let coeffs = (lo..hi)
            .map(|k| {
                let a = self.coeff(k).unwrap_or_else(|_| T::zero());
                let b = other.coeff(k).unwrap_or_else(|_| T::zero());
                a + b
            })
            .collect();
        Self::new(&self.var, self.center, lo, coeffs)
    }

    pub fn neg(&self) -> Self {
        Self::new(&self.var, self.center, self.min_exp, self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::new(&self.var, self.center, self.min_exp, self.coeffs.iter().map(|x| x.clone() * c.clone()).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let a = self.normalized();
        let b = other.normalized();
        let lo = a.min_exp + b.min_exp;
        let hi = (a.order() + b.min_exp).min(b.order() + a.min_exp);
        let n = (hi - lo).max(0) as usize;
        let mut coeffs = vec![T::zero(); n];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                coeffs[i + j] = coeffs[i + j].clone() + x.clone() * y.clone();
            }
        }
        Self::new(&self.var, self.center, lo, coeffs)
    }

    /// Multiplicative inverse; the leading coefficient must be a unit.
    pub fn inverse(&self) -> Result<Self> {
        let a = self.normalized();
        let lead = a
            .coeffs
            .first()
            .ok_or_else(|| Error::WrongLeadingTerm("inverse of a series with no known nonzero term".into()))?;
        let inv0 =
            lead.try_inv().ok_or_else(|| Error::WrongLeadingTerm("leading coefficient is not invertible".into()))?;
        let n = a.coeffs.len();
        let mut out: Vec<T> = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = if k == 0 { T::one() } else { T::zero() };
            for j in 1..=k {
                acc = acc - a.coeffs[j].clone() * out[k - j].clone();
            }
            out.push(acc * inv0.clone());
        }
        Ok(Self::new(&self.var, self.center, -a.min_exp, out))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inverse()?))
    }

    pub fn powi(&self, n: i32) -> Result<Self> {
        if n == 0 {
            let rel = self.order() - self.valuation().unwrap_or(self.order());
            return Ok(Self::constant(&self.var, self.center, T::one(), rel));
        }
        let mut p = if n < 0 { self.inverse()? } else { self.clone() };
        let mut k = n.unsigned_abs();
        let mut out: Option<Self> = None;
        loop {
            if k & 1 == 1 {
                out = Some(match out {
                    None => p.clone(),
                    Some(r) => r.mul(&p),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            p = p.mul(&p);
        }
        Ok(out.expect("nonzero exponent"))
    }

    /// `f(g)` for a series `g` of positive valuation, in `g`'s variable.
    pub fn compose(&self, g: &Self) -> Result<Self> {
        let v = match g.valuation() {
            Some(v) if v > 0 => v,
            _ => return Err(Error::WrongLeadingTerm("composition requires positive valuation".into())),
        };
        let limit = self.order() * v;
        let mut acc = LaurentSeries::constant(&g.var, g.center, T::zero(), limit);
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.min_exp + i as i32;
            if c.is_zero() {
                continue;
            }
            let term =
                if k == 0 { LaurentSeries::constant(&g.var, g.center, c.clone(), limit) } else { g.powi(k)?.scale(c) };
            acc = acc.add(&term);
        }
        Ok(acc.truncate(limit))
    }

    /// `(1 + u)^p` for `self = 1 + u` with `u` of positive valuation.
    pub fn pow_unit(&self, p: f64) -> Result<Self> {
        let one = Self::constant(&self.var, self.center, T::one(), self.order());
        let u = self.sub(&one);
        if self.min_exp < 0 || u.valuation().is_some_and(|v| v <= 0) {
            return Err(Error::WrongLeadingTerm("binomial series needs leading term 1".into()));
        }
        if u.valuation().is_none() {
            return Ok(one);
        }
        let mut binom = Vec::new();
        let mut b = 1.0;
        for n in 0..self.order().max(1) {
            binom.push(T::from_c64(C64::new(b, 0.0)));
            b *= (p - n as f64) / (n as f64 + 1.0);
        }
        LaurentSeries::new(&self.var, self.center, 0, binom).compose(&u)
    }

    /// Value of the truncated series at a point of the underlying variable.
    pub fn eval_at(&self, x: C64) -> C64
    where
        T: Into<C64>,
    {
        let s = match self.center {
            Center::Finite(c) => x - c,
            Center::Infinity => 1.0 / x,
        };
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| Into::<C64>::into(c.clone()) * s.powi(self.min_exp + i as i32))
            .sum()
    }
}

/// Residue of `s * dvar`: the coefficient of `s^-1` at finite centres, and
/// minus the coefficient of `xi^1` at infinity.
pub fn residue<T: Coeff>(s: &LaurentSeries<T>) -> T {
    match s.center {
        Center::Finite(_) => s.coeff(-1).unwrap_or_else(|_| T::zero()),
        Center::Infinity => -s.coeff(1).unwrap_or_else(|_| T::zero()),
    }
}

/// Expands an expression in `var` about `center`, keeping exponents below `order`.
///
/// Other variables take their values from `base`. Supported nodes are
/// rational operations, `exp` of a series without a pole, `log` and complex
/// powers of a series with a nonzero constant term; every other node is an
/// essential-singularity error.
pub fn expand(e: &Expr, var: &str, center: Center, order: i32, base: &Point) -> Result<LaurentSeries> {
    let mut pad = 4;
    loop {
        let s = expand_rec(e, var, center, order + pad, base)?;
        if s.order() >= order {
            return Ok(s.truncate(order));
        }
        if pad > 64 {
            return Err(Error::Truncation(s.order() as f64));
        }
        pad *= 2;
    }
}

fn expand_rec(e: &Expr, var: &str, center: Center, order: i32, base: &Point) -> Result<LaurentSeries> {
    let constant = |c: C64| LaurentSeries::constant(var, center, c, order);
    let depends = e.free_vars().contains(var);
    if !depends {
        return Ok(constant(e.eval(base)?));
    }
    match e.node() {
        Node::Var(_) => Ok(match center {
            Center::Finite(c) => constant(c).add(&LaurentSeries::monomial(var, center, 1, C64::new(1.0, 0.0), order)),
            Center::Infinity => LaurentSeries::monomial(var, center, -1, C64::new(1.0, 0.0), order),
        }),
        Node::Sum(ts) => {
            let mut acc = expand_rec(&ts[0], var, center, order, base)?;
            for t in &ts[1..] {
                acc = acc.add(&expand_rec(t, var, center, order, base)?);
            }
            Ok(acc)
        }
        Node::Product(fs) => {
            let parts: Vec<LaurentSeries> =
                fs.iter().map(|f| expand_rec(f, var, center, order, base)).collect::<Result<_>>()?;
            let shift: i32 = parts.iter().map(|p| p.valuation().unwrap_or(0).min(0)).sum();
            let parts = if shift < 0 {
                fs.iter().map(|f| expand_rec(f, var, center, order - shift, base)).collect::<Result<Vec<_>>>()?
            } else {
                parts
            };
            let mut acc = parts[0].clone();
            for p in &parts[1..] {
                acc = acc.mul(p);
            }
            Ok(acc)
        }
        Node::Neg(a) => Ok(expand_rec(a, var, center, order, base)?.neg()),
        Node::PowI(a, n) => {
            let s = expand_rec(a, var, center, order, base)?;
            let v = s.valuation().unwrap_or(0);
            let extra = (v * (n - 1)).abs() + v.abs();
            let s = if extra > 0 { expand_rec(a, var, center, order + extra, base)? } else { s };
            Ok(s.powi(*n)?.truncate(order))
        }
        Node::PowC(a, p) => {
            let s = expand_rec(a, var, center, order, base)?;
            let (c0, unit) = split_unit(&s)?;
            let real_p = if p.im == 0.0 {
                p.re
            } else {
                return Err(Error::EssentialSingularity("complex exponent".into()));
            };
            Ok(unit.pow_unit(real_p)?.scale(&c0.powc(*p)))
        }
        Node::Exp(a) => {
            let s = expand_rec(a, var, center, order, base)?;
            if s.valuation().is_some_and(|v| v < 0) {
                return Err(Error::EssentialSingularity(format!("exp of a series with a pole in `{var}`")));
            }
            let c0 = s.coeff(0)?;
            let u = s.sub(&constant(c0));
            let n = order.max(1) as usize;
            let mut fact = 1.0;
            let coeffs: Vec<C64> = (0..n)
                .map(|k| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    C64::new(1.0 / fact, 0.0)
                })
                .collect();
            let ser = LaurentSeries::new(var, center, 0, coeffs);
            let out = if u.valuation().is_none() { constant(C64::new(1.0, 0.0)) } else { ser.compose(&u)? };
            Ok(out.scale(&c0.exp()))
        }
        Node::Log(a) => {
            let s = expand_rec(a, var, center, order, base)?;
            let (c0, unit) = split_unit(&s)?;
            let u = unit.sub(&constant(C64::new(1.0, 0.0)));
            let n = order.max(1) as usize;
            let coeffs: Vec<C64> = (0..n)
                .map(|k| {
                    if k == 0 {
                        C64::new(0.0, 0.0)
                    } else {
                        C64::new(if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64, 0.0)
                    }
                })
                .collect();
            let ser = LaurentSeries::new(var, center, 0, coeffs);
            let log_unit = if u.valuation().is_none() { constant(C64::new(0.0, 0.0)) } else { ser.compose(&u)? };
            Ok(log_unit.add(&constant(c0.ln())))
        }
        other => Err(Error::EssentialSingularity(format!("{} node in `{var}`", other.kind()))),
    }
}

fn split_unit(s: &LaurentSeries) -> Result<(C64, LaurentSeries)> {
    match s.valuation() {
        Some(0) => {
            let c0 = s.coeff(0)?;
            Ok((c0, s.scale(&(1.0 / c0))))
        }
        _ => Err(Error::EssentialSingularity("branch point: no nonzero constant term".into())),
    }
}

/// Inverts `lambda(x) = k^h` near infinity.
///
/// `s` is the expansion of `lambda` at infinity with leading term `x^h`; the
/// result is `x` as a series in `k` at infinity (exponents in `1/k`), with
/// exponents below `order`.
pub fn invert_branch<T: Coeff>(s: &LaurentSeries<T>, h: i32, order: i32) -> Result<LaurentSeries<T>> {
    if s.center != Center::Infinity {
        return Err(Error::WrongLeadingTerm("expected a series at infinity".into()));
    }
    let lead = s.coeff(-h)?;
    let is_one = (lead.clone() - T::one()).is_zero() || (lead.clone() - T::one()).magnitude() < 1e-14;
    if s.valuation() != Some(-h) || !is_one {
        return Err(Error::WrongLeadingTerm(format!("expected leading term x^{h} with coefficient 1")));
    }
    let n = order + 1;
    let p_coeffs: Vec<T> = (0..n).map(|j| s.coeff(j - h)).collect::<Result<_>>()?;
    let p = LaurentSeries::new(&s.var, Center::Finite(C64::new(0.0, 0.0)), 0, p_coeffs);
    let kappa = LaurentSeries::monomial(&s.var, Center::Finite(C64::new(0.0, 0.0)), 1, T::one(), n);
    let mut sk = LaurentSeries::constant(&s.var, Center::Finite(C64::new(0.0, 0.0)), T::one(), n);
    for _ in 0..=n {
        let arg = kappa.mul(&sk.inverse()?).truncate(n);
        let pv = p.compose(&arg)?.truncate(n);
        sk = pv.pow_unit(-1.0 / h as f64)?.truncate(n);
    }
    let arg = kappa.mul(&sk.inverse()?).truncate(n);
    let check = p.compose(&arg)?.mul(&sk.powi(h)?).truncate(n);
    let mut worst: f64 = 0.0;
    for k in 0..check.order() {
        let target = if k == 0 { T::one() } else { T::zero() };
        worst = worst.max((check.coeff(k)? - target).magnitude());
    }
    if worst > 1e-10 {
        return Err(Error::Truncation(worst));
    }
    let coeffs: Vec<T> = (0..(order + 1).max(0)).map(|k| sk.coeff(k).unwrap_or_else(|_| T::zero())).collect();
    Ok(LaurentSeries::new(&s.var, Center::Infinity, -1, coeffs))
}
