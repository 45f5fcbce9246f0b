//! Immutable symbolic expressions over complex scalars.
//!
//! An [`Expr`] is a shared, immutable tree. Smart constructors fold constants
//! and flatten sums and products so that repeated differentiation stays
//! compact; no further canonicalisation is attempted. Every node kind has an
//! exact derivative rule, so the set of expressions is closed under
//! [`Expr::diff`]. Evaluation at a [`Point`] memoises shared subtrees and
//! repeated special-function calls.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::specfn;

/// Binding of variable names to complex values.
pub type Point = BTreeMap<String, C64>;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Node kinds of the expression tree.
#[derive(Debug)]
pub enum Node {
    Const(C64),
    Var(Arc<str>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Neg(Expr),
    PowI(Expr, i32),
    /// Principal-branch power with a constant exponent.
    PowC(Expr, C64),
    Exp(Expr),
    Log(Expr),
    /// `Li_n(z)`.
    Li(i32, Expr),
    /// `Li_n(exp(y))`, kept separate so that `d/dy` lowers the order exactly.
    LiExp(i32, Expr),
    /// `theta_1(x; tau)` differentiated `k` times in `x` and `m` times in `tau`.
    Theta1 {
        k: u32,
        m: u32,
        x: Expr,
        tau: Expr,
    },
    /// `log eta(tau)` differentiated `m` times.
    EtaLog {
        m: u32,
        tau: Expr,
    },
    /// `Lambda-iota_n(u; tau)` differentiated `m` times in `tau`.
    EllipticLi {
        n: i32,
        m: u32,
        u: Expr,
        tau: Expr,
    },
}

impl Node {
    /// Short name of the node kind, used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Node::Const(_) => "constant",
            Node::Var(_) => "variable",
            Node::Sum(_) => "sum",
            Node::Product(_) => "product",
            Node::Neg(_) => "negation",
            Node::PowI(..) => "integer-power",
            Node::PowC(..) => "rational-power",
            Node::Exp(_) => "exp",
            Node::Log(_) => "log",
            Node::Li(..) => "polylog",
            Node::LiExp(..) => "polylog-exp",
            Node::Theta1 { .. } => "theta1",
            Node::EtaLog { .. } => "dedekind-eta-log",
            Node::EllipticLi { .. } => "elliptic-li",
        }
    }
}

/// Shared immutable expression.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn wrap(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: C64) -> Self {
        Self::wrap(Node::Const(c))
    }

    pub fn real(r: f64) -> Self {
        Self::constant(C64::new(r, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub fn var(name: &str) -> Self {
        Self::wrap(Node::Var(Arc::from(name)))
    }

    /// Constant value when the expression is a literal constant.
    pub fn as_const(&self) -> Option<C64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(zero())
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        let mut out = Vec::with_capacity(terms.len());
        let mut c = zero();
        let mut stack: Vec<Expr> = terms.into_iter().rev().collect();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Const(v) => c += v,
                Node::Sum(inner) => stack.extend(inner.iter().rev().cloned()),
                _ => out.push(t),
            }
        }
        if c != zero() {
            out.push(Expr::constant(c));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Self::wrap(Node::Sum(out)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        let mut out = Vec::with_capacity(factors.len());
        let mut c = one();
        let mut stack: Vec<Expr> = factors.into_iter().rev().collect();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Const(v) => c *= v,
                Node::Product(inner) => stack.extend(inner.iter().rev().cloned()),
                Node::Neg(inner) => {
                    c = -c;
                    stack.push(inner.clone());
                }
                _ => out.push(f),
            }
        }
        if c == zero() {
            return Expr::zero();
        }
        if c != one() {
            out.insert(0, Expr::constant(c));
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Self::wrap(Node::Product(out)),
        }
    }

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Self::wrap(Node::Neg(self.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Const(c) => Expr::constant(c.powi(n)),
            Node::PowI(base, m) => base.powi(m * n),
            _ => Self::wrap(Node::PowI(self.clone(), n)),
        }
    }

    pub fn powc(&self, p: C64) -> Self {
        if p.im == 0.0 && p.re.fract() == 0.0 && p.re.abs() < 1e9 {
            return self.powi(p.re as i32);
        }
        match self.node() {
            Node::Const(c) => Expr::constant(c.powc(p)),
            _ => Self::wrap(Node::PowC(self.clone(), p)),
        }
    }

    pub fn recip(&self) -> Self {
        self.powi(-1)
    }

    pub fn exp(&self) -> Self {
        match self.node() {
            Node::Const(c) => Expr::constant(c.exp()),
            _ => Self::wrap(Node::Exp(self.clone())),
        }
    }

    pub fn log(&self) -> Self {
        match self.node() {
            Node::Const(c) => Expr::constant(c.ln()),
            _ => Self::wrap(Node::Log(self.clone())),
        }
    }

    /// `Li_n(self)`; an argument of the form `exp(y)` becomes `Li_n(e^y)`.
    pub fn li(&self, n: i32) -> Self {
        match self.node() {
            Node::Const(c) => Expr::constant(specfn::li(n, *c)),
            Node::Exp(y) => y.li_exp(n),
            _ => Self::wrap(Node::Li(n, self.clone())),
        }
    }

    /// `Li_n(exp(self))`.
    pub fn li_exp(&self, n: i32) -> Self {
        match self.node() {
            Node::Const(c) => Expr::constant(specfn::li_exp(n, *c)),
            _ => Self::wrap(Node::LiExp(n, self.clone())),
        }
    }

    /// `theta_1(self; tau)`.
    pub fn theta1(&self, tau: &Expr) -> Self {
        Self::theta1_deriv(0, 0, self, tau)
    }

    pub fn theta1_deriv(k: u32, m: u32, x: &Expr, tau: &Expr) -> Self {
        Self::wrap(Node::Theta1 { k, m, x: x.clone(), tau: tau.clone() })
    }

    pub fn eta_log(tau: &Expr) -> Self {
        Self::wrap(Node::EtaLog { m: 0, tau: tau.clone() })
    }

    /// `Lambda-iota_n(self; tau)`.
    pub fn elliptic_li(&self, n: i32, tau: &Expr) -> Self {
        Self::wrap(Node::EllipticLi { n, m: 0, u: self.clone(), tau: tau.clone() })
    }

    /// Exact partial derivative with respect to the variable `v`.
    pub fn diff(&self, v: &str) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(v, &mut memo)
    }

    fn diff_memo(&self, v: &str, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.key()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(name) => {
                if &**name == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(terms) => Expr::sum(terms.iter().map(|t| t.diff_memo(v, memo)).collect()),
            Node::Product(fs) => {
                let ds: Vec<Expr> = fs.iter().map(|f| f.diff_memo(v, memo)).collect();
                let mut terms = Vec::new();
                for (i, di) in ds.iter().enumerate() {
                    if di.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> =
                        fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.clone()).collect();
                    factors.push(di.clone());
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Node::Neg(inner) => inner.diff_memo(v, memo).neg(),
            Node::PowI(base, n) => {
                let db = base.diff_memo(v, memo);
                if db.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![Expr::real(*n as f64), base.powi(n - 1), db])
                }
            }
            Node::PowC(base, p) => {
                let db = base.diff_memo(v, memo);
                if db.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![Expr::constant(*p), base.powc(p - 1.0), db])
                }
            }
            Node::Exp(arg) => {
                let da = arg.diff_memo(v, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![self.clone(), da])
                }
            }
            Node::Log(arg) => {
                let da = arg.diff_memo(v, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![da, arg.recip()])
                }
            }
            Node::Li(n, arg) => {
                let da = arg.diff_memo(v, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![arg.li(n - 1), arg.recip(), da])
                }
            }
            Node::LiExp(n, arg) => {
                let da = arg.diff_memo(v, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![arg.li_exp(n - 1), da])
                }
            }
            Node::Theta1 { k, m, x, tau } => {
                let dx = x.diff_memo(v, memo);
                let dt = tau.diff_memo(v, memo);
                let mut terms = Vec::new();
                if !dx.is_zero() {
                    terms.push(Expr::product(vec![Expr::theta1_deriv(k + 1, *m, x, tau), dx]));
                }
                if !dt.is_zero() {
                    terms.push(Expr::product(vec![Expr::theta1_deriv(*k, m + 1, x, tau), dt]));
                }
                Expr::sum(terms)
            }
            Node::EtaLog { m, tau } => {
                let dt = tau.diff_memo(v, memo);
                if dt.is_zero() {
                    Expr::zero()
                } else {
                    let next = Self::wrap(Node::EtaLog { m: m + 1, tau: tau.clone() });
                    Expr::product(vec![next, dt])
                }
            }
            Node::EllipticLi { n, m, u, tau } => {
                let du = u.diff_memo(v, memo);
                let dt = tau.diff_memo(v, memo);
                let mut terms = Vec::new();
                if !du.is_zero() {
                    let lower = Self::wrap(Node::EllipticLi { n: n - 1, m: *m, u: u.clone(), tau: tau.clone() });
                    let mut inner = vec![Expr::product(vec![Expr::constant(specfn::two_pi_i()), lower])];
                    if *m == 0 {
                        inner.push(Expr::constant(specfn::elliptic_li_shift(*n)));
                    }
                    terms.push(Expr::product(vec![Expr::sum(inner), du]));
                }
                if !dt.is_zero() {
                    let next = Self::wrap(Node::EllipticLi { n: *n, m: m + 1, u: u.clone(), tau: tau.clone() });
                    terms.push(Expr::product(vec![next, dt]));
                }
                Expr::sum(terms)
            }
        };
        memo.insert(self.key(), d.clone());
        d
    }

    /// Evaluates the expression at a point.
    pub fn eval(&self, p: &Point) -> Result<C64> {
        Evaluator::new(p).eval(self)
    }

    /// Names of all free variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        self.collect_vars(&mut out, &mut seen);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>, seen: &mut BTreeSet<usize>) {
        if !seen.insert(self.key()) {
            return;
        }
        match self.node() {
            Node::Var(name) => {
                out.insert(name.to_string());
            }
            _ => self.children().iter().for_each(|c| c.collect_vars(out, seen)),
        }
    }

    fn children(&self) -> Vec<Expr> {
        match self.node() {
            Node::Const(_) | Node::Var(_) => vec![],
            Node::Sum(v) | Node::Product(v) => v.clone(),
            Node::Neg(a) | Node::PowI(a, _) | Node::PowC(a, _) | Node::Exp(a) | Node::Log(a) => vec![a.clone()],
            Node::Li(_, a) | Node::LiExp(_, a) => vec![a.clone()],
            Node::Theta1 { x, tau, .. } => vec![x.clone(), tau.clone()],
            Node::EtaLog { tau, .. } => vec![tau.clone()],
            Node::EllipticLi { u, tau, .. } => vec![u.clone(), tau.clone()],
        }
    }

    /// Largest total derivative order carried by any `theta_1` node.
    pub fn max_theta_order(&self) -> u32 {
        let mut best = 0;
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.key()) {
                continue;
            }
            if let Node::Theta1 { k, m, .. } = e.node() {
                best = best.max(k + 2 * m);
            }
            stack.extend(e.children());
        }
        best
    }

    /// Substitutes expressions for variables.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(map, &mut memo)
    }

    fn subst_memo(&self, map: &BTreeMap<String, Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.key()) {
            return e.clone();
        }
        let mut s = |e: &Expr| e.subst_memo(map, memo);
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(name) => map.get(&**name).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(v) => Expr::sum(v.iter().map(&mut s).collect()),
            Node::Product(v) => Expr::product(v.iter().map(&mut s).collect()),
            Node::Neg(a) => s(a).neg(),
            Node::PowI(a, n) => s(a).powi(*n),
            Node::PowC(a, p) => s(a).powc(*p),
            Node::Exp(a) => s(a).exp(),
            Node::Log(a) => s(a).log(),
            Node::Li(n, a) => s(a).li(*n),
            Node::LiExp(n, a) => s(a).li_exp(*n),
            Node::Theta1 { k, m, x, tau } => {
                let (x, tau) = (s(x), s(tau));
                Expr::theta1_deriv(*k, *m, &x, &tau)
            }
            Node::EtaLog { m, tau } => Self::wrap(Node::EtaLog { m: *m, tau: s(tau) }),
            Node::EllipticLi { n, m, u, tau } => {
                let (u, tau) = (s(u), s(tau));
                Self::wrap(Node::EllipticLi { n: *n, m: *m, u, tau })
            }
        };
        memo.insert(self.key(), out.clone());
        out
    }
}

/// Pointwise evaluator that memoises shared subtrees and special-function calls.
pub struct Evaluator<'p> {
    point: &'p Point,
    cache: HashMap<usize, C64>,
    special: HashMap<(u8, i32, u32, [u64; 4]), C64>,
    keep: Vec<Expr>,
}

fn bits(a: C64, b: C64) -> [u64; 4] {
    [a.re.to_bits(), a.im.to_bits(), b.re.to_bits(), b.im.to_bits()]
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p Point) -> Self {
        Self { point, cache: HashMap::new(), special: HashMap::new(), keep: Vec::new() }
    }

    pub fn point(&self) -> &Point {
        self.point
    }

    fn special(&mut self, key: (u8, i32, u32, [u64; 4]), f: impl FnOnce() -> C64) -> C64 {
        *self.special.entry(key).or_insert_with(f)
    }

    /// Evaluates `e`, reusing values of subtrees seen earlier by this evaluator.
    pub fn eval(&mut self, e: &Expr) -> Result<C64> {
        if let Some(v) = self.cache.get(&e.key()) {
            return Ok(*v);
        }
        let v = match e.node() {
            Node::Const(c) => *c,
            Node::Var(name) => *self.point.get(&**name).ok_or_else(|| Error::UnboundVariable(name.to_string()))?,
            Node::Sum(ts) => {
                let mut acc = zero();
                for t in ts {
                    acc += self.eval(t)?;
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = one();
                for f in fs {
                    acc *= self.eval(f)?;
                }
                acc
            }
            Node::Neg(a) => -self.eval(a)?,
            Node::PowI(a, n) => self.eval(a)?.powi(*n),
            Node::PowC(a, p) => self.eval(a)?.powc(*p),
            Node::Exp(a) => self.eval(a)?.exp(),
            Node::Log(a) => self.eval(a)?.ln(),
            Node::Li(n, a) => {
                let z = self.eval(a)?;
                self.special((0, *n, 0, bits(z, zero())), || specfn::li(*n, z))
            }
            Node::LiExp(n, a) => {
                let y = self.eval(a)?;
                self.special((1, *n, 0, bits(y, zero())), || specfn::li_exp(*n, y))
            }
            Node::Theta1 { k, m, x, tau } => {
                let (x, tau) = (self.eval(x)?, self.eval(tau)?);
                let (k, m) = (*k, *m);
                self.special((2, k as i32, m, bits(x, tau)), || specfn::theta1_deriv(k, m, x, tau))
            }
            Node::EtaLog { m, tau } => {
                let tau = self.eval(tau)?;
                let m = *m;
                self.special((3, 0, m, bits(tau, zero())), || specfn::dedekind_eta_log_deriv(m, tau))
            }
            Node::EllipticLi { n, m, u, tau } => {
                let (u, tau) = (self.eval(u)?, self.eval(tau)?);
                let (n, m) = (*n, *m);
                self.special((4, n, m, bits(u, tau)), || specfn::elliptic_li_deriv(n, m, u, tau))
            }
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NumericDomain(e.node().kind()));
        }
        self.cache.insert(e.key(), v);
        self.keep.push(e.clone());
        Ok(v)
    }
}

/// Lazily built table of partial derivatives of one expression.
///
/// Keys are sorted multisets of variable names, so mixed partials are shared.
pub struct Jet {
    base: Expr,
    cache: Mutex<BTreeMap<Vec<String>, Expr>>,
}

impl Jet {
    pub fn new(base: Expr) -> Self {
        Self { base, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn base(&self) -> &Expr {
        &self.base
    }

    /// Partial derivative along the given variables (order irrelevant).
    pub fn d(&self, vars: &[&str]) -> Expr {
        let mut key: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        key.sort();
        self.lookup(&key)
    }

    fn lookup(&self, key: &[String]) -> Expr {
        if key.is_empty() {
            return self.base.clone();
        }
        if let Some(e) = self.cache.lock().unwrap().get(key) {
            return e.clone();
        }
        let parent = self.lookup(&key[..key.len() - 1]);
        let e = parent.diff(&key[key.len() - 1]);
        self.cache.lock().unwrap().insert(key.to_vec(), e.clone());
        e
    }
}

/// A vector field given by coefficient expressions along named coordinates.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub components: Vec<(String, Expr)>,
}

impl VectorField {
    pub fn new(components: Vec<(String, Expr)>) -> Self {
        Self { components }
    }

    /// Coefficient along `coord` (zero when absent).
    pub fn component(&self, coord: &str) -> Expr {
        self.components.iter().filter(|(c, _)| c == coord).map(|(_, e)| e.clone()).fold(Expr::zero(), |a, b| a + b)
    }

    /// The same field without its component along `coord`.
    pub fn without(&self, coord: &str) -> VectorField {
        VectorField::new(self.components.iter().filter(|(c, _)| c != coord).cloned().collect())
    }
}

/// `sum_i V^i d_i e`.
pub fn lie_derivative(v: &VectorField, e: &Expr) -> Expr {
    Expr::sum(v.components.iter().map(|(coord, coeff)| Expr::product(vec![coeff.clone(), e.diff(coord)])).collect())
}

/// Central finite difference of `e` along `v` with step `h`.
pub fn finite_difference(e: &Expr, p: &Point, v: &str, h: f64) -> Result<C64> {
    let mut plus = p.clone();
    let mut minus = p.clone();
    let x = *p.get(v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
    plus.insert(v.to_string(), x + h);
    minus.insert(v.to_string(), x - h);
    Ok((e.eval(&plus)? - e.eval(&minus)?) / (2.0 * h))
}

/// `i pi` as an expression constant.
pub fn i_pi() -> Expr {
    Expr::constant(I * PI)
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, &rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, rhs)
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &Expr::real(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&Expr::real(self), &rhs)
            }
        }
        impl $trait<C64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: C64) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &Expr::constant(rhs))
            }
        }
        impl $trait<Expr> for C64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&Expr::constant(self), &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum(vec![a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::sum(vec![a.clone(), b.neg()]));
binop!(Mul, mul, |a, b| Expr::product(vec![a.clone(), b.clone()]));
binop!(Div, div, |a, b| Expr::product(vec![a.clone(), b.recip()]));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::iter::Sum for Expr {
    fn sum<It: Iterator<Item = Expr>>(iter: It) -> Expr {
        Expr::sum(iter.collect())
    }
}

fn fmt_const(c: &C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{}", fmt_const(c)),
            Node::Var(n) => write!(f, "{n}"),
            Node::Sum(ts) => {
                let parts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                write!(f, "({})", parts.join(" + "))
            }
            Node::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(|t| t.to_string()).collect();
                write!(f, "{}", parts.join("*"))
            }
            Node::Neg(a) => write!(f, "-({a})"),
            Node::PowI(a, n) => write!(f, "{a}^{n}"),
            Node::PowC(a, p) => write!(f, "{a}^{}", fmt_const(p)),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Li(n, a) => write!(f, "Li{n}({a})"),
            Node::LiExp(n, a) => write!(f, "Li{n}(exp({a}))"),
            Node::Theta1 { k, m, x, tau } => write!(f, "theta1[{k},{m}]({x}; {tau})"),
            Node::EtaLog { m, tau } => write!(f, "logeta[{m}]({tau})"),
            Node::EllipticLi { n, m, u, tau } => write!(f, "ELi{n}[{m}]({u}; {tau})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(vals: &[(&str, C64)]) -> Point {
        vals.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn polynomial_rule() {
        let x = Expr::var("x");
        let a = Expr::var("a");
        let e = x.powi(3) + &a * &x;
        let d = e.diff("x");
        let p = pt(&[("x", C64::new(0.7, -0.2)), ("a", C64::new(1.1, 0.3))]);
        let exact = 3.0 * p["x"].powi(2) + p["a"];
        assert!((d.eval(&p).unwrap() - exact).norm() < 1e-14);
    }

    #[test]
    fn dilog_of_exp_rule() {
        let e = (Expr::var("x") - Expr::var("u")).exp().li(2);
        let d = e.diff("u");
        let p = pt(&[("x", C64::new(0.3, 0.2)), ("u", C64::new(-0.4, 0.5))]);
        let y = p["x"] - p["u"];
        let exact = (1.0 - y.exp()).ln();
        assert!((d.eval(&p).unwrap() - exact).norm() < 1e-13);
    }

    #[test]
    fn square_plus_one_at_i() {
        let e = Expr::var("x").powi(2) + 1.0;
        assert!(e.eval(&pt(&[("x", I)])).unwrap().norm() < 1e-16);
    }

    #[test]
    fn dilog_at_one() {
        let e = Expr::var("z").li(2);
        let v = e.eval(&pt(&[("z", one())])).unwrap();
        assert!((v - PI * PI / 6.0).norm() < 1e-14);
    }

    #[test]
    fn theta_odd_at_zero() {
        let e = Expr::var("x").theta1(&Expr::var("tau"));
        let v = e.eval(&pt(&[("x", zero()), ("tau", I)])).unwrap();
        assert!(v.norm() < 1e-16);
    }

    #[test]
    fn elliptic_li_u_rule_matches_appendix() {
        let tau = Expr::var("tau");
        let e = Expr::var("u").elliptic_li(2, &tau);
        let d = e.diff("u");
        let p = pt(&[("u", C64::new(0.13, 0.07)), ("tau", C64::new(0.1, 1.0))]);
        let lower = Expr::var("u").elliptic_li(1, &tau).eval(&p).unwrap();
        let b1 = -0.5;
        let exact = specfn::two_pi_i() * lower + PI * I.powi(5) * b1;
        assert!((d.eval(&p).unwrap() - exact).norm() < 1e-13);
    }

    #[test]
    fn unbound_variable_is_named() {
        let e = Expr::var("x") + Expr::var("y");
        let err = e.eval(&pt(&[("x", one())])).unwrap_err();
        assert_eq!(err, Error::UnboundVariable("y".into()));
    }

    #[test]
    fn non_finite_reports_node_kind() {
        let e = Expr::var("x").recip();
        let err = e.eval(&pt(&[("x", zero())])).unwrap_err();
        assert!(matches!(err, Error::NumericDomain(_)));
    }

    #[test]
    fn lie_derivative_euler() {
        let x = Expr::var("x");
        let v = VectorField::new(vec![("x".into(), x.clone())]);
        let l = lie_derivative(&v, &x.powi(3));
        let p = pt(&[("x", C64::new(1.3, 0.4))]);
        assert!((l.eval(&p).unwrap() - 3.0 * p["x"].powi(3)).norm() < 1e-13);
    }

    #[test]
    fn jet_shares_mixed_partials() {
        let e = (Expr::var("a") * Expr::var("b")).exp();
        let jet = Jet::new(e);
        let ab = jet.d(&["a", "b"]);
        let ba = jet.d(&["b", "a"]);
        assert_eq!(ab.key(), ba.key());
    }
}
