//! Special functions over double-precision complex numbers.
//!
//! Polylogarithms `Li_n` for every integer order (closed forms for `n <= 1`,
//! direct series, inversion and the logarithmic expansion for `n >= 2`), the
//! Jacobi theta function `theta_1` with term-wise derivatives in both
//! arguments, the logarithm of the Dedekind eta function and the elliptic
//! polylogarithms `Lambda-iota_n` together with their `tau` derivatives.
//!
//! Every function uses principal branches. The elliptic sums are evaluated
//! directly without reducing `Im u` into a fundamental strip, so arguments
//! are expected to satisfy `|Im u| < Im tau`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZETA3: f64 = 1.202_056_903_159_594_3;
const TERM_TOL: f64 = 1e-17;
const LN2: f64 = std::f64::consts::LN_2;

/// `2 pi i`.
pub fn two_pi_i() -> C64 {
    C64::new(0.0, 2.0 * PI)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Riemann zeta at integers `s >= 2`, tabulated up to `s = 160`.
pub fn zeta_int(s: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![f64::NAN; 161];
        for (s, slot) in t.iter_mut().enumerate().skip(2) {
            *slot = match s {
                2 => PI * PI / 6.0,
                3 => ZETA3,
                _ => zeta_euler_maclaurin(s as f64),
            };
        }
        t
    });
    assert!(s >= 2, "zeta_int needs s >= 2");
    if (s as usize) < table.len() {
        table[s as usize]
    } else {
        1.0
    }
}

fn zeta_euler_maclaurin(s: f64) -> f64 {
    let n = 40.0_f64;
    let mut sum = 0.0;
    for k in 1..40 {
        sum += (k as f64).powf(-s);
    }
    sum + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

/// Riemann zeta at any integer except 1.
pub fn zeta(s: i32) -> f64 {
    if s >= 2 {
        zeta_int(s as u32)
    } else if s == 0 {
        -0.5
    } else if s == 1 {
        f64::INFINITY
    } else {
        let j = (-s) as u32;
        -bernoulli(j + 1) / (j + 1) as f64
    }
}

/// Bernoulli numbers with the convention `B_1 = -1/2`.
pub fn bernoulli(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => -0.5,
        2 => 1.0 / 6.0,
        3 => 0.0,
        4 => -1.0 / 30.0,
        _ if n % 2 == 1 => 0.0,
        _ => {
            let j = n / 2;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * 2.0 * factorial(n) * zeta_int(n) / (2.0 * PI).powi(n as i32)
        }
    }
}

/// `B_n / n!` computed without forming the factorial.
fn bernoulli_over_factorial(n: u32) -> f64 {
    if n <= 4 {
        return bernoulli(n) / factorial(n);
    }
    if n % 2 == 1 {
        return 0.0;
    }
    let j = n / 2;
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    sign * 2.0 * zeta_int(n) / (2.0 * PI).powi(n as i32)
}

/// Bernoulli polynomial `B_n(t)`.
pub fn bernoulli_poly(n: u32, t: C64) -> C64 {
    (0..=n).fold(C64::new(0.0, 0.0), |acc, k| acc + binomial(n, k) * bernoulli(k) * t.powi((n - k) as i32))
}

/// Stirling numbers of the second kind.
fn stirling2(n: u32, k: u32) -> f64 {
    let mut row = vec![1.0_f64];
    for i in 1..=n {
        let mut next = vec![0.0; (i + 1) as usize];
        for j in 1..=i as usize {
            let prev = if j < row.len() { row[j] } else { 0.0 };
            next[j] = j as f64 * prev + row[j - 1];
        }
        row = next;
    }
    row.get(k as usize).copied().unwrap_or(0.0)
}

/// `exp(y) - 1` accurate for small `|y|`.
pub fn expm1(y: C64) -> C64 {
    if y.norm() < 1e-3 {
        let mut term = y;
        let mut sum = y;
        for k in 2..12 {
            term *= y / k as f64;
            sum += term;
        }
        sum
    } else {
        y.exp() - 1.0
    }
}

fn reduce_imag(y: C64) -> C64 {
    let two_pi = 2.0 * PI;
    let mut im = y.im - two_pi * (y.im / two_pi).round();
    if im <= -PI {
        im += two_pi;
    } else if im > PI {
        im -= two_pi;
    }
    C64::new(y.re, im)
}

fn li_series(n: i32, z: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut zk = z;
    for k in 1..2000 {
        let term = zk / (k as f64).powi(n);
        sum += term;
        if term.norm() <= TERM_TOL * sum.norm().max(1e-300) {
            break;
        }
        zk *= z;
    }
    sum
}

fn li_nonpositive_from_ratio(s: u32, ratio: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..=s {
        sum += factorial(j) * stirling2(s + 1, j + 1) * ratio.powi((j + 1) as i32);
    }
    sum
}

/// Logarithmic expansion around `z = 1`, valid for `|mu| < 2 pi`.
fn li_log_series(n: i32, mu: C64) -> C64 {
    let nn = n as u32;
    if mu.norm() == 0.0 {
        return C64::new(zeta(n), 0.0);
    }
    let mut sum = C64::new(0.0, 0.0);
    let mut power = C64::new(1.0, 0.0);
    let harmonic: f64 = (1..nn).map(|i| 1.0 / i as f64).sum();
    for k in 0..nn {
        if k + 1 != nn {
            sum += zeta(n - k as i32) * power / factorial(k);
        } else {
            sum += power / factorial(k) * (harmonic - (-mu).ln());
        }
        power *= mu;
    }
    // k = n contributes zeta(0) mu^n / n!
    sum += -0.5 * power / factorial(nn);
    // k = n + j with j odd: zeta(-j) = -B_{j+1}/(j+1)
    let mut k = nn + 1;
    let mut mu_pow = power * mu;
    loop {
        let j = k - nn;
        if j % 2 == 1 {
            let ratio = bernoulli_over_factorial(j + 1);
            // B_{j+1}/(j+1) * mu^k / k! = ratio * j! * mu^k / k!
            let mut coeff = ratio;
            for t in 1..=nn {
                coeff /= (j + t) as f64;
            }
            let term = -coeff * mu_pow;
            sum += term;
            if term.norm() < TERM_TOL * sum.norm().max(1e-300) && j > 3 {
                break;
            }
        }
        if k > 400 {
            break;
        }
        k += 1;
        mu_pow *= mu;
    }
    sum
}

/// `Li_n(e^y)` on the principal branch for any integer `n`.
pub fn li_exp(n: i32, y: C64) -> C64 {
    if n <= 0 {
        let ratio = 1.0 / expm1(-y);
        return li_nonpositive_from_ratio((-n) as u32, ratio);
    }
    if n == 1 {
        return -(-expm1(y)).ln();
    }
    let y = reduce_imag(y);
    if y.re < -LN2 {
        li_series(n, y.exp())
    } else if y.re > LN2 {
        let inv = li_series(n, (-y).exp());
        // log(-z) on the principal branch
        let log_minus_z = if y.im > 0.0 { C64::new(y.re, y.im - PI) } else { C64::new(y.re, y.im + PI) };
        let t = 0.5 + log_minus_z / two_pi_i();
        let rhs = -two_pi_i().powi(n) / factorial(n as u32) * bernoulli_poly(n as u32, t);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        rhs - sign * inv
    } else {
        li_log_series(n, y)
    }
}

/// `Li_n(z)` on the principal branch for any integer `n`.
pub fn li(n: i32, z: C64) -> C64 {
    if z.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    match n {
        i32::MIN..=0 => li_nonpositive_from_ratio((-n) as u32, z / (1.0 - z)),
        1 => -(1.0 - z).ln(),
        _ if z.norm() < 0.5 => li_series(n, z),
        _ => li_exp(n, z.ln()),
    }
}

/// Nome data for the theta and elliptic series at a fixed `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaContext {
    pub tau: C64,
    pub q: C64,
    pub nmax: usize,
}

impl ThetaContext {
    /// Builds the context; requires `Im tau > 0`.
    pub fn new(tau: C64) -> Result<Self> {
        if tau.im <= 0.0 {
            return Err(Error::Parameter(format!("Im tau must be positive, got {}", tau.im)));
        }
        let q = (I * PI * tau).exp();
        let lq = q.norm().ln();
        let mut n = 1usize;
        while (n as f64 + 0.5).powi(2) * lq > (1e-18f64).ln() {
            n += 1;
        }
        Ok(Self { tau, q, nmax: n })
    }
}

/// `theta_1` differentiated `k` times in `x` and `m` times in `tau`, term-wise.
pub fn theta1_deriv(k: u32, m: u32, x: C64, tau: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    for n in 0..400u32 {
        let half = n as f64 + 0.5;
        let freq = PI * (2 * n + 1) as f64;
        let weight = (I * PI * half * half * tau).exp() * (I * PI * half * half).powi(m as i32);
        let plus = (I * freq * x).exp() * (I * freq).powi(k as i32);
        let minus = (-I * freq * x).exp() * (-I * freq).powi(k as i32);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * weight * (plus - minus);
        sum += term;
        if n > 2 && term.norm() < TERM_TOL * sum.norm().max(1e-300) {
            break;
        }
    }
    -I * sum
}

/// `theta_1` and its first `k` derivatives in `x`.
pub fn theta1(k: u32, x: C64, ctx: &ThetaContext) -> C64 {
    theta1_deriv(k, 0, x, ctx.tau)
}

/// `log eta(tau)` differentiated `m` times in `tau`.
pub fn dedekind_eta_log_deriv(m: u32, tau: C64) -> C64 {
    let mut sum = match m {
        0 => I * PI * tau / 12.0,
        1 => I * PI / 12.0,
        _ => C64::new(0.0, 0.0),
    };
    for n in 1..2000u32 {
        let y = two_pi_i() * n as f64 * tau;
        let term =
            if m == 0 { -li_exp(1, y) } else { -(two_pi_i() * n as f64).powi(m as i32) * li_exp(1 - m as i32, y) };
        sum += term;
        if term.norm() < TERM_TOL * sum.norm().max(1e-300) {
            break;
        }
    }
    sum
}

/// Principal logarithm of the Dedekind eta function.
pub fn dedekind_eta_log(tau: C64) -> C64 {
    dedekind_eta_log_deriv(0, tau)
}

/// `chi_n(u; tau)` differentiated `m` times in `tau`.
fn chi_deriv(n: i32, m: u32, u: C64, tau: C64) -> C64 {
    if n < 0 {
        return C64::new(0.0, 0.0);
    }
    let nn = n as u32;
    let mut sum = C64::new(0.0, 0.0);
    for k in m..=nn {
        let fall = (0..m).fold(1.0, |acc, j| acc * (k - j) as f64);
        sum += bernoulli(k + 1) / (factorial(nn - k) * factorial(k + 1))
            * fall
            * u.powi((nn - k) as i32)
            * tau.powi((k - m) as i32);
    }
    let mut out = two_pi_i().powi(n) * sum;
    if m == 0 {
        let sign = if (n - 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        out += sign * bernoulli(nn) / (2.0 * factorial(nn));
    }
    out
}

/// Elliptic polylogarithm `Lambda-iota_n(u; tau)` differentiated `m` times in `tau`.
pub fn elliptic_li_deriv(n: i32, m: u32, u: C64, tau: C64) -> C64 {
    let order = n - m as i32;
    let sign = if (n - 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut sum = if m == 0 { li_exp(order, two_pi_i() * u) } else { C64::new(0.0, 0.0) };
    for k in 1..2000u32 {
        let factor = (two_pi_i() * k as f64).powi(m as i32);
        let a = li_exp(order, two_pi_i() * (u + k as f64 * tau));
        let b = li_exp(order, two_pi_i() * (k as f64 * tau - u));
        let term = factor * (a + sign * b);
        sum += term;
        if k > 1 && term.norm() < TERM_TOL * sum.norm().max(1e-300) {
            break;
        }
    }
    sum - chi_deriv(n, m, u, tau)
}

/// Elliptic polylogarithm `Lambda-iota_n(u; tau)`.
pub fn elliptic_li(n: i32, u: C64, ctx: &ThetaContext) -> C64 {
    elliptic_li_deriv(n, 0, u, ctx.tau)
}

/// The additive constant in `d/du Lambda-iota_n = 2 pi i Lambda-iota_{n-1} + const`.
pub fn elliptic_li_shift(n: i32) -> C64 {
    if n < 1 {
        return C64::new(0.0, 0.0);
    }
    let nn = (n - 1) as u32;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    I * PI * sign * bernoulli(nn) / factorial(nn)
}

/// `Phi_3(w; tau) = Lambda-iota_3(w; tau) - Lambda-iota_3(0; tau)`.
pub fn phi3(w: C64, ctx: &ThetaContext) -> C64 {
    elliptic_li(3, w, ctx) - elliptic_li(3, C64::new(0.0, 0.0), ctx)
}
