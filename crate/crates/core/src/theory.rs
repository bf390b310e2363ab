//! Calculators for the theoretical parameters of the covariance-adaptive
//! annealer: phase count `m`, samples per phase `N`, total-variation budget
//! `q` and hit-and-run walk length `ℓ`.
//!
//! The walk length carries the constant `16384·e²·10³⁰` and `q` shrinks like
//! `(pε̄/8Rn)^{8√ϑ+4}`, so both are evaluated with 320-bit binary floats and
//! `ℓ` is returned as an exact integer. Nothing here is meant to be executed
//! as a walk length; executed runs take practical values from their config.

use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigUint;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Working precision in bits.
const PRECISION: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;

/// Extended-precision real.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtFloat(BigFloat);

impl ExtFloat {
    pub fn as_big_float(&self) -> &BigFloat {
        &self.0
    }

    /// Nearest `f64`; underflows to 0 and overflows to ±∞.
    pub fn to_f64(&self) -> f64 {
        big_to_f64(&self.0)
    }

    /// `log₁₀|x|`, finite even when `to_f64` under- or overflows.
    pub fn log10(&self) -> f64 {
        let mut cc = consts();
        big_to_f64(&self.0.abs().log10(PRECISION, RM, &mut cc))
    }
}

impl fmt::Display for ExtFloat {
    /// Scientific notation with 13 significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_zero() {
            return write!(f, "0");
        }
        let mut k = self.log10().floor() as i64;
        let scale = pow10(k);
        let mut mant = big_to_f64(&self.0.div(&scale, PRECISION, RM));
        if mant.abs() >= 10.0 {
            mant /= 10.0;
            k += 1;
        } else if mant.abs() < 1.0 {
            mant *= 10.0;
            k -= 1;
        }
        write!(f, "{mant:.12}e{k}")
    }
}

impl Serialize for ExtFloat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn consts() -> Consts {
    Consts::new().expect("constant cache allocation")
}

fn pow10(k: i64) -> BigFloat {
    let p = BigFloat::from_u64(10, PRECISION).powi(k.unsigned_abs() as usize, PRECISION, RM);
    if k >= 0 {
        p
    } else {
        p.reciprocal(PRECISION, RM)
    }
}

fn big_to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    let Some((words, _bits, sign, exp, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    let Some(&top) = words.last() else {
        return 0.0;
    };
    if top == 0 {
        return 0.0;
    }
    let next = if words.len() >= 2 {
        words[words.len() - 2]
    } else {
        0
    };
    // value = 0.m × 2^exp with the leading word normalized
    let frac = top as f64 / 2f64.powi(64) + next as f64 / 2f64.powi(128);
    let v = scale_pow2(frac, exp as i64);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

/// Converts a nonnegative integer-valued float to an exact integer.
fn big_to_biguint(x: &BigFloat) -> Result<BigUint> {
    if x.is_zero() {
        return Ok(BigUint::default());
    }
    let (words, _bits, sign, exp, _) = x
        .as_raw_parts()
        .ok_or_else(|| Error::Numerical("non-finite extended value".into()))?;
    if sign == Sign::Neg {
        return Err(Error::Numerical("negative integer value".into()));
    }
    let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
    let mantissa = BigUint::from_bytes_le(&bytes);
    let shift = exp as i64 - 64 * words.len() as i64;
    Ok(if shift >= 0 {
        mantissa << shift as u64
    } else {
        mantissa >> (-shift) as u64
    })
}

/// Small arithmetic context so formulas read left to right.
struct Ctx {
    cc: std::cell::RefCell<Consts>,
}

impl Ctx {
    fn new() -> Self {
        Self {
            cc: std::cell::RefCell::new(consts()),
        }
    }
    fn num(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, PRECISION)
    }
    fn int(&self, v: u64) -> BigFloat {
        BigFloat::from_u64(v, PRECISION)
    }
    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, PRECISION, RM)
    }
    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, PRECISION, RM)
    }
    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, PRECISION, RM)
    }
    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, PRECISION, RM)
    }
    fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(PRECISION, RM)
    }
    fn exp(&self, a: &BigFloat) -> BigFloat {
        a.exp(PRECISION, RM, &mut self.cc.borrow_mut())
    }
    fn ln(&self, a: &BigFloat) -> BigFloat {
        a.ln(PRECISION, RM, &mut self.cc.borrow_mut())
    }
    fn powi(&self, a: &BigFloat, k: usize) -> BigFloat {
        a.powi(k, PRECISION, RM)
    }
    fn pow(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.pow(b, PRECISION, RM, &mut self.cc.borrow_mut())
    }
    fn e(&self) -> BigFloat {
        self.exp(&BigFloat::from_u64(1, PRECISION))
    }
}

fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite")))
    }
}

fn check_alpha(alpha: f64, vartheta: f64) -> Result<()> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("vartheta", vartheta)?;
    if !(vartheta > 0.0) {
        return Err(Error::Parameter("vartheta must be positive".into()));
    }
    if !(alpha > 1.0 + 1.0 / vartheta.sqrt()) {
        return Err(Error::Parameter(
            "alpha must exceed 1 + 1/sqrt(vartheta)".into(),
        ));
    }
    Ok(())
}

/// Mixing-time walk length for a general step `Δθ` (and `Δθ₀ ≤ Δθ`):
///
/// `⌈16384e²10³⁰n³(1+ε)² / ((1−Δθ)⁴e^{4Δθ})
///   · ln²(256e^{−2Δθ₀}n√n(1+ε) / ((1−Δθ₀)²(1−Δθ)²e^{2Δθ}q²))
///   · ln³(2e^{−2Δθ₀} / ((1−Δθ₀)²q²))⌉`.
pub fn walk_length_general(n: u64, eps: f64, q: f64, delta: f64, delta0: f64) -> Result<BigUint> {
    let c = Ctx::new();
    let q = c.num(q);
    walk_length_general_big(&c, n, eps, &q, delta, delta0)
}

fn check_q(q: &BigFloat) -> Result<()> {
    let one = BigFloat::from_u64(1, PRECISION);
    if !(q.is_positive() && !q.is_zero() && q.cmp(&one) == Some(-1)) {
        return Err(Error::Parameter("q must lie in (0, 1)".into()));
    }
    Ok(())
}

fn walk_length_general_big(
    c: &Ctx,
    n: u64,
    eps: f64,
    q: &BigFloat,
    delta: f64,
    delta0: f64,
) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    ensure_finite("epsilon", eps)?;
    if eps < 0.0 {
        return Err(Error::Parameter("epsilon must be >= 0".into()));
    }
    check_q(q)?;
    if !(0.0..1.0).contains(&delta) || !(0.0..=delta).contains(&delta0) {
        return Err(Error::Parameter("need 0 <= delta0 <= delta < 1".into()));
    }
    let d = c.num(delta);
    let d0 = c.num(delta0);
    let one = c.int(1);
    let two = c.int(2);
    let nn = c.int(n);
    let one_eps = c.add(&one, &c.num(eps));
    let om_d = c.sub(&one, &d);
    let om_d0 = c.sub(&one, &d0);
    let q2 = c.powi(q, 2);

    let e2 = c.powi(&c.e(), 2);
    let e30 = c.powi(&c.int(10), 30);
    let e4d = c.exp(&c.mul(&c.int(4), &d));
    let mut lead = c.mul(&c.mul(&c.int(16384), &e2), &e30);
    lead = c.mul(&lead, &c.powi(&nn, 3));
    lead = c.mul(&lead, &c.powi(&one_eps, 2));
    lead = c.div(&lead, &c.mul(&c.powi(&om_d, 4), &e4d));

    let em2d0 = c.exp(&c.mul(&two, &d0).neg());
    let e2d = c.exp(&c.mul(&two, &d));
    let mut a1 = c.mul(&c.int(256), &em2d0);
    a1 = c.mul(&a1, &c.mul(&nn, &c.sqrt(&nn)));
    a1 = c.mul(&a1, &one_eps);
    let den1 = c.mul(
        &c.mul(&c.powi(&om_d0, 2), &c.powi(&om_d, 2)),
        &c.mul(&e2d, &q2),
    );
    let l1 = c.ln(&c.div(&a1, &den1));

    let a2 = c.mul(&two, &em2d0);
    let den2 = c.mul(&c.powi(&om_d0, 2), &q2);
    let l2 = c.ln(&c.div(&a2, &den2));

    let value = c.mul(&c.mul(&lead, &c.powi(&l1, 2)), &c.powi(&l2, 3));
    big_to_biguint(&value.ceil())
}

/// Walk length for the barrier-based schedule, i.e. the general form with
/// `Δθ = Δθ₀ = √ϑ/(α√ϑ − 1)`, written out in `α` and `ϑ`.
pub fn theoretical_walk_length(
    n: u64,
    eps: f64,
    q: f64,
    alpha: f64,
    vartheta: f64,
) -> Result<BigUint> {
    let c = Ctx::new();
    let q = c.num(q);
    walk_length_big(&c, n, eps, &q, alpha, vartheta)
}

fn walk_length_big(
    c: &Ctx,
    n: u64,
    eps: f64,
    q: &BigFloat,
    alpha: f64,
    vartheta: f64,
) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    ensure_finite("epsilon", eps)?;
    if eps < 0.0 {
        return Err(Error::Parameter("epsilon must be >= 0".into()));
    }
    check_q(q)?;
    check_alpha(alpha, vartheta)?;
    let one = c.int(1);
    let two = c.int(2);
    let nn = c.int(n);
    let sv = c.sqrt(&c.num(vartheta));
    let al = c.num(alpha);
    // a = α√ϑ − 1, b = (α−1)√ϑ − 1, Δ = √ϑ/a
    let a = c.sub(&c.mul(&al, &sv), &one);
    let b = c.sub(&c.mul(&c.sub(&al, &one), &sv), &one);
    let delta = c.div(&sv, &a);
    let one_eps = c.add(&one, &c.num(eps));
    let q2 = c.powi(q, 2);
    let a4 = c.powi(&a, 4);
    let b4 = c.powi(&b, 4);

    let e2 = c.powi(&c.e(), 2);
    let e30 = c.powi(&c.int(10), 30);
    let e4d = c.exp(&c.mul(&c.int(4), &delta));
    let mut lead = c.mul(&c.mul(&c.int(16384), &e2), &e30);
    lead = c.mul(&lead, &c.powi(&nn, 3));
    lead = c.mul(&lead, &c.powi(&one_eps, 2));
    lead = c.mul(&lead, &a4);
    lead = c.div(&lead, &c.mul(&b4, &e4d));

    let em2d = c.exp(&c.mul(&two, &delta).neg());
    let e2d = c.exp(&c.mul(&two, &delta));
    let mut a1 = c.mul(&c.int(256), &em2d);
    a1 = c.mul(&a1, &c.mul(&nn, &c.sqrt(&nn)));
    a1 = c.mul(&a1, &one_eps);
    a1 = c.mul(&a1, &a4);
    let den1 = c.mul(&c.mul(&b4, &e2d), &q2);
    let l1 = c.ln(&c.div(&a1, &den1));

    let a2 = c.mul(&c.mul(&two, &em2d), &c.powi(&a, 2));
    let den2 = c.mul(&c.powi(&b, 2), &q2);
    let l2 = c.ln(&c.div(&a2, &den2));

    let value = c.mul(&c.mul(&lead, &c.powi(&l1, 2)), &c.powi(&l2, 3));
    big_to_biguint(&value.ceil())
}

/// `16384·e²·10³⁰` rounded up, the floor of every walk length with
/// `q ≤ 1/e`.
pub fn walk_length_floor() -> BigUint {
    let c = Ctx::new();
    let e2 = c.powi(&c.e(), 2);
    let v = c.mul(&c.mul(&c.int(16384), &e2), &c.powi(&c.int(10), 30));
    big_to_biguint(&v.ceil()).expect("positive constant")
}

/// Parameters of the convergence theorem (covariance quality `ε = 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoreticalParams {
    /// Number of phases.
    pub m: u64,
    /// Covariance samples per phase.
    pub n_samples: u64,
    /// Total-variation budget per walk.
    pub q: ExtFloat,
    /// Hit-and-run steps per walk.
    #[serde(serialize_with = "serialize_biguint")]
    pub ell: BigUint,
}

fn serialize_biguint<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// `m = ⌈(α√ϑ − ½)·ln(2nR/(pε̄)) + 1⌉`, `N = ⌈1000n²m/p⌉`,
/// `q = p/(102000·m·n²·R⁴) · 1/4096 · (r/(n+1))⁴ · (pε̄/(8Rn))^{8√ϑ+4}`,
/// and `ℓ` from [`theoretical_walk_length`] at `ε = 1`.
pub fn theoretical_params(
    n: u64,
    radius: f64,
    inner_radius: f64,
    eps_bar: f64,
    p: f64,
    alpha: f64,
    vartheta: f64,
) -> Result<TheoreticalParams> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    for (name, v) in [
        ("R", radius),
        ("r", inner_radius),
        ("eps_bar", eps_bar),
        ("p", p),
    ] {
        ensure_finite(name, v)?;
    }
    if !(radius > 0.0) || !(inner_radius > 0.0) {
        return Err(Error::Parameter("radii must be positive".into()));
    }
    if !(eps_bar > 0.0 && eps_bar <= 2.0 * radius) {
        return Err(Error::Parameter("eps_bar must lie in (0, 2R]".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter("p must lie in (0, 1)".into()));
    }
    check_alpha(alpha, vartheta)?;

    let c = Ctx::new();
    let one = c.int(1);
    let nn = c.int(n);
    let rr = c.num(radius);
    let r = c.num(inner_radius);
    let eb = c.num(eps_bar);
    let pp = c.num(p);
    let sv = c.sqrt(&c.num(vartheta));
    let al = c.num(alpha);

    let half = c.div(&one, &c.int(2));
    let ratio = c.div(&c.mul(&c.mul(&c.int(2), &nn), &rr), &c.mul(&pp, &eb));
    let m_big = c
        .add(&c.mul(&c.sub(&c.mul(&al, &sv), &half), &c.ln(&ratio)), &one)
        .ceil();
    let m = big_to_u64(&m_big, "m")?;

    let n2 = c.powi(&nn, 2);
    let n_big = c.div(&c.mul(&c.mul(&c.int(1000), &n2), &m_big), &pp).ceil();
    let n_samples = big_to_u64(&n_big, "N")?;

    let r4 = c.powi(&rr, 4);
    let mut q = c.div(
        &pp,
        &c.mul(&c.mul(&c.int(102_000), &m_big), &c.mul(&n2, &r4)),
    );
    q = c.div(&q, &c.int(4096));
    q = c.mul(&q, &c.powi(&c.div(&r, &c.add(&nn, &one)), 4));
    let base = c.div(&c.mul(&pp, &eb), &c.mul(&c.mul(&c.int(8), &rr), &nn));
    let expo = c.add(&c.mul(&c.int(8), &sv), &c.int(4));
    q = c.mul(&q, &c.pow(&base, &expo));

    let ell = walk_length_big(&c, n, 1.0, &q, alpha, vartheta)?;
    Ok(TheoreticalParams {
        m,
        n_samples,
        q: ExtFloat(q),
        ell,
    })
}

fn big_to_u64(x: &BigFloat, name: &str) -> Result<u64> {
    let v = big_to_biguint(x)?;
    u64::try_from(&v).map_err(|_| Error::Numerical(format!("{name} does not fit in 64 bits")))
}

/// Sample-size and total-variation conditions of the covariance-quality
/// theorem: `N ≥ 490n²/(pε²)` and `q ≤ pε²λ_min²/(49980n²R⁴)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceSampleBounds {
    pub min_samples: u64,
    pub max_q: f64,
}

pub fn covariance_sample_bounds(
    n: u64,
    p: f64,
    eps: f64,
    radius: f64,
    lambda_min: f64,
) -> Result<CovarianceSampleBounds> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter("p must lie in (0, 1)".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter("epsilon must lie in (0, 1]".into()));
    }
    if !(radius > 0.0) || !(lambda_min > 0.0) {
        return Err(Error::Parameter("R and lambda_min must be positive".into()));
    }
    let nf = n as f64;
    let min_samples = (490.0 * nf * nf / (p * eps * eps)).ceil();
    if !(min_samples < u64::MAX as f64) {
        return Err(Error::Numerical("sample bound overflows".into()));
    }
    let max_q = p * eps * eps * lambda_min * lambda_min / (49980.0 * nf * nf * radius.powi(4));
    Ok(CovarianceSampleBounds {
        min_samples: min_samples as u64,
        max_q,
    })
}

/// `N = ℓ = ⌈n√n⌉`, computed exactly as `⌈√(n³)⌉`.
pub fn heuristic_params(n: u64) -> Result<(u64, u64)> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    let cube = (n as u128)
        .checked_pow(3)
        .ok_or_else(|| Error::Numerical("n³ overflows".into()))?;
    let r = cube.isqrt();
    let v = if r * r == cube { r } else { r + 1 };
    let v = u64::try_from(v).map_err(|_| Error::Numerical("n^1.5 overflows".into()))?;
    Ok((v, v))
}
