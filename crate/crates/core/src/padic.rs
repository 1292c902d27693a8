// SPDX-License-Identifier: Apache-2.0

//! Capped-precision arithmetic in `Q_p` and its unramified quadratic
//! extension, plus the Iwasawa / `log_q` logarithms, the exponential,
//! Teichmüller lifts and rational reconstruction.
//!
//! Precision is absolute: a value is known modulo `p^N`. Sums keep the
//! smaller `N`; products keep `min(v1 + N2, v2 + N1)`.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("not a unit")]
    NotUnit,
    #[error("precision exhausted: only {achievable} digits are available")]
    PrecisionExhausted { achievable: i64 },
    #[error("insufficient precision")]
    InsufficientPrecision,
    #[error("logarithm of zero")]
    LogOfZero,
    #[error("exponential needs valuation >= 1, got {0}")]
    ExpDomain(i64),
    #[error("division by zero")]
    DivisionByZero,
}

pub type Result<T> = std::result::Result<T, PadicError>;

/// `p^k` as a big integer.
pub fn ppow(p: u64, k: i64) -> BigInt {
    debug_assert!(k >= 0);
    BigInt::from(p).pow(k.max(0) as u32)
}

/// Valuation of a nonzero integer and the cofactor.
pub fn split_p(p: u64, x: &BigInt) -> (i64, BigInt) {
    debug_assert!(!x.is_zero());
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut u = x.clone();
    loop {
        let (q, r) = u.div_rem(&pb);
        if !r.is_zero() {
            break;
        }
        u = q;
        v += 1;
    }
    (v, u)
}

pub fn vp_int(p: u64, x: &BigInt) -> Option<i64> {
    if x.is_zero() {
        None
    } else {
        Some(split_p(p, x).0)
    }
}

fn vp_u64(p: u64, mut k: u64) -> i64 {
    let mut v = 0;
    while k > 0 && k.is_multiple_of(p) {
        k /= p;
        v += 1;
    }
    v
}

/// Inverse of `a` modulo `m` (`gcd(a, m) = 1`).
pub fn inv_mod(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// Smallest positive quadratic nonresidue modulo an odd prime.
pub fn least_nonresidue(p: u64) -> u64 {
    (2..p)
        .find(|&a| pow_mod_u64(a, (p - 1) / 2, p) == p - 1)
        .expect("odd prime has a nonresidue")
}

pub fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    r
}

/// An element of `Q_p` known modulo `p^prec`.
#[derive(Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PadicScalar {
    p: u64,
    /// `None` for zero.
    val: Option<i64>,
    /// Unit part reduced modulo `p^(prec - val)`.
    unit: BigInt,
    prec: i64,
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.val {
            None => write!(f, "O({}^{})", self.p, self.prec),
            Some(v) => write!(f, "{}*{}^{} + O({}^{})", self.unit, self.p, v, self.p, self.prec),
        }
    }
}

impl PadicScalar {
    /// Builds `p^val * raw` at absolute precision `prec`; `raw` need not be a unit.
    pub fn from_parts(p: u64, val: i64, raw: &BigInt, prec: i64) -> Self {
        if raw.is_zero() || val >= prec {
            return Self::zero(p, prec);
        }
        let (extra, u) = split_p(p, raw);
        let val = val + extra;
        if val >= prec {
            return Self::zero(p, prec);
        }
        let unit = u.mod_floor(&ppow(p, prec - val));
        Self { p, val: Some(val), unit, prec }
    }

    pub fn zero(p: u64, prec: i64) -> Self {
        Self { p, val: None, unit: BigInt::zero(), prec }
    }

    pub fn one(p: u64, prec: i64) -> Self {
        Self::from_int(p, 1, prec)
    }

    pub fn from_int(p: u64, x: i64, prec: i64) -> Self {
        Self::from_parts(p, 0, &BigInt::from(x), prec)
    }

    pub fn from_bigint(p: u64, x: &BigInt, prec: i64) -> Self {
        Self::from_parts(p, 0, x, prec)
    }

    pub fn from_rational(p: u64, x: &BigRational, prec: i64) -> Self {
        if x.is_zero() {
            return Self::zero(p, prec);
        }
        let (vd, d) = split_p(p, x.denom());
        let (vn, n) = split_p(p, x.numer());
        let val = vn - vd;
        if val >= prec {
            return Self::zero(p, prec);
        }
        let m = ppow(p, prec - val);
        let u = (n * inv_mod(&d, &m).expect("denominator prime to p")).mod_floor(&m);
        Self { p, val: Some(val), unit: u, prec }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// `None` means zero at the stored precision.
    pub fn valuation(&self) -> Option<i64> {
        self.val
    }

    /// Valuation with zero counted as its precision.
    pub fn val_or_prec(&self) -> i64 {
        self.val.unwrap_or(self.prec)
    }

    pub fn precision(&self) -> i64 {
        self.prec
    }

    pub fn relative_precision(&self) -> i64 {
        self.prec - self.val_or_prec()
    }

    pub fn unit(&self) -> &BigInt {
        &self.unit
    }

    pub fn is_zero(&self) -> bool {
        self.val.is_none()
    }

    /// Drops precision to `min(prec, n)`.
    pub fn with_precision(&self, n: i64) -> Self {
        match self.val {
            None => Self::zero(self.p, self.prec.min(n)),
            Some(v) => Self::from_parts(self.p, v, &self.unit, self.prec.min(n)),
        }
    }

    /// Representative in `[0, p^prec)`; requires valuation >= 0.
    pub fn residue(&self) -> BigInt {
        match self.val {
            None => BigInt::zero(),
            Some(v) => {
                assert!(v >= 0, "residue of a non-integral p-adic number");
                (ppow(self.p, v) * &self.unit).mod_floor(&ppow(self.p, self.prec))
            }
        }
    }

    /// Lift to a rational number `p^v * unit`.
    pub fn to_rational(&self) -> BigRational {
        match self.val {
            None => BigRational::zero(),
            Some(v) if v >= 0 => BigRational::from_integer(ppow(self.p, v) * &self.unit),
            Some(v) => BigRational::new(self.unit.clone(), ppow(self.p, -v)),
        }
    }

    /// Balanced representative of the residue (in `(-p^N/2, p^N/2]`).
    pub fn balanced_residue(&self) -> BigInt {
        let m = ppow(self.p, self.prec);
        let r = self.residue();
        if &r * 2 > m {
            r - m
        } else {
            r
        }
    }

    pub fn neg(&self) -> Self {
        match self.val {
            None => self.clone(),
            Some(v) => Self::from_parts(self.p, v, &(-&self.unit), self.prec),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        let prec = self.prec.min(o.prec);
        match (self.val, o.val) {
            (None, _) => o.with_precision(prec),
            (_, None) => self.with_precision(prec),
            (Some(va), Some(vb)) => {
                let v = va.min(vb);
                if v >= prec {
                    return Self::zero(self.p, prec);
                }
                let s = &self.unit * ppow(self.p, va - v) + &o.unit * ppow(self.p, vb - v);
                Self::from_parts(self.p, v, &s, prec)
            }
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        let va = self.val_or_prec();
        let vb = o.val_or_prec();
        let prec = (va + o.prec).min(vb + self.prec);
        match (self.val, o.val) {
            (Some(a), Some(b)) => {
                let val = a + b;
                if val >= prec {
                    return Self::zero(self.p, prec);
                }
                let m = ppow(self.p, prec - val);
                let u = (&self.unit * &o.unit).mod_floor(&m);
                Self { p: self.p, val: Some(val), unit: u, prec }
            }
            _ => Self::zero(self.p, prec),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        match self.val {
            None => Err(PadicError::DivisionByZero),
            Some(v) => {
                let rel = self.prec - v;
                let m = ppow(self.p, rel);
                let u = inv_mod(&self.unit, &m).ok_or(PadicError::NotUnit)?;
                Ok(Self { p: self.p, val: Some(-v), unit: u, prec: rel - v })
            }
        }
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(&o.inverse()?))
    }

    /// Exact division by an integer.
    pub fn div_int(&self, k: i64) -> Self {
        assert!(k != 0);
        let big = self.prec + 64;
        self.mul(&Self::from_int(self.p, k, big).inverse().expect("nonzero"))
    }

    pub fn pow(&self, mut e: u64) -> Self {
        if e == 0 {
            return Self::one(self.p, self.prec.max(1));
        }
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc.unwrap()
    }

    /// True when `self - o` vanishes to at least `digits`.
    pub fn eq_within(&self, o: &Self, digits: i64) -> bool {
        let d = self.sub(o);
        d.val_or_prec() >= digits
    }

    /// Square root of a square in `Q_p`, by Hensel lifting.
    pub fn sqrt(&self) -> Option<Self> {
        let v = self.val?;
        if v % 2 != 0 {
            return None;
        }
        let rel = self.prec - v;
        let p = self.p;
        let u0 = (&self.unit % BigInt::from(p)).to_u64().unwrap();
        let r = (1..p).find(|&x| (x * x) % p == u0)?;
        let mut x = BigInt::from(r);
        let mut k = 1;
        while k < rel {
            k = (2 * k).min(rel);
            let m = ppow(p, k);
            let two_x_inv = inv_mod(&(&x * 2), &m).unwrap();
            x = (&x - (&x * &x - &self.unit) * two_x_inv).mod_floor(&m);
        }
        Some(Self::from_parts(p, v / 2, &x, v / 2 + rel))
    }
}

impl Add for &PadicScalar {
    type Output = PadicScalar;
    fn add(self, o: Self) -> PadicScalar {
        PadicScalar::add(self, o)
    }
}
impl Sub for &PadicScalar {
    type Output = PadicScalar;
    fn sub(self, o: Self) -> PadicScalar {
        PadicScalar::sub(self, o)
    }
}
impl Mul for &PadicScalar {
    type Output = PadicScalar;
    fn mul(self, o: Self) -> PadicScalar {
        PadicScalar::mul(self, o)
    }
}
impl Neg for &PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        PadicScalar::neg(self)
    }
}

/// `a + b*omega` with `omega^2 = u0`, `u0` the least positive nonresidue mod `p`.
#[derive(Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QuadExtScalar {
    pub a: PadicScalar,
    pub b: PadicScalar,
    u0: i64,
}

impl fmt::Debug for QuadExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}) + ({:?})w", self.a, self.b)
    }
}

impl QuadExtScalar {
    pub fn new(a: PadicScalar, b: PadicScalar) -> Self {
        let u0 = least_nonresidue(a.p) as i64;
        Self { a, b, u0 }
    }

    fn with(&self, a: PadicScalar, b: PadicScalar) -> Self {
        Self { a, b, u0: self.u0 }
    }

    pub fn from_padic(a: PadicScalar) -> Self {
        let b = PadicScalar::zero(a.p, a.prec);
        Self::new(a, b)
    }

    pub fn from_int(p: u64, x: i64, prec: i64) -> Self {
        Self::from_padic(PadicScalar::from_int(p, x, prec))
    }

    pub fn from_rational(p: u64, x: &BigRational, prec: i64) -> Self {
        Self::from_padic(PadicScalar::from_rational(p, x, prec))
    }

    pub fn omega(p: u64, prec: i64) -> Self {
        Self::new(PadicScalar::zero(p, prec), PadicScalar::one(p, prec))
    }

    pub fn zero(p: u64, prec: i64) -> Self {
        Self::from_int(p, 0, prec)
    }

    pub fn one(p: u64, prec: i64) -> Self {
        Self::from_int(p, 1, prec)
    }

    pub fn p(&self) -> u64 {
        self.a.p
    }

    /// `omega^2`.
    pub fn omega_square(&self) -> i64 {
        self.u0
    }

    pub fn precision(&self) -> i64 {
        self.a.prec.min(self.b.prec)
    }

    pub fn valuation(&self) -> Option<i64> {
        match (self.a.val, self.b.val) {
            (None, None) => None,
            (Some(x), None) => Some(x.min(self.b.prec)),
            (None, Some(y)) => Some(y.min(self.a.prec)),
            (Some(x), Some(y)) => Some(x.min(y)),
        }
    }

    pub fn val_or_prec(&self) -> i64 {
        self.valuation().unwrap_or(self.precision()).min(self.precision())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_in_qp(&self) -> bool {
        self.b.is_zero()
    }

    pub fn with_precision(&self, n: i64) -> Self {
        self.with(self.a.with_precision(n), self.b.with_precision(n))
    }

    pub fn add(&self, o: &Self) -> Self {
        self.with(self.a.add(&o.a), self.b.add(&o.b))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.with(self.a.sub(&o.a), self.b.sub(&o.b))
    }

    pub fn neg(&self) -> Self {
        self.with(self.a.neg(), self.b.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let bd = self.b.mul(&o.b);
        let u0 = PadicScalar::from_int(self.p(), self.u0, bd.prec.max(1) + 4);
        let a = self.a.mul(&o.a).add(&bd.mul(&u0));
        let b = self.a.mul(&o.b).add(&self.b.mul(&o.a));
        self.with(a, b)
    }

    pub fn scale(&self, k: &PadicScalar) -> Self {
        self.with(self.a.mul(k), self.b.mul(k))
    }

    /// `(a + b w)(a - b w) = a^2 - u0 b^2`.
    pub fn norm(&self) -> PadicScalar {
        let b2 = self.b.mul(&self.b);
        let u0 = PadicScalar::from_int(self.p(), self.u0, b2.prec.max(1) + 4);
        self.a.mul(&self.a).sub(&b2.mul(&u0))
    }

    pub fn frobenius(&self) -> Self {
        self.with(self.a.clone(), self.b.neg())
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(PadicError::DivisionByZero);
        }
        // Work with the unit part to avoid losing precision in the norm.
        let v = self.val_or_prec();
        let u = self.shift(-v);
        let ninv = u.norm().inverse()?;
        Ok(u.frobenius().scale(&ninv).shift(-v))
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(&o.inverse()?))
    }

    /// Multiply by `p^k`.
    pub fn shift(&self, k: i64) -> Self {
        let s = |x: &PadicScalar| match x.val {
            None => PadicScalar::zero(x.p, x.prec + k),
            Some(v) => PadicScalar { p: x.p, val: Some(v + k), unit: x.unit.clone(), prec: x.prec + k },
        };
        self.with(s(&self.a), s(&self.b))
    }

    pub fn pow(&self, mut e: u64) -> Self {
        if e == 0 {
            return Self::one(self.p(), self.precision());
        }
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc.unwrap()
    }

    pub fn eq_within(&self, o: &Self, digits: i64) -> bool {
        self.sub(o).val_or_prec() >= digits
    }

    /// Teichmüller lift of a unit of the ring of integers.
    pub fn teichmuller(&self) -> Result<Self> {
        if self.val_or_prec() != 0 {
            return Err(PadicError::NotUnit);
        }
        let p = self.p();
        let mut x = self.clone();
        for _ in 0..=self.precision() {
            let y = x.pow(p * p);
            if y.eq_within(&x, self.precision()) {
                return Ok(y);
            }
            x = y;
        }
        Ok(x)
    }

    /// Square root of a rational integer `d` with `p` not dividing `d`: lands in
    /// `Q_p` when `d` is a square mod `p`, otherwise in `Q_p * omega`.
    pub fn sqrt_of_int(p: u64, d: &BigInt, prec: i64) -> Option<Self> {
        let x = PadicScalar::from_bigint(p, d, prec);
        if let Some(r) = x.sqrt() {
            return Some(Self::from_padic(r));
        }
        let u0 = least_nonresidue(p) as i64;
        let y = x.div(&PadicScalar::from_int(p, u0, prec + 2)).ok()?;
        let s = y.sqrt()?;
        Some(Self::new(PadicScalar::zero(p, prec), s))
    }
}

impl Add for &QuadExtScalar {
    type Output = QuadExtScalar;
    fn add(self, o: Self) -> QuadExtScalar {
        QuadExtScalar::add(self, o)
    }
}
impl Sub for &QuadExtScalar {
    type Output = QuadExtScalar;
    fn sub(self, o: Self) -> QuadExtScalar {
        QuadExtScalar::sub(self, o)
    }
}
impl Mul for &QuadExtScalar {
    type Output = QuadExtScalar;
    fn mul(self, o: Self) -> QuadExtScalar {
        QuadExtScalar::mul(self, o)
    }
}
impl Neg for &QuadExtScalar {
    type Output = QuadExtScalar;
    fn neg(self) -> QuadExtScalar {
        QuadExtScalar::neg(self)
    }
}

/// Teichmüller lift of a unit `u` modulo `p^n`.
pub fn teichmuller(p: u64, u: &BigInt, n: i64) -> Result<BigInt> {
    let m = ppow(p, n);
    if (u % BigInt::from(p)).is_zero() {
        return Err(PadicError::NotUnit);
    }
    let pb = BigInt::from(p);
    let mut x = u.mod_floor(&m);
    for _ in 0..=n {
        let y = x.modpow(&pb, &m);
        if y == x {
            break;
        }
        x = y;
    }
    Ok(x)
}

/// `log(1 + y)` for `v(y) >= 1`.
fn log1p_series(y: &QuadExtScalar) -> QuadExtScalar {
    let n = y.precision();
    let v = y.val_or_prec().max(1);
    let p = y.p();
    let mut acc = QuadExtScalar::zero(p, n);
    let mut pw = y.clone();
    let mut k: u64 = 1;
    loop {
        let vk = vp_u64(p, k);
        if (k as i64) * v - vk >= n && k > 1 {
            break;
        }
        let term = pw.scale(&PadicScalar::from_int(p, k as i64, n + vk + 2).inverse().unwrap());
        acc = if k % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        pw = pw.mul(y);
        k += 1;
    }
    acc.with_precision(n)
}

/// Iwasawa logarithm (`log p = 0`) on the unramified quadratic extension.
pub fn iwasawa_log(x: &QuadExtScalar) -> Result<QuadExtScalar> {
    if x.is_zero() {
        return Err(PadicError::LogOfZero);
    }
    let v = x.val_or_prec();
    let u = x.shift(-v);
    let rel = u.precision();
    if rel <= 0 || u.val_or_prec() != 0 {
        return Err(PadicError::PrecisionExhausted { achievable: rel.max(0) });
    }
    let p = x.p();
    let e = if u.is_in_qp() { p - 1 } else { p * p - 1 };
    let w = u.pow(e);
    let y = w.sub(&QuadExtScalar::one(p, rel));
    let l = log1p_series(&y);
    Ok(l.scale(&PadicScalar::from_int(p, e as i64, rel + 4).inverse().unwrap()))
}

pub fn iwasawa_log_qp(x: &PadicScalar) -> Result<PadicScalar> {
    Ok(iwasawa_log(&QuadExtScalar::from_padic(x.clone()))?.a)
}

/// The branch of the logarithm with `log_q(q) = 0`.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct LogBranch {
    pub p: u64,
    pub q: PadicScalar,
    l0q: PadicScalar,
    ordq: i64,
}

impl LogBranch {
    pub fn new(q: PadicScalar) -> Result<Self> {
        let ordq = q.valuation().ok_or(PadicError::LogOfZero)?;
        assert!(ordq >= 1, "Tate period must have positive valuation");
        let l0q = iwasawa_log_qp(&q)?;
        Ok(Self { p: q.p(), q, l0q, ordq })
    }

    pub fn ord_q(&self) -> i64 {
        self.ordq
    }

    pub fn log(&self, x: &QuadExtScalar) -> Result<QuadExtScalar> {
        let ord = x.valuation().ok_or(PadicError::LogOfZero)?;
        let l = iwasawa_log(x)?;
        if ord == 0 {
            return Ok(l);
        }
        let corr = self
            .l0q
            .mul(&PadicScalar::from_int(self.p, ord, l.precision() + 8))
            .div(&PadicScalar::from_int(self.p, self.ordq, l.precision() + 8))
            .unwrap();
        Ok(l.sub(&QuadExtScalar::from_padic(corr)))
    }

    pub fn log_qp(&self, x: &PadicScalar) -> Result<PadicScalar> {
        Ok(self.log(&QuadExtScalar::from_padic(x.clone()))?.a)
    }
}

/// `exp(x)` for `v(x) >= 1`.
pub fn exp_p(x: &PadicScalar) -> Result<PadicScalar> {
    let p = x.p();
    let n = x.precision();
    let v = match x.valuation() {
        None => return Ok(PadicScalar::one(p, n)),
        Some(v) => v,
    };
    if v < 1 {
        return Err(PadicError::ExpDomain(v));
    }
    let mut acc = PadicScalar::one(p, n);
    let mut term = PadicScalar::one(p, n + 64);
    let mut k: u64 = 1;
    let mut vfact = 0i64;
    loop {
        vfact += vp_u64(p, k);
        if (k as i64) * v - vfact >= n {
            break;
        }
        term = term.mul(x).div_int(k as i64);
        acc = acc.add(&term);
        k += 1;
    }
    Ok(acc.with_precision(n))
}

/// Recover `a/b` with `|a|, |b| <= bound` from `x mod p^n`.
pub fn rational_reconstruct(x: &BigInt, p: u64, n: i64, bound: &BigInt) -> Result<Option<(BigInt, BigInt)>> {
    let m = ppow(p, n);
    if bound * bound * 2 > m {
        return Err(PadicError::InsufficientPrecision);
    }
    let (mut r0, mut r1) = (m.clone(), x.mod_floor(&m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while &r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.is_zero() || t1.abs() > *bound {
        return Ok(None);
    }
    let (mut a, mut b) = (r1, t1);
    if b.sign() == Sign::Minus {
        a = -a;
        b = -b;
    }
    if !a.gcd(&b).is_one() {
        return Ok(None);
    }
    if ((&a - x * &b).mod_floor(&m)).is_zero() {
        Ok(Some((a, b)))
    } else {
        Ok(None)
    }
}

/// Residues modulo `p^k < 2^63`, used for moment vectors in hot loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ResidueRing {
    pub p: u64,
    pub k: u32,
    pub m: u64,
}

impl ResidueRing {
    pub fn new(p: u64, k: u32) -> Self {
        let m = (p as u128).pow(k);
        assert!(m < (1u128 << 63), "p^k does not fit in 63 bits");
        Self { p, k, m: m as u64 }
    }

    /// Largest `k` with `p^k < 2^63`.
    pub fn max_digits(p: u64) -> u32 {
        let mut k = 0;
        let mut m: u128 = 1;
        while m * (p as u128) < (1u128 << 63) {
            m *= p as u128;
            k += 1;
        }
        k
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.m {
            s - self.m
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.m - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.m - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.m as u128) as u64
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        pow_mod_u64(a, e, self.m)
    }

    pub fn from_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.m as i64) as u64
    }

    pub fn from_bigint(&self, x: &BigInt) -> u64 {
        x.mod_floor(&BigInt::from(self.m)).to_u64().unwrap()
    }

    pub fn from_rational(&self, x: &BigRational) -> Option<u64> {
        let d = self.from_bigint(x.denom());
        Some(self.mul(self.from_bigint(x.numer()), self.inv(d)?))
    }

    pub fn inv(&self, a: u64) -> Option<u64> {
        if a.is_multiple_of(self.p) {
            return None;
        }
        let e = BigInt::from(a).extended_gcd(&BigInt::from(self.m));
        Some(e.x.mod_floor(&BigInt::from(self.m)).to_u64().unwrap())
    }

    /// `v_p(a)`, capped at `k`.
    pub fn valuation(&self, mut a: u64) -> u32 {
        if a == 0 {
            return self.k;
        }
        let mut v = 0;
        while a.is_multiple_of(self.p) {
            a /= self.p;
            v += 1;
        }
        v
    }

    pub fn to_padic(&self, a: u64, prec: i64) -> PadicScalar {
        PadicScalar::from_bigint(self.p, &BigInt::from(a), prec.min(self.k as i64))
    }
}
