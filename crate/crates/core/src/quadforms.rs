// SPDX-License-Identifier: Apache-2.0

//! Indefinite binary quadratic forms of discriminant `D c^2`: reduction
//! cycles, `SL2(Z)` and `Gamma0(M)` equivalence, Dirichlet composition, the
//! narrow class group, Heegner representatives and stabilizer matrices.
//!
//! The action is on the right: `(Q|g)(x, y) = Q(ax + by, cx + dy)`.

use crate::padic::{PadicScalar, QuadExtScalar};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_with::{serde_as, DisplayFromStr};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuadError {
    #[error("{0} is not a positive fundamental discriminant")]
    NotFundamental(i64),
    #[error("Heegner hypothesis fails at M = {0}")]
    HeegnerHypothesis(u64),
    #[error("discriminant mismatch: {0} vs {1}")]
    DiscriminantMismatch(BigInt, BigInt),
    #[error("invalid conductor: {0}")]
    InvalidConductor(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("internal check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, QuadError>;

fn big(x: i64) -> BigInt {
    BigInt::from(x)
}

/// 2x2 integer matrix.
#[serde_as]
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat2 {
    #[serde_as(as = "DisplayFromStr")]
    pub a: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub b: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub c: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub d: BigInt,
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {}; {} {}]", self.a, self.b, self.c, self.d)
    }
}

impl Mat2 {
    pub fn new(a: BigInt, b: BigInt, c: BigInt, d: BigInt) -> Self {
        Self { a, b, c, d }
    }

    pub fn from_i64(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::new(big(a), big(b), big(c), big(d))
    }

    pub fn identity() -> Self {
        Self::from_i64(1, 0, 0, 1)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    /// Adjugate; the inverse when the determinant is 1.
    pub fn adj(&self) -> Self {
        Self { a: self.d.clone(), b: -&self.b, c: -&self.c, d: self.a.clone() }
    }

    pub fn neg(&self) -> Self {
        Self { a: -&self.a, b: -&self.b, c: -&self.c, d: -&self.d }
    }

    pub fn trace(&self) -> BigInt {
        &self.a + &self.d
    }

    pub fn pow(&self, k: u64) -> Self {
        let mut acc = Self::identity();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn is_identity_mod(&self, m: &BigInt) -> bool {
        let r = |x: &BigInt| x.mod_floor(m);
        r(&self.a) == r(&BigInt::one()) && r(&self.b).is_zero() && r(&self.c).is_zero() && r(&self.d) == r(&BigInt::one())
    }
}

/// `(x + y sqrt(disc)) / z` with `z > 0`.
#[serde_as]
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Surd {
    #[serde_as(as = "DisplayFromStr")]
    pub x: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub y: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub z: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub disc: BigInt,
}

impl Surd {
    /// Sign of `x + y sqrt(disc)`, exactly.
    pub fn sign_of(x: &BigInt, y: &BigInt, disc: &BigInt) -> i32 {
        let sx = x.signum().to_i32().unwrap();
        let sy = y.signum().to_i32().unwrap();
        if sy == 0 {
            return sx;
        }
        if sx == 0 || sx == sy {
            return sy;
        }
        let lhs = x * x;
        let rhs = y * y * disc;
        if lhs > rhs {
            sx
        } else {
            sy
        }
    }

    pub fn sign(&self) -> i32 {
        Self::sign_of(&self.x, &self.y, &self.disc)
    }

    /// Is the surd `> k`?
    pub fn gt_int(&self, k: i64) -> bool {
        Self::sign_of(&(&self.x - &self.z * big(k)), &self.y, &self.disc) > 0
    }

    pub fn to_f64(&self) -> f64 {
        (self.x.to_f64().unwrap() + self.y.to_f64().unwrap() * self.disc.to_f64().unwrap().sqrt()) / self.z.to_f64().unwrap()
    }
}

#[serde_as]
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bqf {
    #[serde_as(as = "DisplayFromStr")]
    pub a: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub b: BigInt,
    #[serde_as(as = "DisplayFromStr")]
    pub c: BigInt,
}

impl fmt::Debug for Bqf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

impl Bqf {
    pub fn new(a: BigInt, b: BigInt, c: BigInt) -> Self {
        Self { a, b, c }
    }

    pub fn from_i64(a: i64, b: i64, c: i64) -> Self {
        Self::new(big(a), big(b), big(c))
    }

    pub fn disc(&self) -> BigInt {
        &self.b * &self.b - big(4) * &self.a * &self.c
    }

    pub fn eval(&self, x: &BigInt, y: &BigInt) -> BigInt {
        &self.a * x * x + &self.b * x * y + &self.c * y * y
    }

    pub fn is_primitive(&self) -> bool {
        self.a.gcd(&self.b).gcd(&self.c).is_one()
    }

    /// `Q|g`.
    pub fn act(&self, g: &Mat2) -> Self {
        let a = self.eval(&g.a, &g.c);
        let c = self.eval(&g.b, &g.d);
        let b = big(2) * &self.a * &g.a * &g.b + &self.b * (&g.a * &g.d + &g.b * &g.c) + big(2) * &self.c * &g.c * &g.d;
        Self { a, b, c }
    }

    pub fn as_tuple(&self) -> [BigInt; 3] {
        [self.a.clone(), self.b.clone(), self.c.clone()]
    }

    /// The distinguished root `(-B + sqrt(disc)) / (2A)`.
    pub fn root(&self) -> Surd {
        let (x, y, z) = if self.a.is_positive() {
            (-&self.b, BigInt::one(), big(2) * &self.a)
        } else {
            (self.b.clone(), -BigInt::one(), big(-2) * &self.a)
        };
        Surd { x, y, z, disc: self.disc() }
    }

    fn is_reduced_with(&self, s: &BigInt) -> bool {
        let two_a = big(2) * self.a.abs();
        self.b.is_positive() && &self.b <= s && two_a > s - &self.b && two_a <= s + &self.b
    }

    pub fn is_reduced(&self) -> bool {
        self.is_reduced_with(&self.disc().sqrt())
    }

    /// One reduction step: `Q|[0 -1; 1 t]`.
    fn rho(&self, s: &BigInt) -> (Self, Mat2) {
        let c2 = big(2) * self.c.abs();
        let r = if self.c.abs() > *s {
            let r0 = (-&self.b).mod_floor(&c2);
            if r0 > self.c.abs() {
                r0 - &c2
            } else {
                r0
            }
        } else {
            s - (s + &self.b).mod_floor(&c2)
        };
        let t = (&r + &self.b) / (big(2) * &self.c);
        let m = Mat2::new(BigInt::zero(), big(-1), BigInt::one(), t);
        (self.act(&m), m)
    }

    /// A reduced form `R = Q|g` together with `g`.
    pub fn reduce(&self) -> (Self, Mat2) {
        let s = self.disc().sqrt();
        let mut q = self.clone();
        let mut g = Mat2::identity();
        let mut steps = 0;
        while !q.is_reduced_with(&s) {
            let (nq, m) = q.rho(&s);
            q = nq;
            g = g.mul(&m);
            steps += 1;
            assert!(steps < 100_000, "reduction did not terminate");
        }
        (q, g)
    }

    /// The cycle of a reduced form, each entry paired with the matrix from the start.
    pub fn cycle(&self) -> Vec<(Self, Mat2)> {
        let s = self.disc().sqrt();
        let mut out = vec![(self.clone(), Mat2::identity())];
        let mut q = self.clone();
        let mut g = Mat2::identity();
        loop {
            let (nq, m) = q.rho(&s);
            g = g.mul(&m);
            if nq == *self {
                break;
            }
            out.push((nq.clone(), g.clone()));
            q = nq;
        }
        out
    }

    /// Lexicographically least form of the reduced cycle of the class.
    pub fn label(&self) -> Self {
        let (r, _) = self.reduce();
        r.cycle().into_iter().map(|(f, _)| f).min().unwrap()
    }
}

/// Which group the equivalence is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Sl2,
    Gamma0(u64),
}

/// Continued-fraction unit of the order of discriminant `disc`: the least
/// `(x + y sqrt(disc)) / 2 > 1` with `x^2 - disc y^2 = +-4`, and the norm sign.
pub fn fundamental_unit(disc: &BigInt) -> (BigInt, BigInt, i32) {
    let sigma = disc.mod_floor(&big(2));
    let s = disc.sqrt();
    // (P + sqrt(disc)) / Q with Q | disc - P^2.
    let mut pp = sigma.clone();
    let mut qq = big(2);
    let (mut p0, mut p1) = (BigInt::one(), BigInt::zero());
    let (mut q0, mut q1) = (BigInt::zero(), BigInt::one());
    for _ in 0..100_000 {
        let a = if qq.is_positive() {
            (&pp + &s).div_floor(&qq)
        } else {
            -((&pp + &s).div_floor(&(-&qq)) + BigInt::one())
        };
        let p2 = &a * &p0 + &p1;
        let q2 = &a * &q0 + &q1;
        p1 = std::mem::replace(&mut p0, p2);
        q1 = std::mem::replace(&mut q0, q2);
        let x = big(2) * &p0 - &sigma * &q0;
        let y = q0.clone();
        let n = &x * &x - disc * &y * &y;
        if n == big(4) || n == big(-4) {
            return (x, y, if n.is_positive() { 1 } else { -1 });
        }
        let np = &a * &qq - &pp;
        let nq = (disc - &np * &np) / &qq;
        pp = np;
        qq = nq;
    }
    panic!("continued fraction unit search did not terminate");
}

pub fn is_fundamental(d: i64) -> bool {
    if d == 1 || d == 0 {
        return false;
    }
    let sqfree = |m: i64| {
        let m = m.abs();
        let mut k = 2;
        while k * k <= m {
            if m % (k * k) == 0 {
                return false;
            }
            k += 1;
        }
        true
    };
    match d.rem_euclid(4) {
        1 => sqfree(d),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && sqfree(m)
        }
        _ => false,
    }
}

pub fn is_squarefree(n: u64) -> bool {
    let mut k = 2;
    while k * k <= n {
        if n.is_multiple_of(k * k) {
            return false;
        }
        k += 1;
    }
    true
}

pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = vec![];
    let mut k = 2;
    while k * k <= n {
        if n.is_multiple_of(k) {
            out.push(k);
            while n.is_multiple_of(k) {
                n /= k;
            }
        }
        k += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Kronecker symbol `(d | n)`.
pub fn kronecker(d: i64, n: i64) -> i32 {
    if n == 0 {
        return if d.abs() == 1 { 1 } else { 0 };
    }
    let mut res = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if d < 0 {
            res = -res;
        }
    }
    while n % 2 == 0 {
        n /= 2;
        if d % 2 == 0 {
            return 0;
        }
        if matches!(d.rem_euclid(8), 3 | 5) {
            res = -res;
        }
    }
    // Jacobi (d mod n | n).
    let mut a = d.rem_euclid(n);
    let mut m = n;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(m % 8, 3 | 5) {
                res = -res;
            }
        }
        std::mem::swap(&mut a, &mut m);
        if a % 4 == 3 && m % 4 == 3 {
            res = -res;
        }
        a %= m;
    }
    if m == 1 {
        res
    } else {
        0
    }
}

/// Least `(x + y c sqrt(D)) / 2 > 1` generating the totally positive units of `O_c`,
/// returned as `(x, y)` with respect to `sqrt(D c^2)`.
pub fn totally_positive_unit(d: i64, c: u64) -> Result<(BigInt, BigInt)> {
    if !is_fundamental(d) || d < 0 {
        return Err(QuadError::NotFundamental(d));
    }
    let disc = big(d) * big(c as i64 * c as i64);
    let (x, y, n) = fundamental_unit(&disc);
    if n > 0 {
        Ok((x, y))
    } else {
        // Square: ((x + y r)/2)^2 = ((x^2 + disc y^2)/2 + x y r) / 2.
        Ok(((&x * &x + &disc * &y * &y) / big(2), &x * &y))
    }
}

/// Smallest `delta >= 0` with `delta^2 = D mod 4M`.
pub fn choose_delta(d: i64, m: u64) -> Result<u64> {
    let modulus = 4 * m as i64;
    (0..2 * m as i64)
        .find(|&x| (x * x - d).rem_euclid(modulus) == 0)
        .map(|x| x as u64)
        .ok_or(QuadError::HeegnerHypothesis(m))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeegnerForm {
    pub form: Bqf,
    pub level: u64,
    /// Working residue `delta_c = c delta mod 2M`.
    pub delta: u64,
}

#[serde_as]
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilizerData {
    pub form: Bqf,
    pub tau: Surd,
    pub gamma: Mat2,
    /// `(x, y)` with `epsilon_c = (x + y sqrt(disc)) / 2`.
    #[serde_as(as = "(DisplayFromStr, DisplayFromStr)")]
    pub unit: (BigInt, BigInt),
}

impl StabilizerData {
    /// Image of the root in the unramified extension, using the fixed `sqrt(D)`.
    pub fn tau_padic(&self, p: u64, prec: i64, sqrt_d: &QuadExtScalar, c: u64) -> QuadExtScalar {
        let extra = prec + 4;
        let sqrt_disc = sqrt_d.scale(&PadicScalar::from_int(p, c as i64, extra));
        let num = QuadExtScalar::from_padic(PadicScalar::from_bigint(p, &-&self.form.b, extra)).add(&sqrt_disc);
        let den = QuadExtScalar::from_padic(PadicScalar::from_bigint(p, &(big(2) * &self.form.a), extra));
        num.div(&den).unwrap()
    }
}

/// Automorph `((x - B y)/2, -C y; A y, (x + B y)/2)` attached to a unit.
pub fn automorph(q: &Bqf, x: &BigInt, y: &BigInt) -> Mat2 {
    Mat2::new((x - &q.b * y) / big(2), -(&q.c * y), &q.a * y, (x + &q.b * y) / big(2))
}

#[serde_as]
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NarrowClassGroup {
    pub d: i64,
    pub c: u64,
    #[serde_as(as = "DisplayFromStr")]
    pub disc: BigInt,
    /// Class representatives: the lexicographically least reduced form of each cycle.
    pub reps: Vec<Bqf>,
    pub table: Vec<Vec<usize>>,
    pub identity: usize,
    #[serde_as(as = "(DisplayFromStr, DisplayFromStr)")]
    pub unit: (BigInt, BigInt),
    #[serde(skip)]
    index: HashMap<Bqf, usize>,
}

impl NarrowClassGroup {
    pub fn order(&self) -> usize {
        self.reps.len()
    }

    /// Class index of a form of the right discriminant.
    pub fn class_of(&self, q: &Bqf) -> usize {
        assert_eq!(q.disc(), self.disc, "discriminant mismatch");
        self.index[&q.label()]
    }

    pub fn compose(&self, i: usize, j: usize) -> usize {
        self.table[i][j]
    }

    pub fn inverse(&self, i: usize) -> usize {
        (0..self.order()).find(|&j| self.table[i][j] == self.identity).unwrap()
    }

    pub fn principal_form(&self) -> Bqf {
        let sigma = self.disc.mod_floor(&big(2));
        Bqf::new(BigInt::one(), sigma.clone(), (&sigma * &sigma - &self.disc) / big(4))
    }

    /// The class of `(sqrt(D c^2))`: the negated principal form.
    pub fn sqrt_d_class(&self) -> usize {
        let p = self.principal_form();
        self.class_of(&Bqf::new(-p.a, p.b, -p.c))
    }

    /// A form in class `i` whose first coefficient is coprime to `m` (and nonzero).
    pub fn rep_coprime_to(&self, i: usize, m: &BigInt) -> Bqf {
        let q = &self.reps[i];
        for r in 1..200i64 {
            for x in -r..=r {
                for y in [-r, r].into_iter().chain(-r + 1..r) {
                    if x.abs() != r && y.abs() != r {
                        continue;
                    }
                    if x.gcd(&y) != 1 {
                        continue;
                    }
                    let v = q.eval(&big(x), &big(y));
                    if !v.is_zero() && v.gcd(m).is_one() {
                        let e = big(x).extended_gcd(&big(y));
                        // a d - b c = 1 with first column (x, y).
                        let g = Mat2::new(big(x), -e.y.clone(), big(y), e.x.clone());
                        debug_assert!(g.det().is_one());
                        return q.act(&g);
                    }
                }
            }
        }
        panic!("no representative coprime to {m}");
    }

    /// Dirichlet composition of two forms (not necessarily reduced).
    pub fn compose_forms(&self, f1: &Bqf, f2: &Bqf) -> Bqf {
        let i1 = self.class_of(f1);
        let f1 = self.rep_in_class_coprime(f1, i1, &BigInt::one());
        let f2 = self.rep_in_class_coprime(f2, self.class_of(f2), &f1.a);
        dirichlet(&f1, &f2, &self.disc)
    }

    fn rep_in_class_coprime(&self, f: &Bqf, i: usize, m: &BigInt) -> Bqf {
        if !f.a.is_zero() && f.a.gcd(m).is_one() {
            f.clone()
        } else {
            self.rep_coprime_to(i, m)
        }
    }
}

fn dirichlet(f1: &Bqf, f2: &Bqf, disc: &BigInt) -> Bqf {
    let (a1, b1) = (&f1.a, &f1.b);
    let (a2, b2) = (&f2.a, &f2.b);
    debug_assert!(a1.gcd(a2).is_one());
    let m = a2.abs();
    let h = (b2 - b1) / big(2);
    let inv = crate::padic::inv_mod(a1, &m).unwrap_or_else(BigInt::zero);
    let t = (h * inv).mod_floor(&m);
    let b = b1 + big(2) * a1 * t;
    let a = a1 * a2;
    let c = (&b * &b - disc) / (big(4) * &a);
    Bqf::new(a, b, c)
}

/// All reduced primitive forms of the discriminant, grouped by cycle label.
fn class_labels(disc: &BigInt) -> Vec<Bqf> {
    let s = disc.sqrt();
    let mut labels = std::collections::BTreeSet::new();
    let s_i = s.to_i64().unwrap();
    let parity = disc.mod_floor(&big(2)).to_i64().unwrap();
    for b in 1..=s_i {
        if b.rem_euclid(2) != parity {
            continue;
        }
        let num = big(b * b) - disc;
        for a_abs in 1..=(s_i + b) / 2 {
            if 2 * a_abs <= s_i - b {
                continue;
            }
            for a in [a_abs, -a_abs] {
                let den = big(4 * a);
                if !(&num % &den).is_zero() {
                    continue;
                }
                let q = Bqf::new(big(a), big(b), &num / &den);
                if q.is_primitive() && q.is_reduced() {
                    labels.insert(q.label());
                }
            }
        }
    }
    labels.into_iter().collect()
}

/// The group of `SL2(Z)`-classes of primitive forms of discriminant `D c^2`.
pub fn narrow_class_group(d: i64, c: u64) -> Result<NarrowClassGroup> {
    if !is_fundamental(d) || d < 0 {
        return Err(QuadError::NotFundamental(d));
    }
    if c == 0 || (d.unsigned_abs()).gcd(&c) != 1 {
        return Err(QuadError::InvalidConductor(format!("c = {c} must be positive and coprime to D = {d}")));
    }
    let disc = big(d) * big((c * c) as i64);
    let reps = class_labels(&disc);
    let index: HashMap<Bqf, usize> = reps.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
    let unit = totally_positive_unit(d, c)?;
    let mut g = NarrowClassGroup {
        d,
        c,
        disc: disc.clone(),
        reps: reps.clone(),
        table: vec![],
        identity: 0,
        unit,
        index,
    };
    g.identity = g.class_of(&g.principal_form());
    let n = reps.len();
    let table: Vec<Vec<usize>> = crate::par::map(&(0..n).collect::<Vec<_>>(), |&i| {
        (0..n).map(|j| g.class_of(&g.compose_forms(&reps[i], &reps[j]))).collect()
    });
    g.table = table;
    Ok(g)
}

/// Equivalence with a witness `g`, `Q1|g = Q2`.
pub fn forms_equivalent(q1: &Bqf, q2: &Bqf, level: Level) -> Result<Option<Mat2>> {
    if q1.disc() != q2.disc() {
        return Err(QuadError::DiscriminantMismatch(q1.disc(), q2.disc()));
    }
    let (r1, g1) = q1.reduce();
    let (r2, g2) = q2.reduce();
    let Some((_, h)) = r1.cycle().into_iter().find(|(f, _)| *f == r2) else {
        return Ok(None);
    };
    let w = g1.mul(&h).mul(&g2.adj());
    debug_assert_eq!(q1.act(&w), *q2);
    match level {
        Level::Sl2 => Ok(Some(w)),
        Level::Gamma0(m) => {
            let mb = big(m as i64);
            let (x, y, n) = fundamental_unit(&q1.disc());
            let (x, y) = if n > 0 { (x, y) } else { ((&x * &x + q1.disc() * &y * &y) / big(2), &x * &y) };
            let gam = automorph(q1, &x, &y);
            let mut s = Mat2::identity();
            for _ in 0..(4 * m * m * m + 4) {
                for cand in [s.mul(&w), s.neg().mul(&w)] {
                    if cand.c.mod_floor(&mb).is_zero() {
                        return Ok(Some(cand));
                    }
                }
                s = s.mul(&gam);
                if s.is_identity_mod(&mb) {
                    break;
                }
            }
            Ok(None)
        }
    }
}

/// Checks the Heegner hypothesis at `M` for `(D, c)` and returns `delta_c`.
pub fn heegner_delta(d: i64, c: u64, m: u64) -> Result<u64> {
    for l in prime_factors(m) {
        if kronecker(d, l as i64) != 1 {
            return Err(QuadError::HeegnerHypothesis(m));
        }
    }
    let delta = choose_delta(d, m)?;
    Ok((c * delta) % (2 * m))
}

/// One Heegner form `Q` (`M | A`, `B = delta_c mod 2M`) per class.
pub fn heegner_representatives(g: &NarrowClassGroup, m: u64, delta_c: u64) -> Result<Vec<HeegnerForm>> {
    if (2 * m).gcd(&g.c) != 1 && m > 1 {
        return Err(QuadError::InvalidConductor(format!("c = {} must be prime to 2M", g.c)));
    }
    let out: Vec<Result<HeegnerForm>> = crate::par::map(&g.reps, |q0| heegner_in_class(q0, m, delta_c).map(|form| HeegnerForm { form, level: m, delta: delta_c }));
    out.into_iter().collect()
}

fn heegner_in_class(q0: &Bqf, m: u64, delta_c: u64) -> Result<Bqf> {
    let mb = big(m as i64);
    let m2 = big(2 * m as i64);
    let target = big(delta_c as i64).mod_floor(&m2);
    for r in 1..(200 * m as i64 + 50) {
        for x in -r..=r {
            for y in 0..=r {
                if x.abs() != r && y != r {
                    continue;
                }
                if x.gcd(&y) != 1 {
                    continue;
                }
                let (xb, yb) = (big(x), big(y));
                if !q0.eval(&xb, &yb).mod_floor(&mb).is_zero() {
                    continue;
                }
                let e = xb.extended_gcd(&yb);
                let g = Mat2::new(xb.clone(), -e.y.clone(), yb.clone(), e.x.clone());
                let q = q0.act(&g);
                if q.b.mod_floor(&m2) == target {
                    return Ok(shorten(&q));
                }
            }
        }
    }
    Err(QuadError::SearchExhausted(format!("no Heegner form of level {m} in class {q0:?}")))
}

/// Translate by `[1 t; 0 1]` so that `|B| <= |A|`.
fn shorten(q: &Bqf) -> Bqf {
    let a2 = big(2) * q.a.abs();
    let mut b = q.b.mod_floor(&a2);
    if b > q.a.abs() {
        b -= &a2;
    }
    let t = (&b - &q.b) / (big(2) * &q.a);
    q.act(&Mat2::new(BigInt::one(), t, BigInt::zero(), BigInt::one()))
}

/// `Q^sigma`: the Heegner representative of `sigma * class(Q)`.
pub fn galois_translate(g: &NarrowClassGroup, reps: &[HeegnerForm], sigma: usize, q: &HeegnerForm) -> HeegnerForm {
    let k = g.compose(sigma, g.class_of(&q.form));
    reps.iter().find(|h| g.class_of(&h.form) == k).expect("representative for every class").clone()
}

/// `gamma_tau`: the automorph of `Q` attached to `epsilon_c`, oriented so that `c tau + d = epsilon_c > 1`.
pub fn stabilizer_gamma(q: &HeegnerForm, unit: &(BigInt, BigInt)) -> Result<StabilizerData> {
    let form = &q.form;
    let (x, y) = unit;
    let mut gamma = automorph(form, x, y);
    let tau = form.root();
    if form.act(&gamma) != *form || !gamma.det().is_one() {
        return Err(QuadError::Internal("automorph does not fix the form".into()));
    }
    if !gamma.c.mod_floor(&big(q.level as i64)).is_zero() {
        return Err(QuadError::Internal("stabilizer not in Gamma0(M)".into()));
    }
    // c tau + d as an exact surd.
    let ctd = |g: &Mat2| Surd {
        x: &g.c * &tau.x + &g.d * &tau.z,
        y: &g.c * &tau.y,
        z: tau.z.clone(),
        disc: tau.disc.clone(),
    };
    if !ctd(&gamma).gt_int(1) {
        gamma = gamma.adj();
    }
    if !ctd(&gamma).gt_int(1) {
        return Err(QuadError::Internal("c tau + d not > 1".into()));
    }
    Ok(StabilizerData { form: form.clone(), tau, gamma, unit: unit.clone() })
}

/// Serializable snapshot of a class group with Heegner data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassGroupDoc {
    pub version: u32,
    #[serde(rename = "D")]
    pub d: i64,
    pub c: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub delta: u64,
    pub reps: Vec<[String; 3]>,
    pub heegner: Vec<[String; 3]>,
    pub table: Vec<Vec<usize>>,
    pub identity: usize,
    pub sqrt_d_class: usize,
}

impl ClassGroupDoc {
    pub const VERSION: u32 = 1;

    pub fn new(g: &NarrowClassGroup, m: u64, delta: u64, heegner: &[HeegnerForm]) -> Self {
        let s = |f: &Bqf| [f.a.to_string(), f.b.to_string(), f.c.to_string()];
        Self {
            version: Self::VERSION,
            d: g.d,
            c: g.c,
            m,
            delta,
            reps: g.reps.iter().map(s).collect(),
            heegner: heegner.iter().map(|h| s(&h.form)).collect(),
            table: g.table.clone(),
            identity: g.identity,
            sqrt_d_class: g.sqrt_d_class(),
        }
    }
}
