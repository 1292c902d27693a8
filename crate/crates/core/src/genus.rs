// SPDX-License-Identifier: Apache-2.0

//! Quadratic characters of the narrow ring class group and their genus pairs.

use crate::quadforms::{is_fundamental, is_squarefree, kronecker, Bqf, NarrowClassGroup};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenusError {
    #[error("genus decomposition failed")]
    DecompositionFailed,
    #[error("c must be odd and squarefree (got {0})")]
    BadConductor(u64),
    #[error("{0} is not a fundamental discriminant")]
    NotFundamental(i64),
    #[error("inconsistent ordering: both characters have the same sign")]
    Ordering,
}

pub type Result<T> = std::result::Result<T, GenusError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingClassCharacter {
    #[serde(rename = "D")]
    pub d: i64,
    pub c: u64,
    pub values: Vec<i8>,
    pub primitive: bool,
    pub sign: i32,
    pub delta1: Option<i64>,
    pub delta2: Option<i64>,
}

impl RingClassCharacter {
    pub fn eval(&self, class: usize) -> i32 {
        self.values[class] as i32
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 1)
    }

    pub fn pair(&self) -> Option<(i64, i64)> {
        Some((self.delta1?, self.delta2?))
    }
}

pub fn kronecker_eval(delta: i64, n: i64) -> i32 {
    kronecker(delta, n)
}

/// A greedy generating set of the group.
fn generators(g: &NarrowClassGroup) -> Vec<usize> {
    let n = g.order();
    let mut inside = vec![false; n];
    inside[g.identity] = true;
    let mut gens = vec![];
    while let Some(x) = (0..n).find(|&i| !inside[i]) {
        gens.push(x);
        // Close up under multiplication by all generators.
        let mut frontier: Vec<usize> = (0..n).filter(|&i| inside[i]).collect();
        while let Some(y) = frontier.pop() {
            for &s in &gens {
                let z = g.compose(y, s);
                if !inside[z] {
                    inside[z] = true;
                    frontier.push(z);
                }
            }
        }
    }
    gens
}

/// Extends values on generators to the whole group, if that defines a homomorphism.
fn extend(g: &NarrowClassGroup, gens: &[usize], signs: &[i8]) -> Option<Vec<i8>> {
    let n = g.order();
    let mut vals = vec![0i8; n];
    vals[g.identity] = 1;
    let mut frontier = vec![g.identity];
    while let Some(y) = frontier.pop() {
        for (&s, &v) in gens.iter().zip(signs) {
            let z = g.compose(y, s);
            let w = vals[y] * v;
            if vals[z] == 0 {
                vals[z] = w;
                frontier.push(z);
            } else if vals[z] != w {
                return None;
            }
        }
    }
    let hom = (0..n).all(|i| (0..n).all(|j| vals[g.compose(i, j)] == vals[i] * vals[j]));
    hom.then_some(vals)
}

/// All homomorphisms `G -> {+-1}`, trivial character first.
pub fn enumerate_quadratic_chars(g: &NarrowClassGroup) -> Vec<RingClassCharacter> {
    let gens = generators(g);
    let sigma_f = g.sqrt_d_class();
    let mut out = vec![];
    for mask in 0u64..(1 << gens.len()) {
        let signs: Vec<i8> = (0..gens.len()).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect();
        if let Some(values) = extend(g, &gens, &signs) {
            let sign = values[sigma_f] as i32;
            out.push(RingClassCharacter { d: g.d, c: g.c, values, primitive: false, sign, delta1: None, delta2: None });
        }
    }
    for chi in &mut out {
        chi.primitive = is_primitive(g, chi);
    }
    out
}

pub fn char_sign(g: &NarrowClassGroup, chi: &RingClassCharacter) -> i32 {
    chi.eval(g.sqrt_d_class())
}

/// Image in discriminant `D f^2` of a form of discriminant `D c^2` with odd first coefficient prime to `c`.
pub fn change_order(q: &Bqf, d: i64, c: u64, f: u64) -> Bqf {
    let a = q.a.clone();
    let am = a.abs();
    let cb = BigInt::from(c);
    let fb = BigInt::from(f);
    let cinv = crate::padic::inv_mod(&cb, &am).expect("A prime to c");
    let r = (&fb * &q.b * cinv).mod_floor(&am);
    let parity = BigInt::from(d).mod_floor(&BigInt::from(2));
    let b = if (&r - &parity).is_even() { r } else { r + &am };
    let disc = BigInt::from(d) * &fb * &fb;
    let cc = (&b * &b - &disc) / (BigInt::from(4) * &a);
    Bqf::new(a, b, cc)
}

/// Classes of `Pic+(O_c)` mapping to the identity of `Pic+(O_f)`.
pub fn kernel_to_order(g: &NarrowClassGroup, f: u64) -> Vec<usize> {
    let gf = crate::quadforms::narrow_class_group(g.d, f).expect("valid smaller order");
    let m = BigInt::from(2 * g.c);
    (0..g.order())
        .filter(|&i| {
            let q = g.rep_coprime_to(i, &m);
            gf.class_of(&change_order(&q, g.d, g.c, f)) == gf.identity
        })
        .collect()
}

/// True iff `chi` does not factor through any `Pic+(O_f)` with `f | c`, `f < c`.
pub fn is_primitive(g: &NarrowClassGroup, chi: &RingClassCharacter) -> bool {
    (1..g.c)
        .filter(|f| g.c.is_multiple_of(*f))
        .all(|f| kernel_to_order(g, f).iter().any(|&k| chi.eval(k) != 1))
}

/// Frobenius class of a prime `l` split in the order: the class of `(l, b, *)`.
pub fn frobenius_class(g: &NarrowClassGroup, l: u64) -> Option<usize> {
    let disc = g.disc.to_i64()?;
    let m = 4 * l as i64;
    let b = (0..2 * l as i64).find(|&b| (b - disc).rem_euclid(2) == 0 && (b * b - disc).rem_euclid(m) == 0)?;
    let q = Bqf::from_i64(l as i64, b, (b * b - disc) / m);
    Some(g.class_of(&q))
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

/// Primes `l > skip_below` split in `Q(sqrt D)` and prime to `2 c D avoid`.
pub fn split_primes(d: i64, c: u64, avoid: u64, count: usize, skip_below: u64) -> Vec<u64> {
    let bad = 2 * c * d.unsigned_abs() * avoid.max(1);
    (skip_below + 1..)
        .filter(|&l| is_prime(l) && !bad.is_multiple_of(l) && kronecker(d, l as i64) == 1)
        .take(count)
        .collect()
}

/// `d = c` if `c = 1 mod 4`, else `-c`.
pub fn signed_conductor(c: u64) -> i64 {
    if c % 4 == 1 {
        c as i64
    } else {
        -(c as i64)
    }
}

/// Ordered-agnostic factorizations `D = D1 D2` into coprime fundamental discriminants (1 allowed).
pub fn discriminant_splittings(d: i64) -> Vec<(i64, i64)> {
    let fund_or_one = |x: i64| x == 1 || is_fundamental(x);
    let mut out = vec![];
    for k in 1..=d.abs() {
        if d % k != 0 {
            continue;
        }
        for d1 in [k, -k] {
            let d2 = d / d1;
            if fund_or_one(d1) && fund_or_one(d2) && d1.gcd(&d2) == 1 && !out.contains(&(d2, d1)) {
                out.push((d1, d2));
            }
        }
    }
    out
}

pub const DECOMPOSE_SAMPLE: usize = 25;

/// Genus pair `(D1 d, D2 d)` of a primitive quadratic character, unordered.
pub fn genus_decompose(g: &NarrowClassGroup, chi: &RingClassCharacter, avoid: u64) -> Result<(i64, i64)> {
    if g.c.is_multiple_of(2) || !is_squarefree(g.c) {
        return Err(GenusError::BadConductor(g.c));
    }
    let d = signed_conductor(g.c);
    let sample = split_primes(g.d, g.c, avoid, DECOMPOSE_SAMPLE, 2);
    let frob: Vec<usize> = sample.iter().map(|&l| frobenius_class(g, l).expect("split prime")).collect();
    for (d1, d2) in discriminant_splittings(g.d) {
        let (e1, e2) = (d1 * d, d2 * d);
        let ok = sample.iter().zip(&frob).all(|(&l, &k)| {
            let l = l as i64;
            chi.eval(k) == kronecker(e1, l) && kronecker(g.d, l) == kronecker(e1, l) * kronecker(e2, l)
        });
        if ok {
            return Ok((e1, e2));
        }
    }
    Err(GenusError::DecompositionFailed)
}

/// Fills in genus pairs for primitive characters, leaving the rest untouched.
pub fn attach_genus_pairs(g: &NarrowClassGroup, chars: &mut [RingClassCharacter], avoid: u64) -> Result<()> {
    for chi in chars.iter_mut().filter(|c| c.primitive) {
        let (a, b) = genus_decompose(g, chi, avoid)?;
        chi.delta1 = Some(a);
        chi.delta2 = Some(b);
    }
    Ok(())
}

/// Orders every attached pair with [`order_by_sign`].
pub fn order_genus_pairs(chars: &mut [RingClassCharacter], n: u64, w_n: i32) -> Result<()> {
    for chi in chars.iter_mut() {
        if let Some(pair) = chi.pair() {
            let (a, b) = order_by_sign(n, w_n, pair)?;
            chi.delta1 = Some(a);
            chi.delta2 = Some(b);
        }
    }
    Ok(())
}

/// Gauss sum of `chi_Delta`: `sqrt(Delta)` or `i sqrt(|Delta|)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussSum {
    pub delta: i64,
    pub imaginary: bool,
}

impl GaussSum {
    pub fn to_complex(&self) -> (f64, f64) {
        let r = (self.delta.unsigned_abs() as f64).sqrt();
        if self.imaginary {
            (0.0, r)
        } else {
            (r, 0.0)
        }
    }
}

pub fn gauss_sum(delta: i64) -> Result<GaussSum> {
    if !is_fundamental(delta) {
        return Err(GenusError::NotFundamental(delta));
    }
    let gs = GaussSum { delta, imaginary: delta < 0 };
    let (re, im) = gauss_sum_direct(delta);
    let (er, ei) = gs.to_complex();
    assert!((re - er).abs() < 1e-10 * (1.0 + er.abs()) && (im - ei).abs() < 1e-10 * (1.0 + ei.abs()), "Gauss sum mismatch for {delta}");
    Ok(gs)
}

/// `sum_a chi(a) e^{2 pi i a / |Delta|}`.
pub fn gauss_sum_direct(delta: i64) -> (f64, f64) {
    let m = delta.unsigned_abs() as i64;
    let mut re = 0.0;
    let mut im = 0.0;
    for a in 1..m {
        let k = kronecker(delta, a) as f64;
        let th = 2.0 * std::f64::consts::PI * a as f64 / m as f64;
        re += k * th.cos();
        im += k * th.sin();
    }
    (re, im)
}

/// Orders the pair so that `sign(E, chi_{Delta1}) = -1`, where `sign(E, chi_Delta) = -w_N (Delta | -N)`.
pub fn order_by_sign(n: u64, w_n: i32, pair: (i64, i64)) -> Result<(i64, i64)> {
    let sign = |delta: i64| -w_n * kronecker(delta, -(n as i64));
    match (sign(pair.0), sign(pair.1)) {
        (-1, 1) => Ok(pair),
        (1, -1) => Ok((pair.1, pair.0)),
        _ => Err(GenusError::Ordering),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadforms::narrow_class_group;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker_eval(5, 1), 1);
        assert_eq!(kronecker_eval(13, 5), -1);
        assert_eq!(kronecker_eval(40, 3), 1);
        // Euler's criterion oracle at odd primes.
        for delta in [5i64, 8, 12, 13, -3, -4, -7, 40, -15] {
            for l in [3i64, 7, 11, 13, 17, 19, 23] {
                if delta.rem_euclid(l) == 0 {
                    continue;
                }
                let mut e = 1i64;
                for _ in 0..(l - 1) / 2 {
                    e = e * delta.rem_euclid(l) % l;
                }
                let euler = if e == 1 { 1 } else { -1 };
                assert_eq!(kronecker_eval(delta, l), euler, "({delta}|{l})");
            }
        }
    }

    #[test]
    fn kronecker_periodic_and_multiplicative() {
        for delta in [5i64, 8, 12, -3, -4, -8, 40, -15, 21] {
            let m = delta.abs();
            for n in 1..60 {
                assert_eq!(kronecker(delta, n), kronecker(delta, n + m));
                for k in 1..12 {
                    assert_eq!(kronecker(delta, n * k), kronecker(delta, n) * kronecker(delta, k));
                }
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let g13 = narrow_class_group(13, 1).unwrap();
        assert_eq!(enumerate_quadratic_chars(&g13).len(), 1);
        let g40 = narrow_class_group(40, 1).unwrap();
        assert_eq!(enumerate_quadratic_chars(&g40).len(), 2);
        // 2-rank oracle: number of elements of order dividing 2 equals number of characters.
        for (d, c) in [(60, 1), (65, 1), (85, 3), (13, 15), (136, 1), (105, 1)] {
            let Ok(g) = narrow_class_group(d, c) else { continue };
            let two_torsion = (0..g.order()).filter(|&i| g.compose(i, i) == g.identity).count();
            let chars = enumerate_quadratic_chars(&g);
            assert_eq!(chars.len(), two_torsion, "D={d} c={c}");
            for chi in &chars {
                for i in 0..g.order() {
                    for j in 0..g.order() {
                        assert_eq!(chi.eval(g.compose(i, j)), chi.eval(i) * chi.eval(j));
                    }
                }
            }
        }
    }

    #[test]
    fn primitivity_13_3() {
        let g = narrow_class_group(13, 3).unwrap();
        let g1 = narrow_class_group(13, 1).unwrap();
        let ker = kernel_to_order(&g, 1);
        // Surjectivity oracle: |ker| = h+(O_3) / h+(O_1).
        assert_eq!(ker.len() * g1.order(), g.order());
        let chars = enumerate_quadratic_chars(&g);
        for chi in &chars {
            let expected = ker.iter().any(|&k| chi.eval(k) != 1);
            assert_eq!(chi.primitive, expected);
        }
        assert!(!chars[0].primitive);
        assert!(chars.iter().any(|c| c.primitive));
    }

    #[test]
    fn change_order_is_homomorphism() {
        let g = narrow_class_group(21, 5).unwrap();
        let g1 = narrow_class_group(21, 1).unwrap();
        let m = BigInt::from(10);
        let img: Vec<usize> = (0..g.order()).map(|i| g1.class_of(&change_order(&g.rep_coprime_to(i, &m), 21, 5, 1))).collect();
        for i in 0..g.order() {
            for j in 0..g.order() {
                assert_eq!(img[g.compose(i, j)], g1.compose(img[i], img[j]));
            }
        }
        assert_eq!(kernel_to_order(&g, 1).len() * g1.order(), g.order());
    }

    #[test]
    fn decompositions() {
        let g = narrow_class_group(40, 1).unwrap();
        let mut chars = enumerate_quadratic_chars(&g);
        attach_genus_pairs(&g, &mut chars, 1).unwrap();
        assert_eq!(chars[0].pair(), Some((1, 40)));
        let (a, b) = chars[1].pair().unwrap();
        assert_eq!((a.min(b), a.max(b)), (5, 8));

        let g = narrow_class_group(13, 3).unwrap();
        let mut chars = enumerate_quadratic_chars(&g);
        attach_genus_pairs(&g, &mut chars, 1).unwrap();
        for chi in chars.iter().filter(|c| c.primitive) {
            let (a, b) = chi.pair().unwrap();
            assert_eq!((a.min(b), a.max(b)), (-39, -3));
            assert_eq!(chi.sign, -1);
        }
    }

    #[test]
    fn sign_matches_genus_pair_and_resampling() {
        for (d, c) in [(5, 3), (13, 3), (13, 5), (21, 5), (40, 3), (60, 7), (65, 3), (85, 7), (28, 3), (12, 5), (8, 3)] {
            let Ok(g) = narrow_class_group(d, c) else { continue };
            let mut chars = enumerate_quadratic_chars(&g);
            attach_genus_pairs(&g, &mut chars, 1).unwrap();
            for chi in chars.iter().filter(|c| c.primitive) {
                let (a, b) = chi.pair().unwrap();
                assert_eq!(chi.sign == 1, a > 0 && b > 0, "D={d} c={c}");
                assert_eq!(char_sign(&g, chi), chi.sign);
                for l in split_primes(d, c, 1, 25, 400) {
                    let k = frobenius_class(&g, l).unwrap();
                    assert_eq!(chi.eval(k), kronecker(a, l as i64));
                }
                let mut ls = 3u64;
                let mut seen = 0;
                while seen < 1000 {
                    if is_prime(ls) && c % ls != 0 {
                        let l = ls as i64;
                        assert_eq!(kronecker(d, l), kronecker(a, l) * kronecker(b, l));
                        seen += 1;
                    }
                    ls += 2;
                }
            }
        }
    }

    #[test]
    fn gauss_sums() {
        assert_eq!(gauss_sum(5).unwrap(), GaussSum { delta: 5, imaginary: false });
        assert_eq!(gauss_sum(-3).unwrap(), GaussSum { delta: -3, imaginary: true });
        let (re, im) = gauss_sum_direct(40);
        assert!((re - 40f64.sqrt()).abs() < 1e-10 && im.abs() < 1e-10);
        assert!(gauss_sum(20).is_err());
    }

    #[test]
    fn ordering() {
        // N = 11, w_N = -1: (5 | -11) = 1 and (8 | -11) = -1.
        assert_eq!(order_by_sign(11, -1, (5, 8)).unwrap(), (8, 5));
        assert_eq!(order_by_sign(11, -1, (8, 5)).unwrap(), (8, 5));
        assert_eq!(kronecker(8, -11), -1);
        assert!(order_by_sign(11, -1, (5, 5)).is_err());
    }

    #[test]
    fn bad_conductor() {
        let g = narrow_class_group(13, 9).unwrap();
        let chars = enumerate_quadratic_chars(&g);
        assert_eq!(genus_decompose(&g, &chars[0], 1), Err(GenusError::BadConductor(9)));
    }
}
