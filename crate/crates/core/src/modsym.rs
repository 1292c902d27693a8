// SPDX-License-Identifier: Apache-2.0

//! Weight-2 modular symbols for `Gamma0(N)` through Manin symbols.
//!
//! A symbol is a function on Manin symbols `[c:d] = {b/d -> a/c}` for
//! `g = (a b; c d)` satisfying the two- and three-term relations.

use crate::curve::EllipticCurveData;
use crate::quadforms::{kronecker, prime_factors, Mat2};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModSymError {
    #[error("eigenspace has dimension {0}, expected 1")]
    Multiplicity(usize),
    #[error("character sign does not match the symbol sign")]
    SignMismatch,
    #[error("character modulus not coprime to the level")]
    BadModulus,
}

pub type Result<T> = std::result::Result<T, ModSymError>;

type Q = BigRational;

fn qi(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

/// A cusp in `P^1(Q)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cusp {
    Inf,
    Q(BigRational),
}

impl Cusp {
    pub fn int(x: i64) -> Self {
        Cusp::Q(qi(x))
    }

    pub fn frac(a: i64, b: i64) -> Self {
        if b == 0 {
            Cusp::Inf
        } else {
            Cusp::Q(Q::new(BigInt::from(a), BigInt::from(b)))
        }
    }

    /// `(numerator, denominator)` with denominator `>= 0`; `(1, 0)` for infinity.
    pub fn parts(&self) -> (BigInt, BigInt) {
        match self {
            Cusp::Inf => (BigInt::one(), BigInt::zero()),
            Cusp::Q(r) => (r.numer().clone(), r.denom().clone()),
        }
    }

    /// `g . x` for an integer matrix.
    pub fn act(&self, g: &Mat2) -> Self {
        let (x, y) = self.parts();
        let num = &g.a * &x + &g.b * &y;
        let den = &g.c * &x + &g.d * &y;
        if den.is_zero() {
            Cusp::Inf
        } else {
            Cusp::Q(Q::new(num, den))
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Cusp::Inf => Cusp::Inf,
            Cusp::Q(r) => Cusp::Q(-r),
        }
    }
}

/// `P^1(Z/N)` with a canonical index for every pair `(c, d)` with `gcd(c, d, N) = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct P1List {
    pub n: u64,
    /// Representative pair of each class.
    pub reps: Vec<(u64, u64)>,
    /// Index table over all pairs `c * N + d`; `u32::MAX` for invalid pairs.
    table: Vec<u32>,
}

impl P1List {
    pub fn new(n: u64) -> Self {
        let nn = n as usize;
        let mut table = vec![u32::MAX; nn * nn];
        let mut reps = vec![];
        let units: Vec<u64> = (1..=n.max(1)).filter(|u| u.gcd(&n) == 1).map(|u| u % n.max(1)).collect();
        for c in 0..n {
            for d in 0..n {
                let i = (c * n + d) as usize;
                if table[i] != u32::MAX || c.gcd(&d).gcd(&n) != 1 {
                    continue;
                }
                let k = reps.len() as u32;
                reps.push((c, d));
                for &u in &units {
                    table[((u * c % n) * n + u * d % n) as usize] = k;
                }
            }
        }
        if n == 1 {
            return Self { n, reps: vec![(0, 0)], table: vec![0] };
        }
        Self { n, reps, table }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn index(&self, c: &BigInt, d: &BigInt) -> usize {
        if self.n == 1 {
            return 0;
        }
        let nb = BigInt::from(self.n);
        let c = c.mod_floor(&nb).to_u64().unwrap();
        let d = d.mod_floor(&nb).to_u64().unwrap();
        let k = self.table[(c * self.n + d) as usize];
        assert!(k != u32::MAX, "pair not in P1(Z/N)");
        k as usize
    }

    pub fn index_i64(&self, c: i64, d: i64) -> usize {
        self.index(&BigInt::from(c), &BigInt::from(d))
    }

    /// A matrix in `SL2(Z)` whose bottom row lies in the class.
    pub fn lift(&self, i: usize) -> Mat2 {
        let n = self.n as i64;
        let (c, d) = (self.reps[i].0 as i64, self.reps[i].1 as i64);
        let (c, d) = if c == 0 {
            (n, d)
        } else {
            let mut dd = d;
            while c.gcd(&dd) != 1 {
                dd += n;
            }
            (c, dd)
        };
        let e = BigInt::from(d).extended_gcd(&BigInt::from(c));
        // a d - b c = 1 with a = x, b = -y.
        let g = Mat2::new(e.x.clone(), -e.y.clone(), BigInt::from(c), BigInt::from(d));
        debug_assert!(g.det().is_one());
        g
    }
}

/// Manin-symbol indices along `{inf -> a/b}`.
pub fn manin_path_from_inf(p1: &P1List, cusp: &Cusp) -> Vec<usize> {
    convergent_path(p1, cusp).into_iter().map(|(i, _)| i).collect()
}

/// `{inf -> a/b} = sum_k g_k{0 -> inf}` with `g_k = (p_k, s p_{k-1}; q_k, s q_{k-1})` in `SL2(Z)`,
/// where `p_k/q_k` are the convergents and `p_{-1}/q_{-1} = 1/0`.
pub fn unimodular_path(cusp: &Cusp) -> Vec<Mat2> {
    let (a, b) = cusp.parts();
    if b.is_zero() {
        return vec![];
    }
    let mut out = vec![];
    let (mut pm2, mut qm2) = (BigInt::zero(), BigInt::one());
    let (mut pm1, mut qm1) = (BigInt::one(), BigInt::zero());
    let (mut num, mut den) = (a, b);
    let mut k = 0usize;
    while !den.is_zero() {
        let (t, r) = num.div_mod_floor(&den);
        let pk = &t * &pm1 + &pm2;
        let qk = &t * &qm1 + &qm2;
        let s = if k % 2 == 1 { 1 } else { -1 };
        out.push(Mat2::new(pk.clone(), &pm1 * s, qk.clone(), &qm1 * s));
        pm2 = std::mem::replace(&mut pm1, pk);
        qm2 = std::mem::replace(&mut qm1, qk);
        num = std::mem::replace(&mut den, r);
        k += 1;
    }
    out
}

fn convergent_path(p1: &P1List, cusp: &Cusp) -> Vec<(usize, i32)> {
    unimodular_path(cusp).into_iter().map(|g| (p1.index(&g.c, &g.d), 1)).collect()
}

/// A `Q`-valued symbol given by its values on the Manin symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalModularSymbol {
    pub n: u64,
    pub sign: i32,
    pub values: Vec<BigRational>,
}

impl RationalModularSymbol {
    /// `I{r -> s}` by the Manin trick.
    pub fn eval(&self, p1: &P1List, r: &Cusp, s: &Cusp) -> BigRational {
        evaluate_symbol(&self.values, p1, r, s)
    }
}

pub fn evaluate_symbol(values: &[BigRational], p1: &P1List, r: &Cusp, s: &Cusp) -> BigRational {
    let side = |c: &Cusp| -> Q { convergent_path(p1, c).into_iter().map(|(i, e)| &values[i] * qi(e as i64)).sum() };
    side(s) - side(r)
}

/// Relation-solved space of functions on Manin symbols.
#[derive(Clone, Debug)]
pub struct ManinSymbolSpace {
    pub n: u64,
    pub p1: P1List,
    /// Basis of the solution space in reduced form; `free[k]` is the coordinate where `basis[k]` is 1.
    pub basis: Vec<Vec<BigRational>>,
    pub free: Vec<usize>,
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref(rows: &mut Vec<Vec<BigRational>>, ncols: usize) -> Vec<usize> {
    let mut pivots = vec![];
    let mut r = 0;
    for c in 0..ncols {
        let Some(k) = (r..rows.len()).find(|&k| !rows[k][c].is_zero()) else { continue };
        rows.swap(r, k);
        let inv = rows[r][c].recip();
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        let pivot_row = rows[r].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x = &*x - &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// Nullspace basis of the rows, one vector per free column (1 there, 0 at other free columns).
pub fn nullspace(rows: &[Vec<BigRational>], ncols: usize) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = vec![];
    for &f in &free {
        let mut v = vec![Q::zero(); ncols];
        v[f] = Q::one();
        for (row, &pc) in m.iter().zip(&pivots) {
            v[pc] = -row[f].clone();
        }
        basis.push(v);
    }
    (basis, free)
}

impl ManinSymbolSpace {
    pub fn new(n: u64) -> Self {
        let p1 = P1List::new(n);
        let len = p1.len();
        let mut rows = vec![];
        for (i, &(c, d)) in p1.reps.iter().enumerate() {
            let (c, d) = (c as i64, d as i64);
            let j = p1.index_i64(d, -c);
            let mut r = vec![Q::zero(); len];
            r[i] += Q::one();
            r[j] += Q::one();
            rows.push(r);
            let j1 = p1.index_i64(d, -c - d);
            let j2 = p1.index_i64(-c - d, c);
            let mut r = vec![Q::zero(); len];
            r[i] += Q::one();
            r[j1] += Q::one();
            r[j2] += Q::one();
            rows.push(r);
        }
        let (basis, free) = nullspace(&rows, len);
        Self { n, p1, basis, free }
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn coords(&self, v: &[BigRational]) -> Vec<BigRational> {
        self.free.iter().map(|&f| v[f].clone()).collect()
    }

    pub fn from_coords(&self, c: &[BigRational]) -> Vec<BigRational> {
        let mut out = vec![Q::zero(); self.p1.len()];
        for (b, x) in self.basis.iter().zip(c) {
            if x.is_zero() {
                continue;
            }
            for (o, y) in out.iter_mut().zip(b) {
                if !y.is_zero() {
                    *o = &*o + x * y;
                }
            }
        }
        out
    }

    /// `(I | T_l){[g]} = sum_beta I{beta g 0 -> beta g inf}`; `U_l` when `l | N`.
    pub fn hecke(&self, values: &[BigRational], l: u64) -> Vec<BigRational> {
        let mats = hecke_matrices(l, self.n);
        (0..self.p1.len())
            .map(|i| {
                let g = self.p1.lift(i);
                let (r, s) = (Cusp::int(0).act(&g), Cusp::Inf.act(&g));
                mats.iter().map(|b| evaluate_symbol(values, &self.p1, &r.act(b), &s.act(b))).sum()
            })
            .collect()
    }

    /// `I{r -> s} -> I{-r -> -s}`.
    pub fn star(&self, values: &[BigRational]) -> Vec<BigRational> {
        (0..self.p1.len())
            .map(|i| {
                let (c, d) = self.p1.reps[i];
                values[self.p1.index_i64(-(c as i64), d as i64)].clone()
            })
            .collect()
    }

    /// Matrix of a linear operator on the solution space, in free coordinates.
    pub fn operator_matrix(&self, op: impl Fn(&[BigRational]) -> Vec<BigRational> + Sync + Send) -> Vec<Vec<BigRational>> {
        let cols: Vec<Vec<BigRational>> = crate::par::map(&self.basis, |b| self.coords(&op(b)));
        let d = self.dimension();
        (0..d).map(|r| (0..d).map(|c| cols[c][r].clone()).collect()).collect()
    }
}

pub fn hecke_matrices(l: u64, n: u64) -> Vec<Mat2> {
    let li = l as i64;
    let mut out: Vec<Mat2> = (0..li).map(|a| Mat2::from_i64(1, a, 0, li)).collect();
    if !n.is_multiple_of(l) {
        out.push(Mat2::from_i64(li, 0, 0, 1));
    }
    out
}

fn scale_to_content_one(v: &[BigRational]) -> Vec<BigRational> {
    let den = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(den.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return v.to_vec();
    }
    // Fix the sign by the first nonzero entry.
    let first = ints.iter().find(|x| !x.is_zero()).unwrap();
    let g = if first.is_negative() { -g } else { g };
    ints.into_iter().map(|x| Q::from_integer(x / &g)).collect()
}

/// Kernel of `A - lambda` intersected with the span of `cols` (coordinates in the ambient basis).
fn restrict_kernel(space: &[Vec<BigRational>], a: &[Vec<BigRational>], lambda: &BigRational) -> Vec<Vec<BigRational>> {
    // space: vectors in coordinates; find combinations x with (A - lambda)(sum x_k v_k) = 0.
    let d = a.len();
    let k = space.len();
    let images: Vec<Vec<BigRational>> = space
        .iter()
        .map(|v| (0..d).map(|r| (0..d).map(|c| &a[r][c] * &v[c]).sum::<Q>() - lambda * &v[r]).collect())
        .collect();
    let rows: Vec<Vec<BigRational>> = (0..d).map(|r| (0..k).map(|c| images[c][r].clone()).collect()).collect();
    let (ns, _) = nullspace(&rows, k);
    ns.into_iter()
        .map(|x| (0..d).map(|r| (0..k).map(|c| &x[c] * &space[c][r]).sum()).collect())
        .collect()
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

/// The rational eigensymbol `I_f^sign` of the curve, with content 1 on Manin symbols.
pub fn build_eigensymbol(space: &ManinSymbolSpace, e: &EllipticCurveData, sign: i32) -> Result<RationalModularSymbol> {
    assert_eq!(space.n, e.n);
    let d = space.dimension();
    let mut sub: Vec<Vec<BigRational>> = (0..d).map(|i| (0..d).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect();
    let star = space.operator_matrix(|v| space.star(v));
    sub = restrict_kernel(&sub, &star, &qi(sign as i64));
    for l in (2..200u64).filter(|&l| is_prime(l)) {
        if sub.len() <= 1 && l > 3 {
            break;
        }
        let t = space.operator_matrix(|v| space.hecke(v, l));
        sub = restrict_kernel(&sub, &t, &qi(e.trace_of_frobenius(l)));
    }
    if sub.len() != 1 {
        return Err(ModSymError::Multiplicity(sub.len()));
    }
    let values = scale_to_content_one(&space.from_coords(&sub[0]));
    Ok(RationalModularSymbol { n: space.n, sign, values })
}

/// `sum_{a mod m} psi(a) I{inf -> a/m}` for `psi = chi_delta`, `m = |delta|`.
pub fn birch_sum(sym: &RationalModularSymbol, p1: &P1List, delta: i64) -> Result<BigRational> {
    let m = delta.abs();
    if (m as u64).gcd(&sym.n) != 1 {
        return Err(ModSymError::BadModulus);
    }
    let parity = kronecker(delta, -1);
    if parity != sym.sign {
        return Err(ModSymError::SignMismatch);
    }
    Ok((0..m)
        .filter(|&a| kronecker(delta, a) != 0 || m == 1)
        .map(|a| qi(kronecker(delta, a) as i64) * sym.eval(p1, &Cusp::Inf, &Cusp::frac(a, m)))
        .sum())
}

/// `sum_sigma chi(sigma) I{r -> gamma_sigma r}`.
pub fn geodesic_period_sum(sym: &RationalModularSymbol, p1: &P1List, gammas: &[(Mat2, i32)], r: &Cusp) -> BigRational {
    gammas.iter().map(|(g, chi)| qi(*chi as i64) * sym.eval(p1, r, &r.act(g))).sum()
}

/// Number of cusps of `X0(N)`.
pub fn num_cusps(n: u64) -> u64 {
    (1..=n).filter(|d| n.is_multiple_of(*d)).map(|d| euler_phi(d.gcd(&(n / d)))).sum()
}

pub fn euler_phi(n: u64) -> u64 {
    prime_factors(n).into_iter().fold(n, |acc, p| acc / p * (p - 1))
}

/// Genus of `X0(N)`.
pub fn genus_x0(n: u64) -> u64 {
    let ps = prime_factors(n);
    let mu: u64 = ps.iter().fold(n, |acc, &p| acc / p * (p + 1));
    let nu2: i64 = if n.is_multiple_of(4) { 0 } else { ps.iter().map(|&p| if p == 2 { 1 } else { 1 + kronecker(-4, p as i64) as i64 }).product() };
    let nu3: i64 = if n.is_multiple_of(9) { 0 } else { ps.iter().map(|&p| if p == 3 { 1 } else { 1 + kronecker(-3, p as i64) as i64 }).product() };
    let c = num_cusps(n) as i64;
    let twelve_g = 12 + mu as i64 - 3 * nu2 - 4 * nu3 - 6 * c;
    (twelve_g / 12) as u64
}
