// SPDX-License-Identifier: Apache-2.0

//! Measure-valued modular symbols of level `N = M p`.
//!
//! A measure on `Z_p` is stored through its moments `m_j = int t^j`,
//! `0 <= j < M`, as residues modulo `p^M`. Only `m_j mod p^(M-j)` is
//! meaningful: that quotient (by the filtration `Fil^M`) is stable under
//! `Gamma0(N)` and under `U_p`, so every computation below is exact there.
//!
//! Matrices act on column vectors `(x, y)`; on the coordinate `t = x/y` of the
//! chart `Z_p x Z_p^*` they act by Moebius transformations, and the pushforward
//! satisfies `Phi{g r -> g s} = g_* Phi{r -> s}` for `g` in `Gamma0(N)`.
//!
//! The symbol `Phi` is the unique `U_p`-eigenlift of the rational eigensymbol,
//! found by iterating `a_p^{-1} U_p` from a random lift. On top of it,
//! [`FirstOrderLift`] solves for the total masses of the first-order
//! deformation `Phi_1(g) = int g(t) log(y) dmu` of the Hida family at weight 2.

use crate::modsym::{hecke_matrices, unimodular_path, Cusp, ManinSymbolSpace, P1List, RationalModularSymbol};
use crate::padic::{PadicScalar, ResidueRing};
use crate::quadforms::Mat2;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OmsError {
    #[error("{moments} moments need p^{moments} < 2^63 (max {max} for p = {p})")]
    TooManyMoments { p: u64, moments: usize, max: u32 },
    #[error("a_p = {0}: the lift needs an ordinary multiplicative prime")]
    NotOrdinary(i64),
    #[error("U_p iteration did not stabilise after {0} steps")]
    NoConvergence(usize),
    #[error("matrix does not preserve the chart: {0}")]
    BadMatrix(String),
    #[error("first-order system: {0}")]
    FirstOrder(String),
}

pub type Result<T> = std::result::Result<T, OmsError>;

/// Ring, moment count and a table of binomial coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentContext {
    pub ring: ResidueRing,
    pub moments: usize,
    binom: Vec<Vec<u64>>,
}

impl MomentContext {
    pub fn new(p: u64, moments: usize) -> Result<Self> {
        let max = ResidueRing::max_digits(p);
        if moments == 0 || moments as u32 > max {
            return Err(OmsError::TooManyMoments { p, moments, max });
        }
        let ring = ResidueRing::new(p, moments as u32);
        let n = 2 * moments + 1;
        let mut binom = vec![vec![0u64; n]; n];
        for i in 0..n {
            binom[i][0] = 1;
            for j in 1..=i {
                binom[i][j] = ring.add(binom[i - 1][j - 1], if j < i { binom[i - 1][j] } else { 0 });
            }
        }
        Ok(Self { ring, moments, binom })
    }

    pub fn p(&self) -> u64 {
        self.ring.p
    }

    /// Digits of `m_j` that are determined.
    pub fn known_digits(&self, j: usize) -> u32 {
        (self.moments - j) as u32
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.moments]
    }

    pub fn add_into(&self, acc: &mut [u64], x: &[u64]) {
        for (a, b) in acc.iter_mut().zip(x) {
            *a = self.ring.add(*a, *b);
        }
    }

    pub fn sub_into(&self, acc: &mut [u64], x: &[u64]) {
        for (a, b) in acc.iter_mut().zip(x) {
            *a = self.ring.sub(*a, *b);
        }
    }

    pub fn scale(&self, x: &[u64], k: u64) -> Vec<u64> {
        x.iter().map(|&v| self.ring.mul(v, k)).collect()
    }

    /// Equality in the quotient by `Fil^M`.
    pub fn agree(&self, x: &[u64], y: &[u64]) -> bool {
        (0..self.moments).all(|j| {
            let m = self.ring.p.pow(self.known_digits(j));
            x[j] % m == y[j] % m
        })
    }

    /// Smallest `k` with `x = y` modulo `Fil^k`, i.e. `v(x_j - y_j) >= k - j` for all `j`.
    pub fn agreement_level(&self, x: &[u64], y: &[u64]) -> u32 {
        (0..self.moments)
            .map(|j| self.ring.valuation(self.ring.sub(x[j], y[j])) + j as u32)
            .min()
            .unwrap_or(0)
            .min(self.moments as u32)
    }

    /// `g_* mu` for `g = (a b; c d)` with `p | c`, `p` not dividing `d`.
    ///
    /// `g = (1 b/d; 0 1) (det/d 0; c d)`: the second factor sends `t` to
    /// `det t / (d (c t + d))`, whose `j`-th power expands with
    /// `(1 + (c/d) t)^(-j)`; the first is a translation.
    pub fn act(&self, g: &Mat2, mu: &[u64]) -> Result<Vec<u64>> {
        let r = &self.ring;
        let (a, b, c, d) = (r.from_bigint(&g.a), r.from_bigint(&g.b), r.from_bigint(&g.c), r.from_bigint(&g.d));
        let det = r.sub(r.mul(a, d), r.mul(b, c));
        if c % r.p != 0 {
            return Err(OmsError::BadMatrix(format!("{g:?}: p does not divide c")));
        }
        let dinv = r.inv(d).ok_or_else(|| OmsError::BadMatrix(format!("{g:?}: d is not a unit")))?;
        Ok(self.act_residues(det, r.mul(b, dinv), r.mul(c, dinv), dinv, mu))
    }

    fn act_residues(&self, det: u64, bd: u64, cd: u64, dinv: u64, mu: &[u64]) -> Vec<u64> {
        let r = &self.ring;
        let m = self.moments;
        let mut cpow = vec![1u64; m];
        let mut bpow = vec![1u64; m];
        for i in 1..m {
            cpow[i] = r.mul(cpow[i - 1], r.neg(cd));
            bpow[i] = r.mul(bpow[i - 1], bd);
        }
        let scale = r.mul(det, r.mul(dinv, dinv));
        let mut lpart = vec![0u64; m];
        let mut sj = 1u64;
        for j in 0..m {
            let acc = if j == 0 {
                mu[0]
            } else {
                let mut acc = 0u64;
                for i in 0..(m - j) {
                    if cpow[i] == 0 {
                        break;
                    }
                    let t = r.mul(self.binom[j + i - 1][i], r.mul(cpow[i], mu[i + j]));
                    acc = r.add(acc, t);
                }
                acc
            };
            lpart[j] = r.mul(sj, acc);
            sj = r.mul(sj, scale);
        }
        let mut out = vec![0u64; m];
        for j in 0..m {
            let mut acc = 0u64;
            for k in 0..=j {
                acc = r.add(acc, r.mul(self.binom[j][k], r.mul(bpow[j - k], lpart[k])));
            }
            out[j] = acc;
        }
        out
    }

    /// `int log(c t + d) dmu` for `p | c`, `p` not dividing `d`, with the Iwasawa logarithm.
    ///
    /// Known to about `M - log_p(M)` digits.
    pub fn log_linear(&self, c: &BigInt, d: &BigInt, mu: &[u64]) -> u64 {
        let r = &self.ring;
        let dr = r.from_bigint(d);
        let mut acc = r.mul(log_unit(r, dr), mu[0]);
        if c.is_zero() {
            return acc;
        }
        let x = r.mul(r.from_bigint(c), r.inv(dr).expect("d is a unit"));
        let mut xk = 1u64;
        for (k, &mk) in mu.iter().enumerate().skip(1) {
            xk = r.mul(xk, x);
            if xk == 0 {
                break;
            }
            let t = r.mul(div_by_int(r, xk, k as u64), mk);
            acc = if k % 2 == 1 { r.add(acc, t) } else { r.sub(acc, t) };
        }
        acc
    }
}

/// `x / k` for a residue `x` with `v(x) >= v(k)`; the top `v(k)` digits are lost.
pub fn div_by_int(r: &ResidueRing, x: u64, k: u64) -> u64 {
    let mut k = k;
    let mut x = x;
    while k.is_multiple_of(r.p) {
        debug_assert!(x.is_multiple_of(r.p), "exact division by p");
        k /= r.p;
        x /= r.p;
    }
    r.mul(x, r.inv(k % r.m).unwrap())
}

/// `log(1 + w)` for `v(w) >= 1`.
pub fn log1p_residue(r: &ResidueRing, w: u64) -> u64 {
    debug_assert!(w.is_multiple_of(r.p));
    let mut acc = 0u64;
    let mut wk = 1u64;
    for k in 1..(4 * r.k as u64 + 8) {
        wk = r.mul(wk, w);
        if wk == 0 {
            break;
        }
        let t = div_by_int(r, wk, k);
        acc = if k % 2 == 1 { r.add(acc, t) } else { r.sub(acc, t) };
    }
    acc
}

/// Iwasawa logarithm of a unit residue: `log(u^(p-1)) / (p-1)`.
pub fn log_unit(r: &ResidueRing, u: u64) -> u64 {
    let w = r.sub(r.pow(u, r.p - 1), 1);
    r.mul(log1p_residue(r, w), r.inv((r.p - 1) % r.m).unwrap())
}

/// Manin-symbol data shared by the weight-2 lift and the first-order solver.
#[derive(Clone, Debug)]
pub struct CosetData {
    pub p1: P1List,
    pub lifts: Vec<Mat2>,
    inverses: Vec<Mat2>,
}

impl CosetData {
    pub fn new(p1: &P1List) -> Self {
        let lifts: Vec<Mat2> = (0..p1.len()).map(|i| p1.lift(i)).collect();
        let inverses = lifts.iter().map(|g| g.adj()).collect();
        Self { p1: p1.clone(), lifts, inverses }
    }

    pub fn len(&self) -> usize {
        self.lifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifts.is_empty()
    }

    /// For `h` in `SL2(Z)`: the coset `j` of `h` and `gamma = h g_j^{-1}` in `Gamma0(N)`.
    pub fn split(&self, h: &Mat2) -> (usize, Mat2) {
        let j = self.p1.index(&h.c, &h.d);
        (j, h.mul(&self.inverses[j]))
    }

    /// `{r -> s}` as a signed sum of unimodular paths.
    pub fn decompose(&self, r: &Cusp, s: &Cusp) -> Vec<(i32, Mat2)> {
        let mut out: Vec<(i32, Mat2)> = unimodular_path(s).into_iter().map(|g| (1, g)).collect();
        out.extend(unimodular_path(r).into_iter().map(|g| (-1, g)));
        out
    }

    /// Endpoints `(g 0, g inf)` of the `i`-th Manin symbol.
    pub fn endpoints(&self, i: usize) -> (Cusp, Cusp) {
        let g = &self.lifts[i];
        (Cusp::int(0).act(g), Cusp::Inf.act(g))
    }
}

/// Evaluate a moment-valued symbol given by its values on Manin symbols.
pub fn eval_moments(ctx: &MomentContext, cos: &CosetData, values: &[Vec<u64>], r: &Cusp, s: &Cusp) -> Vec<u64> {
    let mut acc = ctx.zero();
    for (sgn, h) in cos.decompose(r, s) {
        let (j, gamma) = cos.split(&h);
        let v = ctx.act(&gamma, &values[j]).expect("Gamma0(N) element");
        if sgn > 0 {
            ctx.add_into(&mut acc, &v);
        } else {
            ctx.sub_into(&mut acc, &v);
        }
    }
    acc
}

/// `(beta_a)_*` for `beta_a = (p a; 0 1)`, i.e. `t -> p t + a`.
pub fn beta(p: u64, a: i64) -> Mat2 {
    Mat2::from_i64(p as i64, a, 0, 1)
}

/// `beta_a^{-1}` acting on cusps: `r -> (r - a)/p`.
pub fn beta_inv(p: u64, a: i64) -> Mat2 {
    Mat2::from_i64(1, -a, 0, p as i64)
}

/// How the lift was certified.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftCertificate {
    pub seed: u64,
    pub iterations: usize,
    pub max_iterations: usize,
    /// `Fil^k` agreement of the last two iterates (equal to `M` on success).
    pub final_agreement: u32,
}

#[derive(Clone, Debug)]
pub struct OMSymbol {
    pub ctx: MomentContext,
    pub cosets: CosetData,
    pub classical: RationalModularSymbol,
    pub level: u64,
    pub ap: i64,
    pub values: Vec<Vec<u64>>,
    pub certificate: LiftCertificate,
}

/// `k * sum_a (beta_a)_* Phi{beta_a^{-1} r -> beta_a^{-1} s}`, optionally resetting the masses.
fn up_step(ctx: &MomentContext, cos: &CosetData, k: i64, values: &[Vec<u64>], pinned: Option<&[u64]>) -> Vec<Vec<u64>> {
    let p = ctx.p();
    let k = ctx.ring.from_i64(k);
    let idx: Vec<usize> = (0..cos.len()).collect();
    crate::par::map(&idx, |&i| {
        let (r, s) = cos.endpoints(i);
        let mut acc = ctx.zero();
        for a in 0..p as i64 {
            let bi = beta_inv(p, a);
            let v = eval_moments(ctx, cos, values, &r.act(&bi), &s.act(&bi));
            ctx.add_into(&mut acc, &ctx.act(&beta(p, a), &v).unwrap());
        }
        let mut out = ctx.scale(&acc, k);
        if let Some(m) = pinned {
            out[0] = m[i];
        }
        out
    })
}

impl OMSymbol {
    /// The `U_p`-eigenlift of `I_f` with `moments` moments, starting from a random lift.
    pub fn lift(space: &ManinSymbolSpace, classical: &RationalModularSymbol, p: u64, ap: i64, moments: usize, seed: u64) -> Result<Self> {
        if ap != 1 && ap != -1 {
            return Err(OmsError::NotOrdinary(ap));
        }
        let ctx = MomentContext::new(p, moments)?;
        let cos = CosetData::new(&space.p1);
        let pinned: Vec<u64> = classical.values.iter().map(|v| ctx.ring.from_rational(v).expect("p-integral symbol")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<Vec<u64>> = pinned
            .iter()
            .map(|&m0| {
                let mut v: Vec<u64> = (0..moments).map(|_| rng.gen_range(0..ctx.ring.m)).collect();
                v[0] = m0;
                v
            })
            .collect();
        let max_iterations = 2 * moments + 10;
        for it in 1..=max_iterations {
            // a_p = +-1 is its own inverse.
            let next = up_step(&ctx, &cos, ap, &values, Some(&pinned));
            let agreement = values.iter().zip(&next).map(|(x, y)| ctx.agreement_level(x, y)).min().unwrap_or(moments as u32);
            values = next;
            if agreement >= moments as u32 {
                return Ok(Self {
                    ctx,
                    cosets: cos,
                    classical: classical.clone(),
                    level: space.n,
                    ap,
                    values,
                    certificate: LiftCertificate { seed, iterations: it, max_iterations, final_agreement: agreement },
                });
            }
        }
        Err(OmsError::NoConvergence(max_iterations))
    }

    /// Rebuilds a lift from stored moments. Only the shape is checked; the
    /// consistency checks are what catch bad data.
    pub fn from_values(space: &ManinSymbolSpace, classical: &RationalModularSymbol, p: u64, ap: i64, values: Vec<Vec<u64>>, certificate: LiftCertificate) -> Result<Self> {
        let moments = values.first().map_or(0, |v| v.len());
        let ctx = MomentContext::new(p, moments)?;
        let cosets = CosetData::new(&space.p1);
        if values.len() != cosets.len() || values.iter().any(|v| v.len() != moments || v.iter().any(|&x| x >= ctx.ring.m)) {
            return Err(OmsError::BadMatrix("stored moments have the wrong shape".into()));
        }
        Ok(Self { ctx, cosets, classical: classical.clone(), level: space.n, ap, values, certificate })
    }

    pub fn p(&self) -> u64 {
        self.ctx.p()
    }

    pub fn moments(&self) -> usize {
        self.ctx.moments
    }

    /// Moments of `Phi{r -> s}` on `Z_p`.
    pub fn eval(&self, r: &Cusp, s: &Cusp) -> Vec<u64> {
        eval_moments(&self.ctx, &self.cosets, &self.values, r, s)
    }

    /// Total mass, which equals the classical `I_f{r -> s}` exactly.
    pub fn specialize_weight2(&self, r: &Cusp, s: &Cusp) -> num_rational::BigRational {
        self.classical.eval(&self.cosets.p1, r, s)
    }

    /// `Phi | U_p` on Manin symbols.
    pub fn up(&self) -> Vec<Vec<u64>> {
        up_step(&self.ctx, &self.cosets, 1, &self.values, None)
    }

    /// `Phi | T_l = sum_beta adj(beta)_* Phi{beta r -> beta s}` for `l` prime to `N`.
    pub fn hecke(&self, l: u64) -> Vec<Vec<u64>> {
        let mats = hecke_matrices(l, self.level);
        let idx: Vec<usize> = (0..self.cosets.len()).collect();
        crate::par::map(&idx, |&i| {
            let (r, s) = self.cosets.endpoints(i);
            let mut acc = self.ctx.zero();
            for b in &mats {
                let v = self.eval(&r.act(b), &s.act(b));
                self.ctx.add_into(&mut acc, &self.ctx.act(&b.adj(), &v).unwrap());
            }
            acc
        })
    }

    /// Largest `k` such that every Manin relation holds modulo `Fil^k`.
    pub fn relation_defect(&self) -> u32 {
        let cos = &self.cosets;
        let s = Mat2::from_i64(0, -1, 1, 0);
        let t = Mat2::from_i64(0, -1, 1, -1);
        let t2 = t.mul(&t);
        let term = |h: &Mat2| {
            let (j, g) = cos.split(h);
            self.ctx.act(&g, &self.values[j]).unwrap()
        };
        let zero = self.ctx.zero();
        let mut worst = self.moments() as u32;
        for i in 0..cos.len() {
            let g = &cos.lifts[i];
            let mut two = self.values[i].clone();
            self.ctx.add_into(&mut two, &term(&g.mul(&s)));
            let mut three = self.values[i].clone();
            self.ctx.add_into(&mut three, &term(&g.mul(&t)));
            self.ctx.add_into(&mut three, &term(&g.mul(&t2)));
            worst = worst.min(self.ctx.agreement_level(&two, &zero)).min(self.ctx.agreement_level(&three, &zero));
        }
        worst
    }
}

/// Total masses `Y{r -> s} = Phi_1{r -> s}(1)` of the first-order deformation,
/// together with the derivatives of the Hecke eigenvalues.
///
/// `Y` is determined up to adding a multiple of `I_f`; the free coordinate is
/// set to zero.
#[derive(Clone, Debug)]
pub struct FirstOrderLift {
    pub y: Vec<PadicScalar>,
    pub ap_prime: PadicScalar,
    pub hecke_primes: Vec<(u64, PadicScalar)>,
    /// Precision (absolute digits) of the solution.
    pub precision: i64,
    /// Smallest valuation of an inconsistent residual after elimination.
    pub residual_valuation: i64,
    pub free_columns: usize,
}

/// A path term `sum +-(y[j] + L)`, with the `y`-coefficients and the known part.
struct PathTerm {
    coeffs: Vec<(usize, i64)>,
    known: u64,
}

fn path_term(phi: &OMSymbol, r: &Cusp, s: &Cusp) -> PathTerm {
    let ctx = &phi.ctx;
    let mut coeffs = vec![];
    let mut known = 0u64;
    for (sgn, h) in phi.cosets.decompose(r, s) {
        let (j, g) = phi.cosets.split(&h);
        let l = ctx.log_linear(&g.c, &g.d, &phi.values[j]);
        coeffs.push((j, sgn as i64));
        known = if sgn > 0 { ctx.ring.add(known, l) } else { ctx.ring.sub(known, l) };
    }
    PathTerm { coeffs, known }
}

fn unimodular_term(phi: &OMSymbol, h: &Mat2) -> PathTerm {
    let (j, g) = phi.cosets.split(h);
    PathTerm { coeffs: vec![(j, 1)], known: phi.ctx.log_linear(&g.c, &g.d, &phi.values[j]) }
}

impl FirstOrderLift {
    /// Solve the twisted Manin relations, the sign condition and the first-order
    /// `U_p` and `T_l` eigen-equations for the masses `y`.
    pub fn solve(phi: &OMSymbol, e_traces: &[(u64, i64)]) -> Result<Self> {
        let ctx = &phi.ctx;
        let r = &ctx.ring;
        let n = phi.cosets.len();
        let ncols = n + 1 + e_traces.len();
        let sign = phi.classical.sign as i64;
        let mut rows: Vec<(Vec<u64>, u64)> = vec![];
        let push = |rows: &mut Vec<(Vec<u64>, u64)>, terms: &[(&PathTerm, i64)], extra: &[(usize, i64)], rhs_extra: u64| {
            let mut row = vec![0u64; ncols];
            let mut known = 0u64;
            for (t, k) in terms {
                for &(j, c) in &t.coeffs {
                    row[j] = r.add(row[j], r.from_i64(c * k));
                }
                known = r.add(known, r.mul(t.known, r.from_i64(*k)));
            }
            for &(j, c) in extra {
                row[j] = r.add(row[j], r.from_i64(c));
            }
            rows.push((row, r.sub(r.neg(known), rhs_extra)));
        };
        let s = Mat2::from_i64(0, -1, 1, 0);
        let t = Mat2::from_i64(0, -1, 1, -1);
        let t2 = t.mul(&t);
        let eta = |g: &Mat2| Mat2::new(g.a.clone(), -&g.b, -&g.c, g.d.clone());
        let i_f: Vec<i64> = phi.classical.values.iter().map(|v| v.to_integer().to_i64().expect("small symbol")).collect();
        for i in 0..n {
            let g = &phi.cosets.lifts[i];
            let own = PathTerm { coeffs: vec![(i, 1)], known: 0 };
            push(&mut rows, &[(&own, 1), (&unimodular_term(phi, &g.mul(&s)), 1)], &[], 0);
            push(&mut rows, &[(&own, 1), (&unimodular_term(phi, &g.mul(&t)), 1), (&unimodular_term(phi, &g.mul(&t2)), 1)], &[], 0);
            push(&mut rows, &[(&unimodular_term(phi, &eta(g)), 1), (&own, -sign)], &[], 0);
        }
        let p = phi.p();
        let idx: Vec<usize> = (0..n).collect();
        let up_terms: Vec<Vec<PathTerm>> = crate::par::map(&idx, |&i| {
            let (a0, a1) = phi.cosets.endpoints(i);
            (0..p as i64).map(|a| path_term(phi, &a0.act(&beta_inv(p, a)), &a1.act(&beta_inv(p, a)))).collect()
        });
        for (i, terms) in up_terms.iter().enumerate() {
            let own = PathTerm { coeffs: vec![(i, 1)], known: 0 };
            let mut tt: Vec<(&PathTerm, i64)> = terms.iter().map(|t| (t, 1)).collect();
            tt.push((&own, -phi.ap));
            push(&mut rows, &tt, &[(n, -i_f[i])], 0);
        }
        for (k, &(l, al)) in e_traces.iter().enumerate() {
            let mats = hecke_matrices(l, phi.level);
            let logl = log_unit(r, l % r.m);
            let tl_terms: Vec<(Vec<PathTerm>, u64)> = crate::par::map(&idx, |&i| {
                let (a0, a1) = phi.cosets.endpoints(i);
                let terms = mats.iter().map(|b| path_term(phi, &a0.act(b), &a1.act(b))).collect();
                let d = Mat2::from_i64(l as i64, 0, 0, 1);
                let mass = phi.classical.eval(&phi.cosets.p1, &a0.act(&d), &a1.act(&d));
                (terms, r.mul(logl, r.from_rational(&mass).unwrap()))
            });
            for (i, (terms, extra)) in tl_terms.iter().enumerate() {
                let own = PathTerm { coeffs: vec![(i, 1)], known: 0 };
                let mut tt: Vec<(&PathTerm, i64)> = terms.iter().map(|t| (t, 1)).collect();
                tt.push((&own, -al));
                push(&mut rows, &tt, &[(n + 1 + k, -i_f[i])], *extra);
            }
        }
        let sol = padic_solve(r, rows, ncols);
        let y_free = sol.free.iter().filter(|&&c| c < n).count();
        if sol.free.iter().any(|&c| c >= n) {
            return Err(OmsError::FirstOrder("eigenvalue derivative not determined".into()));
        }
        // Precision of the known parts: the log series divides by k < M.
        let mut log_loss = 0i64;
        while (p as i64).pow(log_loss as u32 + 1) < ctx.moments as i64 {
            log_loss += 1;
        }
        let precision = (r.k as i64 - log_loss - sol.loss as i64).max(0);
        let x: Vec<PadicScalar> = sol.x.iter().map(|v| v.with_precision(precision)).collect();
        Ok(Self {
            y: x[..n].to_vec(),
            ap_prime: x[n].clone(),
            hecke_primes: e_traces.iter().enumerate().map(|(k, &(l, _))| (l, x[n + 1 + k].clone())).collect(),
            precision,
            residual_valuation: sol.residual_valuation,
            free_columns: y_free,
        })
    }

    /// `Y{r -> s}`.
    pub fn mass(&self, phi: &OMSymbol, r: &Cusp, s: &Cusp) -> PadicScalar {
        let t = path_term(phi, r, s);
        let mut acc = phi.ctx.ring.to_padic(t.known, self.precision);
        for (j, c) in t.coeffs {
            let y = &self.y[j];
            acc = if c > 0 { acc.add(y) } else { acc.sub(y) };
        }
        acc
    }
}

struct Solution {
    x: Vec<PadicScalar>,
    free: Vec<usize>,
    loss: u32,
    residual_valuation: i64,
}

/// Gaussian elimination over `Z/p^k` with minimal-valuation pivots.
///
/// Free columns are set to zero. `loss` bounds the digits lost to pivots.
fn padic_solve(r: &ResidueRing, rows: Vec<(Vec<u64>, u64)>, ncols: usize) -> Solution {
    let p = r.p;
    let mut rows = rows;
    let mut used = vec![false; rows.len()];
    let mut pivots: Vec<(usize, usize, u32)> = vec![];
    let mut loss = 0u32;
    let mut free = vec![];
    for col in 0..ncols {
        let cut = r.k.saturating_sub(loss);
        let best = (0..rows.len())
            .filter(|&i| !used[i])
            .map(|i| (r.valuation(rows[i].0[col]), i))
            .filter(|&(v, _)| v < cut)
            .min();
        let Some((v, pi)) = best else {
            free.push(col);
            continue;
        };
        used[pi] = true;
        let pv = p.pow(v);
        let u = rows[pi].0[col] / pv;
        let uinv = r.inv(u % r.m).unwrap();
        let (prow, prhs) = {
            let row = &mut rows[pi];
            for x in row.0.iter_mut() {
                *x = r.mul(*x, uinv);
            }
            row.1 = r.mul(row.1, uinv);
            row.0[col] = pv;
            (row.0.clone(), row.1)
        };
        for (i, row) in rows.iter_mut().enumerate() {
            if used[i] || row.0[col] == 0 {
                continue;
            }
            let f = row.0[col] / pv;
            for (x, y) in row.0.iter_mut().zip(&prow).skip(col) {
                *x = r.sub(*x, r.mul(f, *y));
            }
            row.0[col] = 0;
            row.1 = r.sub(row.1, r.mul(f, prhs));
        }
        loss += v;
        pivots.push((col, pi, v));
    }
    let prec = (r.k - loss.min(r.k)) as i64;
    let residual_valuation = (0..rows.len())
        .filter(|&i| !used[i])
        .map(|i| r.valuation(rows[i].1) as i64)
        .min()
        .unwrap_or(r.k as i64);
    let mut x: Vec<PadicScalar> = vec![PadicScalar::zero(p, prec); ncols];
    for &(col, pi, v) in pivots.iter().rev() {
        let row = &rows[pi];
        let mut acc = r.to_padic(row.1, prec);
        for (k, &a) in row.0.iter().enumerate().skip(col + 1) {
            if a != 0 {
                acc = acc.sub(&r.to_padic(a, prec).mul(&x[k]));
            }
        }
        let pv = PadicScalar::from_parts(p, v as i64, &BigInt::one(), prec);
        x[col] = acc.div(&pv).unwrap().with_precision(prec - v as i64);
    }
    Solution { x, free, loss, residual_valuation }
}

/// `v_p` of a nonzero integer.
pub fn vp_big(p: u64, x: &BigInt) -> u32 {
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut y = x.abs();
    while !y.is_zero() && y.is_multiple_of(&pb) {
        y /= &pb;
        v += 1;
    }
    v
}
