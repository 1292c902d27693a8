// SPDX-License-Identifier: Apache-2.0

//! Logarithms of Darmon points through `p`-adic integration.
//!
//! The measure `mu{r -> s}` on `X = (Z_p^2)'` is recovered from the stored
//! chart `Y = Z_p x Z_p^*`:
//!
//! * on `Y`, the weight-0 part is `Phi{r -> s}` in `t = x/y` and the
//!   `log y` part is the first-order lift;
//! * the rest of `X` (`x` a unit, `p | y`) is moved into the ball
//!   `t = 1/M mod p` of `Y` by `g0 = (1 0; M 1)`, which lies in `Gamma0(M)`.
//!
//! With `tau` a root of a Heegner form with `p` not dividing `A`, `x - tau y`
//! is a unit on `X`, so `log_q` is the Iwasawa logarithm there and
//!
//! `int_X log(x - tau y) = int_{Z_p} log(t - tau) dPhi{r->s} + Y{r->s}
//!    + int_{1/M + pZ_p} log((1 + M tau) t - tau) dPhi{g0 r -> g0 s} + Phi_1{g0 r -> g0 s}(1/M + pZ_p)`.
//!
//! On a ball `a + pZ_p` with `a - tau` a unit the logarithm is a convergent
//! power series in the local coordinate, so depth one suffices.

use crate::curve::{complex_l_derivative, complex_l_value, formal_log, naive_point_search, tate_mu, CurveError, EllipticCurveData, GlobalPoint};
use crate::genus::{frobenius_class, RingClassCharacter};
use crate::modsym::{build_eigensymbol, Cusp, ManinSymbolSpace, ModSymError};
use crate::oms::{beta_inv, FirstOrderLift, OMSymbol, OmsError};
use crate::padic::{iwasawa_log, ppow, rational_reconstruct, PadicError, PadicScalar, QuadExtScalar};
use crate::quadforms::{heegner_delta, heegner_representatives, prime_factors, stabilizer_gamma, Bqf, HeegnerForm, Mat2, NarrowClassGroup, QuadError};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DarmonError {
    #[error(transparent)]
    Oms(#[from] OmsError),
    #[error(transparent)]
    ModSym(#[from] ModSymError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("ball depth {depth} exceeds the usable maximum {max}")]
    Depth { depth: u32, max: u32 },
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, DarmonError>;

fn big(x: i64) -> BigInt {
    BigInt::from(x)
}

/// The lifted symbol with its first-order data, for one curve and sign.
#[derive(Clone, Debug)]
pub struct DarmonContext {
    pub e: EllipticCurveData,
    pub phi: OMSymbol,
    pub first: FirstOrderLift,
}

impl DarmonContext {
    pub fn new(e: &EllipticCurveData, sign: i32, moments: usize, seed: u64) -> Result<Self> {
        let space = ManinSymbolSpace::new(e.n);
        let sym = build_eigensymbol(&space, e, sign)?;
        let phi = OMSymbol::lift(&space, &sym, e.p, e.ap(), moments, seed)?;
        Self::from_symbol(e, phi)
    }

    /// Attach the first-order data to an already lifted symbol.
    pub fn from_symbol(e: &EllipticCurveData, phi: OMSymbol) -> Result<Self> {
        let ells: Vec<(u64, i64)> = (2u64..)
            .filter(|&l| crate::modsym::is_prime(l) && !e.n.is_multiple_of(l))
            .take(2)
            .map(|l| (l, e.trace_of_frobenius(l)))
            .collect();
        let first = FirstOrderLift::solve(&phi, &ells)?;
        if first.free_columns != 1 {
            return Err(DarmonError::Config(format!("first-order system has {} free directions", first.free_columns)));
        }
        if first.residual_valuation < first.precision {
            return Err(DarmonError::Config(format!("first-order system inconsistent at p^{}", first.residual_valuation)));
        }
        Ok(Self { e: e.clone(), phi, first })
    }

    pub fn p(&self) -> u64 {
        self.e.p
    }

    pub fn level_m(&self) -> u64 {
        self.e.m
    }

    pub fn sign(&self) -> i32 {
        self.phi.classical.sign
    }

    /// Absolute digits to which log integrals are determined.
    pub fn precision(&self) -> i64 {
        self.first.precision
    }

    /// `a0 = 1/M mod p`, the centre of the transported ball.
    pub fn a0(&self) -> i64 {
        let p = self.p() as i64;
        let m = (self.level_m() as i64).rem_euclid(p);
        (1..p).find(|x| (x * m) % p == 1).unwrap_or(1)
    }

    pub fn gamma0(&self) -> Mat2 {
        Mat2::from_i64(1, 0, self.level_m() as i64, 1)
    }

    fn moment(&self, mu: &[u64], j: usize) -> PadicScalar {
        let ctx = &self.phi.ctx;
        ctx.ring.to_padic(mu[j], ctx.known_digits(j) as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// `center + p^depth Z_p` in the `y`-unit chart.
    Ball { center: i64, depth: u32 },
    /// `x` a unit, `p | y`; stored as the ball `a0 + pZ_p` of the path moved by `g0`.
    XUnit,
}

#[derive(Clone, Debug)]
pub struct ChartMoments {
    pub r: Cusp,
    pub s: Cusp,
    pub chart: Chart,
    /// Moments in the local coordinate `u`, `t = center + p^depth u`.
    pub moments: Vec<u64>,
}

/// `beta^{-1}` for the ball `center + p^depth Z_p`.
fn ball_inverse(p: u64, center: i64, depth: u32) -> Mat2 {
    Mat2::new(BigInt::one(), big(-center), BigInt::zero(), ppow(p, depth as i64))
}

/// Moments of `mu{r -> s}` restricted to a chart piece.
///
/// A depth-`n` ball is `a_p^{-n} (beta)_* Phi{beta^{-1} r -> beta^{-1} s}` with `beta = (p^n a; 0 1)`.
pub fn ball_moments(ctx: &DarmonContext, r: &Cusp, s: &Cusp, chart: &Chart) -> Result<ChartMoments> {
    match chart {
        Chart::Ball { center, depth } => {
            let max = ctx.phi.moments() as u32 - 1;
            if *depth == 0 || *depth > max {
                return Err(DarmonError::Depth { depth: *depth, max });
            }
            let bi = ball_inverse(ctx.p(), *center, *depth);
            let v = ctx.phi.eval(&r.act(&bi), &s.act(&bi));
            let k = ctx.phi.ctx.ring.from_i64(ctx.phi.ap.pow(*depth));
            Ok(ChartMoments { r: r.clone(), s: s.clone(), chart: chart.clone(), moments: ctx.phi.ctx.scale(&v, k) })
        }
        Chart::XUnit => {
            let g0 = ctx.gamma0();
            let inner = ball_moments(ctx, &r.act(&g0), &s.act(&g0), &Chart::Ball { center: ctx.a0(), depth: 1 })?;
            Ok(ChartMoments { r: r.clone(), s: s.clone(), chart: Chart::XUnit, moments: inner.moments })
        }
    }
}

/// Moments in the chart coordinate `t` (for `XUnit`, in `t' = x/(M x + y)`).
pub fn ball_t_moments(ctx: &DarmonContext, cm: &ChartMoments) -> Vec<u64> {
    let (center, depth) = match cm.chart {
        Chart::Ball { center, depth } => (center, depth),
        Chart::XUnit => (ctx.a0(), 1),
    };
    let beta = Mat2::new(ppow(ctx.p(), depth as i64), big(center), BigInt::zero(), BigInt::one());
    ctx.phi.ctx.act(&beta, &cm.moments).expect("upper triangular")
}

/// `int log(z0 + p^n u) dnu(u)` for a unit `z0`.
fn log_linear_on_ball(ctx: &DarmonContext, mu: &[u64], z0: &QuadExtScalar, depth: u32) -> Result<QuadExtScalar> {
    let p = ctx.p();
    let prec = ctx.phi.moments() as i64 + 2;
    let mut acc = iwasawa_log(z0)?.scale(&ctx.moment(mu, 0));
    let w = z0.inverse()?.shift(depth as i64);
    let mut wj = QuadExtScalar::one(p, prec);
    for j in 1..mu.len() {
        wj = wj.mul(&w).with_precision(prec);
        let term = wj.scale(&ctx.moment(mu, j)).scale(&PadicScalar::one(p, prec).div_int(j as i64));
        acc = if j % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
    }
    Ok(acc)
}

fn to_qp(p: u64, x: &BigRational, prec: i64) -> PadicScalar {
    PadicScalar::from_rational(p, x, prec)
}

/// `int log(x - tau y)` over the weight-0 part: `Z_p` and the transported ball.
pub fn kernel_weight0(ctx: &DarmonContext, tau: &QuadExtScalar, r: &Cusp, s: &Cusp) -> Result<QuadExtScalar> {
    let p = ctx.p();
    let prec = ctx.phi.moments() as i64 + 2;
    let mut acc = QuadExtScalar::zero(p, prec);
    for a in 0..p as i64 {
        let cm = ball_moments(ctx, r, s, &Chart::Ball { center: a, depth: 1 })?;
        let z0 = QuadExtScalar::from_int(p, a, prec).sub(tau);
        acc = acc.add(&log_linear_on_ball(ctx, &cm.moments, &z0, 1)?);
    }
    let (one_m_tau, tau2) = transported_root(ctx, tau)?;
    let cm = ball_moments(ctx, r, s, &Chart::XUnit)?;
    let z0 = QuadExtScalar::from_int(p, ctx.a0(), prec).sub(&tau2);
    acc = acc.add(&iwasawa_log(&one_m_tau)?.scale(&ctx.moment(&cm.moments, 0)));
    acc = acc.add(&log_linear_on_ball(ctx, &cm.moments, &z0, 1)?);
    Ok(acc)
}

/// `(1 + M tau, tau / (1 + M tau))`.
fn transported_root(ctx: &DarmonContext, tau: &QuadExtScalar) -> Result<(QuadExtScalar, QuadExtScalar)> {
    let p = ctx.p();
    let prec = tau.precision();
    let one_m_tau = QuadExtScalar::one(p, prec).add(&tau.scale(&PadicScalar::from_int(p, ctx.level_m() as i64, prec)));
    let tau2 = tau.div(&one_m_tau)?;
    Ok((one_m_tau, tau2))
}

/// `Phi_1{r -> s}(a + pZ_p) = a_p^{-1} Y{beta_a^{-1} path} - a_p' a_p^{-2} I_f{beta_a^{-1} path}`.
pub fn first_order_ball(ctx: &DarmonContext, r: &Cusp, s: &Cusp, a: i64) -> PadicScalar {
    let p = ctx.p();
    let bi = beta_inv(p, a);
    let (r1, s1) = (r.act(&bi), s.act(&bi));
    let y = ctx.first.mass(&ctx.phi, &r1, &s1);
    let mass = ctx.phi.specialize_weight2(&r1, &s1);
    let ap = PadicScalar::from_int(p, ctx.phi.ap, y.precision());
    y.mul(&ap).sub(&ctx.first.ap_prime.mul(&to_qp(p, &mass, y.precision())))
}

/// `int_X log(y)` in the coordinates of each chart: `Y{r->s} + Phi_1{g0 r -> g0 s}(a0 + pZ_p)`.
pub fn log_y_part(ctx: &DarmonContext, r: &Cusp, s: &Cusp) -> PadicScalar {
    let g0 = ctx.gamma0();
    let whole = ctx.first.mass(&ctx.phi, r, s);
    whole.add(&first_order_ball(ctx, &r.act(&g0), &s.act(&g0), ctx.a0()))
}

/// `int_{(Z_p^2)'} log_q(x - tau y) dmu{r -> s}`.
pub fn integrate_log_kernel(ctx: &DarmonContext, tau: &QuadExtScalar, r: &Cusp, s: &Cusp) -> Result<QuadExtScalar> {
    check_tau(ctx, tau)?;
    let w0 = kernel_weight0(ctx, tau, r, s)?;
    let y = log_y_part(ctx, r, s);
    Ok(w0.add(&QuadExtScalar::from_padic(y)).with_precision(ctx.precision()))
}

fn check_tau(ctx: &DarmonContext, tau: &QuadExtScalar) -> Result<()> {
    // tau integral with reduction outside F_p: its omega-part is a unit.
    if tau.a.val_or_prec() < 0 || tau.b.val_or_prec() != 0 {
        return Err(DarmonError::Config(format!("tau must reduce outside F_{}", ctx.p())));
    }
    Ok(())
}

/// The weight-0 kernel by Riemann products over depth-`n` balls, from classical masses only.
pub fn riemann_weight0(ctx: &DarmonContext, tau: &QuadExtScalar, r: &Cusp, s: &Cusp, depth: u32) -> Result<QuadExtScalar> {
    let p = ctx.p();
    let prec = ctx.phi.moments() as i64 + 2;
    let pn = p.pow(depth) as i64;
    let sign = ctx.phi.ap.pow(depth);
    let mass = |r: &Cusp, s: &Cusp, a: i64| {
        let bi = ball_inverse(p, a, depth);
        ctx.phi.specialize_weight2(&r.act(&bi), &s.act(&bi)) * BigRational::from_integer(big(sign))
    };
    let (one_m_tau, tau2) = transported_root(ctx, tau)?;
    let lc = iwasawa_log(&one_m_tau)?;
    let centers: Vec<i64> = (0..pn).collect();
    let parts: Vec<Result<QuadExtScalar>> = crate::par::map(&centers, |&a| {
        let mut acc = QuadExtScalar::zero(p, prec);
        let m = mass(r, s, a);
        if !m.is_zero() {
            let z = QuadExtScalar::from_int(p, a, prec).sub(tau);
            acc = acc.add(&iwasawa_log(&z)?.scale(&to_qp(p, &m, prec)));
        }
        if a % p as i64 == ctx.a0() {
            let g0 = ctx.gamma0();
            let m = mass(&r.act(&g0), &s.act(&g0), a);
            if !m.is_zero() {
                let z = QuadExtScalar::from_int(p, a, prec).sub(&tau2);
                acc = acc.add(&iwasawa_log(&z)?.add(&lc).scale(&to_qp(p, &m, prec)));
            }
        }
        Ok(acc)
    });
    let mut acc = QuadExtScalar::zero(p, prec);
    for x in parts {
        acc = acc.add(&x?);
    }
    Ok(acc)
}

/// A Heegner representative prepared for integration.
#[derive(Clone, Debug)]
pub struct HeegnerClass {
    pub class: usize,
    pub form: HeegnerForm,
    pub gamma: Mat2,
    pub tau: QuadExtScalar,
}

/// Move `Q` inside its `Gamma0(M)`-class so that `p` does not divide `A`.
pub fn coprime_to_p(q: &HeegnerForm, p: u64) -> HeegnerForm {
    let pb = big(p as i64);
    for k in 0..=p as i64 {
        let g = Mat2::from_i64(1, 0, q.level as i64 * k, 1);
        let f = q.form.act(&g);
        if !f.a.is_multiple_of(&pb) {
            return HeegnerForm { form: f, level: q.level, delta: q.delta };
        }
    }
    unreachable!("an anisotropic form mod p takes unit values")
}

pub fn prepare_class(g: &NarrowClassGroup, q: &HeegnerForm, p: u64, prec: i64) -> Result<HeegnerClass> {
    let form = coprime_to_p(q, p);
    let stab = stabilizer_gamma(&form, &g.unit)?;
    let sqrt_d = QuadExtScalar::sqrt_of_int(p, &big(g.d), prec + 4).ok_or_else(|| DarmonError::Config("p must be inert in F".into()))?;
    let tau = stab.tau_padic(p, prec, &sqrt_d, g.c).with_precision(prec);
    Ok(HeegnerClass { class: g.class_of(&form.form), form, gamma: stab.gamma, tau })
}

/// One prepared representative per class, in class order.
pub fn prepare_heegner(g: &NarrowClassGroup, m: u64, p: u64, prec: i64) -> Result<Vec<HeegnerClass>> {
    let delta = heegner_delta(g.d, g.c, m)?;
    let reps = heegner_representatives(g, m, delta)?;
    let mut out: Vec<HeegnerClass> = reps.iter().map(|q| prepare_class(g, q, p, prec)).collect::<Result<_>>()?;
    out.sort_by_key(|h| h.class);
    Ok(out)
}

/// `log_q(J_tau) = int log(x - tau y) dmu{r -> gamma_tau r}`.
pub fn darmon_log(ctx: &DarmonContext, hc: &HeegnerClass, r: &Cusp) -> Result<QuadExtScalar> {
    integrate_log_kernel(ctx, &hc.tau, r, &r.act(&hc.gamma))
}

/// `darmon_log` for every class with base point `infinity`, in parallel.
pub fn class_logs(ctx: &DarmonContext, classes: &[HeegnerClass]) -> Result<Vec<QuadExtScalar>> {
    crate::par::map(classes, |hc| darmon_log(ctx, hc, &Cusp::Inf)).into_iter().collect()
}

/// `sum_sigma chi(sigma) log J_{Q^sigma}` with the principal class as base representative.
pub fn p_chi_log(classes: &[HeegnerClass], logs: &[QuadExtScalar], chi: &RingClassCharacter) -> QuadExtScalar {
    let mut acc = logs[0].mul(&QuadExtScalar::zero(logs[0].p(), logs[0].precision()));
    for (hc, l) in classes.iter().zip(logs) {
        acc = if chi.eval(hc.class) == 1 { acc.add(l) } else { acc.sub(l) };
    }
    acc
}

/// `chi_{Delta_1}(-M)`, computed from `chi` itself: the sign of `chi` times
/// `chi(Frob_l)` for the split primes `l | M`.
pub fn chi_delta1_minus_m(g: &NarrowClassGroup, chi: &RingClassCharacter, m: u64) -> i32 {
    let mut v = chi.sign;
    for l in prime_factors(m) {
        let k = frobenius_class(g, l).expect("primes dividing M split");
        v *= chi.eval(k);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealConjugationReport {
    /// Classes `s` with `Frob(J_k) = -w_M J_{s k^{-1}}` for every class `k`.
    pub candidates: Vec<usize>,
    /// The candidate, when there is exactly one.
    pub sigma_tau: Option<usize>,
    /// Per character and candidate: `(chi(s), chi_{Delta_1}(-M))`, skipping
    /// characters whose component of `J` vanishes (they do not see `s`).
    pub chi_checks: Vec<(i32, i32)>,
    pub digits: i64,
    pub pass: bool,
}

/// Frobenius reverses the class group (`Frob sigma Frob = sigma^{-1}`), so the
/// identity pairs the class `k` with `sigma_tau k^{-1}`.
///
/// `logs` holds `(sign, log J_{Q_i})` per sign component; a candidate must
/// satisfy the identity for every component at once. Each character is
/// checked against the component of its own sign.
pub fn real_conjugation_check(
    g: &NarrowClassGroup,
    classes: &[HeegnerClass],
    logs: &[(i32, Vec<QuadExtScalar>)],
    chars: &[RingClassCharacter],
    w_m: i32,
    m: u64,
    digits: i64,
) -> RealConjugationReport {
    let by_class = |k: usize| classes.iter().position(|h| h.class == k).unwrap();
    let candidates: Vec<usize> = (0..g.order())
        .filter(|&s| {
            logs.iter().all(|(_, comp)| {
                classes.iter().zip(comp).all(|(hc, l)| {
                    let other = &comp[by_class(g.compose(s, g.inverse(hc.class)))];
                    let rhs = if w_m == 1 { other.neg() } else { other.clone() };
                    l.frobenius().eq_within(&rhs, digits)
                })
            })
        })
        .collect();
    let sigma_tau = if candidates.len() == 1 { Some(candidates[0]) } else { None };
    let mut chi_checks = vec![];
    for chi in chars {
        let Some((_, comp)) = logs.iter().find(|(sg, _)| *sg == chi.sign) else { continue };
        if p_chi_log(classes, comp, chi).with_precision(digits).is_zero() {
            continue;
        }
        let want = chi_delta1_minus_m(g, chi, m);
        for &s in &candidates {
            chi_checks.push((chi.eval(s), want));
        }
    }
    let pass = !candidates.is_empty() && chi_checks.iter().all(|(a, b)| a == b);
    RealConjugationReport { candidates, sigma_tau, chi_checks, digits, pass }
}

/// `log Q(a + p u, 1) - log Q(a, 1)` as a power series in `u`, truncated at `len` terms.
fn log_quadratic_series(p: u64, q: &Bqf, a: i64, len: usize, prec: i64) -> Result<(PadicScalar, Vec<PadicScalar>)> {
    let qa = q.eval(&big(a), &BigInt::one());
    let qa_p = PadicScalar::from_bigint(p, &qa, prec);
    let inv = qa_p.inverse()?;
    let pb = PadicScalar::from_int(p, p as i64, prec);
    let dq = &big(2) * &q.a * big(a) + &q.b;
    // z(u) = alpha u + beta u^2.
    let alpha = PadicScalar::from_bigint(p, &dq, prec).mul(&pb).mul(&inv);
    let beta = PadicScalar::from_bigint(p, &q.a, prec).mul(&pb).mul(&pb).mul(&inv);
    let zero = PadicScalar::zero(p, prec);
    let mut z = vec![zero.clone(); len];
    if len > 1 {
        z[1] = alpha;
    }
    if len > 2 {
        z[2] = beta;
    }
    let mut zk = vec![zero.clone(); len];
    zk[0] = PadicScalar::one(p, prec);
    let mut out = vec![zero.clone(); len];
    for k in 1..len {
        let mut next = vec![zero.clone(); len];
        for i in 0..len {
            if zk[i].is_zero() {
                continue;
            }
            for j in 1..3.min(len - i) {
                next[i + j] = next[i + j].add(&zk[i].mul(&z[j]));
            }
        }
        zk = next;
        let kk = PadicScalar::one(p, prec).div_int(k as i64);
        for j in 0..len {
            let t = zk[j].mul(&kk);
            out[j] = if k % 2 == 1 { out[j].add(&t) } else { out[j].sub(&t) };
        }
    }
    Ok((iwasawa_log_qp_unit(&qa_p)?, out))
}

fn iwasawa_log_qp_unit(x: &PadicScalar) -> Result<PadicScalar> {
    Ok(crate::padic::iwasawa_log_qp(x)?)
}

/// `int_X log Q(x, y) dmu{r -> s}` with its own kernel: `log Q(t, 1) + 2 log y` on each chart.
pub fn integrate_log_form(ctx: &DarmonContext, q: &Bqf, r: &Cusp, s: &Cusp) -> Result<PadicScalar> {
    let p = ctx.p();
    let prec = ctx.phi.moments() as i64 + 2;
    let len = ctx.phi.moments();
    let chart_integral = |q: &Bqf, mu: &[u64], a: i64| -> Result<PadicScalar> {
        let (c0, series) = log_quadratic_series(p, q, a, len, prec)?;
        let mut acc = c0.mul(&ctx.moment(mu, 0));
        for (j, c) in series.iter().enumerate().skip(1) {
            acc = acc.add(&c.mul(&ctx.moment(mu, j)));
        }
        Ok(acc)
    };
    let mut acc = PadicScalar::zero(p, prec);
    for a in 0..p as i64 {
        let cm = ball_moments(ctx, r, s, &Chart::Ball { center: a, depth: 1 })?;
        acc = acc.add(&chart_integral(q, &cm.moments, a)?);
    }
    let g0 = ctx.gamma0();
    let q2 = q.act(&g0.adj());
    let cm = ball_moments(ctx, r, s, &Chart::XUnit)?;
    acc = acc.add(&chart_integral(&q2, &cm.moments, ctx.a0())?);
    let two = PadicScalar::from_int(p, 2, prec);
    acc = acc.add(&log_y_part(ctx, r, s).mul(&two));
    Ok(acc.with_precision(ctx.precision()))
}

/// `sum_sigma chi(sigma) 1/2 int log<Q_sigma> dmu{r -> gamma_sigma r}`.
pub fn kappa_derivative_sqrt(ctx: &DarmonContext, classes: &[HeegnerClass], chi: &RingClassCharacter) -> Result<PadicScalar> {
    let p = ctx.p();
    let parts: Vec<Result<PadicScalar>> = crate::par::map(classes, |hc| {
        let r = Cusp::Inf;
        integrate_log_form(ctx, &hc.form.form, &r, &r.act(&hc.gamma))
    });
    let mut acc = PadicScalar::zero(p, ctx.precision());
    for (hc, v) in classes.iter().zip(parts) {
        let v = v?;
        acc = if chi.eval(hc.class) == 1 { acc.add(&v) } else { acc.sub(&v) };
    }
    Ok(acc.div_int(2))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaReport {
    pub prefactor: i32,
    pub agreement_digits: i64,
    pub digits: i64,
    pub pass: bool,
}

/// `kappa_derivative_sqrt(chi) = 1/2 (1 - chi_{Delta_1}(-M) w_M) log_E(P_chi)`.
pub fn kappa_check(ctx: &DarmonContext, g: &NarrowClassGroup, classes: &[HeegnerClass], logs: &[QuadExtScalar], chi: &RingClassCharacter, digits: i64) -> Result<KappaReport> {
    let kd = kappa_derivative_sqrt(ctx, classes, chi)?;
    let pc = p_chi_log(classes, logs, chi);
    let w_m = ctx.e.w_m();
    let prefactor = (1 - chi_delta1_minus_m(g, chi, ctx.level_m()) * w_m) / 2;
    let rhs = pc.scale(&PadicScalar::from_int(ctx.p(), prefactor as i64, pc.precision()));
    let diff = QuadExtScalar::from_padic(kd).sub(&rhs);
    let agreement_digits = diff.val_or_prec();
    Ok(KappaReport { prefactor, agreement_digits, digits, pass: agreement_digits >= digits })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub class: usize,
    /// Valuation of the total mass (capped at the moment count).
    pub valuation: i64,
    pub pass: bool,
}

/// Total mass of `mu{r -> gamma r}` over `(Z_p^2)'`, from the stored moments of `phi` alone.
pub fn sqrt_lp_vanishing_check(phi: &OMSymbol, m: u64, hc: &HeegnerClass, digits: i64) -> VanishingReport {
    let r = Cusp::Inf;
    let s = r.act(&hc.gamma);
    let ring = &phi.ctx.ring;
    let p = phi.p() as i64;
    let a0 = (1..p).find(|x| (x * m as i64) % p == 1).unwrap_or(1);
    let g0 = Mat2::from_i64(1, 0, m as i64, 1);
    let bi = beta_inv(phi.p(), a0);
    let x = ring.mul(ring.from_i64(phi.ap), phi.eval(&r.act(&g0).act(&bi), &s.act(&g0).act(&bi))[0]);
    let y = phi.eval(&r, &s)[0];
    let v = ring.valuation(ring.add(x, y)) as i64;
    VanishingReport { class: hc.class, valuation: v, pass: v >= digits }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharDescriptor {
    pub values: Vec<i8>,
    pub sign: i32,
    pub primitive: bool,
    pub delta1: Option<i64>,
    pub delta2: Option<i64>,
}

impl From<&RingClassCharacter> for CharDescriptor {
    fn from(c: &RingClassCharacter) -> Self {
        Self { values: c.values.clone(), sign: c.sign, primitive: c.primitive, delta1: c.delta1, delta2: c.delta2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDoc {
    pub x: String,
    /// `eta` with `2y + a1 x + a3 = eta sqrt(delta)`.
    pub eta: String,
    pub field: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LValuesDoc {
    pub l_delta2: f64,
    pub l_prime_delta1: f64,
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Rational,
    ExpectedTorsion,
    Inconclusive,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalityReport {
    pub curve: String,
    #[serde(rename = "D")]
    pub d: i64,
    pub c: u64,
    pub p: u64,
    pub chi: CharDescriptor,
    pub base_representative: Bqf,
    /// `p`-adic digits of `log_E(P_chi)` (the `Q_p` part), lowest first, with its valuation.
    pub log_pchi: Vec<u64>,
    pub log_pchi_valuation: i64,
    pub point: Option<PointDoc>,
    pub n: Option<String>,
    pub stable: bool,
    pub precisions: [i64; 2],
    #[serde(rename = "L_values")]
    pub l_values: LValuesDoc,
    pub verdict: Verdict,
    pub diagnostics: Vec<String>,
}

/// Digits of the `Q_p` part at the given absolute precision.
pub fn padic_digits(x: &PadicScalar, digits: i64) -> (i64, Vec<u64>) {
    let p = x.p();
    let v = x.valuation().unwrap_or(digits);
    let mut u = x.with_precision(digits).residue();
    if v > 0 {
        u /= ppow(p, v);
    } else if v < 0 {
        u = x.mul(&PadicScalar::from_parts(p, -v, &BigInt::one(), digits)).residue();
    }
    let pb = big(p as i64);
    let mut out = vec![];
    for _ in 0..(digits - v).max(0) {
        let (q, r) = u.div_mod_floor(&pb);
        out.push(r.to_u64().unwrap());
        u = q;
    }
    (v, out)
}

/// Rational `a/b` with `|a|, |b| <= bound` congruent to `x` modulo `p^digits` (relative to units).
pub fn reconstruct(x: &PadicScalar, digits: i64, bound: &BigInt) -> Result<Option<(BigInt, BigInt)>> {
    let p = x.p();
    let Some(v) = x.valuation() else { return Ok(None) };
    let unit = x.mul(&PadicScalar::from_parts(p, -v, &BigInt::one(), x.precision() - v).with_precision(x.precision() - v));
    let rel = digits.min(x.precision() - v);
    let res = unit.with_precision(rel).residue();
    let Some((a, b)) = rational_reconstruct(&res, p, rel, bound)? else { return Ok(None) };
    let (a, b) = if v >= 0 { (a * ppow(p, v), b) } else { (a, b * ppow(p, -v)) };
    let g = a.gcd(&b);
    let (a, b) = (a / &g, b / &g);
    if a.abs() > *bound || b.abs() > *bound {
        return Ok(None);
    }
    Ok(Some((a, b)))
}

/// `log_E` of a point of `E(Q(sqrt(delta)))` through the Tate uniformisation: `mu * lambda_E`.
pub fn log_e_global(e: &EllipticCurveData, pt: &GlobalPoint, prec: i64) -> Result<QuadExtScalar> {
    let p = e.p;
    let sq = QuadExtScalar::sqrt_of_int(p, &big(pt.delta), prec + 6).ok_or_else(|| DarmonError::Config(format!("p divides {}", pt.delta)))?;
    let local = pt.to_local(&e.a, &sq);
    let lam = formal_log(e, &local, prec + 4)?;
    let mu = tate_mu(e, prec + 4)?;
    Ok(lam.mul(&mu).with_precision(prec))
}

/// Inputs for one rationality verification.
pub struct RationalityInput<'a> {
    pub g: &'a NarrowClassGroup,
    pub chi: &'a RingClassCharacter,
    pub search_bound: u64,
    /// Contexts at the two precisions, with their target digit counts.
    pub low: (&'a DarmonContext, i64),
    pub high: (&'a DarmonContext, i64),
    pub series_factor: f64,
}

pub fn verify_rationality(inp: &RationalityInput<'_>) -> Result<RationalityReport> {
    let (ctx1, n1) = inp.low;
    let (ctx2, n2) = inp.high;
    let e = &ctx1.e;
    let p = e.p;
    let chi = inp.chi;
    let mut diagnostics = vec![];
    let (d1, d2) = chi.pair().ok_or_else(|| DarmonError::Config("character needs an ordered genus pair".into()))?;
    if ctx1.sign() != chi.sign || ctx2.sign() != chi.sign {
        return Err(DarmonError::Config(format!("character of sign {} needs the symbol of that sign", chi.sign)));
    }
    let lp = complex_l_derivative(e, d1, inp.series_factor)?;
    let lv = complex_l_value(e, d2, inp.series_factor)?;
    let l_values = LValuesDoc { l_delta2: lv.value, l_prime_delta1: lp.value, product: lp.value * lv.value };
    let m = e.m;
    let logs_at = |ctx: &DarmonContext, n: i64| -> Result<(Vec<HeegnerClass>, QuadExtScalar)> {
        let classes = prepare_heegner(inp.g, m, p, n + 6)?;
        let logs = class_logs(ctx, &classes)?;
        Ok((classes.clone(), p_chi_log(&classes, &logs, chi)))
    };
    let (classes, lp1) = logs_at(ctx1, n1)?;
    let (_, lp2) = logs_at(ctx2, n2)?;
    let base_representative = classes.iter().find(|h| h.class == inp.g.identity).unwrap_or(&classes[0]).form.form.clone();
    if !lp2.b.with_precision(n2).is_zero() {
        diagnostics.push("log_E(P_chi) has a nonzero omega-component".into());
    }
    let (val, digits) = padic_digits(&lp2.a, n2);
    let mut report = RationalityReport {
        curve: e.label.clone(),
        d: inp.g.d,
        c: inp.g.c,
        p,
        chi: chi.into(),
        base_representative,
        log_pchi: digits,
        log_pchi_valuation: val,
        point: None,
        n: None,
        stable: false,
        precisions: [n1, n2],
        l_values,
        verdict: Verdict::Inconclusive,
        diagnostics,
    };
    if chi_delta1_minus_m(inp.g, chi, m) != -e.w_m() {
        report.diagnostics.push("chi_{Delta_1}(-M) = w_M: outside the rationality hypothesis".into());
        return Ok(report);
    }
    if (report.l_values.product).abs() < 1e-4 {
        let buffer = 3;
        let zero1 = lp1.with_precision(n1 - buffer).is_zero();
        let zero2 = lp2.with_precision(n2 - buffer).is_zero();
        report.stable = zero1 && zero2;
        report.verdict = if report.stable { Verdict::ExpectedTorsion } else { Verdict::Failed };
        if !report.stable {
            report.diagnostics.push("L-values vanish but log_E(P_chi) does not".into());
        }
        return Ok(report);
    }
    let candidates = naive_point_search(&e.a, d1, inp.search_bound);
    let mut chosen = None;
    for pt in candidates {
        let l = log_e_global(e, &pt, n2 + 4)?;
        if !l.with_precision(n2).is_zero() {
            chosen = Some((pt, l));
            break;
        }
    }
    let Some((pt, _)) = chosen else {
        report.diagnostics.push(format!("no non-torsion point on the twist by {d1} below height {}", inp.search_bound));
        return Ok(report);
    };
    let (x, eta) = pt.coords.clone().unwrap();
    report.point = Some(PointDoc { x: x.to_string(), eta: eta.to_string(), field: format!("Q(sqrt({d1}))") });
    let bound = ppow(p, n1 / 3);
    let mut found = vec![];
    for (lpc, n) in [(&lp1, n1), (&lp2, n2)] {
        let lpt = log_e_global(e, &pt, n + 4)?;
        let ratio = lpc.div(&lpt)?;
        if !ratio.b.with_precision(n - 3).is_zero() {
            report.diagnostics.push(format!("ratio not in Q_p at {n} digits"));
        }
        found.push(reconstruct(&ratio.a, n, &bound)?);
    }
    report.stable = found[0].is_some() && found[0] == found[1];
    if let Some((a, b)) = &found[1] {
        report.n = Some(if b.is_one() { a.to_string() } else { format!("{a}/{b}") });
    }
    report.verdict = if report.stable { Verdict::Rational } else { Verdict::Failed };
    if !report.stable {
        report.diagnostics.push(format!("reconstructions differ: {:?} vs {:?}", found[0], found[1]));
    }
    Ok(report)
}
