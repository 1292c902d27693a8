// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs shared by the command line and the acceptance suite.

use crate::curve::{check_sh_hypothesis, EllipticCurveData};
use crate::darmon::{
    chi_delta1_minus_m, class_logs, kappa_check, prepare_heegner, real_conjugation_check, sqrt_lp_vanishing_check, verify_rationality,
    DarmonContext, DarmonError, HeegnerClass, KappaReport, RationalityInput, RationalityReport, RealConjugationReport, VanishingReport,
};
use crate::genus::{attach_genus_pairs, enumerate_quadratic_chars, order_genus_pairs, RingClassCharacter};
use crate::mklfun::{mk_interpolation_check, sv_check_weight2, twisting_discriminants, MkError, MkReport, SvReport};
use crate::modsym::{build_eigensymbol, ManinSymbolSpace};
use crate::oms::OMSymbol;
use crate::padic::QuadExtScalar;
use crate::quadforms::{heegner_delta, kronecker, narrow_class_group, NarrowClassGroup};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Darmon(#[from] DarmonError),
    #[error(transparent)]
    Mk(#[from] MkError),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn other<E: std::fmt::Display>(e: E) -> PipelineError {
    PipelineError::Other(e.to_string())
}

/// A validated `(E, p, D, c)` with its class group and ordered characters.
#[derive(Clone, Debug)]
pub struct Setup {
    pub e: EllipticCurveData,
    pub g: NarrowClassGroup,
    pub chars: Vec<RingClassCharacter>,
}

impl Setup {
    pub fn new(e: &EllipticCurveData, d: i64, c: u64) -> Result<Self> {
        let sh = check_sh_hypothesis(e, d, c);
        if !sh.pass {
            return Err(PipelineError::Hypothesis(sh.failure.unwrap_or_default()));
        }
        let g = narrow_class_group(d, c).map_err(other)?;
        let mut chars = enumerate_quadratic_chars(&g);
        attach_genus_pairs(&g, &mut chars, e.n).map_err(other)?;
        order_genus_pairs(&mut chars, e.n, e.w_n()).map_err(other)?;
        Ok(Self { e: e.clone(), g, chars })
    }

    pub fn space(&self) -> ManinSymbolSpace {
        ManinSymbolSpace::new(self.e.n)
    }

    pub fn classes(&self, prec: i64) -> Result<Vec<HeegnerClass>> {
        Ok(prepare_heegner(&self.g, self.e.m, self.e.p, prec)?)
    }
}

/// Default moment count for `digits` target digits.
pub fn default_moments(digits: i64) -> usize {
    (digits + 5) as usize
}

pub fn lift_symbol(e: &EllipticCurveData, space: &ManinSymbolSpace, sign: i32, moments: usize, seed: u64) -> Result<OMSymbol> {
    let sym = build_eigensymbol(space, e, sign).map_err(other)?;
    OMSymbol::lift(space, &sym, e.p, e.ap(), moments, seed).map_err(other)
}

/// Lifts of both signs at one precision.
#[derive(Clone, Debug)]
pub struct SignedLifts {
    pub plus: OMSymbol,
    pub minus: OMSymbol,
}

impl SignedLifts {
    pub fn compute(e: &EllipticCurveData, space: &ManinSymbolSpace, moments: usize, seed: u64) -> Result<Self> {
        Ok(Self { plus: lift_symbol(e, space, 1, moments, seed)?, minus: lift_symbol(e, space, -1, moments, seed)? })
    }

    pub fn get(&self, sign: i32) -> &OMSymbol {
        if sign == 1 {
            &self.plus
        } else {
            &self.minus
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome<T> {
    pub name: String,
    pub pass: bool,
    pub detail: Option<T>,
    pub error: Option<String>,
}

impl<T> CheckOutcome<T> {
    pub fn verdict(&self) -> (String, bool) {
        (self.name.clone(), self.pass)
    }

    fn from_result(name: impl Into<String>, r: std::result::Result<T, String>, pass: impl Fn(&T) -> bool) -> Self {
        match r {
            Ok(t) => Self { name: name.into(), pass: pass(&t), detail: Some(t), error: None },
            Err(e) => Self { name: name.into(), pass: false, detail: None, error: Some(e) },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub curve: String,
    #[serde(rename = "D")]
    pub d: i64,
    pub c: u64,
    pub p: u64,
    pub digits: i64,
    pub moments: usize,
    pub class_number: usize,
    pub vanishing: Vec<CheckOutcome<Vec<VanishingReport>>>,
    pub real_conjugation: CheckOutcome<RealConjugationReport>,
    pub kappa: Vec<CheckOutcome<KappaReport>>,
    pub mk: Vec<CheckOutcome<MkReport>>,
    pub sv: Vec<CheckOutcome<SvReport>>,
    pub pass: bool,
    pub failing: Vec<String>,
    /// Wall-clock seconds per check group; not serialized so reports stay deterministic.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

/// Discriminants for the Mazur-Kitagawa check: the genus pairs first, then
/// small twists of each parity until there are at least `min_count`.
pub fn mk_discriminants(setup: &Setup, min_count: usize) -> Vec<i64> {
    let n = setup.e.n;
    let mut out: Vec<i64> = vec![];
    for chi in &setup.chars {
        if let Some((a, b)) = chi.pair() {
            for d in [a, b] {
                if d != 1 && !out.contains(&d) {
                    out.push(d);
                }
            }
        }
    }
    let mut extra = [twisting_discriminants(n, 1, 60), twisting_discriminants(n, -1, 60)];
    let mut k = 0;
    while out.len() < min_count || !out.iter().any(|&d| kronecker(d, setup.e.p as i64) as i64 == setup.e.ap()) {
        if extra.iter().all(|l| l.is_empty()) {
            break;
        }
        if !extra[k % 2].is_empty() {
            let d = extra[k % 2].remove(0);
            if !out.contains(&d) {
                out.push(d);
            }
        }
        k += 1;
    }
    out
}

/// Options for [`run_consistency`].
#[derive(Clone, Debug)]
pub struct ConsistencyOptions {
    pub digits: i64,
    pub mk_count: usize,
    /// Extra `(D, c)` for the special value check, whose primes of `N` must split.
    pub sv_fields: Vec<(i64, u64)>,
    pub series_factor: f64,
    pub series_tolerance: f64,
}

pub fn run_consistency(setup: &Setup, lifts: &SignedLifts, opts: &ConsistencyOptions) -> ConsistencyReport {
    let e = &setup.e;
    let g = &setup.g;
    let moments = lifts.plus.moments();
    let digits = opts.digits;
    let need = digits - 3;
    let mut timings = vec![];
    let mut clock = std::time::Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = std::time::Instant::now();
    };
    let classes = setup.classes(moments as i64 + 2);
    let mut vanishing = vec![];
    let mut kappa = vec![];
    let mut real_conjugation = CheckOutcome { name: "real_conjugation".into(), pass: false, detail: None, error: None };
    match &classes {
        Err(err) => real_conjugation.error = Some(err.to_string()),
        Ok(classes) => {
            for sign in [1, -1] {
                let phi = lifts.get(sign);
                let reps: Vec<VanishingReport> = classes.iter().map(|hc| sqrt_lp_vanishing_check(phi, e.m, hc, need)).collect();
                let pass = reps.iter().all(|r| r.pass);
                vanishing.push(CheckOutcome { name: format!("vanishing{sign:+}"), pass, detail: Some(reps), error: None });
            }
            lap("vanishing", &mut timings);
            let ctxs: std::result::Result<Vec<(i32, DarmonContext, Vec<QuadExtScalar>)>, String> = [1, -1]
                .into_iter()
                .map(|sign| {
                    let ctx = DarmonContext::from_symbol(e, lifts.get(sign).clone()).map_err(|x| x.to_string())?;
                    let logs = class_logs(&ctx, classes).map_err(|x| x.to_string())?;
                    Ok((sign, ctx, logs))
                })
                .collect();
            match ctxs {
                Err(err) => {
                    real_conjugation.error = Some(err.clone());
                    kappa.push(CheckOutcome { name: "kappa".into(), pass: false, detail: None, error: Some(err) });
                }
                Ok(ctxs) => {
                    let comps: Vec<(i32, Vec<QuadExtScalar>)> = ctxs.iter().map(|(s, _, l)| (*s, l.clone())).collect();
                    let rc = real_conjugation_check(g, classes, &comps, &setup.chars, e.w_m(), e.m, need);
                    real_conjugation = CheckOutcome { name: "real_conjugation".into(), pass: rc.pass, detail: Some(rc), error: None };
                    for (i, chi) in setup.chars.iter().enumerate() {
                        let (_, ctx, logs) = ctxs.iter().find(|(s, _, _)| *s == chi.sign).unwrap();
                        let r = kappa_check(ctx, g, classes, logs, chi, need).map_err(|x| x.to_string());
                        kappa.push(CheckOutcome::from_result(format!("kappa[{i}]"), r, |k| k.pass));
                    }
                    lap("real_conjugation+kappa", &mut timings);
                }
            }
        }
    }
    let space = setup.space();
    let mut mk = vec![];
    for d in mk_discriminants(setup, opts.mk_count) {
        let sign = kronecker(d, -1);
        let phi = lifts.get(sign);
        let r = mk_interpolation_check(phi, &phi.classical, &space.p1, d, 1).map_err(|x| x.to_string());
        mk.push(CheckOutcome::from_result(format!("mk[{d}]"), r, |m| m.pass));
    }
    lap("mk", &mut timings);
    let mut sv = vec![];
    for &(d, c) in &opts.sv_fields {
        sv.extend(run_sv(e, &space, d, c, opts.series_factor, opts.series_tolerance));
    }
    lap("sv", &mut timings);
    let mut failing: Vec<String> = vec![];
    let verdicts = vanishing
        .iter()
        .map(CheckOutcome::verdict)
        .chain(std::iter::once(real_conjugation.verdict()))
        .chain(kappa.iter().map(CheckOutcome::verdict))
        .chain(mk.iter().map(CheckOutcome::verdict))
        .chain(sv.iter().map(CheckOutcome::verdict));
    for (name, ok) in verdicts {
        if !ok {
            failing.push(name);
        }
    }
    failing.dedup();
    ConsistencyReport {
        curve: e.label.clone(),
        d: g.d,
        c: g.c,
        p: e.p,
        digits,
        moments,
        class_number: g.order(),
        pass: failing.is_empty(),
        failing,
        vanishing,
        real_conjugation,
        kappa,
        mk,
        sv,
        timings,
    }
}

/// The special value check for every primitive character of `(D, c)` at level `N`.
pub fn run_sv(e: &EllipticCurveData, space: &ManinSymbolSpace, d: i64, c: u64, factor: f64, tol: f64) -> Vec<CheckOutcome<SvReport>> {
    let name = |i: usize| format!("sv[{d},{c}][{i}]");
    let fail = |msg: String| vec![CheckOutcome { name: format!("sv[{d},{c}]"), pass: false, detail: None, error: Some(msg) }];
    if heegner_delta(d, c, e.n).is_err() {
        return fail(format!("a prime dividing {} is inert in Q(sqrt({d}))", e.n));
    }
    let g = match narrow_class_group(d, c) {
        Ok(g) => g,
        Err(err) => return fail(err.to_string()),
    };
    let mut chars = enumerate_quadratic_chars(&g);
    if let Err(err) = attach_genus_pairs(&g, &mut chars, e.n) {
        return fail(err.to_string());
    }
    chars
        .iter()
        .enumerate()
        .filter(|(_, c)| c.primitive)
        .map(|(i, chi)| {
            let r = build_eigensymbol(space, e, chi.sign)
                .map_err(|x| x.to_string())
                .and_then(|sym| sv_check_weight2(e, &g, chi, &sym, &space.p1, factor, tol).map_err(|x| x.to_string()));
            CheckOutcome::from_result(name(i), r, |s| s.pass)
        })
        .collect()
}

/// Which characters to run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CharSelector {
    All,
    Index(usize),
    Pair(i64, i64),
}

impl std::str::FromStr for CharSelector {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(Self::All);
        }
        if let Some(rest) = s.strip_prefix("pair:") {
            let v: Vec<i64> = rest.split(',').map(|x| x.trim().parse::<i64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
            if v.len() == 2 {
                return Ok(Self::Pair(v[0], v[1]));
            }
            return Err(format!("bad pair selector {s}"));
        }
        s.parse::<usize>().map(Self::Index).map_err(|_| format!("character selector must be all, an index or pair:a,b (got {s})"))
    }
}

impl CharSelector {
    pub fn select<'a>(&self, chars: &'a [RingClassCharacter]) -> Vec<&'a RingClassCharacter> {
        chars
            .iter()
            .enumerate()
            .filter(|(i, c)| match self {
                Self::All => c.primitive,
                Self::Index(k) => i == k,
                Self::Pair(a, b) => c.pair() == Some((*a, *b)) || c.pair() == Some((*b, *a)),
            })
            .map(|(_, c)| c)
            .collect()
    }
}

/// One report per selected primitive character, from lifts at the two precisions.
pub fn run_rationality(
    setup: &Setup,
    low: (&SignedLifts, i64),
    high: (&SignedLifts, i64),
    select: &CharSelector,
    search_bound: u64,
    series_factor: f64,
) -> Result<Vec<RationalityReport>> {
    let e = &setup.e;
    let mut ctxs = vec![];
    for (lifts, _) in [low, high] {
        let plus = DarmonContext::from_symbol(e, lifts.plus.clone())?;
        let minus = DarmonContext::from_symbol(e, lifts.minus.clone())?;
        ctxs.push((plus, minus));
    }
    let pick = |k: usize, sign: i32| if sign == 1 { &ctxs[k].0 } else { &ctxs[k].1 };
    let mut out = vec![];
    // `all` means every primitive character the theorem covers; explicit selectors run as asked.
    let chosen: Vec<&RingClassCharacter> = match select {
        CharSelector::All => select.select(&setup.chars).into_iter().filter(|c| in_rationality_range(setup, c)).collect(),
        _ => select.select(&setup.chars),
    };
    for chi in chosen {
        if !chi.primitive {
            return Err(PipelineError::Other("rationality needs a primitive character".into()));
        }
        let inp = RationalityInput { g: &setup.g, chi, search_bound, low: (pick(0, chi.sign), low.1), high: (pick(1, chi.sign), high.1), series_factor };
        out.push(verify_rationality(&inp)?);
    }
    Ok(out)
}

/// Whether `chi` satisfies the rationality hypothesis `chi_{Delta_1}(-M) = -w_M`.
pub fn in_rationality_range(setup: &Setup, chi: &RingClassCharacter) -> bool {
    chi_delta1_minus_m(&setup.g, chi, setup.e.m) == -setup.e.w_m()
}
