// SPDX-License-Identifier: Apache-2.0

use crate::RunArgs;
use serde::Deserialize;
use shpoints::curve::EllipticCurveData;
use std::path::PathBuf;

/// Run configuration: TOML file values, overridden by command line flags.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Label from the built-in table, or a free name when `a` is given.
    pub curve: String,
    /// Weierstrass coefficients `[a1, a2, a3, a4, a6]`.
    pub a: Option<[i64; 5]>,
    pub conductor: Option<u64>,
    pub p: u64,
    #[serde(rename = "D")]
    pub d: i64,
    pub c: u64,
    pub chars: String,
    pub precision: i64,
    pub precision_low: i64,
    pub moments: Option<usize>,
    pub search_bound: u64,
    pub series_factor: f64,
    pub series_tolerance: f64,
    pub seed: u64,
    pub mk_count: usize,
    /// `[D, c]` fields for the special value check.
    pub sv_fields: Vec<[i64; 2]>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            curve: "15a1".into(),
            a: None,
            conductor: None,
            p: 5,
            d: 13,
            c: 1,
            chars: "all".into(),
            precision: 10,
            precision_low: 6,
            moments: None,
            search_bound: 200,
            series_factor: 3.0,
            series_tolerance: 1e-5,
            seed: 1,
            mk_count: 4,
            sv_fields: vec![],
            cache_dir: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self, String> {
        let mut cfg: RunConfig = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(x) = &args.curve {
            cfg.curve = x.clone();
            cfg.a = None;
            cfg.conductor = None;
        }
        macro_rules! over {
            ($($f:ident => $g:ident),*) => {$(if let Some(x) = args.$f.clone() { cfg.$g = x; })*};
        }
        over!(p => p, d => d, c => c, precision => precision, precision_low => precision_low, search_bound => search_bound, chars => chars);
        if args.moments.is_some() {
            cfg.moments = args.moments;
        }
        if args.out.is_some() {
            cfg.out = args.out.clone();
        }
        if args.cache.cache.is_some() {
            cfg.cache_dir = args.cache.cache.clone();
        }
        if cfg.precision_low < 2 || cfg.precision < cfg.precision_low {
            return Err("need 2 <= precision_low <= precision".into());
        }
        Ok(cfg)
    }

    pub fn curve(&self) -> Result<EllipticCurveData, String> {
        match (self.a, self.conductor) {
            (Some(a), Some(n)) => EllipticCurveData::new(&self.curve, a, n, self.p),
            (None, None) => EllipticCurveData::from_label(&self.curve, self.p),
            _ => return Err("a and conductor must be given together".into()),
        }
        .map_err(|e| e.to_string())
    }

    /// Moments for `digits` target digits; an explicit `moments` applies to the higher precision only.
    pub fn moments_for(&self, digits: i64) -> usize {
        match self.moments {
            Some(m) if digits == self.precision => m,
            _ => shpoints::pipeline::default_moments(digits),
        }
    }
}
