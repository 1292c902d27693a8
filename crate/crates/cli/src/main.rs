// SPDX-License-Identifier: Apache-2.0

//! `shpoints`: configuration-driven runner for the Darmon point pipeline.

mod cache;
mod config;

use cache::Cache;
use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use serde::Serialize;
use shpoints::curve::check_sh_hypothesis;
use shpoints::darmon::Verdict;
use shpoints::genus::RingClassCharacter;
use shpoints::modsym::{build_eigensymbol, ManinSymbolSpace};
use shpoints::oms::OMSymbol;
use shpoints::pipeline::{run_consistency, run_rationality, CharSelector, ConsistencyOptions, Setup, SignedLifts};
use shpoints::quadforms::{heegner_delta, heegner_representatives, ClassGroupDoc};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "shpoints", version, about = "Darmon points twisted by quadratic ring class characters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Narrow class group, Heegner representatives and quadratic characters.
    Classgroup(RunArgs),
    /// Builds P_chi for the selected characters and recognizes it as a rational multiple of a twist point.
    Rationality(RunArgs),
    /// Runs every consistency check and aggregates the verdicts.
    Consistency(RunArgs),
    /// Lists cache entries and verifies their checksums.
    CacheInfo(CacheArgs),
    /// Removes all cache entries.
    CacheClear(CacheArgs),
}

#[derive(Args, Clone, Default)]
pub struct RunArgs {
    /// TOML file with the run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Curve label from the built-in table (for example 15a1).
    #[arg(long)]
    curve: Option<String>,
    #[arg(long)]
    p: Option<u64>,
    /// Fundamental discriminant of the real quadratic field.
    #[arg(long = "D")]
    d: Option<i64>,
    /// Conductor of the order.
    #[arg(long)]
    c: Option<u64>,
    /// Target p-adic digits for the higher precision run [default: 10].
    #[arg(long)]
    precision: Option<i64>,
    /// Target digits for the lower precision run of the stability check [default: 6].
    #[arg(long)]
    precision_low: Option<i64>,
    /// Moments per symbol [default: precision + 5].
    #[arg(long)]
    moments: Option<usize>,
    /// Naive height bound for the twist point search [default: 200].
    #[arg(long)]
    search_bound: Option<u64>,
    /// all, a character index, or pair:D1,D2 [default: all].
    #[arg(long)]
    chars: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args, Clone, Default)]
pub struct CacheArgs {
    /// Cache directory; caching is off when unset.
    #[arg(long, env = "SHPOINTS_CACHE")]
    cache: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cmd: Command) -> Result<u8, String> {
    match cmd {
        Command::Classgroup(a) => cmd_classgroup(&RunConfig::resolve(&a)?),
        Command::Rationality(a) => cmd_rationality(&RunConfig::resolve(&a)?),
        Command::Consistency(a) => cmd_consistency(&RunConfig::resolve(&a)?),
        Command::CacheInfo(a) => {
            let cache = Cache::new(a.cache.ok_or("no cache directory given")?);
            let entries = cache.entries().map_err(|e| e.to_string())?;
            emit(&entries, None)?;
            Ok(0)
        }
        Command::CacheClear(a) => {
            let cache = Cache::new(a.cache.ok_or("no cache directory given")?);
            let n = cache.clear().map_err(|e| e.to_string())?;
            eprintln!("cache: removed {n} entries");
            Ok(0)
        }
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ClassGroupOutput {
    curve: String,
    p: u64,
    order: usize,
    group: ClassGroupDoc,
    characters: Vec<RingClassCharacter>,
}

fn cmd_classgroup(cfg: &RunConfig) -> Result<u8, String> {
    let e = cfg.curve()?;
    let setup = Setup::new(&e, cfg.d, cfg.c).map_err(|x| x.to_string())?;
    let delta = heegner_delta(cfg.d, cfg.c, e.m).map_err(|x| x.to_string())?;
    let heegner = heegner_representatives(&setup.g, e.m, delta).map_err(|x| x.to_string())?;
    let doc = ClassGroupOutput {
        curve: e.label.clone(),
        p: e.p,
        order: setup.g.order(),
        group: ClassGroupDoc::new(&setup.g, e.m, delta, &heegner),
        characters: setup.chars.clone(),
    };
    emit(&doc, cfg.out.as_ref())?;
    Ok(0)
}

/// Both signed lifts at `moments`, from the cache when possible.
fn lifts(cfg: &RunConfig, cache: &Option<Cache>, e: &shpoints::curve::EllipticCurveData, space: &ManinSymbolSpace, moments: usize) -> Result<SignedLifts, String> {
    let get = |sign: i32| -> Result<OMSymbol, String> {
        let classical = build_eigensymbol(space, e, sign).map_err(|x| x.to_string())?;
        let key = cache::phi_key(e, sign, moments, cfg.seed);
        if let Some(c) = cache {
            if let Some(entry) = c.load::<cache::PhiEntry>(&key) {
                if entry.matches(e, sign, moments, cfg.seed) {
                    if let Ok(phi) = OMSymbol::from_values(space, &classical, e.p, e.ap(), entry.values, entry.certificate) {
                        eprintln!("cache: hit {key}");
                        return Ok(phi);
                    }
                }
                eprintln!("cache: stale {key}, recomputing");
            }
        }
        let t = Instant::now();
        let phi = OMSymbol::lift(space, &classical, e.p, e.ap(), moments, cfg.seed).map_err(|x| x.to_string())?;
        eprintln!("timing: lift sign {sign:+} with {moments} moments {:.3}s", t.elapsed().as_secs_f64());
        if let Some(c) = cache {
            c.store(&key, &cache::PhiEntry::new(e, sign, cfg.seed, &phi)).map_err(|x| x.to_string())?;
        }
        Ok(phi)
    };
    let plus = get(1)?;
    let minus = get(-1)?;
    Ok(SignedLifts { plus, minus })
}

fn open_cache(cfg: &RunConfig, e: &shpoints::curve::EllipticCurveData) -> Option<Cache> {
    let cache = cfg.cache_dir.clone().map(Cache::new)?;
    if let Some(entry) = cache.load::<cache::AnEntry>(&cache::an_key(e)) {
        if entry.a == e.a {
            eprintln!("cache: hit {} ({} coefficients)", cache::an_key(e), entry.values.len());
            e.seed_an_table(entry.values);
        }
    }
    Some(cache)
}

fn save_an(cache: &Option<Cache>, e: &shpoints::curve::EllipticCurveData) -> Result<(), String> {
    if let Some(c) = cache {
        let table = e.cached_an();
        let key = cache::an_key(e);
        let known = c.load::<cache::AnEntry>(&key).map_or(0, |x| x.values.len());
        if table.len() > known.max(2) {
            c.store(&key, &cache::AnEntry { a: e.a, values: table.to_vec() }).map_err(|x| x.to_string())?;
        }
    }
    Ok(())
}

fn cmd_rationality(cfg: &RunConfig) -> Result<u8, String> {
    let e = cfg.curve()?;
    let setup = Setup::new(&e, cfg.d, cfg.c).map_err(|x| x.to_string())?;
    let select: CharSelector = cfg.chars.parse()?;
    let cache = open_cache(cfg, &e);
    let space = setup.space();
    let low = lifts(cfg, &cache, &e, &space, cfg.moments_for(cfg.precision_low))?;
    let high = lifts(cfg, &cache, &e, &space, cfg.moments_for(cfg.precision))?;
    let t = Instant::now();
    let reports = run_rationality(&setup, (&low, cfg.precision_low), (&high, cfg.precision), &select, cfg.search_bound, cfg.series_factor)
        .map_err(|x| x.to_string())?;
    eprintln!("timing: rationality {:.3}s", t.elapsed().as_secs_f64());
    save_an(&cache, &e)?;
    if reports.is_empty() {
        return Err(format!("no selected primitive character satisfies the rationality hypothesis ({})", cfg.chars));
    }
    emit(&reports, cfg.out.as_ref())?;
    let code = reports
        .iter()
        .map(|r| match r.verdict {
            Verdict::Rational | Verdict::ExpectedTorsion => 0,
            Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            Verdict::Failed => EXIT_FAIL,
        })
        .max()
        .unwrap_or(0);
    for r in &reports {
        eprintln!("rationality: chi {:?} -> {:?}", r.chi, r.verdict);
    }
    Ok(code)
}

fn cmd_consistency(cfg: &RunConfig) -> Result<u8, String> {
    let e = cfg.curve()?;
    let sh = check_sh_hypothesis(&e, cfg.d, cfg.c);
    if !sh.pass {
        return Err(format!("hypothesis failed: {}", sh.failure.unwrap_or_default()));
    }
    let setup = Setup::new(&e, cfg.d, cfg.c).map_err(|x| x.to_string())?;
    let cache = open_cache(cfg, &e);
    let space = setup.space();
    let lifted = lifts(cfg, &cache, &e, &space, cfg.moments_for(cfg.precision))?;
    let opts = ConsistencyOptions {
        digits: cfg.precision,
        mk_count: cfg.mk_count,
        sv_fields: cfg.sv_fields.iter().map(|&[d, c]| (d, c as u64)).collect(),
        series_factor: cfg.series_factor,
        series_tolerance: cfg.series_tolerance,
    };
    let report = run_consistency(&setup, &lifted, &opts);
    for (name, secs) in &report.timings {
        eprintln!("timing: {name} {secs:.3}s");
    }
    save_an(&cache, &e)?;
    emit(&report, cfg.out.as_ref())?;
    if report.pass {
        Ok(0)
    } else {
        eprintln!("consistency: failing checks: {}", report.failing.join(", "));
        Ok(EXIT_FAIL)
    }
}
