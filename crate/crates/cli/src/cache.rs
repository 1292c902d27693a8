// SPDX-License-Identifier: Apache-2.0

//! On-disk cache of lifted symbols and `a_n` tables.
//!
//! Each entry is a text file: a magic line, the SHA-256 of the payload in hex,
//! then the JSON payload. Entries whose checksum does not match are ignored.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shpoints::curve::EllipticCurveData;
use shpoints::oms::{LiftCertificate, OMSymbol};
use std::path::{Path, PathBuf};

pub const MAGIC: &str = "SHPOINTS-CACHE v1";
const EXT: &str = "shc";

pub struct Cache {
    dir: PathBuf,
}

#[derive(Serialize)]
pub struct EntryInfo {
    pub name: String,
    pub bytes: u64,
    pub valid: bool,
}

pub fn checksum(payload: &str) -> String {
    let digest = Sha256::digest(payload.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn split_entry(text: &str) -> Option<(&str, &str)> {
    let (magic, rest) = text.split_once('\n')?;
    let (sum, payload) = rest.split_once('\n')?;
    (magic == MAGIC).then_some((sum, payload))
}

impl Cache {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.{EXT}"))
    }

    pub fn load<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let Some((sum, payload)) = split_entry(&text) else {
            eprintln!("cache: bad header in {key}, recomputing");
            return None;
        };
        if sum != checksum(payload) {
            eprintln!("cache: checksum mismatch in {key}, recomputing");
            return None;
        }
        match serde_json::from_str(payload) {
            Ok(v) => Some(v),
            Err(e) => {
                eprintln!("cache: unreadable {key} ({e}), recomputing");
                None
            }
        }
    }

    pub fn store<T: Serialize>(&self, key: &str, value: &T) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let payload = serde_json::to_string(value)?;
        let tmp = self.dir.join(format!(".{key}.tmp"));
        std::fs::write(&tmp, format!("{MAGIC}\n{}\n{payload}", checksum(&payload)))?;
        std::fs::rename(tmp, self.path(key))
    }

    fn files(&self) -> std::io::Result<Vec<PathBuf>> {
        if !self.dir.exists() {
            return Ok(vec![]);
        }
        let mut out: Vec<PathBuf> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == EXT))
            .collect();
        out.sort();
        Ok(out)
    }

    pub fn entries(&self) -> std::io::Result<Vec<EntryInfo>> {
        self.files()?
            .into_iter()
            .map(|p| {
                let text = std::fs::read_to_string(&p).unwrap_or_default();
                let valid = split_entry(&text).is_some_and(|(sum, payload)| sum == checksum(payload));
                Ok(EntryInfo { name: stem(&p), bytes: std::fs::metadata(&p)?.len(), valid })
            })
            .collect()
    }

    pub fn clear(&self) -> std::io::Result<usize> {
        let files = self.files()?;
        for f in &files {
            std::fs::remove_file(f)?;
        }
        Ok(files.len())
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn curve_tag(e: &EllipticCurveData) -> String {
    let a: Vec<String> = e.a.iter().map(|x| x.to_string()).collect();
    let clean: String = e.label.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
    format!("{clean}-{}-{}", e.n, a.join("_"))
}

pub fn phi_key(e: &EllipticCurveData, sign: i32, moments: usize, seed: u64) -> String {
    let s = if sign == 1 { "plus" } else { "minus" };
    format!("phi-{}-p{}-{s}-m{moments}-s{seed}", curve_tag(e), e.p)
}

pub fn an_key(e: &EllipticCurveData) -> String {
    format!("an-{}", curve_tag(e))
}

#[derive(Serialize, Deserialize)]
pub struct PhiEntry {
    pub a: [i64; 5],
    pub n: u64,
    pub p: u64,
    pub sign: i32,
    pub moments: usize,
    pub seed: u64,
    pub certificate: LiftCertificate,
    pub values: Vec<Vec<u64>>,
}

impl PhiEntry {
    pub fn new(e: &EllipticCurveData, sign: i32, seed: u64, phi: &OMSymbol) -> Self {
        Self {
            a: e.a,
            n: e.n,
            p: e.p,
            sign,
            moments: phi.moments(),
            seed,
            certificate: phi.certificate.clone(),
            values: phi.values.clone(),
        }
    }

    pub fn matches(&self, e: &EllipticCurveData, sign: i32, moments: usize, seed: u64) -> bool {
        self.a == e.a && self.n == e.n && self.p == e.p && self.sign == sign && self.moments == moments && self.seed == seed
    }
}

#[derive(Serialize, Deserialize)]
pub struct AnEntry {
    pub a: [i64; 5],
    pub values: Vec<i64>,
}
