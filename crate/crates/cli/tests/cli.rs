// SPDX-License-Identifier: Apache-2.0

use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_shpoints");

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("SHPOINTS_CACHE");
    if let Some(c) = cache {
        cmd.env("SHPOINTS_CACHE", c);
    }
    cmd.output().expect("spawn shpoints")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn schema_check(name: &str, doc: &Value) {
    let path = root().join(format!("docs/schema/{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn config(name: &str) -> String {
    root().join("configs").join(name).to_string_lossy().into_owned()
}

#[test]
fn classgroup_of_trivial_group() {
    let o = run(&["classgroup", "--curve", "15a1", "--p", "5", "--D", "13", "--c", "1"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["order"], 1);
    assert_eq!(doc["group"]["M"], 3);
    assert_eq!(doc["characters"].as_array().unwrap().len(), 1);
    schema_check("classgroup", &doc);
}

#[test]
fn classgroup_of_order_six() {
    let o = run(&["classgroup", "--config", &config("15a1_D13_c11.toml")], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["order"], 6);
    assert_eq!(doc["group"]["heegner"].as_array().unwrap().len(), 6);
    schema_check("classgroup", &doc);
}

#[test]
fn even_conductor_is_rejected() {
    let o = run(&["classgroup", "--curve", "15a1", "--p", "5", "--D", "13", "--c", "2"], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("c must be odd"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "curve = \"15a1\"\nprecison = 4\n").unwrap();
    let o = run(&["classgroup", "--config", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("precison"));
}

#[test]
fn warm_cache_skips_lifting_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["rationality", "--config", &config("15a1_D13_c11.toml")];
    let cold = run(&args, Some(dir.path()));
    assert!(cold.status.success(), "{}", stderr(&cold));
    assert!(stderr(&cold).contains("timing: lift"));
    let warm = run(&args, Some(dir.path()));
    assert!(warm.status.success());
    assert!(!stderr(&warm).contains("timing: lift"), "{}", stderr(&warm));
    assert!(stderr(&warm).contains("cache: hit phi-"));
    assert_eq!(cold.stdout, warm.stdout);
    let nocache = run(&args, None);
    assert_eq!(cold.stdout, nocache.stdout);

    let doc: Value = serde_json::from_slice(&warm.stdout).unwrap();
    schema_check("rationality", &doc);
    let r = &doc[0];
    assert_eq!(r["verdict"], "rational");
    assert_eq!(r["stable"], true);
    assert_eq!(r["n"], "4");
    assert_eq!(r["precisions"], serde_json::json!([6, 10]));

    let info = run(&["cache-info"], Some(dir.path()));
    let entries: Value = serde_json::from_slice(&info.stdout).unwrap();
    assert!(entries.as_array().unwrap().iter().all(|e| e["valid"] == true));
    assert_eq!(entries.as_array().unwrap().len(), 5);
    let clear = run(&["cache-clear"], Some(dir.path()));
    assert!(clear.status.success());
    let info = run(&["cache-info"], Some(dir.path()));
    assert_eq!(serde_json::from_slice::<Value>(&info.stdout).unwrap(), serde_json::json!([]));
}

fn phi_entry(dir: &Path) -> PathBuf {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().contains("-plus-m15-"))
        .expect("plus entry")
}

#[test]
fn corrupted_checksum_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["consistency", "--config", &config("65a1_D12_c1.toml")];
    let first = run(&args, Some(dir.path()));
    assert!(first.status.success(), "{}", stderr(&first));
    let path = phi_entry(dir.path());
    let mut text = std::fs::read_to_string(&path).unwrap();
    let at = text.rfind(']').unwrap() - 1;
    let digit = text.as_bytes()[at];
    let flipped = if digit == b'1' { '2' } else { '1' };
    text.replace_range(at..at + 1, &flipped.to_string());
    std::fs::write(&path, text).unwrap();
    let second = run(&args, Some(dir.path()));
    assert!(stderr(&second).contains("checksum mismatch"), "{}", stderr(&second));
    assert!(stderr(&second).contains("timing: lift sign +1"));
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn tampered_cache_with_valid_checksum_fails_vanishing() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["consistency", "--config", &config("65a1_D12_c1.toml")];
    let first = run(&args, Some(dir.path()));
    assert!(first.status.success(), "{}", stderr(&first));
    let doc: Value = serde_json::from_slice(&first.stdout).unwrap();
    schema_check("consistency", &doc);
    assert_eq!(doc["pass"], true);
    assert!(doc["mk"].as_array().unwrap().len() >= 4);

    // Shift every total mass by one and re-sign the entry.
    let path = phi_entry(dir.path());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.splitn(3, '\n');
    let magic = lines.next().unwrap().to_string();
    lines.next();
    let mut payload: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let modulus = 5u64.pow(15);
    for v in payload["values"].as_array_mut().unwrap() {
        let x = v[0].as_u64().unwrap();
        v[0] = Value::from((x + 1) % modulus);
    }
    let body = serde_json::to_string(&payload).unwrap();
    let sum: String = Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    std::fs::write(&path, format!("{magic}\n{sum}\n{body}")).unwrap();

    let second = run(&args, Some(dir.path()));
    assert_eq!(second.status.code(), Some(1), "{}", stderr(&second));
    let doc: Value = serde_json::from_slice(&second.stdout).unwrap();
    let failing: Vec<&str> = doc["failing"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert!(failing.contains(&"vanishing+1"), "{failing:?}");
    assert!(stderr(&second).contains("failing checks"));
}

#[test]
fn vanishing_l_value_gives_expected_torsion() {
    let o = run(&["rationality", "--config", &config("15a1_D37_c11.toml")], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc[0]["verdict"], "expected_torsion");
    assert!(doc[0]["L_values"]["product"].as_f64().unwrap().abs() < 1e-4);
}

#[test]
fn explicit_out_of_range_character_is_inconclusive() {
    let o = run(&["rationality", "--config", &config("65a1_D12_c1.toml"), "--chars", "0"], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc[0]["verdict"], "inconclusive");
}

#[test]
fn consistency_with_special_values() {
    let o = run(&["consistency", "--config", &config("15a1_D13_c1.toml")], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["sv"].as_array().unwrap().len(), 2);
    assert!(stderr(&o).contains("timing: sv"));
}
