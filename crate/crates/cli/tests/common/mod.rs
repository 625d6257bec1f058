#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use moasscope::synth::{generate, Generated, Scenario};
use sha2::{Digest, Sha256};

pub fn moasscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moasscope"))
        .args(args)
        .env_remove("MOASSCOPE_CONFIG")
        .output()
        .expect("spawn moasscope")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn write_dataset(sc: &Scenario, dir: &Path) -> Generated {
    let g = generate(sc).expect("scenario generates");
    g.write(dir).expect("dataset written");
    g
}

pub fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Runs a subcommand against `data` with output in `out`.
pub fn stage(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--data", path(data), "--out", path(out)];
    args.extend_from_slice(extra);
    moasscope(&args)
}

/// CSV rows as header-keyed maps.
pub fn csv_rows(file: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

/// sha256 of every file below `root`, keyed by relative path.
pub fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, String>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
