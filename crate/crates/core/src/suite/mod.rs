// SPDX-License-Identifier: Apache-2.0

//! Benchmark corpus, host oracles and a random program generator.

mod builder;
mod cases;
mod gen;
mod lcg;

use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use builder::ModuleBuilder;
pub use cases::{
    build_case, build_case_with, corpus_with, default_corpus, input_stream, oracle, BenchCase,
    CaseError, CaseName, CaseParams, OracleResult, DEFAULT_SEED, ENTRY,
};
pub use gen::{gen_random_program, gen_wasi_program, RANDOM_ENTRY};
pub use lcg::{Lcg, LCG_INCREMENT, LCG_MASK, LCG_MULTIPLIER};

use crate::codec::encode_module;

#[derive(Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    file: String,
    seed: u32,
    params: String,
    entry: &'a str,
    expected: i64,
    oracle: &'a str,
}

/// Writes each case as `<name>.wasm` plus a `manifest.json` describing
/// the expected results. Returns the paths written.
pub fn emit_corpus(cases: &[BenchCase], dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut manifest = Vec::new();
    for case in cases {
        let file = format!("{}.wasm", case.name);
        let bytes = encode_module(&case.module)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let path = dir.join(&file);
        std::fs::write(&path, bytes)?;
        written.push(path);
        manifest.push(ManifestEntry {
            name: case.name.as_str(),
            file,
            seed: case.seed,
            params: format!("{:?}", case.params),
            entry: case.entry,
            expected: case.expected.value,
            oracle: case.expected.produced_by,
        });
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    std::fs::write(&path, json)?;
    written.push(path);
    Ok(written)
}
