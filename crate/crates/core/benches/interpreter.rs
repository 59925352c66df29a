// SPDX-License-Identifier: Apache-2.0

//! Unoptimized against profile-driven rewriting on reduced-size cases.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wasmdesk::exec::{Config, Imports, ModuleInstance};
use wasmdesk::suite::{build_case, CaseParams, DEFAULT_SEED};
use wasmdesk::tree::DEFAULT_THRESHOLD;
use wasmdesk::validate_module;

fn cases(c: &mut Criterion) {
    let params = [
        CaseParams::Fibonacci { n: 20 },
        CaseParams::Collision { count: 200 },
        CaseParams::QuicksortInt { len: 5_000 },
        CaseParams::TrialDivision { k: 1_000 },
    ];
    for p in params {
        let case = build_case(p, DEFAULT_SEED).unwrap();
        let vm = validate_module(case.module.clone()).unwrap();
        let mut g = c.benchmark_group(case.name.as_str());
        for (mode, threshold) in [("unoptimized", None), ("optimized", Some(DEFAULT_THRESHOLD))] {
            let config = Config { opt_threshold: threshold, ..Config::default() };
            let mut inst = ModuleInstance::instantiate(&vm, &mut Imports::new(), config).unwrap();
            g.bench_function(BenchmarkId::from_parameter(mode), |b| b.iter(|| inst.invoke(case.entry, &[]).unwrap()));
        }
        g.finish();
    }
}

criterion_group!(benches, cases);
criterion_main!(benches);
