// SPDX-License-Identifier: Apache-2.0

use wasmdesk::exec::{Config, Imports, ModuleInstance, Value};
use wasmdesk::suite::*;
use wasmdesk::{decode_module, encode_module, validate_module};

fn small(name: CaseName) -> CaseParams {
    match name {
        CaseName::Fibonacci => CaseParams::Fibonacci { n: 15 },
        CaseName::Collision => CaseParams::Collision { count: 120 },
        CaseName::MultiplyIntVec => CaseParams::MultiplyIntVec { len: 500 },
        CaseName::QuicksortInt => CaseParams::QuicksortInt { len: 700 },
        CaseName::ImageThreshold => CaseParams::ImageThreshold { width: 37, height: 21, threshold: 128 },
        CaseName::VideoConvolute => CaseParams::VideoConvolute { frames: 2, width: 19, height: 11 },
        CaseName::TrialDivision => CaseParams::TrialDivision { k: 300 },
    }
}

fn run(case: &BenchCase, threshold: Option<u32>, times: usize) -> Vec<i64> {
    let vm = validate_module(case.module.clone()).expect("corpus modules validate");
    let config = Config { opt_threshold: threshold, ..Config::default() };
    let mut inst = ModuleInstance::instantiate(&vm, &mut Imports::new(), config).unwrap();
    (0..times)
        .map(|_| match inst.invoke(case.entry, &[]).unwrap()[..] {
            [Value::I64(v)] => v,
            ref other => panic!("unexpected result {other:?}"),
        })
        .collect()
}

#[test]
fn every_case_matches_its_oracle() {
    for seed in [42, 7, 123_456] {
        for name in CaseName::ALL {
            let case = build_case(small(name), seed).unwrap();
            // threshold 1 rewrites the trees after the first call
            for threshold in [None, Some(1)] {
                for got in run(&case, threshold, 3) {
                    assert_eq!(got, case.expected.value, "{name} seed {seed} threshold {threshold:?}");
                }
            }
        }
    }
}

#[test]
fn overrides_flow_through_memory() {
    for name in CaseName::ALL {
        let p = small(name);
        let inputs: Vec<i32> = input_stream(&p, 5).into_iter().rev().collect();
        let case = build_case_with(p, 5, Some(inputs)).unwrap();
        assert_eq!(run(&case, Some(2), 3), vec![case.expected.value; 3], "{name}");
    }
}

#[test]
fn known_values() {
    let fib = build_case(CaseParams::Fibonacci { n: 30 }, 42).unwrap();
    assert_eq!(fib.expected.value, 832_040);
    assert_eq!(run(&fib, Some(1000), 1), vec![832_040]);

    let trial = build_case(CaseParams::TrialDivision { k: 10_000 }, 42).unwrap();
    assert_eq!(trial.expected.value, 104_729);
    assert_eq!(run(&trial, Some(1000), 1), vec![104_729]);

    let p = CaseParams::ImageThreshold { width: 1024, height: 1024, threshold: 128 };
    let image = build_case_with(p, 42, Some(vec![128; 1024 * 1024])).unwrap();
    assert_eq!(image.expected.value, 1_048_576);
    assert_eq!(run(&image, Some(1000), 1), vec![1_048_576]);

    let mul = build_case_with(CaseParams::MultiplyIntVec { len: 3 }, 42, Some(vec![1, 2, 3, 4, 5, 6]));
    assert_eq!(run(&mul.unwrap(), None, 1), vec![32]);
}

#[test]
fn fib_export_takes_an_argument() {
    let case = build_case(CaseParams::Fibonacci { n: 3 }, 42).unwrap();
    let vm = validate_module(case.module).unwrap();
    let mut inst = ModuleInstance::instantiate(&vm, &mut Imports::new(), Config::default()).unwrap();
    assert_eq!(inst.invoke("fib", &[Value::I32(20)]).unwrap(), vec![Value::I32(6765)]);
}

#[test]
fn corpus_round_trips_through_the_codec() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("corpus");
    let cases: Vec<BenchCase> = CaseName::ALL.iter().map(|&n| build_case(small(n), 42).unwrap()).collect();
    let written = emit_corpus(&cases, &dir).unwrap();
    assert_eq!(written.len(), 8);
    for case in &cases {
        let bytes = std::fs::read(dir.join(format!("{}.wasm", case.name))).unwrap();
        assert_eq!(decode_module(&bytes).unwrap(), case.module);
        assert_eq!(encode_module(&case.module).unwrap(), bytes);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 7);
}

#[test]
fn default_corpus_is_deterministic() {
    let a = default_corpus(DEFAULT_SEED);
    let b = corpus_with(DEFAULT_SEED, wasmdesk::par::Parallelism::Sequential);
    assert_eq!(a.len(), 7);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.module, y.module);
        assert_eq!(x.expected, y.expected);
    }
}
